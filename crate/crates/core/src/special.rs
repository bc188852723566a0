//! Two explicit constructions on the biradial quadrant, both handled in
//! polar coordinates `(r, θ)` with `r_1 = r cos θ`, `r_2 = r sin θ`:
//!
//! * a concentrating sequence `u_k(r, θ) = φ_k(θ) ψ_k(r)` with
//!   `φ_k(θ) = α(kθ) θ^{-1/6}` and `ψ_k(r) = ψ(k²(r - r_o))`, whose
//!   sup-weighted size stays pinned at `c·r_o` while the two printed
//!   integral bounds decay like `k^{-7/2}` and `k^{-1/2}`;
//! * an explicit supersolution of the weighted radial-angular operator,
//!   certifying a positive constant that grows like `(α - 1)²`.
//!
//! The sequence's supports shrink like `1/k` (angular) and `1/k²` (radial),
//! so this module uses dedicated uniform polar grids over the supports
//! rather than the global log grid.

use crate::error::{Error, Result};
use crate::util::log_log_slope;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

/// Smooth bump on `(0, 1)` with `α(1/2) = 1` and flat vanishing at the ends.
pub fn alpha_bump(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (4.0 * t * (1.0 - t))).exp()
    }
}

/// Derivative of [`alpha_bump`].
pub fn alpha_bump_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let d = t * (1.0 - t);
        alpha_bump(t) * (1.0 - 2.0 * t) / (4.0 * d * d)
    }
}

/// Smooth even bump on `(-1, 1)` with `ψ(0) = 1`.
pub fn psi_bump(t: f64) -> f64 {
    if t <= -1.0 || t >= 1.0 {
        0.0
    } else {
        (-t * t / (1.0 - t * t)).exp()
    }
}

/// Derivative of [`psi_bump`].
pub fn psi_bump_deriv(t: f64) -> f64 {
    if t <= -1.0 || t >= 1.0 {
        0.0
    } else {
        let d = 1.0 - t * t;
        psi_bump(t) * (-2.0 * t / (d * d))
    }
}

/// Dedicated uniform polar grid over the supports of one sequence member.
#[derive(Debug, Clone)]
pub struct PolarGrid {
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
}

/// A function sampled on a [`PolarGrid`], row-major with θ fastest.
#[derive(Debug, Clone)]
pub struct PolarField {
    pub grid: PolarGrid,
    pub values: Vec<f64>,
}

impl PolarField {
    pub fn value(&self, ir: usize, jt: usize) -> f64 {
        self.values[ir * self.grid.theta.len() + jt]
    }
}

fn phi_k(k: u32, theta: f64) -> f64 {
    alpha_bump(k as f64 * theta) * theta.powf(-1.0 / 6.0)
}

fn phi_k_deriv(k: u32, theta: f64) -> f64 {
    let kf = k as f64;
    kf * alpha_bump_deriv(kf * theta) * theta.powf(-1.0 / 6.0)
        - alpha_bump(kf * theta) * theta.powf(-7.0 / 6.0) / 6.0
}

fn psi_k(k: u32, r_o: f64, r: f64) -> f64 {
    let kf = k as f64;
    psi_bump(kf * kf * (r - r_o))
}

/// The sequence member `u_k = φ_k(θ) ψ_k(r)` sampled on a uniform polar
/// grid covering its supports `θ ∈ (0, 1/k]`, `r ∈ [r_o - 1/k², r_o + 1/k²]`.
pub fn counterexample_field(
    k: u32,
    r_o: f64,
    nr: usize,
    ntheta: usize,
) -> Result<PolarField> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k = {k} must be >= 2")));
    }
    if !(r_o > 1.0) {
        return Err(Error::InvalidParameter(format!("r_o = {r_o} must be > 1")));
    }
    if nr < 8 || ntheta < 8 {
        return Err(Error::UnderResolved(format!(
            "need at least 8 nodes across each support, got nr = {nr}, ntheta = {ntheta}"
        )));
    }
    let kf = k as f64;
    let theta: Vec<f64> = (0..ntheta)
        .map(|j| (j as f64 + 1.0) / (kf * ntheta as f64))
        .collect();
    let half_width = 1.0 / (kf * kf);
    let r: Vec<f64> = (0..nr)
        .map(|i| r_o - half_width + 2.0 * half_width * i as f64 / (nr - 1) as f64)
        .collect();
    let mut values = vec![0.0; nr * ntheta];
    for (i, &rv) in r.iter().enumerate() {
        let psi = psi_k(k, r_o, rv);
        for (j, &th) in theta.iter().enumerate() {
            values[i * ntheta + j] = phi_k(k, th) * psi;
        }
    }
    Ok(PolarField {
        grid: PolarGrid { r, theta },
        values,
    })
}

fn trapz(xs: &[f64], ys: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 1..xs.len() {
        s += (xs[i] - xs[i - 1]) * (ys[i] + ys[i - 1]) / 2.0;
    }
    s
}

/// One row of the sequence report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CounterexampleRow {
    pub k: u32,
    /// Sup of `r_γ^{|γ|-q} |u_k|^q` at `q = 3` (so `r_γ` to the first power).
    pub s: f64,
    /// `∫ |ψ'(k²(r-r_o))|³ r³ dr · ∫ φ_k³ sin 2θ dθ` — the first printed
    /// bound, with the radial profile derivative sampled as written.
    pub r1: f64,
    /// `∫ ψ_k³ dr · ∫ |φ_k'|³ sin 2θ dθ` — the second printed bound.
    pub r2: f64,
    /// Same as `r1` but with the full chain-rule derivative `dψ_k/dr`;
    /// diagnostic only (it grows with k).
    pub r1_chain: f64,
}

/// Slopes and spread over a k sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CounterexampleReport {
    pub r_o: f64,
    pub rows: Vec<CounterexampleRow>,
    /// fitted log-log slope of r1 vs k (printed bound: -7/2)
    pub slope_r1: f64,
    /// fitted log-log slope of r2 vs k (printed bound: -1/2)
    pub slope_r2: f64,
    /// relative spread (max - min)/min of the sup values
    pub s_spread: f64,
    /// diagnostic slope of the chain-rule variant of r1
    pub slope_r1_chain: f64,
}

/// Evaluates the sequence quantities over a k sweep on per-k polar grids
/// (fixed node counts per support keep the relative resolution constant).
pub fn counterexample_report(
    k_list: &[u32],
    r_o: f64,
    nr: usize,
    ntheta: usize,
) -> Result<CounterexampleReport> {
    if k_list.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "need at least 4 values of k, got {}",
            k_list.len()
        )));
    }
    let mut rows = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let field = counterexample_field(k, r_o, nr, ntheta)?;
        let kf = k as f64;
        let r = &field.grid.r;
        let theta = &field.grid.theta;

        // S(k): separable sup of r_γ |u|³ with r_γ = r ((sin 2θ)/2)^{1/2}
        let radial_max = r
            .iter()
            .map(|&rv| rv * psi_k(k, r_o, rv).powi(3))
            .fold(0.0f64, f64::max);
        let angular_max = theta
            .iter()
            .map(|&th| ((2.0 * th).sin() / 2.0).sqrt() * phi_k(k, th).powi(3))
            .fold(0.0f64, f64::max);
        let s = radial_max * angular_max;

        // radial integrals
        let prof: Vec<f64> = r
            .iter()
            .map(|&rv| psi_bump_deriv(kf * kf * (rv - r_o)).abs().powi(3) * rv.powi(3))
            .collect();
        let int_prof = trapz(r, &prof);
        let psi3: Vec<f64> = r.iter().map(|&rv| psi_k(k, r_o, rv).powi(3)).collect();
        let int_psi3 = trapz(r, &psi3);

        // angular integrals
        let phi3_sin: Vec<f64> = theta
            .iter()
            .map(|&th| phi_k(k, th).powi(3) * (2.0 * th).sin())
            .collect();
        let int_phi3 = trapz(theta, &phi3_sin);
        let dphi3_sin: Vec<f64> = theta
            .iter()
            .map(|&th| phi_k_deriv(k, th).abs().powi(3) * (2.0 * th).sin())
            .collect();
        let int_dphi3 = trapz(theta, &dphi3_sin);

        rows.push(CounterexampleRow {
            k,
            s,
            r1: int_prof * int_phi3,
            r2: int_psi3 * int_dphi3,
            r1_chain: kf.powi(6) * int_prof * int_phi3,
        });
    }

    let ks: Vec<f64> = k_list.iter().map(|&k| k as f64).collect();
    let r1s: Vec<f64> = rows.iter().map(|r| r.r1).collect();
    let r2s: Vec<f64> = rows.iter().map(|r| r.r2).collect();
    let r1cs: Vec<f64> = rows.iter().map(|r| r.r1_chain).collect();
    let s_min = rows.iter().map(|r| r.s).fold(f64::INFINITY, f64::min);
    let s_max = rows.iter().map(|r| r.s).fold(0.0f64, f64::max);
    Ok(CounterexampleReport {
        r_o,
        slope_r1: log_log_slope(&ks, &r1s),
        slope_r2: log_log_slope(&ks, &r2s),
        slope_r1_chain: log_log_slope(&ks, &r1cs),
        s_spread: (s_max - s_min) / s_min,
        rows,
    })
}

/// The explicit supersolution:
/// `r^{-1} √(log(1/sin 2θ))` at `α = 1`, else `r^{α-2} (sin 2θ)^{(α-1)/2}`.
pub fn supersolution_value(alpha: f64, r: f64, theta: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("r = {r} must be > 0")));
    }
    if !(theta > 0.0 && theta < FRAC_PI_2) {
        return Err(Error::InvalidParameter(format!(
            "θ = {theta} outside (0, π/2)"
        )));
    }
    let s = (2.0 * theta).sin();
    if alpha == 1.0 {
        // log(1/sin 2θ) >= 0, zero exactly at θ = π/4
        Ok((1.0 / s).ln().max(0.0).sqrt() / r)
    } else {
        Ok(r.powf(alpha - 2.0) * s.powf((alpha - 1.0) / 2.0))
    }
}

/// Grid window for the supersolution certificate. The θ window stays away
/// from the quadrant edges; at `α = 1` a notch around `π/4` is removed,
/// where the supersolution itself vanishes.
#[derive(Debug, Clone, Copy)]
pub struct CertWindow {
    pub r_lo: f64,
    pub r_hi: f64,
    pub nr: usize,
    pub ntheta: usize,
    pub theta_margin: f64,
    pub notch: f64,
}

impl Default for CertWindow {
    fn default() -> Self {
        Self {
            r_lo: 1.0,
            r_hi: 2.0,
            nr: 96,
            ntheta: 768,
            theta_margin: 0.05,
            notch: 0.05,
        }
    }
}

/// Applies the weighted operator to the analytic supersolution by
/// conservative second-order differences and returns the minimum of
/// `L[u] / (r^{-2} (sin 2θ)^{-1} u)` over the interior window. The contract
/// is a strictly positive minimum; a value below the discretization
/// tolerance is an error.
pub fn supersolution_certificate(alpha: f64, window: &CertWindow) -> Result<f64> {
    if window.nr < 8 || window.ntheta < 8 {
        return Err(Error::UnderResolved(format!(
            "certificate window needs >= 8 nodes per direction, got {} x {}",
            window.nr, window.ntheta
        )));
    }
    if !(window.r_lo > 0.0 && window.r_lo < window.r_hi) {
        return Err(Error::InvalidRange {
            r_min: window.r_lo,
            r_max: window.r_hi,
        });
    }
    let t_lo = window.theta_margin;
    let t_hi = FRAC_PI_2 - window.theta_margin;
    if !(t_lo > 0.0 && t_lo < t_hi) {
        return Err(Error::InvalidParameter(
            "theta margin leaves no window".into(),
        ));
    }

    let mut c_star = f64::INFINITY;
    if alpha == 1.0 {
        // the log-branch ratio degenerates at θ = π/4; certify on the two
        // notched half windows
        c_star = c_star.min(window_min(alpha, window, t_lo, FRAC_PI_4 - window.notch)?);
        c_star = c_star.min(window_min(alpha, window, FRAC_PI_4 + window.notch, t_hi)?);
    } else {
        c_star = c_star.min(window_min(alpha, window, t_lo, t_hi)?);
    }

    if c_star <= -1e-6 {
        return Err(Error::SupersolutionViolation(c_star));
    }
    Ok(c_star)
}

fn window_min(alpha: f64, window: &CertWindow, t_lo: f64, t_hi: f64) -> Result<f64> {
    let nr = window.nr;
    let nt = window.ntheta;
    let hr = (window.r_hi - window.r_lo) / (nr - 1) as f64;
    let ht = (t_hi - t_lo) / (nt - 1) as f64;
    let r: Vec<f64> = (0..nr).map(|i| window.r_lo + i as f64 * hr).collect();
    let theta: Vec<f64> = (0..nt).map(|j| t_lo + j as f64 * ht).collect();

    let mut u = vec![0.0; nr * nt];
    for i in 0..nr {
        for j in 0..nt {
            u[i * nt + j] = supersolution_value(alpha, r[i], theta[j])?;
        }
    }

    let sin2 = |th: f64| (2.0 * th).sin();
    let mut c_min = f64::INFINITY;
    for i in 1..nr - 1 {
        let rp = (r[i] + r[i + 1]) / 2.0;
        let rm = (r[i] + r[i - 1]) / 2.0;
        let cr_p = rp.powf(5.0 - 2.0 * alpha);
        let cr_m = rm.powf(5.0 - 2.0 * alpha);
        let r_fac = r[i].powf(2.0 * alpha - 5.0);
        for j in 1..nt - 1 {
            let uc = u[i * nt + j];
            if uc == 0.0 {
                continue;
            }
            let radial = -r_fac
                * (cr_p * (u[(i + 1) * nt + j] - uc) - cr_m * (uc - u[(i - 1) * nt + j]))
                / (hr * hr);
            let sp = sin2((theta[j] + theta[j + 1]) / 2.0).powf(2.0 - alpha);
            let sm = sin2((theta[j] + theta[j - 1]) / 2.0).powf(2.0 - alpha);
            let angular = -sin2(theta[j]).powf(alpha - 2.0) / (r[i] * r[i])
                * (sp * (u[i * nt + j + 1] - uc) - sm * (uc - u[i * nt + j - 1]))
                / (ht * ht);
            let denom = uc / (r[i] * r[i] * sin2(theta[j]));
            c_min = c_min.min((radial + angular) / denom);
        }
    }
    Ok(c_min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bump_normalization_and_support() {
        assert_relative_eq!(alpha_bump(0.5), 1.0);
        assert_eq!(alpha_bump(0.0), 0.0);
        assert_eq!(alpha_bump(1.0), 0.0);
        assert!(alpha_bump(0.2) > 0.0 && alpha_bump(0.2) < 1.0);
        assert_relative_eq!(psi_bump(0.0), 1.0);
        assert_eq!(psi_bump(-1.0), 0.0);
        assert_eq!(psi_bump(1.0), 0.0);
        // derivative spot checks against central differences
        let h = 1e-6;
        for t in [0.2, 0.37, 0.61, 0.8] {
            let fd = (alpha_bump(t + h) - alpha_bump(t - h)) / (2.0 * h);
            assert_relative_eq!(alpha_bump_deriv(t), fd, max_relative = 1e-6);
        }
        for t in [-0.6, -0.2, 0.3, 0.7] {
            let fd = (psi_bump(t + h) - psi_bump(t - h)) / (2.0 * h);
            assert_relative_eq!(psi_bump_deriv(t), fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn sequence_member_normalization_point() {
        // u_k(r_o, 1/(2k)) = (2k)^{1/6}
        let k = 8u32;
        let f = counterexample_field(k, 2.0, 129, 512).unwrap();
        // closest grid point to (r_o, 1/(2k))
        let jt = f
            .grid
            .theta
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - 1.0 / 16.0)
                    .abs()
                    .partial_cmp(&(b.1 - 1.0 / 16.0).abs())
                    .unwrap()
            })
            .map(|(j, _)| j)
            .unwrap();
        let ir = f.grid.r.len() / 2;
        assert_relative_eq!(f.grid.r[ir], 2.0, max_relative = 1e-12);
        let expect = (2.0 * k as f64).powf(1.0 / 6.0);
        assert_relative_eq!(f.value(ir, jt), expect, max_relative = 1e-3);
    }

    #[test]
    fn sequence_member_support_and_sign() {
        let k = 8u32;
        let f = counterexample_field(k, 2.0, 64, 256).unwrap();
        assert!(f.values.iter().all(|&v| v >= 0.0));
        // θ beyond 1/k: the last node sits at θ = 1/k where α(1) = 0
        let nt = f.grid.theta.len();
        for i in 0..f.grid.r.len() {
            assert_eq!(f.value(i, nt - 1), 0.0);
        }
        // r at the support ends
        for j in 0..nt {
            assert_eq!(f.value(0, j), 0.0);
            assert_eq!(f.value(f.grid.r.len() - 1, j), 0.0);
        }
        assert!(phi_k(k, 2.0 / k as f64) == 0.0);
    }

    #[test]
    fn under_resolved_grids_rejected() {
        assert!(matches!(
            counterexample_field(8, 2.0, 4, 256),
            Err(Error::UnderResolved(_))
        ));
        assert!(counterexample_field(1, 2.0, 64, 64).is_err());
        assert!(counterexample_field(8, 0.5, 64, 64).is_err());
    }

    #[test]
    fn report_reproduces_printed_slopes() {
        let rep = counterexample_report(&[8, 16, 32, 64], 2.0, 257, 1024).unwrap();
        assert!(
            (rep.slope_r1 + 3.5).abs() <= 0.3,
            "slope_r1 = {}",
            rep.slope_r1
        );
        assert!(
            (rep.slope_r2 + 0.5).abs() <= 0.3,
            "slope_r2 = {}",
            rep.slope_r2
        );
        assert!(rep.s_spread < 0.10, "sup spread = {}", rep.s_spread);
        // the chain-rule variant grows: its slope is near +5/2
        assert!(
            (rep.slope_r1_chain - 2.5).abs() <= 0.3,
            "chain slope = {}",
            rep.slope_r1_chain
        );
    }

    #[test]
    fn sup_equivalence_two_sided() {
        // replacing ((sin 2θ)/(2θ))^{1/2} by 1 over the support changes the
        // angular sup by a factor inside [√(1 - 2/(3k²)), 1]
        for k in [8u32, 16, 32] {
            let kf = k as f64;
            let nt = 2048;
            let theta: Vec<f64> = (0..nt)
                .map(|j| (j as f64 + 1.0) / (kf * nt as f64))
                .collect();
            let exact = theta
                .iter()
                .map(|&th| ((2.0 * th).sin() / (2.0 * th)).sqrt() * alpha_bump(kf * th).powi(3))
                .fold(0.0f64, f64::max);
            let flat = theta
                .iter()
                .map(|&th| alpha_bump(kf * th).powi(3))
                .fold(0.0f64, f64::max);
            let lo = (1.0 - 2.0 / (3.0 * kf * kf)).sqrt();
            let ratio = exact / flat;
            assert!(
                ratio >= lo && ratio <= 1.0 + 1e-12,
                "k = {k}: ratio {ratio} outside [{lo}, 1]"
            );
        }
    }

    #[test]
    fn supersolution_values() {
        // α = 2: (sin 2θ)^{1/2}
        for th in [0.3, 0.9, 1.4] {
            assert_relative_eq!(
                supersolution_value(2.0, 5.0, th).unwrap(),
                (2.0 * th).sin().sqrt(),
                max_relative = 1e-14
            );
        }
        // α = 1 at θ = π/4: log 1 = 0
        assert_eq!(supersolution_value(1.0, 3.0, FRAC_PI_4).unwrap(), 0.0);
        // α = 3, r = 2, θ = π/4: r¹ (sin π/2)¹ = 2
        assert_relative_eq!(
            supersolution_value(3.0, 2.0, FRAC_PI_4).unwrap(),
            2.0,
            max_relative = 1e-14
        );
        assert!(supersolution_value(3.0, 2.0, 2.0).is_err());
        assert!(supersolution_value(3.0, 0.0, 0.3).is_err());
    }

    #[test]
    fn certificate_positive_and_quadratic_in_alpha() {
        let w = CertWindow::default();
        let alphas = [3.0, 5.0, 9.0, 17.0];
        let mut cs = Vec::new();
        for &a in &alphas {
            let c = supersolution_certificate(a, &w).unwrap();
            assert!(c > 0.0, "C*({a}) = {c}");
            // analytic minimum of the ratio is 1 + (α-1)² (attained at θ = π/4)
            let exact = 1.0 + (a - 1.0) * (a - 1.0);
            assert!(
                (c - exact).abs() / exact < 0.01,
                "C*({a}) = {c}, analytic {exact}"
            );
            cs.push(c);
        }
        let am1: Vec<f64> = alphas.iter().map(|&a| a - 1.0).collect();
        let slope = log_log_slope(&am1, &cs);
        assert!((slope - 2.0).abs() <= 0.2, "slope {slope}");
    }

    #[test]
    fn certificate_log_branch_positive() {
        let w = CertWindow::default();
        let c = supersolution_certificate(1.0, &w).unwrap();
        assert!(c > 0.0, "α = 1 certificate {c}");
    }

    #[test]
    fn certificate_is_r_window_invariant() {
        let a = supersolution_certificate(
            3.0,
            &CertWindow {
                r_lo: 1.0,
                r_hi: 2.0,
                ..CertWindow::default()
            },
        )
        .unwrap();
        let b = supersolution_certificate(
            3.0,
            &CertWindow {
                r_lo: 4.0,
                r_hi: 8.0,
                ..CertWindow::default()
            },
        )
        .unwrap();
        assert!(
            (a - b).abs() / a < 0.01,
            "certificate not scale invariant: {a} vs {b}"
        );
    }
}

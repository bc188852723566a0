//! The one-dimensional angular reduction for two-block decompositions.
//!
//! In polar coordinates `r_1 = r cos θ`, `r_2 = r sin θ` the weighted
//! two-block quotient drops to a Sturm–Liouville problem in `θ` with weight
//! `ψ(θ) = cos^{γ_1-1}θ · sin^{γ_2-1}θ`:
//!
//! ```text
//! ∫ |u'|² ψ^{1 - α/(|γ|-2)} dθ   ≥   λ(α) ∫ u² ψ^{1 - (α+2)/(|γ|-2)} dθ
//! ```
//!
//! with Dirichlet ends (one-sided when `γ_1 = 1`). The substitution
//! `t'(θ) = sign(ν+1) ψ^{α/(|γ|-2) - 1}`, `ν = (α/(|γ|-2) - 1)(γ_2 - 1)`,
//! turns the quotient into a flat 1D Hardy problem against the potential
//! `V(t) = sign(ν+1) t'^{-2} ψ^{-2/(|γ|-2)}`. There is no closed form for
//! `t` at general parameters, so it is computed by cumulative quadrature.

use crate::error::{Error, Result};
use crate::linalg::{smallest_generalized_eig, SymBanded};
use crate::solve::{ConstantEstimate, Method};
use std::f64::consts::{FRAC_PI_2, PI};

/// The angular problem data: block dimensions (normalized so that
/// `γ_2 = max(γ_1, γ_2) >= 2`) and the weight parameter `α`.
#[derive(Debug, Clone, Copy)]
pub struct AngularProblem {
    gamma1: u32,
    gamma2: u32,
    alpha: f64,
    swapped: bool,
}

/// Sampled monotone map `t(θ)` with its derivative along the nodes.
#[derive(Debug, Clone)]
pub struct Substitution {
    pub theta: Vec<f64>,
    pub t: Vec<f64>,
    pub t_prime: Vec<f64>,
    pub nu: f64,
    pub increasing: bool,
}

/// Sampled potential `V(t)` with the diagnostic sup of `t²|V|` over the
/// quarter of nodes nearest the singular end.
#[derive(Debug, Clone)]
pub struct Potential {
    pub theta: Vec<f64>,
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub tail_sup_t2v: f64,
}

impl AngularProblem {
    pub fn new(gamma1: u32, gamma2: u32, alpha: f64) -> Result<Self> {
        if gamma1 == 0 || gamma2 == 0 {
            return Err(Error::InvalidDecomposition(
                "block dimensions must be >= 1".into(),
            ));
        }
        if gamma1.max(gamma2) < 2 {
            return Err(Error::InvalidDecomposition(
                "need max(γ1, γ2) >= 2".into(),
            ));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha = {alpha}")));
        }
        let swapped = gamma1 > gamma2;
        let (g1, g2) = if swapped { (gamma2, gamma1) } else { (gamma1, gamma2) };
        Ok(Self {
            gamma1: g1,
            gamma2: g2,
            alpha,
            swapped,
        })
    }

    pub fn gamma1(&self) -> u32 {
        self.gamma1
    }

    pub fn gamma2(&self) -> u32 {
        self.gamma2
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn swapped(&self) -> bool {
        self.swapped
    }

    pub fn total(&self) -> u32 {
        self.gamma1 + self.gamma2
    }

    fn e_denom(&self) -> f64 {
        (self.total() - 2) as f64
    }

    /// `ν = (α/(|γ|-2) - 1)(γ_2 - 1)`.
    pub fn nu(&self) -> f64 {
        (self.alpha / self.e_denom() - 1.0) * (self.gamma2 - 1) as f64
    }

    /// Maximizer of ψ: `arctan √((γ_2-1)/(γ_1-1))`, or `π/2` when `γ_1 = 1`.
    pub fn theta_gamma(&self) -> f64 {
        if self.gamma1 == 1 {
            FRAC_PI_2
        } else {
            (((self.gamma2 - 1) as f64 / (self.gamma1 - 1) as f64).sqrt()).atan()
        }
    }

    /// `ψ(θ) = cos^{γ_1-1}θ sin^{γ_2-1}θ` on the open interval `(0, π/2)`.
    pub fn psi(&self, theta: f64) -> Result<f64> {
        if !(theta > 0.0 && theta < FRAC_PI_2) {
            return Err(Error::InvalidParameter(format!(
                "θ = {theta} outside (0, π/2)"
            )));
        }
        Ok(self.psi_unchecked(theta))
    }

    fn psi_unchecked(&self, theta: f64) -> f64 {
        theta.cos().powi(self.gamma1 as i32 - 1) * theta.sin().powi(self.gamma2 as i32 - 1)
    }

    fn t_prime_at(&self, theta: f64) -> f64 {
        let sign = if self.nu() + 1.0 > 0.0 { 1.0 } else { -1.0 };
        sign * self.psi_unchecked(theta).powf(self.alpha / self.e_denom() - 1.0)
    }

    /// Cumulative quadrature of `t'` over nodes inside `(0, θ_γ)`.
    ///
    /// For `ν > -1` the map starts from `t(0) = 0` (the head below the first
    /// node is integrated with the `θ^ν` asymptotic of `t'`); for `ν <= -1`
    /// the map decreases from `+∞`, and the integration constant is fixed by
    /// anchoring `t = 0` at the last node.
    pub fn substitution(&self, theta_nodes: &[f64]) -> Result<Substitution> {
        let tg = self.theta_gamma();
        if theta_nodes.is_empty() {
            return Err(Error::InvalidParameter("no θ nodes".into()));
        }
        if theta_nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("θ nodes must be increasing".into()));
        }
        if !(theta_nodes[0] > 0.0 && *theta_nodes.last().unwrap() < tg) {
            return Err(Error::InvalidParameter(format!(
                "θ nodes must lie inside (0, θ_γ = {tg})"
            )));
        }
        let nu = self.nu();
        let n = theta_nodes.len();
        let t_prime: Vec<f64> = theta_nodes.iter().map(|&t| self.t_prime_at(t)).collect();
        let mut t = vec![0.0; n];
        if nu > -1.0 {
            // t' ~ θ^ν near zero, so the head integrates to t'(θ_0) θ_0/(ν+1)
            t[0] = t_prime[0] * theta_nodes[0] / (nu + 1.0);
            for k in 1..n {
                let d = theta_nodes[k] - theta_nodes[k - 1];
                t[k] = t[k - 1] + d * (t_prime[k] + t_prime[k - 1]) / 2.0;
            }
        } else {
            t[n - 1] = 0.0;
            for k in (0..n - 1).rev() {
                let d = theta_nodes[k + 1] - theta_nodes[k];
                t[k] = t[k + 1] + d * (t_prime[k].abs() + t_prime[k + 1].abs()) / 2.0;
            }
        }
        Ok(Substitution {
            theta: theta_nodes.to_vec(),
            t,
            t_prime,
            nu,
            increasing: nu > -1.0,
        })
    }

    /// `V = sign(ν+1) t'^{-2} ψ^{-2/(|γ|-2)}` paired with `t(θ)`, plus the
    /// diagnostic sup of `t²|V|` over the tail nearest the singular end
    /// (θ → 0 corresponds to t → 0 for `ν > -1` and to t → ∞ otherwise).
    pub fn potential(&self, theta_nodes: &[f64]) -> Result<Potential> {
        let sub = self.substitution(theta_nodes)?;
        let sign = if sub.nu + 1.0 > 0.0 { 1.0 } else { -1.0 };
        let e = -2.0 / self.e_denom();
        let v: Vec<f64> = sub
            .theta
            .iter()
            .zip(&sub.t_prime)
            .map(|(&th, &tp)| sign * self.psi_unchecked(th).powf(e) / (tp * tp))
            .collect();
        let tail = (sub.theta.len() / 4).max(1);
        let mut sup = 0.0f64;
        for k in 0..tail {
            sup = sup.max(sub.t[k] * sub.t[k] * v[k].abs());
        }
        Ok(Potential {
            theta: sub.theta,
            t: sub.t,
            v,
            tail_sup_t2v: sup,
        })
    }

    /// Best constant `λ(α)` of the weighted two-block pair, computed
    /// through its polar-log separation. In coordinates `(log r, θ)` the
    /// radial direction contributes exactly the zeroth-order term
    /// `((|γ|-2-α)/2)²` against the stiffness weight, and what remains is
    /// the one-dimensional Sturm–Liouville quotient in θ:
    ///
    /// ```text
    /// λ(α) = min_g [ ∫ g'² ψ^{w1} dθ + ((|γ|-2-α)/2)² ∫ g² ψ^{w1} dθ ]
    ///              / ∫ g² ψ^{w2} dθ
    /// ```
    ///
    /// with `w1 = 1 - α/(|γ|-2)`, `w2 = 1 - (α+2)/(|γ|-2)`, Dirichlet at
    /// both ends — only at `θ = 0` when `γ_1 = 1` (the weight stays regular
    /// at `π/2` there). The pure-θ part of the quotient alone grows only
    /// linearly in α; the quadratic growth `λ(α) ≍ α²` asserted for the
    /// two-block constant needs the radial term, which is why it is part of
    /// the reduction.
    ///
    /// Conservative second-order differences on a grid uniform in a
    /// stretched coordinate that clusters quadratically at both endpoints,
    /// where ψ degenerates.
    pub fn best_constant(&self, nodes: usize) -> Result<ConstantEstimate> {
        if nodes < 64 {
            return Err(Error::InvalidParameter(format!(
                "need at least 64 θ nodes, got {nodes}"
            )));
        }
        let theta = stretched_theta_grid(nodes);
        let e = self.e_denom();
        let w1 = 1.0 - self.alpha / e;
        let w2 = 1.0 - (self.alpha + 2.0) / e;
        let radial_coeff = (e - self.alpha) * (e - self.alpha) / 4.0;
        let neumann_right = self.gamma1 == 1;

        // unknowns: θ_1 .. θ_{n-2}, plus θ_{n-1} itself for the Neumann end
        let last = if neumann_right { nodes - 1 } else { nodes - 2 };
        let n_unknown = last; // indices 1..=last map to 0..n_unknown
        let mut diag = vec![0.0f64; n_unknown];
        let mut sub = vec![0.0f64; n_unknown]; // sub[row] couples row+1 to row
        let mut b = vec![0.0f64; n_unknown];

        let psi_w1_half = |k: usize| -> f64 {
            // half-point between θ_k and θ_{k+1}
            let th = 0.5 * (theta[k] + theta[k + 1]);
            self.psi_unchecked(th).powf(w1)
        };

        for k in 1..=last {
            let row = k - 1;
            let d_left = theta[k] - theta[k - 1];
            let c_left = psi_w1_half(k - 1) / d_left;
            diag[row] += c_left;
            let has_right = k < nodes - 1;
            if has_right {
                let d_right = theta[k + 1] - theta[k];
                let c_right = psi_w1_half(k) / d_right;
                diag[row] += c_right;
                if k < last {
                    sub[row] -= c_right;
                }
            }
            let cell = if has_right {
                (theta[k + 1] - theta[k - 1]) / 2.0
            } else {
                (theta[k] - theta[k - 1]) / 2.0
            };
            let psi_k = self.psi_unchecked(theta[k]);
            diag[row] += radial_coeff * psi_k.powf(w1) * cell;
            b[row] = psi_k.powf(w2) * cell;
        }

        // rescale the pencil so huge weight powers stay well inside f64 range
        let scale = b.iter().fold(0.0f64, |m, &v| m.max(v));
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(
                "singular mass: all-zero weight".into(),
            ));
        }
        let mut a = SymBanded::zeros(n_unknown, 1);
        for row in 0..n_unknown {
            b[row] /= scale;
            a.add(row, row, diag[row] / scale);
            if row + 1 < n_unknown && sub[row] != 0.0 {
                a.add(row + 1, row, sub[row] / scale);
            }
        }

        let mut chol = a.clone();
        chol.cholesky()?;
        let apply = |x: &[f64], y: &mut [f64]| a.matvec(x, y);
        let sol = smallest_generalized_eig(&apply, &chol, &b, 1e-9, 400)?;
        Ok(ConstantEstimate {
            value: sol.lambda,
            method: Method::Eigensolve,
            iterations: sol.iterations,
            residual: sol.residual,
            grid_nodes: nodes,
            extrapolated: None,
            converged: sol.converged,
        })
    }
}

/// θ-grid on `[0, π/2]`, uniform in a stretched coordinate with quadratic
/// clustering at both endpoints: `θ(ξ) = (π/4)(1 - cos(πξ))`.
pub fn stretched_theta_grid(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let xi = k as f64 / (n - 1) as f64;
            PI / 4.0 * (1.0 - (PI * xi).cos())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::log_log_slope;
    use approx::assert_relative_eq;

    #[test]
    fn psi_examples() {
        let p22 = AngularProblem::new(2, 2, 3.0).unwrap();
        assert_relative_eq!(p22.psi(PI / 4.0).unwrap(), 0.5, max_relative = 1e-15);
        let p12 = AngularProblem::new(1, 2, 3.0).unwrap();
        for th in [0.3, 0.7, 1.2] {
            assert_relative_eq!(p12.psi(th).unwrap(), th.sin(), max_relative = 1e-15);
        }
        assert!(p22.psi(0.0).is_err());
        assert!(p22.psi(FRAC_PI_2).is_err());
    }

    #[test]
    fn psi_monotone_up_to_theta_gamma() {
        for (g1, g2) in [(2u32, 2u32), (3, 2), (2, 5), (1, 3)] {
            let p = AngularProblem::new(g1, g2, 1.0).unwrap();
            let tg = p.theta_gamma();
            let mut prev = 0.0;
            for k in 1..200 {
                let th = tg * k as f64 / 200.0;
                let v = p.psi(th).unwrap();
                assert!(v > prev, "ψ not increasing before θ_γ for ({g1},{g2})");
                prev = v;
            }
            if g1 > 1 {
                let mut prev = p.psi(tg).unwrap();
                for k in 1..100 {
                    let th = tg + (FRAC_PI_2 - tg) * k as f64 / 101.0;
                    let v = p.psi(th).unwrap();
                    assert!(v < prev, "ψ not decreasing after θ_γ for ({g1},{g2})");
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn swap_normalization_and_reflection() {
        let p = AngularProblem::new(3, 2, 1.0).unwrap();
        assert!(p.swapped());
        assert_eq!((p.gamma1(), p.gamma2()), (2, 3));
        // ψ as written for (3,2) at θ equals the normalized ψ at π/2 - θ
        for th in [0.2f64, 0.5, 1.0, 1.4] {
            let as_written = th.cos().powi(2) * th.sin();
            assert_relative_eq!(
                p.psi(FRAC_PI_2 - th).unwrap(),
                as_written,
                max_relative = 1e-12
            );
        }
        // and the eigenvalue is order-independent
        let a = AngularProblem::new(3, 2, 5.0).unwrap();
        let b = AngularProblem::new(2, 3, 5.0).unwrap();
        let la = a.best_constant(129).unwrap().value;
        let lb = b.best_constant(129).unwrap().value;
        assert_relative_eq!(la, lb, max_relative = 1e-12);
    }

    #[test]
    fn substitution_identity_case() {
        // α = |γ| - 2 makes the exponent vanish: t' = 1 and t(θ) = θ
        let p = AngularProblem::new(2, 2, 2.0).unwrap();
        assert_eq!(p.nu(), 0.0);
        let nodes: Vec<f64> = (1..100).map(|k| p.theta_gamma() * k as f64 / 101.0).collect();
        let sub = p.substitution(&nodes).unwrap();
        assert!(sub.increasing);
        for (th, t) in sub.theta.iter().zip(&sub.t) {
            assert_relative_eq!(t, th, max_relative = 1e-12);
        }
    }

    #[test]
    fn substitution_monotone_when_nu_above_minus_one() {
        let p = AngularProblem::new(2, 2, 3.0).unwrap(); // ν = 1/2
        assert!(p.nu() > -1.0);
        let nodes: Vec<f64> = (1..200).map(|k| p.theta_gamma() * k as f64 / 201.0).collect();
        let sub = p.substitution(&nodes).unwrap();
        assert!(sub.t.windows(2).all(|w| w[0] < w[1]));
        assert!(sub.t[0] > 0.0);
    }

    #[test]
    fn substitution_log_asymptotics_at_nu_minus_one() {
        // γ = (2,2), α = 0 gives ν = -1 and t(θ) = log(1/θ)(1 + o(1))
        let p = AngularProblem::new(2, 2, 0.0).unwrap();
        assert_eq!(p.nu(), -1.0);
        let tg = p.theta_gamma();
        let n = 6000;
        let lo: f64 = 1e-12;
        let hi = 0.9 * tg;
        let nodes: Vec<f64> = (0..n)
            .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
            .collect();
        let sub = p.substitution(&nodes).unwrap();
        assert!(!sub.increasing);
        let ratio_at = |theta_target: f64| -> f64 {
            let k = nodes
                .iter()
                .position(|&t| t >= theta_target)
                .unwrap();
            sub.t[k] / (1.0 / nodes[k]).ln()
        };
        let shallow = ratio_at(1e-6);
        let deep = ratio_at(1e-11);
        assert!((deep - 1.0).abs() < 0.05, "deep ratio {deep}");
        assert!((deep - 1.0).abs() < (shallow - 1.0).abs(), "no approach to 1");
    }

    #[test]
    fn potential_positive_and_tail_controlled() {
        let p = AngularProblem::new(2, 2, 3.0).unwrap(); // ν > -1
        let nodes: Vec<f64> = (1..2000)
            .map(|k| p.theta_gamma() * k as f64 / 2001.0)
            .collect();
        let pot = p.potential(&nodes).unwrap();
        assert!(pot.v.iter().all(|&v| v > 0.0));
        assert!(pot.tail_sup_t2v.is_finite());
    }

    #[test]
    fn potential_tail_limit_for_one_dim_first_block() {
        // γ = (1,3), α = 4: ν = 2 and t²V → 1/(ν+1)² = 1/9 as θ → 0
        let p = AngularProblem::new(1, 3, 4.0).unwrap();
        assert_relative_eq!(p.nu(), 2.0);
        let lo: f64 = 1e-6;
        let hi = 1e-4;
        let n = 4000;
        let nodes: Vec<f64> = (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect();
        let pot = p.potential(&nodes).unwrap();
        assert!(
            (pot.tail_sup_t2v - 1.0 / 9.0).abs() < 0.01,
            "tail sup {}",
            pot.tail_sup_t2v
        );
    }

    #[test]
    fn potential_decays_exponentially_at_nu_minus_one() {
        // γ = (2,2), α = 0: |V(t)| ~ e^{-t}; the exponent coefficient is
        // -(γ₂-1)(2 - (2α+2)/(|γ|-2)) = -1
        let p = AngularProblem::new(2, 2, 0.0).unwrap();
        let tg = p.theta_gamma();
        let lo: f64 = 1e-10;
        let hi = 0.5 * tg;
        let n = 4000;
        let nodes: Vec<f64> = (0..n)
            .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
            .collect();
        let pot = p.potential(&nodes).unwrap();
        // fit log|V| against t over the deep tail
        let mut ts = Vec::new();
        let mut lv = Vec::new();
        for k in 0..n / 4 {
            ts.push(pot.t[k]);
            lv.push(pot.v[k].abs());
        }
        // slope of ln|V| vs t (not log-log): linear fit
        let mt = ts.iter().sum::<f64>() / ts.len() as f64;
        let ml = lv.iter().map(|v| v.ln()).sum::<f64>() / lv.len() as f64;
        let mut cov = 0.0;
        let mut var = 0.0;
        for i in 0..ts.len() {
            cov += (ts[i] - mt) * (lv[i].ln() - ml);
            var += (ts[i] - mt) * (ts[i] - mt);
        }
        let coeff = cov / var;
        assert!(
            (coeff + 1.0).abs() < 0.05,
            "exponent coefficient {coeff}, want -1"
        );
        assert!(coeff < 0.0);
    }

    #[test]
    fn angular_constant_positive_small_alphas() {
        for alpha in [2.0, 4.0, 8.0] {
            let p = AngularProblem::new(2, 2, alpha).unwrap();
            let est = p.best_constant(257).unwrap();
            assert!(est.value > 0.0, "λ({alpha}) = {}", est.value);
        }
    }

    #[test]
    fn angular_constant_quadratic_in_alpha() {
        let alphas = [10.0, 18.0, 32.0, 56.0, 100.0];
        let lambdas: Vec<f64> = alphas
            .iter()
            .map(|&a| {
                AngularProblem::new(2, 2, a)
                    .unwrap()
                    .best_constant(513)
                    .unwrap()
                    .value
            })
            .collect();
        let slope = log_log_slope(&alphas, &lambdas);
        assert!(
            (slope - 2.0).abs() <= 0.1,
            "slope {slope}, λ values {lambdas:?}"
        );
    }

    #[test]
    fn angular_constant_stable_under_refinement() {
        let p = AngularProblem::new(3, 2, 6.0).unwrap();
        let a = p.best_constant(257).unwrap().value;
        let b = p.best_constant(513).unwrap().value;
        let c = p.best_constant(1025).unwrap().value;
        assert!((b - a).abs() / b < 0.01);
        assert!((c - b).abs() / c < 0.01);
    }

    #[test]
    fn transformed_quotient_matches_theta_quotient() {
        // The flat-side quotient ∫|w'|²dt / ∫w²V dt computed on the sampled
        // map agrees with the θ-side quotient to quadrature accuracy.
        let p = AngularProblem::new(2, 2, 3.0).unwrap();
        let tg = p.theta_gamma();
        let (a, b) = (0.2 * tg, 0.8 * tg);
        let n = 40_000;
        let nodes: Vec<f64> = (0..n)
            .map(|k| 0.05 * tg + (0.95 * tg - 0.05 * tg) * k as f64 / (n - 1) as f64)
            .collect();
        let u = |th: f64| -> f64 {
            if th <= a || th >= b {
                0.0
            } else {
                let x = (th - a) / (b - a);
                (PI * x).sin().powi(2)
            }
        };
        let du = |th: f64| -> f64 {
            if th <= a || th >= b {
                0.0
            } else {
                let x = (th - a) / (b - a);
                2.0 * (PI * x).sin() * (PI * x).cos() * PI / (b - a)
            }
        };
        let e = (p.total() - 2) as f64;
        let w1 = 1.0 - p.alpha() / e;
        let w2 = 1.0 - (p.alpha() + 2.0) / e;
        let trapz = |ys: &[f64], xs: &[f64]| -> f64 {
            let mut s = 0.0;
            for k in 1..xs.len() {
                s += (xs[k] - xs[k - 1]) * (ys[k] + ys[k - 1]) / 2.0;
            }
            s
        };
        let num_th: Vec<f64> = nodes
            .iter()
            .map(|&th| du(th).powi(2) * p.psi(th).unwrap().powf(w1))
            .collect();
        let den_th: Vec<f64> = nodes
            .iter()
            .map(|&th| u(th).powi(2) * p.psi(th).unwrap().powf(w2))
            .collect();
        let q_theta = trapz(&num_th, &nodes) / trapz(&den_th, &nodes);

        let sub = p.substitution(&nodes).unwrap();
        let pot = p.potential(&nodes).unwrap();
        let num_t: Vec<f64> = nodes
            .iter()
            .zip(&sub.t_prime)
            .map(|(&th, &tp)| (du(th) / tp).powi(2))
            .collect();
        let den_t: Vec<f64> = nodes
            .iter()
            .zip(&pot.v)
            .map(|(&th, &v)| u(th).powi(2) * v)
            .collect();
        let q_t = trapz(&num_t, &sub.t) / trapz(&den_t, &sub.t);

        assert!(
            (q_theta - q_t).abs() / q_theta < 1e-6,
            "θ-side {q_theta}, t-side {q_t}"
        );
    }
}

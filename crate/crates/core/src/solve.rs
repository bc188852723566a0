//! Best-constant estimation for the weighted quotients: generalized
//! eigenproblems at `q = 2` and a normalized descent for general `q`.
//!
//! The stiffness form is assembled as `GᵀDG` where `G` is exactly the
//! difference operator used by [`crate::field::Field::gradient`] and `D`
//! the grid quadrature times the stiffness weight. Quadratic forms therefore
//! reproduce the module functionals to rounding, which is what makes the
//! eigenvalue a genuine certificate: every Dirichlet field satisfies
//! `hardy ≤ (1/λ_min) · grad` by linear algebra alone.
//!
//! Unknowns are the interior nodes; every face of the grid box is a
//! Dirichlet layer, modelling functions that vanish near the singular set
//! and at the truncation boundary.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::ReducedGrid;
use crate::linalg::{smallest_generalized_eig, SymBanded};
use crate::util::{log_log_slope, richardson};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Which weighted pair of forms to assemble. Exponents are powers of the
/// *reciprocal* weight: stiffness `r_γ^{-stiff}`, mass `r_γ^{-mass}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FormKind {
    RGamma { stiff: f64, mass: f64 },
    /// Unweighted stiffness with mass weight `r_axis^{-mass}`; valid for any
    /// block count, including the one-block radial surrogate.
    BlockRadial { axis: usize, mass: f64 },
}

impl FormKind {
    /// The plain weighted Hardy pair: unweighted gradient vs `r_γ^{-q}` mass.
    pub fn hardy(q: f64) -> Self {
        FormKind::RGamma { stiff: 0.0, mass: q }
    }

    /// The α-weighted two-block pair (`r_γ^{-α}` vs `r_γ^{-(α+2)}`).
    pub fn alpha_weighted(alpha: f64) -> Self {
        FormKind::RGamma {
            stiff: alpha,
            mass: alpha + 2.0,
        }
    }

    /// The β-parameterized pair at general exponent `q`
    /// (`r_γ^{-β}` vs `r_γ^{-(β+q)}`).
    pub fn lemma2(beta: f64, q: f64) -> Self {
        FormKind::RGamma {
            stiff: beta,
            mass: beta + q,
        }
    }
}

/// Assembled data for the weighted quadratic forms on the Dirichlet
/// subspace of a grid. Doubles as the weight container for the general-`q`
/// descent (the arrays are `q`-independent).
#[derive(Debug, Clone)]
pub struct QuadraticForms {
    grid: Arc<ReducedGrid>,
    kind: FormKind,
    /// Stiffness sample weight per full node: quadrature × stiffness weight.
    stiff_weight: Vec<f64>,
    /// interior# -> full node index
    interior: Vec<usize>,
    /// full node index -> interior#
    interior_of: Vec<Option<usize>>,
    /// Mass diagonal per interior node: quadrature × mass weight.
    mass: Vec<f64>,
    /// Bandwidth of the assembled stiffness in interior numbering.
    bw: usize,
}

/// Cap on banded-factorization storage (number of f64 entries).
const MAX_BANDED_ENTRIES: usize = 64 << 20;

/// Assembles the weighted form data for a grid. Fails when the mass weight
/// vanishes identically.
pub fn assemble_forms(grid: &Arc<ReducedGrid>, kind: FormKind) -> Result<QuadraticForms> {
    let decomp = grid.decomp();
    match kind {
        FormKind::RGamma { .. } => decomp.require_weighted()?,
        FormKind::BlockRadial { axis, .. } => {
            if axis >= decomp.m() {
                return Err(Error::IndexOutOfRange {
                    index: axis,
                    m: decomp.m(),
                });
            }
        }
    }

    let n = grid.len();
    let mut stiff_weight = vec![0.0f64; n];
    let mut interior = Vec::new();
    let mut interior_of = vec![None; n];
    let mut mass = Vec::new();

    let mass_weight_at = |idx: usize, mi: &[usize]| -> f64 {
        match kind {
            FormKind::RGamma { mass, .. } => grid.r_gamma_at(idx).powf(-mass),
            FormKind::BlockRadial { axis, mass } => {
                grid.axes()[axis].nodes[mi[axis]].powf(-mass)
            }
        }
    };
    let stiff_weight_at = |idx: usize| -> f64 {
        match kind {
            FormKind::RGamma { stiff, .. } => {
                if stiff == 0.0 {
                    1.0
                } else {
                    grid.r_gamma_at(idx).powf(-stiff)
                }
            }
            FormKind::BlockRadial { .. } => 1.0,
        }
    };

    grid.for_each_node(|idx, mi| {
        let quad = grid.node_measure(idx);
        stiff_weight[idx] = quad * stiff_weight_at(idx);
        let face = mi
            .iter()
            .zip(grid.shape())
            .any(|(&k, &nn)| k == 0 || k == nn - 1);
        if !face {
            interior_of[idx] = Some(interior.len());
            interior.push(idx);
            mass.push(quad * mass_weight_at(idx, mi));
        }
    });

    if mass.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidParameter(
            "singular mass: all-zero weight".into(),
        ));
    }

    // interior box strides: couplings reach two interior layers along axis 0
    let shape_int: Vec<usize> = grid.shape().iter().map(|&s| s - 2).collect();
    let mut stride0 = 1usize;
    for s in shape_int.iter().skip(1) {
        stride0 *= s;
    }
    let bw = 2 * stride0;

    Ok(QuadraticForms {
        grid: grid.clone(),
        kind,
        stiff_weight,
        interior,
        interior_of,
        mass,
        bw,
    })
}

impl QuadraticForms {
    pub fn grid(&self) -> &Arc<ReducedGrid> {
        &self.grid
    }

    pub fn kind(&self) -> FormKind {
        self.kind
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn mass_diag(&self) -> &[f64] {
        &self.mass
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Zero-extends an interior vector to the full grid.
    pub fn extend(&self, v: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.grid.len()];
        for (i, &idx) in self.interior.iter().enumerate() {
            full[idx] = v[i];
        }
        full
    }

    /// Interior restriction of a full-grid vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.interior.iter().map(|&idx| full[idx]).collect()
    }

    /// Per-axis derivative samples of the zero-extension of `v`.
    fn gradient_samples(&self, full: &[f64]) -> Vec<Vec<f64>> {
        let grid = &self.grid;
        let m = grid.shape().len();
        let mut comps = vec![vec![0.0; grid.len()]; m];
        for axis in 0..m {
            let ax = &grid.axes()[axis];
            let nn = ax.nodes.len();
            let comp = &mut comps[axis];
            grid.for_each_line(axis, |base, stride| {
                for k in 0..nn {
                    let st = ax.stencil(k);
                    comp[base + k * stride] = st[0].1 * full[base + st[0].0 * stride]
                        + st[1].1 * full[base + st[1].0 * stride];
                }
            });
        }
        comps
    }

    /// `out = A v` with `A = Σ_axes G_axisᵀ D G_axis`, matrix-free.
    pub fn apply_stiffness(&self, v: &[f64], out: &mut [f64]) {
        let full = self.extend(v);
        let comps = self.gradient_samples(&full);
        let grid = &self.grid;
        let mut acc = vec![0.0f64; grid.len()];
        for (axis, comp) in comps.iter().enumerate() {
            let ax = &grid.axes()[axis];
            let nn = ax.nodes.len();
            grid.for_each_line(axis, |base, stride| {
                for k in 0..nn {
                    let node = base + k * stride;
                    let dg = self.stiff_weight[node] * comp[node];
                    if dg != 0.0 {
                        let st = ax.stencil(k);
                        acc[base + st[0].0 * stride] += st[0].1 * dg;
                        acc[base + st[1].0 * stride] += st[1].1 * dg;
                    }
                }
            });
        }
        for (i, &idx) in self.interior.iter().enumerate() {
            out[i] = acc[idx];
        }
    }

    /// Stiffness energy `vᵀ A v`, evaluated through the same samples the
    /// functionals use.
    pub fn stiffness_energy(&self, v: &[f64], q: f64) -> f64 {
        let full = self.extend(v);
        let comps = self.gradient_samples(&full);
        let mut acc = 0.0;
        for idx in 0..self.grid.len() {
            let mut s = 0.0;
            for comp in &comps {
                s += comp[idx] * comp[idx];
            }
            if s > 0.0 {
                acc += self.stiff_weight[idx] * s.powf(q / 2.0);
            }
        }
        acc
    }

    /// Mass energy `Σ mass_i |v_i|^q`.
    pub fn mass_energy(&self, v: &[f64], q: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &m) in self.mass.iter().enumerate() {
            acc += m * v[i].abs().powf(q);
        }
        acc
    }

    /// Explicit symmetric banded stiffness matrix, for factorization.
    pub fn assemble_stiffness_banded(&self) -> Result<SymBanded> {
        let n_int = self.interior.len();
        let entries = n_int
            .checked_mul(self.bw + 1)
            .ok_or_else(|| Error::MemoryGuard("banded size overflow".into()))?;
        if entries > MAX_BANDED_ENTRIES {
            return Err(Error::MemoryGuard(format!(
                "banded stiffness needs {entries} entries (cap {MAX_BANDED_ENTRIES}); \
                 use the descent solver for this problem size"
            )));
        }
        let grid = &self.grid;
        let mut a = SymBanded::zeros(n_int, self.bw);
        for axis in 0..grid.shape().len() {
            let ax = &grid.axes()[axis];
            let nn = ax.nodes.len();
            grid.for_each_line(axis, |base, stride| {
                for k in 0..nn {
                    let node = base + k * stride;
                    let d = self.stiff_weight[node];
                    let st = ax.stencil(k);
                    let cols = [
                        (self.interior_of[base + st[0].0 * stride], st[0].1),
                        (self.interior_of[base + st[1].0 * stride], st[1].1),
                    ];
                    for (ci, &(col_i, coef_i)) in cols.iter().enumerate() {
                        let Some(p) = col_i else { continue };
                        a.add(p, p, d * coef_i * coef_i);
                        for &(col_j, coef_j) in cols.iter().skip(ci + 1) {
                            let Some(qj) = col_j else { continue };
                            a.add(p.max(qj), p.min(qj), d * coef_i * coef_j);
                        }
                    }
                }
            });
        }
        Ok(a)
    }
}

/// How a constant estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Eigensolve,
    Descent,
    Analytic,
}

/// A numerically estimated best constant with convergence diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantEstimate {
    /// The best constant of the inequality as written (e.g. `1/λ_min` for
    /// the Hardy-type bounds; the eigenvalue itself for the angular bound).
    pub value: f64,
    pub method: Method,
    pub iterations: usize,
    pub residual: f64,
    pub grid_nodes: usize,
    pub extrapolated: Option<f64>,
    pub converged: bool,
}

/// Eigensolve result: the estimate, the raw smallest eigenvalue, and the
/// minimizing field (zero-extended to the grid).
#[derive(Debug, Clone)]
pub struct MinEig {
    pub estimate: ConstantEstimate,
    pub lambda: f64,
    pub minimizer: Field,
}

/// Smallest generalized eigenvalue of the assembled pencil by inverse
/// iteration with a deterministic all-ones start. The best constant of the
/// inequality is `1/λ`; the returned residual is `‖Av - λBv‖/‖Bv‖`.
pub fn min_eig(forms: &QuadraticForms, tol: f64, max_iter: usize) -> Result<MinEig> {
    let mut chol = forms.assemble_stiffness_banded()?;
    chol.cholesky()?;
    let apply = |x: &[f64], y: &mut [f64]| forms.apply_stiffness(x, y);
    let sol = smallest_generalized_eig(&apply, &chol, &forms.mass, tol, max_iter)?;

    let full = forms.extend(&sol.vector);
    let minimizer = Field::new(forms.grid.clone(), full, true)?;
    Ok(MinEig {
        estimate: ConstantEstimate {
            value: 1.0 / sol.lambda,
            method: Method::Eigensolve,
            iterations: sol.iterations,
            residual: sol.residual,
            grid_nodes: forms.grid.spec().nodes_per_axis,
            extrapolated: None,
            converged: sol.converged,
        },
        lambda: sol.lambda,
        minimizer,
    })
}

/// Descent result: the estimate, the monotone objective trace (the quotient
/// per accepted step), and the final field.
#[derive(Debug, Clone)]
pub struct Descent {
    pub estimate: ConstantEstimate,
    pub trace: Vec<f64>,
    pub minimizer: Field,
}

/// Normalized subgradient descent on the quotient
/// `stiffness_energy(u, q) / mass_energy(u, q)` over the Dirichlet interior,
/// with Armijo backtracking. The objective trace is non-increasing by
/// construction. Deterministic: the start field is a fixed product-sine
/// bump.
pub fn min_quotient_descent(
    forms: &QuadraticForms,
    q: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Descent> {
    if !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must be >= 1")));
    }
    let n = forms.n_interior();
    let grid = &forms.grid;

    // deterministic positive start: product of sines over the interior box
    let mut v = vec![0.0f64; n];
    for (i, &idx) in forms.interior.iter().enumerate() {
        let mi = grid.multi_index(idx);
        let mut val = 1.0;
        for (a, &k) in mi.iter().enumerate() {
            let nn = grid.shape()[a] as f64;
            val *= (std::f64::consts::PI * k as f64 / (nn - 1.0)).sin();
        }
        v[i] = val;
    }
    normalize_mass(forms, q, &mut v);

    let mut objective = quotient(forms, q, &v);
    let mut trace = vec![objective];
    let mut converged = false;
    let mut stagnant = 0usize;
    let mut iterations = 0usize;
    let mut last_decrease = f64::INFINITY;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;

    for it in 1..=max_iter {
        iterations = it;
        let g = quotient_gradient(forms, q, &v, objective);
        let gnorm2: f64 = g.iter().map(|x| x * x).sum();
        if gnorm2 == 0.0 {
            converged = true;
            break;
        }
        // Barzilai-Borwein spectral step, safeguarded by Armijo backtracking
        let fallback = objective / gnorm2.sqrt().max(1e-300);
        let mut step = match &prev {
            Some((vp, gp)) => {
                let mut ss = 0.0;
                let mut sy = 0.0;
                for i in 0..v.len() {
                    let s = v[i] - vp[i];
                    let y = g[i] - gp[i];
                    ss += s * s;
                    sy += s * y;
                }
                if sy > 0.0 && (ss / sy).is_finite() {
                    ss / sy
                } else {
                    fallback
                }
            }
            None => fallback,
        };
        prev = Some((v.clone(), g.clone()));

        let mut accepted = false;
        for _ in 0..60 {
            let mut trial: Vec<f64> =
                v.iter().zip(&g).map(|(&x, &gx)| x - step * gx).collect();
            normalize_mass(forms, q, &mut trial);
            let f_trial = quotient(forms, q, &trial);
            if f_trial < objective - 1e-4 * step * gnorm2 || f_trial < objective * (1.0 - 1e-16) {
                last_decrease = (objective - f_trial) / objective;
                v = trial;
                objective = f_trial;
                trace.push(objective);
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if !accepted {
            converged = true; // no descent direction left at machine scale
            break;
        }
        if last_decrease < tol {
            stagnant += 1;
            if stagnant >= 3 {
                converged = true;
                break;
            }
        } else {
            stagnant = 0;
        }
    }

    let full = forms.extend(&v);
    let minimizer = Field::new(grid.clone(), full, true)?;
    Ok(Descent {
        estimate: ConstantEstimate {
            value: 1.0 / objective,
            method: Method::Descent,
            iterations,
            residual: last_decrease.min(f64::MAX),
            grid_nodes: grid.spec().nodes_per_axis,
            extrapolated: None,
            converged,
        },
        trace,
        minimizer,
    })
}

fn quotient(forms: &QuadraticForms, q: f64, v: &[f64]) -> f64 {
    forms.stiffness_energy(v, q) / forms.mass_energy(v, q)
}

fn normalize_mass(forms: &QuadraticForms, q: f64, v: &mut [f64]) {
    let m = forms.mass_energy(v, q);
    if m > 0.0 && m.is_finite() {
        let s = m.powf(-1.0 / q);
        v.iter_mut().for_each(|x| *x *= s);
    }
}

/// Euler derivative of the quotient `N/M` at `v` (with `R = N/M` given).
fn quotient_gradient(forms: &QuadraticForms, q: f64, v: &[f64], r: f64) -> Vec<f64> {
    let grid = &forms.grid;
    let full = forms.extend(v);
    let comps = forms.gradient_samples(&full);
    let n_nodes = grid.len();

    // dN = q Σ_axes Gᵀ [ d |g|^{q-2} g_axis ]
    let mut point = vec![0.0f64; n_nodes];
    for idx in 0..n_nodes {
        let mut s = 0.0;
        for comp in &comps {
            s += comp[idx] * comp[idx];
        }
        point[idx] = if s > 0.0 {
            forms.stiff_weight[idx] * s.powf((q - 2.0) / 2.0)
        } else {
            0.0
        };
    }
    let mut dn_full = vec![0.0f64; n_nodes];
    for (axis, comp) in comps.iter().enumerate() {
        let ax = &grid.axes()[axis];
        let nn = ax.nodes.len();
        grid.for_each_line(axis, |base, stride| {
            for k in 0..nn {
                let node = base + k * stride;
                let w = point[node] * comp[node];
                if w != 0.0 {
                    let st = ax.stencil(k);
                    dn_full[base + st[0].0 * stride] += st[0].1 * w;
                    dn_full[base + st[1].0 * stride] += st[1].1 * w;
                }
            }
        });
    }

    let m_val = forms.mass_energy(v, q);
    let mut out = vec![0.0f64; v.len()];
    for (i, &idx) in forms.interior.iter().enumerate() {
        let dn = q * dn_full[idx];
        let dm = if v[i] != 0.0 {
            q * forms.mass[i] * v[i].abs().powf(q - 2.0) * v[i]
        } else {
            0.0
        };
        out[i] = (dn - r * dm) / m_val;
    }
    out
}

/// Best-constant sweep over the β-weighted pair at fixed `q` (eigensolve at
/// `q = 2`, descent otherwise), with the fitted slope of
/// `log(value)` against `log(β + q)`.
#[derive(Debug, Clone)]
pub struct Lemma2Sweep {
    pub betas: Vec<f64>,
    pub estimates: Vec<ConstantEstimate>,
    pub slope: f64,
}

pub fn lemma2_constant_sweep(
    grid: &Arc<ReducedGrid>,
    q: f64,
    betas: &[f64],
) -> Result<Lemma2Sweep> {
    if grid.decomp().m() != 2 {
        return Err(Error::InvalidDecomposition(format!(
            "β sweep needs m = 2, got m = {}",
            grid.decomp().m()
        )));
    }
    if !(q >= 2.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must be >= 2")));
    }
    if betas.is_empty() {
        return Err(Error::InvalidParameter("empty β list".into()));
    }
    let mut estimates = Vec::with_capacity(betas.len());
    for &beta in betas {
        let forms = assemble_forms(grid, FormKind::lemma2(beta, q))?;
        let est = if q == 2.0 {
            min_eig(&forms, 1e-4, 200)?.estimate
        } else {
            min_quotient_descent(&forms, q, 1e-9, 4000)?.estimate
        };
        estimates.push(est);
    }
    let xs: Vec<f64> = betas.iter().map(|&b| b + q).collect();
    let ys: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let slope = if betas.len() >= 2 {
        log_log_slope(&xs, &ys)
    } else {
        f64::NAN
    };
    Ok(Lemma2Sweep {
        betas: betas.to_vec(),
        estimates,
        slope,
    })
}

/// Constant estimates across refinement levels with Richardson diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub estimates: Vec<ConstantEstimate>,
    pub observed_order: f64,
    pub extrapolated: f64,
}

/// Runs the estimator on `levels` grids obtained by repeated refinement of
/// `base`, and reports the observed order and extrapolated constant over
/// the last three levels.
pub fn refine_study(
    base: &Arc<ReducedGrid>,
    kind: FormKind,
    q: f64,
    levels: usize,
    tol: f64,
) -> Result<ConvergenceStudy> {
    if levels < 2 {
        return Err(Error::InvalidParameter("need at least 2 levels".into()));
    }
    let mut grid = base.clone();
    let mut estimates = Vec::with_capacity(levels);
    for level in 0..levels {
        let forms = assemble_forms(&grid, kind)?;
        let est = if q == 2.0 {
            min_eig(&forms, tol, 200)?.estimate
        } else {
            min_quotient_descent(&forms, q, tol, 4000)?.estimate
        };
        estimates.push(est);
        if level + 1 < levels {
            grid = Arc::new(grid.refine()?);
        }
    }
    let k = estimates.len();
    let (observed_order, extrapolated) = if k >= 3 {
        richardson(
            estimates[k - 3].value,
            estimates[k - 2].value,
            estimates[k - 1].value,
        )
    } else {
        (f64::NAN, estimates[k - 1].value)
    };
    let mut out = ConvergenceStudy {
        estimates,
        observed_order,
        extrapolated,
    };
    if let Some(last) = out.estimates.last_mut() {
        last.extrapolated = Some(extrapolated);
    }
    Ok(out)
}

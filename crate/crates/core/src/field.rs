//! Discrete block-radial functions and the weighted functionals of the
//! Hardy/CKN family.
//!
//! A [`Field`] is a nodal (collocation) representation `u(r_1, …, r_m)` on a
//! [`ReducedGrid`]. Because block-radial functions carry no angular
//! dependence, `|∇u|` reduces to the Euclidean norm of the radial partials
//! `∂u/∂r_i`; that dimension reduction is what makes the whole lab tractable.
//! All functionals use the grid's own quadrature, so cross-checks between
//! modules compare like with like.
//!
//! File format: a single-line JSON header (grid spec plus boundary flag)
//! followed by a CSV body of node values in row-major axis order. Values are
//! written in shortest round-trip notation, so write → read is bit-exact.

use crate::blockgeom::ckn_weight_exponent;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ReducedGrid};
use crate::util::tree_sum;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

/// Discrete block-radial function bound to a grid.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<ReducedGrid>,
    values: Vec<f64>,
    boundary: bool,
}

/// Per-axis partial derivatives of a field.
#[derive(Debug, Clone)]
pub struct GradField {
    grid: Arc<ReducedGrid>,
    /// `comps[axis][node]` = ∂u/∂r_axis at the node.
    comps: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct FieldHeader {
    gammas: Vec<u32>,
    r_min: f64,
    r_max: f64,
    nodes_per_axis: usize,
    boundary_flag: bool,
}

impl Field {
    /// Wraps node values. With the boundary flag set, the outermost node
    /// layer (every face of the grid box) must be exactly zero; this marks
    /// membership in the Dirichlet discretization.
    pub fn new(grid: Arc<ReducedGrid>, values: Vec<f64>, boundary: bool) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(idx));
        }
        if boundary {
            for idx in 0..values.len() {
                if grid.is_face(idx) && values[idx] != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "boundary flag set but node {idx} on the outer layer is {}",
                        values[idx]
                    )));
                }
            }
        }
        Ok(Self {
            grid,
            values,
            boundary,
        })
    }

    pub fn zeros(grid: Arc<ReducedGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
            boundary: true,
        }
    }

    /// Builds a field by evaluating `f(radii)` at every node. The boundary
    /// flag is set when the sampled values vanish on the outer layer.
    pub fn from_fn(grid: Arc<ReducedGrid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut values = vec![0.0; grid.len()];
        let mut radii = vec![0.0; grid.shape().len()];
        grid.for_each_node(|idx, mi| {
            for (i, &k) in mi.iter().enumerate() {
                radii[i] = grid.axes()[i].nodes[k];
            }
            values[idx] = f(&radii);
        });
        let boundary = (0..values.len()).all(|i| !grid.is_face(i) || values[i] == 0.0);
        Field::new(grid, values, boundary)
    }

    pub fn grid(&self) -> &Arc<ReducedGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn boundary_flag(&self) -> bool {
        self.boundary
    }

    pub fn scaled(&self, lambda: f64) -> Result<Field> {
        Field::new(
            self.grid.clone(),
            self.values.iter().map(|v| lambda * v).collect(),
            self.boundary,
        )
    }

    /// Radial partials `∂u/∂r_i` by differences on the log grid: central on
    /// the interior, one-sided on the boundary layers.
    pub fn gradient(&self) -> GradField {
        let grid = &self.grid;
        let m = grid.shape().len();
        let mut comps = vec![vec![0.0; grid.len()]; m];
        for axis in 0..m {
            let ax = &grid.axes()[axis];
            let n = ax.nodes.len();
            let comp = &mut comps[axis];
            grid.for_each_line(axis, |base, stride| {
                for k in 0..n {
                    let st = ax.stencil(k);
                    comp[base + k * stride] = st[0].1 * self.values[base + st[0].0 * stride]
                        + st[1].1 * self.values[base + st[1].0 * stride];
                }
            });
        }
        GradField {
            grid: grid.clone(),
            comps,
        }
    }

    /// Per-node `r_γ^e`, factored through the axes.
    fn r_gamma_pow(&self, e: f64) -> Result<Vec<f64>> {
        let grid = &self.grid;
        let decomp = grid.decomp();
        decomp.require_weighted()?;
        let d = decomp.deficiency() as f64;
        let axis_pows: Vec<Vec<f64>> = decomp
            .gammas()
            .iter()
            .zip(grid.axes())
            .map(|(&g, ax)| {
                let ex = e * (g as f64 - 1.0) / d;
                ax.nodes.iter().map(|&r| r.powf(ex)).collect()
            })
            .collect();
        let mut out = vec![1.0; grid.len()];
        grid.for_each_node(|idx, mi| {
            let mut w = 1.0;
            for (i, &k) in mi.iter().enumerate() {
                w *= axis_pows[i][k];
            }
            out[idx] = w;
        });
        Ok(out)
    }

    /// `∫ |∇u|^q dx` with `|∇u|` the Euclidean norm over the radial partials.
    pub fn grad_norm(&self, q: f64) -> Result<f64> {
        require_q(q)?;
        let grad = self.gradient();
        let mut integrand = vec![0.0; self.grid.len()];
        for idx in 0..self.grid.len() {
            let mut s = 0.0;
            for comp in &grad.comps {
                s += comp[idx] * comp[idx];
            }
            integrand[idx] = s.powf(q / 2.0);
        }
        self.grid.integrate(&integrand)
    }

    /// `∫ |u|^q / r_γ^q dx`.
    pub fn hardy_functional(&self, q: f64) -> Result<f64> {
        require_q(q)?;
        let w = self.r_gamma_pow(-q)?;
        let integrand: Vec<f64> = self
            .values
            .iter()
            .zip(&w)
            .map(|(&u, &w)| u.abs().powf(q) * w)
            .collect();
        self.grid.integrate(&integrand)
    }

    /// `∫ |u|^q / r_i^q dx` for one block radius.
    pub fn blockwise_hardy(&self, q: f64, axis: usize) -> Result<f64> {
        require_q(q)?;
        let m = self.grid.shape().len();
        if axis >= m {
            return Err(Error::IndexOutOfRange { index: axis, m });
        }
        let ax = &self.grid.axes()[axis];
        let pow: Vec<f64> = ax.nodes.iter().map(|&r| r.powf(-q)).collect();
        let mut integrand = vec![0.0; self.grid.len()];
        self.grid.for_each_node(|idx, mi| {
            integrand[idx] = self.values[idx].abs().powf(q) * pow[mi[axis]];
        });
        self.grid.integrate(&integrand)
    }

    /// `( ∫ (|u| / r_γ^e)^p dx )^{q/p}` with `e = |γ|(1/p - 1/q) + 1`.
    /// Collapses to the Hardy functional at `p = q` and to the unweighted
    /// Sobolev norm power at `p = q*`.
    pub fn ckn_functional(&self, p: f64, q: f64) -> Result<f64> {
        require_q(q)?;
        if !(p >= q) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need finite p >= q, got p = {p}, q = {q}"
            )));
        }
        let e = ckn_weight_exponent(self.grid.decomp(), p, q)?;
        let w = self.r_gamma_pow(-e)?;
        let integrand: Vec<f64> = self
            .values
            .iter()
            .zip(&w)
            .map(|(&u, &w)| (u.abs() * w).powf(p))
            .collect();
        Ok(self.grid.integrate(&integrand)?.powf(q / p))
    }

    /// `max_nodes r_γ^{|γ| - q} |u|^q`. Evaluated at nodes only, hence a
    /// lower bound of the true sup that tightens under refinement.
    pub fn strauss_sup(&self, q: f64) -> Result<f64> {
        require_q(q)?;
        let e = self.grid.decomp().total() as f64 - q;
        let w = self.r_gamma_pow(e)?;
        let mut sup = 0.0f64;
        for (idx, &u) in self.values.iter().enumerate() {
            sup = sup.max(w[idx] * u.abs().powf(q));
        }
        Ok(sup)
    }

    /// `max |u/r_γ| / max |∇u|`, the endpoint (q = ∞) ratio. Requires the
    /// boundary flag (the bound concerns fields vanishing near the singular
    /// set); a constant field has no gradient to compare against.
    pub fn linf_ratio(&self) -> Result<f64> {
        if !self.boundary {
            return Err(Error::InvalidParameter(
                "linf_ratio requires a field with the boundary flag set".into(),
            ));
        }
        let w = self.r_gamma_pow(-1.0)?;
        let mut num = 0.0f64;
        for (idx, &u) in self.values.iter().enumerate() {
            num = num.max((u * w[idx]).abs());
        }
        let grad = self.gradient();
        let mut den = 0.0f64;
        for idx in 0..self.grid.len() {
            let mut s = 0.0;
            for comp in &grad.comps {
                s += comp[idx] * comp[idx];
            }
            den = den.max(s);
        }
        let den = den.sqrt();
        if den == 0.0 {
            return Err(Error::UndefinedRatio(
                "zero gradient: constant field".into(),
            ));
        }
        Ok(num / den)
    }

    /// The two sides of the two-block weighted pair at parameter `β`
    /// (the right-hand side without its constant):
    /// `( ∫ |u|^q r_γ^{-(β+q)} dx , ∫ |∇u|^q r_γ^{-β} dx )`.
    /// Only defined for `m = 2`, where `(r_1^{γ_1-1} r_2^{γ_2-1})^{1/(|γ|-2)} = r_γ`.
    pub fn lemma2_pair(&self, q: f64, beta: f64) -> Result<(f64, f64)> {
        if self.grid.shape().len() != 2 {
            return Err(Error::InvalidDecomposition(format!(
                "two-block pair needs m = 2, got m = {}",
                self.grid.shape().len()
            )));
        }
        if !(q >= 2.0) {
            return Err(Error::InvalidParameter(format!("q = {q} must be >= 2")));
        }
        let w_lhs = self.r_gamma_pow(-(beta + q))?;
        let lhs_int: Vec<f64> = self
            .values
            .iter()
            .zip(&w_lhs)
            .map(|(&u, &w)| u.abs().powf(q) * w)
            .collect();
        let lhs = self.grid.integrate(&lhs_int)?;

        let grad = self.gradient();
        let w_rhs = self.r_gamma_pow(-beta)?;
        let mut rhs_int = vec![0.0; self.grid.len()];
        for idx in 0..self.grid.len() {
            let mut s = 0.0;
            for comp in &grad.comps {
                s += comp[idx] * comp[idx];
            }
            rhs_int[idx] = s.powf(q / 2.0) * w_rhs[idx];
        }
        let rhs = self.grid.integrate(&rhs_int)?;
        Ok((lhs, rhs))
    }

    /// Unweighted `∫ |u|^q dx` with the full Jacobian measure.
    pub fn lq_norm_pow(&self, q: f64) -> Result<f64> {
        require_q(q)?;
        let integrand: Vec<f64> = self.values.iter().map(|&u| u.abs().powf(q)).collect();
        self.grid.integrate(&integrand)
    }

    /// Writes the JSON-header + CSV-body file format.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        let spec = self.grid.spec();
        let header = FieldHeader {
            gammas: spec.gammas.clone(),
            r_min: spec.r_min,
            r_max: spec.r_max,
            nodes_per_axis: spec.nodes_per_axis,
            boundary_flag: self.boundary,
        };
        writeln!(
            w,
            "{}",
            serde_json::to_string(&header).map_err(|e| Error::Parse(e.to_string()))?
        )?;
        let row_len = *self.grid.shape().last().expect("at least one axis");
        for row in self.values.chunks(row_len) {
            let mut line = String::new();
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{v}"));
            }
            writeln!(w, "{line}")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the field file format written by [`Field::write_to`].
    pub fn read_from(path: &Path) -> Result<Field> {
        let file = std::fs::File::open(path)?;
        let mut reader = BufReader::new(file);
        let mut header_line = String::new();
        reader.read_line(&mut header_line)?;
        let header: FieldHeader = serde_json::from_str(header_line.trim())
            .map_err(|e| Error::Parse(format!("bad field header: {e}")))?;
        let spec = GridSpec {
            gammas: header.gammas,
            r_min: header.r_min,
            r_max: header.r_max,
            nodes_per_axis: header.nodes_per_axis,
        };
        let grid = Arc::new(ReducedGrid::from_spec(&spec)?);
        let mut values = Vec::with_capacity(grid.len());
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for tok in line.trim().split(',') {
                let v: f64 = tok
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad value {tok:?}: {e}")))?;
                values.push(v);
            }
        }
        if values.len() != grid.len() {
            return Err(Error::Parse(format!(
                "expected {} values, found {}",
                grid.len(),
                values.len()
            )));
        }
        Field::new(grid, values, header.boundary_flag)
    }
}

impl GradField {
    pub fn grid(&self) -> &Arc<ReducedGrid> {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.comps[axis]
    }

    pub fn num_axes(&self) -> usize {
        self.comps.len()
    }

    /// Pointwise Euclidean norm `|∇u|` at every node.
    pub fn pointwise_norm(&self) -> Vec<f64> {
        let n = self.grid.len();
        let mut out = vec![0.0; n];
        for idx in 0..n {
            let mut s = 0.0;
            for comp in &self.comps {
                s += comp[idx] * comp[idx];
            }
            out[idx] = s.sqrt();
        }
        out
    }
}

fn require_q(q: f64) -> Result<()> {
    if q >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("q = {q} must be >= 1")))
    }
}

/// Hölder interpolation bound between the Hardy and CKN endpoints:
/// for `q < σ < p`, the σ-functional is dominated by the stated product of
/// powers. Returns `(lhs, rhs)` so tests can assert `lhs <= rhs`.
pub fn ckn_interpolation_pair(field: &Field, q: f64, sigma: f64, p: f64) -> Result<(f64, f64)> {
    if !(q < sigma && sigma < p) {
        return Err(Error::InvalidParameter(format!(
            "need q < σ < p, got {q}, {sigma}, {p}"
        )));
    }
    let lambda = (1.0 / sigma - 1.0 / q) / (1.0 / p - 1.0 / q);
    // raw integrals (no outer powers)
    let e_sigma = ckn_weight_exponent(field.grid().decomp(), sigma, q)?;
    let e_p = ckn_weight_exponent(field.grid().decomp(), p, q)?;
    let int = |e: f64, pw: f64| -> Result<f64> {
        let w = field.r_gamma_pow(-e)?;
        let integrand: Vec<f64> = field
            .values()
            .iter()
            .zip(&w)
            .map(|(&u, &wv)| (u.abs() * wv).powf(pw))
            .collect();
        field.grid().integrate(&integrand)
    };
    let i_sigma = int(e_sigma, sigma)?;
    let i_q = int(1.0, q)?;
    let i_p = int(e_p, p)?;
    let rhs = i_q.powf(sigma * (1.0 - lambda) / q) * i_p.powf(sigma * lambda / p);
    Ok((i_sigma, rhs))
}

/// Deterministic sum used by tests comparing alternative reductions.
pub fn nodewise_sum(values: &[f64]) -> f64 {
    tree_sum(values)
}

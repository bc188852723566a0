//! Reduced-domain tensor grids over `(r_1, …, r_m) ∈ (0, ∞)^m` and
//! quadrature of full-space integrals of block-radial integrands.
//!
//! A full-space integral of a block-radial function reduces to
//!
//! ```text
//! ∫_{R^{|γ|}} f dx = Π_i |S^{γ_i - 1}| · ∫ … ∫ f(r) r_1^{γ_1-1} … r_m^{γ_m-1} dr
//! ```
//!
//! and we fix the normalization constant as exactly that product of unit
//! sphere areas. Nodes are log-uniform on `[r_min, r_max)`: the weights of
//! interest are power singularities at `r_i → 0` and the problems are
//! dilation invariant, so a log grid resolves every dyadic scale equally.
//! The grid is half-open in the log variable (`r_k = exp(s_0 + k h)`,
//! `h = log(r_max/r_min)/n`), which makes dyadic refinement nest exactly:
//! doubling the node count halves `h` and reproduces the original nodes
//! bit-for-bit. Quadrature is the trapezoid rule in the log variable, with
//! the integrand pre-multiplied by `r_i` times the Jacobian.

use crate::blockgeom::{sphere_area, BlockDecomposition};
use crate::error::{Error, Result};
use crate::util::tree_sum;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Maximum number of axes for tensor grids.
pub const MAX_AXES: usize = 3;
/// Maximum total node count.
pub const MAX_NODES: usize = 1 << 24;
/// Minimum nodes per axis.
pub const MIN_NODES_PER_AXIS: usize = 8;

/// Serializable grid specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub gammas: Vec<u32>,
    pub r_min: f64,
    pub r_max: f64,
    pub nodes_per_axis: usize,
}

/// One grid axis: log-uniform nodes with trapezoid weights in the log
/// variable and the cached per-node Jacobian factor `r^{γ_i - 1}`.
#[derive(Debug, Clone)]
pub struct Axis {
    pub nodes: Vec<f64>,
    /// Log-variable step.
    pub step: f64,
    /// Trapezoid weights in the log variable (`h/2` at the ends, `h` inside).
    pub log_weights: Vec<f64>,
    /// `r^{γ_i - 1}` per node.
    pub jacobian: Vec<f64>,
    /// Full per-node measure factor `w · r^{γ_i}` (log weight × Jacobian × r).
    pub measure: Vec<f64>,
}

impl Axis {
    /// First-derivative stencil (d/dr) at node `k`: two pairs of
    /// (node index within the line, coefficient). Central differences in
    /// the log variable on the interior, one-sided at the end layers, with
    /// the chain-rule factor `1/r` folded in.
    pub fn stencil(&self, k: usize) -> [(usize, f64); 2] {
        let n = self.nodes.len();
        let h = self.step;
        let r = self.nodes[k];
        if k == 0 {
            [(1, 1.0 / (h * r)), (0, -1.0 / (h * r))]
        } else if k == n - 1 {
            [(n - 1, 1.0 / (h * r)), (n - 2, -1.0 / (h * r))]
        } else {
            let c = 1.0 / (2.0 * h * r);
            [(k + 1, c), (k - 1, -c)]
        }
    }
}

/// Tensor-product grid over the reduced variables.
#[derive(Debug, Clone)]
pub struct ReducedGrid {
    decomp: BlockDecomposition,
    spec: GridSpec,
    axes: Vec<Axis>,
    /// `Π_i |S^{γ_i - 1}|`, the angular normalization constant.
    angular: f64,
    shape: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

/// Builds a log-uniform tensor grid. Deterministic.
pub fn build_grid(
    decomp: &BlockDecomposition,
    r_min: f64,
    r_max: f64,
    nodes_per_axis: usize,
) -> Result<ReducedGrid> {
    if !(r_min > 0.0 && r_min < r_max && r_max.is_finite()) {
        return Err(Error::InvalidRange { r_min, r_max });
    }
    if nodes_per_axis < MIN_NODES_PER_AXIS {
        return Err(Error::InvalidParameter(format!(
            "nodes_per_axis = {nodes_per_axis} < {MIN_NODES_PER_AXIS}"
        )));
    }
    let m = decomp.m();
    if m > MAX_AXES {
        return Err(Error::MemoryGuard(format!(
            "tensor grids support at most {MAX_AXES} axes, got m = {m}"
        )));
    }
    if (nodes_per_axis as f64).powi(m as i32) > MAX_NODES as f64 {
        return Err(Error::MemoryGuard(format!(
            "{nodes_per_axis}^{m} nodes exceeds the cap of {MAX_NODES}"
        )));
    }

    let s0 = r_min.ln();
    let h = (r_max.ln() - s0) / nodes_per_axis as f64;
    let mut axes = Vec::with_capacity(m);
    let mut angular = 1.0;
    for &g in decomp.gammas() {
        angular *= sphere_area(g)?;
        let nodes: Vec<f64> = (0..nodes_per_axis)
            .map(|k| (s0 + k as f64 * h).exp())
            .collect();
        let mut log_weights = vec![h; nodes_per_axis];
        log_weights[0] = h / 2.0;
        log_weights[nodes_per_axis - 1] = h / 2.0;
        let jacobian: Vec<f64> = nodes.iter().map(|&r| r.powi(g as i32 - 1)).collect();
        let measure: Vec<f64> = (0..nodes_per_axis)
            .map(|k| log_weights[k] * jacobian[k] * nodes[k])
            .collect();
        axes.push(Axis {
            nodes,
            step: h,
            log_weights,
            jacobian,
            measure,
        });
    }

    let shape = vec![nodes_per_axis; m];
    let mut strides = vec![1usize; m];
    for i in (0..m.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    let len = shape.iter().product();
    Ok(ReducedGrid {
        decomp: decomp.clone(),
        spec: GridSpec {
            gammas: decomp.gammas().to_vec(),
            r_min,
            r_max,
            nodes_per_axis,
        },
        axes,
        angular,
        shape,
        strides,
        len,
    })
}

impl ReducedGrid {
    pub fn from_spec(spec: &GridSpec) -> Result<ReducedGrid> {
        let decomp = BlockDecomposition::new(spec.gammas.clone())?;
        build_grid(&decomp, spec.r_min, spec.r_max, spec.nodes_per_axis)
    }

    pub fn decomp(&self) -> &BlockDecomposition {
        &self.decomp
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn angular_constant(&self) -> f64 {
        self.angular
    }

    /// Multi-index of a flat node index (row-major, last axis fastest).
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut mi = vec![0usize; self.shape.len()];
        for (i, &s) in self.strides.iter().enumerate() {
            mi[i] = idx / s;
            idx %= s;
        }
        mi
    }

    /// Radii at a flat node index.
    pub fn radii_at(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .zip(&self.axes)
            .map(|(&k, ax)| ax.nodes[k])
            .collect()
    }

    /// Whether the node lies on any face of the grid box (first or last
    /// layer of some axis). These are the Dirichlet truncation layers.
    pub fn is_face(&self, idx: usize) -> bool {
        self.multi_index(idx)
            .iter()
            .zip(&self.shape)
            .any(|(&k, &n)| k == 0 || k == n - 1)
    }

    /// Full measure weight of a node: angular constant × Π_i w_i r_i^{γ_i}.
    pub fn node_measure(&self, idx: usize) -> f64 {
        let mi = self.multi_index(idx);
        let mut w = self.angular;
        for (i, &k) in mi.iter().enumerate() {
            w *= self.axes[i].measure[k];
        }
        w
    }

    /// `r_γ` evaluated at a node.
    pub fn r_gamma_at(&self, idx: usize) -> f64 {
        let d = self.decomp.deficiency() as f64;
        let mi = self.multi_index(idx);
        let mut w = 1.0;
        for (i, &k) in mi.iter().enumerate() {
            let g = self.decomp.gammas()[i];
            if g > 1 {
                w *= self.axes[i].nodes[k].powf((g - 1) as f64 / d);
            }
        }
        w
    }

    /// Applies `f(flat_index, &multi_index)` over all nodes in flat order.
    pub fn for_each_node(&self, mut f: impl FnMut(usize, &[usize])) {
        let m = self.shape.len();
        let mut mi = vec![0usize; m];
        for idx in 0..self.len {
            f(idx, &mi);
            for a in (0..m).rev() {
                mi[a] += 1;
                if mi[a] < self.shape[a] {
                    break;
                }
                mi[a] = 0;
            }
        }
    }

    /// Iterates all grid lines along `axis`: calls `f(base, stride)` once
    /// per line; nodes of the line are `base + k*stride`, `k < shape[axis]`.
    pub fn for_each_line(&self, axis: usize, mut f: impl FnMut(usize, usize)) {
        let stride = self.strides[axis];
        let n = self.shape[axis];
        let block = stride * n;
        let lines = self.len / n;
        for line in 0..lines {
            let base = (line / stride) * block + (line % stride);
            f(base, stride);
        }
    }

    /// Full-space integral of a block-radial integrand sampled at the nodes:
    /// angular constant × Σ (log-trapezoid weight × Jacobian × value).
    /// Linear and monotone in the node values; the reduction is a fixed-order
    /// pairwise sum, so results are bit-identical across runs.
    pub fn integrate(&self, node_values: &[f64]) -> Result<f64> {
        if node_values.len() != self.len {
            return Err(Error::DimensionMismatch {
                expected: self.len,
                got: node_values.len(),
            });
        }
        let mut weighted = vec![0.0f64; self.len];
        let mut bad = None;
        self.for_each_node(|idx, mi| {
            let v = node_values[idx];
            if !v.is_finite() && bad.is_none() {
                bad = Some(idx);
            }
            let mut w = v;
            for (i, &k) in mi.iter().enumerate() {
                w *= self.axes[i].measure[k];
            }
            weighted[idx] = w;
        });
        if let Some(idx) = bad {
            return Err(Error::NonFinite(idx));
        }
        Ok(self.angular * tree_sum(&weighted))
    }

    /// Same-range grid with doubled node count per axis. Dyadic in the log
    /// variable: every original node reappears bit-identically.
    pub fn refine(&self) -> Result<ReducedGrid> {
        build_grid(
            &self.decomp,
            self.spec.r_min,
            self.spec.r_max,
            self.spec.nodes_per_axis * 2,
        )
    }
}

/// Convenience constructor returning a shared grid.
pub fn build_shared(
    decomp: &BlockDecomposition,
    r_min: f64,
    r_max: f64,
    nodes_per_axis: usize,
) -> Result<Arc<ReducedGrid>> {
    build_grid(decomp, r_min, r_max, nodes_per_axis).map(Arc::new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockgeom::BlockDecomposition;
    use approx::assert_relative_eq;

    fn d22() -> BlockDecomposition {
        BlockDecomposition::new(vec![2, 2]).unwrap()
    }

    #[test]
    fn construction_and_guards() {
        let g = build_grid(&d22(), 1e-3, 1e3, 64).unwrap();
        assert_eq!(g.len(), 64 * 64);
        assert!(build_grid(&d22(), 1.0, 1.0, 64).is_err());
        assert!(build_grid(&d22(), 10.0, 1.0, 64).is_err());
        assert!(build_grid(&d22(), 1e-3, 1e3, 4).is_err());
        let d4 = BlockDecomposition::new(vec![2, 2, 2, 2]).unwrap();
        assert!(matches!(
            build_grid(&d4, 1e-3, 1e3, 256),
            Err(Error::MemoryGuard(_))
        ));
    }

    #[test]
    fn zero_integrand_and_linearity() {
        let g = build_grid(&d22(), 1e-2, 1e2, 32).unwrap();
        let zeros = vec![0.0; g.len()];
        assert_eq!(g.integrate(&zeros).unwrap(), 0.0);

        let mut f = vec![0.0; g.len()];
        g.for_each_node(|idx, mi| {
            let r1 = g.axes()[0].nodes[mi[0]];
            let r2 = g.axes()[1].nodes[mi[1]];
            f[idx] = (-r1 * r1 - r2 * r2).exp() * (1.0 + r1);
        });
        let twice: Vec<f64> = f.iter().map(|v| 2.0 * v).collect();
        assert_eq!(g.integrate(&twice).unwrap(), 2.0 * g.integrate(&f).unwrap());
    }

    #[test]
    fn gaussian_integral_over_r4() {
        // ∫_{R^4} exp(-|x|²) dx = π²
        let mut g = build_grid(&d22(), 1e-3, 1e3, 128).unwrap();
        g = g.refine().unwrap().refine().unwrap(); // 512 per axis
        let mut f = vec![0.0; g.len()];
        g.for_each_node(|idx, mi| {
            let r1 = g.axes()[0].nodes[mi[0]];
            let r2 = g.axes()[1].nodes[mi[1]];
            f[idx] = (-r1 * r1 - r2 * r2).exp();
        });
        let val = g.integrate(&f).unwrap();
        let exact = std::f64::consts::PI.powi(2);
        assert!(
            (val - exact).abs() / exact < 1e-4,
            "got {val}, want {exact}"
        );
    }

    #[test]
    fn monotonicity() {
        let g = build_grid(&d22(), 1e-2, 1e2, 32).unwrap();
        let mut f = vec![0.0; g.len()];
        let mut h = vec![0.0; g.len()];
        for i in 0..g.len() {
            f[i] = (i % 7) as f64;
            h[i] = f[i] + ((i % 3) as f64);
        }
        assert!(g.integrate(&f).unwrap() <= g.integrate(&h).unwrap());
    }

    #[test]
    fn refine_doubles_and_nests_bitwise() {
        let g = build_grid(&d22(), 1e-3, 1e3, 64).unwrap();
        let r = g.refine().unwrap();
        assert_eq!(r.spec().nodes_per_axis, 128);
        let rr = r.refine().unwrap();
        assert_eq!(rr.len(), 256 * 256);
        for k in 0..64 {
            assert_eq!(
                g.axes()[0].nodes[k].to_bits(),
                r.axes()[0].nodes[2 * k].to_bits(),
                "node {k} does not nest"
            );
        }
    }

    #[test]
    fn quadrature_converges_at_second_order() {
        // Errors are measured against a deep refinement of the same window,
        // so the fixed mass outside [r_min, r_max] cancels and the trapezoid
        // h² term is what remains.
        let eval = |g: &ReducedGrid| -> f64 {
            let mut f = vec![0.0; g.len()];
            g.for_each_node(|idx, mi| {
                let r1 = g.axes()[0].nodes[mi[0]];
                let r2 = g.axes()[1].nodes[mi[1]];
                f[idx] = (-r1 * r1 - r2 * r2).exp();
            });
            g.integrate(&f).unwrap()
        };
        let mut grids = vec![build_grid(&d22(), 1e-3, 1e3, 64).unwrap()];
        for _ in 0..5 {
            grids.push(grids.last().unwrap().refine().unwrap());
        }
        let reference = eval(&grids[5]);
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        for g in &grids[..3] {
            errs.push((eval(g) - reference).abs());
            hs.push(g.axes()[0].step);
        }
        let order = crate::util::log_log_slope(&hs, &errs);
        assert!(
            (1.8..=2.2).contains(&order),
            "observed order {order}, errors {errs:?}"
        );
    }

    #[test]
    fn integrate_rejects_non_finite() {
        let g = build_grid(&d22(), 1e-2, 1e2, 16).unwrap();
        let mut f = vec![0.0; g.len()];
        f[3] = f64::NAN;
        assert!(matches!(g.integrate(&f), Err(Error::NonFinite(3))));
    }

    #[test]
    fn integrate_is_bit_deterministic() {
        let g = build_grid(&d22(), 1e-3, 1e3, 64).unwrap();
        let f: Vec<f64> = (0..g.len())
            .map(|i| ((i * 2654435761_usize) % 1024) as f64 * 1e-3)
            .collect();
        let a = g.integrate(&f).unwrap();
        let b = g.integrate(&f).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn grid_spec_json_round_trip() {
        let g = build_grid(&d22(), 1e-3, 1e3, 64).unwrap();
        let s = serde_json::to_string(g.spec()).unwrap();
        let back: GridSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(&back, g.spec());
    }
}

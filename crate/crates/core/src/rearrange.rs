//! Iterated spherical rearrangement of block-radial fields.
//!
//! For a radial profile, symmetric-decreasing rearrangement in a block
//! reduces to decreasing rearrangement of the axis values against the
//! measure `r^{γ_i - 1} dr`. Discretely we lay the (value, node-measure)
//! pairs out on the mass line, sort by value (stable, descending), and walk
//! the cells in increasing-r order, assigning each node the value the
//! sorted stream carries when the cell begins. This makes the weighted
//! rearrangement inequality against any decreasing weight *exact* for the
//! discrete sums — the direction the checks rely on — while mass and level
//! sets are preserved to one cell's resolution (exact on equal-measure
//! axes, `O(h)` otherwise).
//!
//! Inputs are expected nonnegative; rearrange `|u|` for signed data.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::ReducedGrid;
use crate::Result as CResult;

/// Axis nodes with per-node measure weights proportional to `r^{γ_i-1} dr`,
/// matching the grid quadrature.
#[derive(Debug, Clone)]
pub struct MeasureAxis {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MeasureAxis {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: nodes.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(
                "measure weights must be positive and finite".into(),
            ));
        }
        Ok(Self { nodes, weights })
    }

    /// The measure axis of one grid direction.
    pub fn from_grid(grid: &ReducedGrid, axis: usize) -> Result<Self> {
        if axis >= grid.shape().len() {
            return Err(Error::IndexOutOfRange {
                index: axis,
                m: grid.shape().len(),
            });
        }
        let ax = &grid.axes()[axis];
        MeasureAxis::new(ax.nodes.clone(), ax.measure.clone())
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Decreasing rearrangement of axis values against the axis measure:
/// nonincreasing along increasing r, equimeasurable with the input up to
/// one-cell resolution, idempotent.
pub fn rearrange_axis(values: &[f64], measure: &MeasureAxis) -> CResult<Vec<f64>> {
    let n = measure.nodes.len();
    if values.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite value".into()));
    }

    // stable sort of (value, measure) pairs, descending by value
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());

    // greedy reassignment: each cell takes the value the sorted stream
    // carries when the cell starts filling
    let mut out = vec![0.0; n];
    let mut piece = 0usize; // index into `order`
    let mut remaining = measure.weights[order[0]];
    for cell in 0..n {
        out[cell] = values[order[piece]];
        let mut need = measure.weights[cell];
        while need > 0.0 {
            if remaining > need {
                remaining -= need;
                break;
            }
            need -= remaining;
            piece += 1;
            if piece == n {
                // rounding drift at the very end of the mass line
                remaining = f64::INFINITY;
                piece = n - 1;
                break;
            }
            remaining = measure.weights[order[piece]];
        }
    }
    Ok(out)
}

/// Applies [`rearrange_axis`] axis by axis in order `1..m`, each pass with
/// the other coordinates fixed. The result is nonincreasing in every axis
/// (each pass preserves the monotonicity established by earlier ones).
pub fn iterated_rearrangement(field: &Field) -> CResult<Field> {
    let grid = field.grid().clone();
    let m = grid.shape().len();
    let mut values = field.values().to_vec();
    let mut line = Vec::new();
    for axis in 0..m {
        let measure = MeasureAxis::from_grid(&grid, axis)?;
        let n = grid.shape()[axis];
        let mut failed = None;
        grid.for_each_line(axis, |base, stride| {
            if failed.is_some() {
                return;
            }
            line.clear();
            for k in 0..n {
                line.push(values[base + k * stride]);
            }
            match rearrange_axis(&line, &measure) {
                Ok(sorted) => {
                    for (k, v) in sorted.into_iter().enumerate() {
                        values[base + k * stride] = v;
                    }
                }
                Err(e) => failed = Some(e),
            }
        });
        if let Some(e) = failed {
            return Err(e);
        }
    }
    // the rearranged field piles mass against the inner faces, so it is no
    // longer a Dirichlet-layer field
    Field::new(grid, values, false)
}

/// Gradient norms before and after rearrangement; the continuum inequality
/// says `after <= before`, discretely up to `O(h)` slack.
pub fn check_polya_szego(field: &Field, q: f64) -> CResult<(f64, f64)> {
    let before = field.grad_norm(q)?;
    let after = iterated_rearrangement(field)?.grad_norm(q)?;
    Ok((before, after))
}

/// Weighted-functional values before and after rearrangement. The weight
/// `1/r_γ^q` is decreasing along every axis, so the discrete scheme gives
/// `before <= after` exactly (to rounding).
pub fn check_hardy_littlewood(field: &Field, q: f64) -> CResult<(f64, f64)> {
    let before = field.hardy_functional(q)?;
    let after = iterated_rearrangement(field)?.hardy_functional(q)?;
    Ok((before, after))
}

/// Measure of the super-level set `{u > τ}` under the full grid quadrature.
pub fn level_set_measure(field: &Field, tau: f64) -> f64 {
    let grid = field.grid();
    let mut mass = 0.0;
    for (idx, &v) in field.values().iter().enumerate() {
        if v > tau {
            mass += grid.node_measure(idx);
        }
    }
    mass
}

//! Numerical laboratory for weighted Hardy and Caffarelli–Kohn–Nirenberg
//! inequalities on block-radial functions.
//!
//! A function on `R^N` is block-radial for a decomposition
//! `N = γ_1 + … + γ_m` when it depends only on the block radii
//! `r_1, …, r_m`. The crate evaluates the weighted functionals that appear
//! in the Hardy/CKN family for such functions on truncated log-spaced
//! tensor grids, estimates best constants variationally (generalized
//! eigenproblems at `q = 2`, normalized descent otherwise), and carries the
//! supporting machinery: the one-dimensional angular reduction, iterated
//! spherical rearrangement, and two explicit constructions (a concentrating
//! counterexample sequence and a supersolution certificate).
//!
//! Everything is deterministic: identical inputs produce bit-identical
//! results.

pub mod blockgeom;
pub mod error;
pub mod field;
pub mod grid;
mod linalg;
pub mod rearrange;
pub mod solve;
pub mod special;
pub mod sturm;
pub mod util;

pub use error::{Error, Result};

/// Crate version, stamped into reports for provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

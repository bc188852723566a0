//! Block decompositions of `R^N` and the closed-form exponent arithmetic
//! attached to them.
//!
//! A decomposition `γ = (γ_1, …, γ_m)` splits `R^{|γ|}` into `m` blocks of
//! dimensions `γ_i`. The central weight is the degree-1 homogeneous
//! function
//!
//! ```text
//! r_γ(x) = Π_i r_i(x)^{(γ_i - 1)/(|γ| - m)}
//! ```
//!
//! where `r_i` is the radius of the i-th block. Exponent identities
//! (`Σ σ_i = 1`, `Σ 1/p_k = 1`) are kept in exact rational arithmetic and
//! only converted to floating point at evaluation sites.

use crate::error::{Error, Result};
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use std::f64::consts::PI;

/// A block decomposition `γ = (γ_1, …, γ_m)` of `R^{|γ|}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockDecomposition {
    gammas: Vec<u32>,
}

impl BlockDecomposition {
    pub fn new(gammas: Vec<u32>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(Error::InvalidDecomposition("no blocks".into()));
        }
        if gammas.iter().any(|&g| g == 0) {
            return Err(Error::InvalidDecomposition(
                "every block dimension must be >= 1".into(),
            ));
        }
        Ok(Self { gammas })
    }

    pub fn gammas(&self) -> &[u32] {
        &self.gammas
    }

    /// Block count `m`.
    pub fn m(&self) -> usize {
        self.gammas.len()
    }

    /// Total dimension `|γ| = Σ γ_i`.
    pub fn total(&self) -> u32 {
        self.gammas.iter().sum()
    }

    /// Deficiency `d = |γ| - m`, the homogeneity denominator of the weight.
    pub fn deficiency(&self) -> u32 {
        self.total() - self.m() as u32
    }

    /// The weight and inequality operations need `1 < m < |γ|`, i.e. a
    /// genuinely multi-block decomposition with at least one block of
    /// dimension >= 2.
    pub fn require_weighted(&self) -> Result<()> {
        let m = self.m() as u32;
        if m <= 1 || m >= self.total() {
            return Err(Error::InvalidDecomposition(format!(
                "need 1 < m < |γ| for weighted operations, got m = {}, |γ| = {}",
                m,
                self.total()
            )));
        }
        Ok(())
    }

    /// Evaluates `r_γ = Π r_i^{(γ_i - 1)/(|γ| - m)}`; homogeneous of
    /// degree 1 under simultaneous scaling of all radii.
    pub fn weight_rgamma(&self, radii: &[f64]) -> Result<f64> {
        self.require_weighted()?;
        if radii.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                got: radii.len(),
            });
        }
        let d = self.deficiency() as f64;
        let mut w = 1.0;
        for (&g, &r) in self.gammas.iter().zip(radii) {
            if g > 1 {
                w *= r.powf((g - 1) as f64 / d);
            }
        }
        Ok(w)
    }

    /// The exponents `σ_i = (γ_i - 1)/(|γ| - m)`; they sum to 1 exactly.
    pub fn sigma_exponents(&self) -> Result<Vec<Ratio<i64>>> {
        self.require_weighted()?;
        let d = self.deficiency() as i64;
        Ok(self
            .gammas
            .iter()
            .map(|&g| Ratio::new((g as i64) - 1, d))
            .collect())
    }

    /// The cyclic Hölder exponents `p_k = 2(|γ| - m)/(γ_{k-1} + γ_k - 2)`
    /// over the blocks of dimension >= 2, taken in descending dimension
    /// order with `γ_0 = γ_j`. Their reciprocals sum to 1 exactly.
    ///
    /// Fails with [`Error::PairwisePathRequired`] when fewer than three
    /// blocks have dimension >= 2; those cases are covered by the two-block
    /// pairwise bound instead.
    pub fn holder_exponents(&self) -> Result<HolderExponents> {
        self.require_weighted()?;
        let mut order: Vec<usize> = (0..self.m()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(self.gammas[i]));
        let j = order.iter().filter(|&&i| self.gammas[i] >= 2).count();
        if j < 3 {
            return Err(Error::PairwisePathRequired { blocks_ge2: j });
        }
        let sorted: Vec<i64> = order[..j].iter().map(|&i| self.gammas[i] as i64).collect();
        let d = self.deficiency() as i64;
        let mut exponents = Vec::with_capacity(j);
        for k in 0..j {
            let prev = if k == 0 { sorted[j - 1] } else { sorted[k - 1] };
            exponents.push(Ratio::new(2 * d, prev + sorted[k] - 2));
        }
        Ok(HolderExponents { exponents, order })
    }
}

/// Result of [`BlockDecomposition::holder_exponents`]: the exponents for the
/// descending-dimension ordering, together with that ordering (indices into
/// the original `gammas`).
#[derive(Debug, Clone)]
pub struct HolderExponents {
    pub exponents: Vec<Ratio<i64>>,
    pub order: Vec<usize>,
}

impl HolderExponents {
    /// `Σ 1/p_k`, exact.
    pub fn reciprocal_sum(&self) -> Ratio<i64> {
        self.exponents
            .iter()
            .fold(Ratio::zero(), |acc, p| acc + p.recip())
    }
}

/// Lebesgue/target exponent pair with the derived critical exponents.
#[derive(Debug, Clone, Copy)]
pub struct ExponentSet {
    total: u32,
    m: u32,
    pub q: f64,
    /// Target exponent; may be `f64::INFINITY`.
    pub p: f64,
}

impl ExponentSet {
    pub fn new(decomp: &BlockDecomposition, q: f64, p: f64) -> Result<Self> {
        if !(q >= 1.0) {
            return Err(Error::InvalidParameter(format!("q = {q} must be >= 1")));
        }
        if !(p >= q) {
            return Err(Error::InvalidParameter(format!("p = {p} must be >= q = {q}")));
        }
        Ok(Self {
            total: decomp.total(),
            m: decomp.m() as u32,
            q,
            p,
        })
    }

    /// Sobolev-critical exponent `q* = q|γ|/(|γ| - q)`, defined for `q < |γ|`.
    pub fn q_star(&self) -> Option<f64> {
        let n = self.total as f64;
        (self.q < n).then(|| self.q * n / (n - self.q))
    }

    /// Block-critical exponent `q_m* = qm/(m - q)`, defined for `q < m`.
    pub fn qm_star(&self) -> Option<f64> {
        let m = self.m as f64;
        (self.q < m).then(|| self.q * m / (m - self.q))
    }

    /// Weight exponent `|γ|(1/p - 1/q) + 1`; equals 1 at `p = q` and 0 at
    /// `p = q*`.
    pub fn ckn_exponent(&self) -> f64 {
        let n = self.total as f64;
        let inv_p = if self.p.is_infinite() { 0.0 } else { 1.0 / self.p };
        n * (inv_p - 1.0 / self.q) + 1.0
    }
}

/// Classical one-block Hardy constant `(q/|n - q|)^q`.
///
/// The critical case `q = n` is excluded.
pub fn hardy_constant_1block(q: f64, n: u32) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must be >= 1")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    if q == n as f64 {
        return Err(Error::CriticalExponent(format!("q = n = {q} is excluded")));
    }
    Ok((q / (n as f64 - q).abs()).powf(q))
}

/// Closed-form upper bound for the best constant of the weighted Hardy
/// inequality, available for `1 <= q < 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EasyBound {
    Value(f64),
    /// For `q >= 2` only existence of a constant is known in closed form;
    /// use the numerical estimators in [`crate::solve`] instead.
    Unavailable,
}

/// `q^q / Π_{i: γ_i != 1} |q - γ_i|^{q(γ_i - 1)/(|γ| - m)}` for `1 <= q < 2`.
pub fn easy_constant_bound(decomp: &BlockDecomposition, q: f64) -> Result<EasyBound> {
    decomp.require_weighted()?;
    if !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must be >= 1")));
    }
    if q >= 2.0 {
        return Ok(EasyBound::Unavailable);
    }
    let d = decomp.deficiency() as f64;
    let mut denom = 1.0;
    for &g in decomp.gammas() {
        if g == 1 {
            continue;
        }
        let gap = (q - g as f64).abs();
        if gap == 0.0 {
            return Err(Error::Degenerate(format!(
                "q = γ_i = {q}: the bound is infinite"
            )));
        }
        denom *= gap.powf(q * (g - 1) as f64 / d);
    }
    Ok(EasyBound::Value(q.powf(q) / denom))
}

/// Weight exponent of the CKN functional, `|γ|(1/p - 1/q) + 1`.
pub fn ckn_weight_exponent(decomp: &BlockDecomposition, p: f64, q: f64) -> Result<f64> {
    ExponentSet::new(decomp, q, p).map(|e| e.ckn_exponent())
}

/// Γ(n/2) for integer `n >= 1`, by the half-integer recursion.
fn gamma_half(n: u32) -> f64 {
    let mut acc = if n % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut k = if n % 2 == 0 { 2 } else { 1 };
    while k + 2 <= n {
        acc *= k as f64 / 2.0;
        k += 2;
    }
    acc
}

/// Surface measure of the unit sphere in `R^n`: `2 π^{n/2} / Γ(n/2)`.
/// `sphere_area(1) = 2` (two points), `sphere_area(2) = 2π`.
pub fn sphere_area(n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("sphere dimension must be >= 1".into()));
    }
    Ok(2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n))
}

/// `Σ σ_i` as an exact rational; equals 1 for every valid decomposition.
pub fn sigma_sum(decomp: &BlockDecomposition) -> Result<Ratio<i64>> {
    Ok(decomp
        .sigma_exponents()?
        .iter()
        .fold(Ratio::zero(), |a, s| a + s))
}

pub fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    r.to_f64().expect("ratio representable as f64")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_traits::One;
    use proptest::prelude::*;

    fn d(gammas: &[u32]) -> BlockDecomposition {
        BlockDecomposition::new(gammas.to_vec()).unwrap()
    }

    #[test]
    fn weight_unit_radii() {
        assert_eq!(d(&[2, 2]).weight_rgamma(&[1.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn weight_2_2_hand_value() {
        // exponents (1/2, 1/2): 4^{1/2} * 1^{1/2} = 2
        assert_relative_eq!(d(&[2, 2]).weight_rgamma(&[4.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn weight_3_1_reduces_to_first_radius() {
        // exponents (2/2, 0/2) = (1, 0)
        let dec = d(&[3, 1]);
        for (r, s) in [(0.7, 3.0), (2.5, 0.0), (1e-3, 1e3)] {
            assert_relative_eq!(dec.weight_rgamma(&[r, s]).unwrap(), r);
        }
    }

    #[test]
    fn weight_rejects_dimension_mismatch_and_degenerate_m() {
        assert!(matches!(
            d(&[2, 2]).weight_rgamma(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        // m = 1 and m = |γ| both rejected
        assert!(d(&[4]).weight_rgamma(&[1.0]).is_err());
        assert!(d(&[1, 1, 1]).weight_rgamma(&[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn sigma_exponents_examples() {
        assert_eq!(
            d(&[3, 2]).sigma_exponents().unwrap(),
            vec![Ratio::new(2, 3), Ratio::new(1, 3)]
        );
        assert_eq!(
            d(&[2, 2]).sigma_exponents().unwrap(),
            vec![Ratio::new(1, 2), Ratio::new(1, 2)]
        );
    }

    #[test]
    fn holder_exponents_2_2_2() {
        let h = d(&[2, 2, 2]).holder_exponents().unwrap();
        assert_eq!(h.exponents, vec![Ratio::from(3); 3]);
        assert!(h.reciprocal_sum().is_one());
    }

    #[test]
    fn holder_exponents_4_2_2() {
        let h = d(&[4, 2, 2]).holder_exponents().unwrap();
        // descending order (4,2,2), |γ| - m = 5, γ_0 = 2:
        // p_1 = 10/4, p_2 = 10/4, p_3 = 10/2
        assert_eq!(
            h.exponents,
            vec![Ratio::new(5, 2), Ratio::new(5, 2), Ratio::from(5)]
        );
        assert!(h.reciprocal_sum().is_one());
        assert_eq!(h.order[0], 0); // the 4-block comes first
    }

    #[test]
    fn holder_needs_three_large_blocks() {
        assert!(matches!(
            d(&[2, 2, 1]).holder_exponents(),
            Err(Error::PairwisePathRequired { blocks_ge2: 2 })
        ));
    }

    #[test]
    fn hardy_constant_examples() {
        assert_eq!(hardy_constant_1block(2.0, 4).unwrap(), 1.0);
        assert_eq!(hardy_constant_1block(1.0, 2).unwrap(), 1.0);
        assert!(matches!(
            hardy_constant_1block(3.0, 3),
            Err(Error::CriticalExponent(_))
        ));
    }

    #[test]
    fn easy_bound_examples() {
        assert_eq!(
            easy_constant_bound(&d(&[2, 2]), 1.0).unwrap(),
            EasyBound::Value(1.0)
        );
        match easy_constant_bound(&d(&[3, 3]), 1.0).unwrap() {
            EasyBound::Value(v) => assert_relative_eq!(v, 0.5),
            EasyBound::Unavailable => panic!("expected closed form"),
        }
        assert_eq!(
            easy_constant_bound(&d(&[2, 2]), 2.0).unwrap(),
            EasyBound::Unavailable
        );
    }

    #[test]
    fn ckn_exponent_endpoints_and_example() {
        let dec = d(&[2, 2]);
        assert_eq!(ckn_weight_exponent(&dec, 2.0, 2.0).unwrap(), 1.0);
        let e = ExponentSet::new(&dec, 2.0, 2.0).unwrap();
        let qs = e.q_star().unwrap();
        assert_relative_eq!(ckn_weight_exponent(&dec, qs, 2.0).unwrap(), 0.0);
        // q = 1, p = q_m* = 2 on γ = (2,2): 4(1/2 - 1) + 1 = -1
        let e1 = ExponentSet::new(&dec, 1.0, 2.0).unwrap();
        assert_eq!(e1.qm_star().unwrap(), 2.0);
        assert_relative_eq!(ckn_weight_exponent(&dec, 2.0, 1.0).unwrap(), -1.0);
    }

    #[test]
    fn exponent_set_definedness() {
        let dec = d(&[2, 2]);
        let e = ExponentSet::new(&dec, 2.0, 3.0).unwrap();
        assert_eq!(e.q_star(), Some(4.0)); // 2*4/(4-2)
        assert_eq!(e.qm_star(), None); // q = m = 2
        let e5 = ExponentSet::new(&d(&[3, 3]), 5.0, 10.0).unwrap();
        assert_eq!(e5.q_star(), Some(30.0));
        assert_eq!(e5.qm_star(), None);
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(1).unwrap(), 2.0);
        assert_relative_eq!(sphere_area(2).unwrap(), 2.0 * PI);
        assert_relative_eq!(sphere_area(3).unwrap(), 4.0 * PI);
        assert_relative_eq!(sphere_area(4).unwrap(), 2.0 * PI * PI);
        assert!(sphere_area(0).is_err());
    }

    proptest! {
        #[test]
        fn weight_is_degree_one_homogeneous(
            r1 in 1e-6f64..1e6, r2 in 1e-6f64..1e6, lambda in 1e-3f64..1e3
        ) {
            let dec = d(&[3, 2]);
            let w = dec.weight_rgamma(&[r1, r2]).unwrap();
            let ws = dec.weight_rgamma(&[lambda * r1, lambda * r2]).unwrap();
            prop_assert!((ws - lambda * w).abs() <= 1e-12 * ws.abs().max(lambda * w.abs()));
        }

        #[test]
        fn sigma_and_holder_identities(gammas in proptest::collection::vec(1u32..=9, 3..=6)) {
            let dec = BlockDecomposition::new(gammas).unwrap();
            if dec.require_weighted().is_ok() {
                prop_assert!(sigma_sum(&dec).unwrap().is_one());
                if let Ok(h) = dec.holder_exponents() {
                    prop_assert!(h.reciprocal_sum().is_one());
                }
            }
        }

        #[test]
        fn biradial_weight_below_euclidean(r1 in 1e-8f64..1e8, r2 in 1e-8f64..1e8) {
            // For γ = (2,2): r_γ² = r₁ r₂ <= (r₁² + r₂²)/2, so the weight
            // 1/r_γ² dominates 1/(2|x|²) pointwise.
            let w = d(&[2, 2]).weight_rgamma(&[r1, r2]).unwrap();
            prop_assert!(w * w <= (r1 * r1 + r2 * r2) / 2.0 * (1.0 + 1e-12));
        }

        #[test]
        fn ckn_exponent_affine_in_inv_p(q in 1.0f64..3.0, t in 0.0f64..1.0) {
            let dec = d(&[3, 2]);
            let e = ExponentSet::new(&dec, q, q).unwrap();
            if let Some(qs) = e.q_star() {
                // interpolate 1/p between 1/q and 1/q*
                let inv_p = (1.0 - t) / q + t / qs;
                let p = 1.0 / inv_p;
                let got = ckn_weight_exponent(&dec, p, q).unwrap();
                prop_assert!((got - (1.0 - t)).abs() < 1e-9);
            }
        }
    }
}

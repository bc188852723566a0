//! Small numeric helpers: deterministic reductions, overflow-safe norms,
//! log-log fits, and a provenance hash.

/// Pairwise (tree) summation. The reduction order is fixed by the input
/// order alone, so results are bit-identical across runs and independent of
/// any chunking a caller might do for parallel evaluation.
pub fn tree_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    tree_sum(&xs[..mid]) + tree_sum(&xs[mid..])
}

/// Euclidean norm with pre-scaling by the max entry, so vectors with
/// entries near the overflow threshold still produce finite norms.
pub fn scaled_norm2(xs: &[f64]) -> f64 {
    let scale = xs.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let mut acc = 0.0;
    for &x in xs {
        let t = x / scale;
        acc += t * t;
    }
    scale * acc.sqrt()
}

/// Least-squares slope of `ln y` against `ln x`. All inputs must be positive.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2);
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = tree_sum(&lx) / lx.len() as f64;
    let my = tree_sum(&ly) / ly.len() as f64;
    let mut cov = 0.0;
    let mut var = 0.0;
    for i in 0..lx.len() {
        cov += (lx[i] - mx) * (ly[i] - my);
        var += (lx[i] - mx) * (lx[i] - mx);
    }
    cov / var
}

/// Observed order and Richardson-extrapolated limit from three estimates on
/// successively halved steps (coarse, medium, fine).
pub fn richardson(coarse: f64, medium: f64, fine: f64) -> (f64, f64) {
    let d1 = medium - coarse;
    let d2 = fine - medium;
    if d2 == 0.0 || d1 == 0.0 || d1.signum() != d2.signum() {
        // Converged to rounding level or non-monotone; the fine value is
        // already the best available.
        return (f64::NAN, fine);
    }
    let order = (d1 / d2).abs().ln() / std::f64::consts::LN_2;
    let extrapolated = fine + d2 / (2f64.powf(order) - 1.0);
    (order, extrapolated)
}

/// FNV-1a 64-bit hash, hex-encoded. Used to stamp reports with a short
/// fingerprint of the grid specification.
pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

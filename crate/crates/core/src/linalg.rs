//! Symmetric banded matrices, Cholesky factorization, and a deterministic
//! inverse power iteration for the smallest generalized eigenvalue of an
//! SPD pencil `(A, B)` with diagonal `B`.
//!
//! Everything here is sequential with fixed loop order, so repeated runs
//! are bit-identical.

use crate::error::{Error, Result};
use crate::util::scaled_norm2;

/// Lower-triangular storage of a symmetric banded matrix:
/// `data[j * (bw + 1) + d]` holds `A[j + d][j]` for `0 <= d <= bw`.
#[derive(Debug, Clone)]
pub struct SymBanded {
    pub n: usize,
    pub bw: usize,
    data: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= j && i - j <= self.bw);
        j * (self.bw + 1) + (i - j)
    }

    /// Accumulates `v` into `A[i][j]` (and by symmetry `A[j][i]`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        assert!(hi - lo <= self.bw, "entry ({i},{j}) outside bandwidth {}", self.bw);
        let s = self.slot(hi, lo);
        self.data[s] += v;
    }

    /// Reads `A[i][j]`, honoring symmetry; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        if hi - lo > self.bw {
            return 0.0;
        }
        self.data[self.slot(hi, lo)]
    }

    /// `y = A x` using the symmetric banded storage.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.n {
            let dmax = self.bw.min(self.n - 1 - j);
            let base = j * (self.bw + 1);
            let diag = self.data[base];
            y[j] += diag * x[j];
            for d in 1..=dmax {
                let v = self.data[base + d];
                if v != 0.0 {
                    y[j + d] += v * x[j];
                    y[j] += v * x[j + d];
                }
            }
        }
    }

    /// In-place banded Cholesky `A = L Lᵀ`. Fails on a non-positive pivot.
    pub fn cholesky(&mut self) -> Result<()> {
        let bw = self.bw;
        for j in 0..self.n {
            let start = j.saturating_sub(bw);
            let mut diag = self.data[self.slot(j, j)];
            for k in start..j {
                let l_jk = self.data[self.slot(j, k)];
                diag -= l_jk * l_jk;
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::DidNotConverge(format!(
                    "factorization breakdown at column {j}: pivot {diag}"
                )));
            }
            let l_jj = diag.sqrt();
            let sjj = self.slot(j, j);
            self.data[sjj] = l_jj;
            let imax = (j + bw).min(self.n - 1);
            for i in j + 1..=imax {
                let sij = self.slot(i, j);
                let mut s = self.data[sij];
                let kstart = start.max(i.saturating_sub(bw));
                for k in kstart..j {
                    s -= self.data[self.slot(i, k)] * self.data[self.slot(j, k)];
                }
                self.data[sij] = s / l_jj;
            }
        }
        Ok(())
    }

    /// Solves `L Lᵀ x = b` in place, assuming [`Self::cholesky`] has run.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let bw = self.bw;
        // forward: L y = b
        for i in 0..self.n {
            let start = i.saturating_sub(bw);
            let mut s = b[i];
            for k in start..i {
                s -= self.data[self.slot(i, k)] * b[k];
            }
            b[i] = s / self.data[self.slot(i, i)];
        }
        // backward: Lᵀ x = y
        for i in (0..self.n).rev() {
            let imax = (i + bw).min(self.n - 1);
            let mut s = b[i];
            for k in i + 1..=imax {
                s -= self.data[self.slot(k, i)] * b[k];
            }
            b[i] = s / self.data[self.slot(i, i)];
        }
    }
}

/// Outcome of the inverse power iteration.
#[derive(Debug, Clone)]
pub struct EigSolve {
    pub lambda: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Smallest generalized eigenvalue of `A x = λ B x` for SPD `A` and
/// positive diagonal `B`, by inverse iteration with a fixed all-ones start.
///
/// `apply_a` must multiply by the unfactored `A`; `chol` is the Cholesky
/// factorization of the same matrix. Stops when the scaled residual
/// `‖A y − λ B y‖ / ‖B y‖` drops below `tol`, or when the residual stops
/// improving (near-degenerate grid-scale mode pairs put a floor under it
/// long after the Rayleigh quotient has settled).
pub fn smallest_generalized_eig(
    apply_a: &dyn Fn(&[f64], &mut [f64]),
    chol: &SymBanded,
    b_diag: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<EigSolve> {
    let n = b_diag.len();
    assert_eq!(chol.n, n);
    if b_diag.iter().all(|&b| b == 0.0) {
        return Err(Error::InvalidParameter("singular mass: all-zero weight".into()));
    }
    let mut x = vec![1.0f64; n];
    let mut ay = vec![0.0f64; n];
    let mut by = vec![0.0f64; n];
    let mut lambda = f64::INFINITY;
    let mut residual = f64::INFINITY;
    let mut best_residual = f64::INFINITY;
    let mut stagnant = 0usize;
    let mut iterations = 0;

    for it in 1..=max_iter {
        iterations = it;
        // y = A^{-1} B x
        let mut y: Vec<f64> = x.iter().zip(b_diag).map(|(&xv, &b)| b * xv).collect();
        chol.solve_in_place(&mut y);

        apply_a(&y, &mut ay);
        for i in 0..n {
            by[i] = b_diag[i] * y[i];
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            num += y[i] * ay[i];
            den += y[i] * by[i];
        }
        if !(den > 0.0) || !den.is_finite() {
            return Err(Error::DidNotConverge(
                "mass norm collapsed during iteration".into(),
            ));
        }
        lambda = num / den;

        let mut res_vec = vec![0.0f64; n];
        for i in 0..n {
            res_vec[i] = ay[i] - lambda * by[i];
        }
        residual = scaled_norm2(&res_vec) / scaled_norm2(&by);

        // B-normalize for the next sweep
        let scale = den.sqrt();
        for i in 0..n {
            x[i] = y[i] / scale;
        }

        if residual <= tol {
            return Ok(EigSolve {
                lambda,
                vector: x,
                residual,
                iterations,
                converged: true,
            });
        }
        if residual > 0.5 * best_residual {
            stagnant += 1;
            if stagnant >= 8 {
                break;
            }
        } else {
            stagnant = 0;
        }
        best_residual = best_residual.min(residual);
    }
    let converged = residual <= tol;
    Ok(EigSolve {
        lambda,
        vector: x,
        residual,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_small_spd_system() {
        // A = tridiag(-1, 2, -1), n = 5
        let n = 5;
        let mut a = SymBanded::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i + 1 < n {
                a.add(i + 1, i, -1.0);
            }
        }
        let x_true = [1.0, -2.0, 3.0, 0.5, -1.5];
        let mut b = vec![0.0; n];
        a.matvec(&x_true, &mut b);
        let mut f = a.clone();
        f.cholesky().unwrap();
        f.solve_in_place(&mut b);
        for i in 0..n {
            assert!((b[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = SymBanded::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, -1.0);
        assert!(matches!(a.cholesky(), Err(Error::DidNotConverge(_))));
    }

    #[test]
    fn inverse_iteration_finds_smallest_dirichlet_mode() {
        // 1D Laplacian on n interior points: λ_min = (2 - 2cos(π/(n+1)))/h², B = I·h
        let n = 63;
        let h = 1.0 / (n as f64 + 1.0);
        let mut a = SymBanded::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0 / h);
            if i + 1 < n {
                a.add(i + 1, i, -1.0 / h);
            }
        }
        let b = vec![h; n];
        let mut f = a.clone();
        f.cholesky().unwrap();
        let apply = |x: &[f64], y: &mut [f64]| a.matvec(x, y);
        let sol = smallest_generalized_eig(&apply, &f, &b, 1e-10, 500).unwrap();
        let exact = (2.0 - 2.0 * (std::f64::consts::PI * h).cos()) / (h * h);
        assert!(sol.converged);
        assert!(
            (sol.lambda - exact).abs() / exact < 1e-9,
            "λ = {}, exact {}",
            sol.lambda,
            exact
        );
    }

    #[test]
    fn inverse_iteration_is_bit_deterministic() {
        let n = 40;
        let mut a = SymBanded::zeros(n, 2);
        for i in 0..n {
            a.add(i, i, 4.0 + (i % 3) as f64);
            if i + 2 < n {
                a.add(i + 2, i, -1.0);
            }
        }
        let b: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (i % 5) as f64).collect();
        let mut f = a.clone();
        f.cholesky().unwrap();
        let apply = |x: &[f64], y: &mut [f64]| a.matvec(x, y);
        let s1 = smallest_generalized_eig(&apply, &f, &b, 1e-12, 200).unwrap();
        let s2 = smallest_generalized_eig(&apply, &f, &b, 1e-12, 200).unwrap();
        assert_eq!(s1.lambda.to_bits(), s2.lambda.to_bits());
    }
}

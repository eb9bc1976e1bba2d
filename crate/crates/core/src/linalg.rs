//! Small dense kernels for symmetric positive definite systems.
//!
//! Matrices are row-major `Vec<F>` of size `m * m`. Only what the refit and
//! the nested-family evaluator need lives here.

use crate::scalar::Scalar;

/// Lower Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky<F> {
    m: usize,
    l: Vec<F>,
}

/// Outcome of a factorization attempt: `Err(rank)` carries the number of
/// pivots that survived the relative tolerance.
pub(crate) fn cholesky<F: Scalar>(a: &[F], m: usize) -> Result<Cholesky<F>, usize> {
    debug_assert_eq!(a.len(), m * m);
    let tol = F::rank_tol();
    let mut l = vec![F::zero(); m * m];
    let mut rank = 0;
    let mut deficient = false;
    for j in 0..m {
        let mut d = a[j * m + j];
        for t in 0..j {
            d -= l[j * m + t] * l[j * m + t];
        }
        let scale = a[j * m + j].abs().max(F::min_positive_value());
        if !(d > tol * scale) {
            // Dependent column: leave it out and keep counting the rank.
            deficient = true;
            continue;
        }
        rank += 1;
        let djj = d.sqrt();
        l[j * m + j] = djj;
        for i in (j + 1)..m {
            let mut s = a[i * m + j];
            for t in 0..j {
                s -= l[i * m + t] * l[j * m + t];
            }
            l[i * m + j] = s / djj;
        }
    }
    if deficient {
        Err(rank)
    } else {
        Ok(Cholesky { m, l })
    }
}

impl<F: Scalar> Cholesky<F> {
    pub(crate) fn solve(&self, b: &[F]) -> Vec<F> {
        let m = self.m;
        let mut x = b.to_vec();
        for i in 0..m {
            let mut s = x[i];
            for t in 0..i {
                s -= self.l[i * m + t] * x[t];
            }
            x[i] = s / self.l[i * m + i];
        }
        for i in (0..m).rev() {
            let mut s = x[i];
            for t in (i + 1)..m {
                s -= self.l[t * m + i] * x[t];
            }
            x[i] = s / self.l[i * m + i];
        }
        x
    }

    pub(crate) fn inverse(&self) -> Vec<F> {
        let m = self.m;
        let mut inv = vec![F::zero(); m * m];
        let mut e = vec![F::zero(); m];
        for j in 0..m {
            e.iter_mut().for_each(|v| *v = F::zero());
            e[j] = F::one();
            let col = self.solve(&e);
            for i in 0..m {
                inv[i * m + j] = col[i];
            }
        }
        // symmetrize round-off
        for i in 0..m {
            for j in (i + 1)..m {
                let v = (inv[i * m + j] + inv[j * m + i]) * F::of(0.5);
                inv[i * m + j] = v;
                inv[j * m + i] = v;
            }
        }
        inv
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration, stopping when the Rayleigh quotient changes by less than `tol`
/// relative.
pub(crate) fn power_iteration<F: Scalar>(a: &[F], m: usize, tol: F, max_iter: usize) -> F {
    if m == 0 {
        return F::zero();
    }
    let mut v = vec![F::one() / F::of(m as f64).sqrt(); m];
    let mut w = vec![F::zero(); m];
    let mut eig = F::zero();
    for _ in 0..max_iter {
        for i in 0..m {
            w[i] = (0..m).map(|j| a[i * m + j] * v[j]).sum();
        }
        let next: F = w.iter().zip(&v).map(|(&x, &y)| x * y).sum();
        let norm = w.iter().map(|&x| x * x).sum::<F>().sqrt();
        if norm == F::zero() {
            return F::zero();
        }
        for i in 0..m {
            v[i] = w[i] / norm;
        }
        if (next - eig).abs() <= tol * next.abs() {
            return next.max(eig);
        }
        eig = next;
    }
    eig
}

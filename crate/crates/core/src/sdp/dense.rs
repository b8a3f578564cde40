//! Dense real kernels for the interior-point method.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::linalg::C64;

pub(crate) const SQRT2: f64 = std::f64::consts::SQRT_2;

pub(crate) fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Lower triangle, column by column, off-diagonals scaled by `√2` so that
/// `svec(A)·svec(B) = tr[A B]`.
pub(crate) fn svec(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let mut v = DVector::zeros(svec_len(n));
    let mut k = 0;
    for j in 0..n {
        v[k] = m[(j, j)];
        k += 1;
        for i in j + 1..n {
            v[k] = SQRT2 * 0.5 * (m[(i, j)] + m[(j, i)]);
            k += 1;
        }
    }
    v
}

pub(crate) fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    debug_assert_eq!(v.len(), svec_len(n));
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        m[(j, j)] = v[k];
        k += 1;
        for i in j + 1..n {
            let x = v[k] / SQRT2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

/// Real `2n×2n` embedding `[[Re, −Im], [Im, Re]]` of a complex matrix.
pub(crate) fn embed_complex(m: &DMatrix<C64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = m[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Inverse of [`embed_complex`] on arbitrary symmetric matrices:
/// `((X11 + X22) + i(X21 − X12)) / 2`.
pub(crate) fn complexify(x: &DMatrix<f64>) -> DMatrix<C64> {
    let n = x.nrows() / 2;
    DMatrix::from_fn(n, n, |i, j| {
        C64::new(0.5 * (x[(i, j)] + x[(i + n, j + n)]), 0.5 * (x[(i + n, j)] - x[(i, j + n)]))
    })
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in j + 1..n {
            let a = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = a;
            m[(j, i)] = a;
        }
    }
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let mut s = m.clone();
    symmetrize(&mut s);
    SymmetricEigen::new(s).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

pub(crate) fn cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let mut s = m.clone();
    symmetrize(&mut s);
    Cholesky::new(s)
}

/// Cholesky factor of the Jacobi-equilibrated `D M D + δI`,
/// `D = diag(M)^{-1/2}`, increasing `δ` from `base` until it succeeds.
/// Equilibrating first keeps `δ` relative to each row; interior-point
/// Schur matrices have diagonals spread over many orders of magnitude.
pub(crate) struct ScaledCholesky {
    chol: Cholesky<f64, Dyn>,
    d: DVector<f64>,
}

impl ScaledCholesky {
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let x = self.chol.solve(&b.component_mul(&self.d));
        x.component_mul(&self.d)
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut sb = b.clone();
        for (i, mut row) in sb.row_iter_mut().enumerate() {
            row *= self.d[i];
        }
        let mut x = self.chol.solve(&sb);
        for (i, mut row) in x.row_iter_mut().enumerate() {
            row *= self.d[i];
        }
        x
    }
}

pub(crate) fn regularized_cholesky(m: &DMatrix<f64>, base: f64) -> Option<ScaledCholesky> {
    let n = m.nrows();
    let d = DVector::from_fn(n, |i, _| {
        let v = m[(i, i)];
        if v > 0.0 && v.is_finite() {
            1.0 / v.sqrt()
        } else {
            1.0
        }
    });
    let mut scaled = m.clone();
    for j in 0..n {
        for i in 0..n {
            scaled[(i, j)] *= d[i] * d[j];
        }
    }
    let mut delta = base;
    for _ in 0..12 {
        let mut s = scaled.clone();
        for i in 0..n {
            s[(i, i)] += delta;
        }
        if let Some(chol) = blocked_cholesky(s) {
            return Some(ScaledCholesky { chol, d });
        }
        delta = if delta == 0.0 { 1e-14 } else { delta * 100.0 };
    }
    None
}

const BLOCK: usize = 192;

/// Right-looking blocked Cholesky; trailing updates go through GEMM.
/// Returns the factor in nalgebra's wrapper by packing `L` back.
pub(crate) fn blocked_cholesky(mut a: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let n = a.nrows();
    if n <= 2 * BLOCK {
        return Cholesky::new(a);
    }
    let mut k = 0;
    while k < n {
        let b = BLOCK.min(n - k);
        let diag = a.view((k, k), (b, b)).clone_owned();
        let l11 = Cholesky::new(diag)?.unpack();
        a.view_mut((k, k), (b, b)).copy_from(&l11);
        let rest = n - k - b;
        if rest > 0 {
            // L21 = A21 L11^{-T}
            let a21 = a.view((k + b, k), (rest, b)).transpose();
            let l21t = l11.solve_lower_triangular(&a21)?;
            let l21 = l21t.transpose();
            // A22 -= L21 L21^T (lower part is what matters)
            let mut a22 = a.view_mut((k + b, k + b), (rest, rest));
            a22.gemm(-1.0, &l21, &l21t, 1.0);
            a.view_mut((k + b, k), (rest, b)).copy_from(&l21);
        }
        k += b;
    }
    for j in 0..n {
        for i in 0..j {
            a[(i, j)] = 0.0;
        }
    }
    Some(Cholesky::pack_dirty(a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_preserves_inner_product() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let b = DMatrix::from_row_slice(3, 3, &[0.5, -1.0, 0.0, -1.0, 2.0, 1.5, 0.0, 1.5, -3.0]);
        let direct = (&a * &b).trace();
        assert!((svec(&a).dot(&svec(&b)) - direct).abs() < 1e-12);
        assert!((smat(svec(&a).as_slice(), 3) - &a).norm() < 1e-14);
    }

    #[test]
    fn complex_embedding_round_trip() {
        let m = DMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(2.0, 0.0)]);
        let e = embed_complex(&m);
        assert!((complexify(&e) - &m).norm() < 1e-15);
    }

    #[test]
    fn blocked_cholesky_matches_reference() {
        let n = 500;
        let g = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 13) % 17) as f64 / 17.0 - 0.5);
        let mut a = &g * g.transpose();
        for i in 0..n {
            a[(i, i)] += n as f64;
        }
        let rhs = DVector::from_fn(n, |i, _| i as f64);
        let x = blocked_cholesky(a.clone()).unwrap().solve(&rhs);
        assert!((&a * &x - &rhs).norm() < 1e-8 * rhs.norm());
    }
}

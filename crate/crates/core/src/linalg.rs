//! Dense complex Hermitian linear algebra.
//!
//! Everything downstream (Choi matrices, states, Hamiltonians, SDP data)
//! is carried as a [`HermitianMatrix`]. Values are immutable once built and
//! every operation returns a fresh matrix.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative threshold used to decide the numerical rank of a PSD operator.
pub const SUPPORT_RTOL: f64 = 1e-9;

const EIG_MAX_ITER: usize = 10_000;

/// One factor of a bipartite system `A ⊗ B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

/// Dense complex matrix equal to its conjugate transpose.
#[derive(Clone, PartialEq)]
pub struct HermitianMatrix {
    m: DMatrix<C64>,
}

impl fmt::Debug for HermitianMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HermitianMatrix{:?}", self.m)
    }
}

impl HermitianMatrix {
    /// Builds a Hermitian matrix from a square complex matrix, replacing it
    /// by `(M + M†)/2`.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::Dimension("matrix must have dimension >= 1".into()));
        }
        Ok(Self::symmetrized(m))
    }

    pub(crate) fn symmetrized(m: DMatrix<C64>) -> Self {
        let adj = m.adjoint();
        Self { m: (m + adj) * C64::new(0.5, 0.0) }
    }

    pub fn from_real(m: DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|x| C64::new(x, 0.0)))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        assert!(!diag.is_empty(), "diagonal must be non-empty");
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self { m: DMatrix::from_diagonal(&v) }
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1);
        Self { m: DMatrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1);
        Self { m: DMatrix::zeros(dim, dim) }
    }

    /// Rank-one projector-like operator `|v⟩⟨v|` (not normalized).
    pub fn outer(v: &DVector<C64>) -> Self {
        Self::symmetrized(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    /// Real Hilbert–Schmidt inner product `Re tr[A B]`.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        assert_eq!(self.dim(), other.dim(), "inner product dimension mismatch");
        self.m.iter().zip(other.m.iter()).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { m: &self.m * C64::new(s, 0.0) }
    }

    pub fn transpose(&self) -> Self {
        Self { m: self.m.transpose() }
    }

    /// `X M X†` for an arbitrary (possibly rectangular) `X`.
    pub fn conjugate_by(&self, x: &DMatrix<C64>) -> Result<Self> {
        if x.ncols() != self.dim() {
            return Err(Error::Dimension(format!(
                "cannot conjugate a {0}x{0} matrix by a {1}x{2} matrix",
                self.dim(),
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(Self::symmetrized(x * &self.m * x.adjoint()))
    }

    /// Product `A B` as a general complex matrix.
    pub fn matmul(&self, other: &HermitianMatrix) -> DMatrix<C64> {
        &self.m * &other.m
    }

    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        Ok(eig_hermitian(self)?.min() >= -tol)
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(eig_hermitian(self)?.min())
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(eig_hermitian(self)?.max())
    }

    /// Returns an error if the matrix has an eigenvalue below `-tol`.
    pub fn ensure_psd(&self, tol: f64) -> Result<()> {
        let min = self.min_eigenvalue()?;
        if min < -tol {
            Err(Error::NotPsd { min_eigenvalue: min })
        } else {
            Ok(())
        }
    }

    /// Applies `f` to the spectrum.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Ok(eig_hermitian(self)?.reconstruct(f))
    }

    /// Principal square root of a PSD matrix; small negative eigenvalues
    /// (above `-tol`) are clipped to zero.
    pub fn sqrt_psd(&self, tol: f64) -> Result<Self> {
        let eig = eig_hermitian(self)?;
        if eig.min() < -tol {
            return Err(Error::NotPsd { min_eigenvalue: eig.min() });
        }
        Ok(eig.reconstruct(|x| x.max(0.0).sqrt()))
    }

    /// Orthogonal projector onto the eigenvectors with eigenvalue above
    /// `SUPPORT_RTOL · λ_max`.
    pub fn support_projector(&self) -> Result<Self> {
        let eig = eig_hermitian(self)?;
        let thr = support_threshold(eig.max());
        Ok(eig.reconstruct(|x| if x > thr { 1.0 } else { 0.0 }))
    }
}

pub(crate) fn support_threshold(lambda_max: f64) -> f64 {
    SUPPORT_RTOL * lambda_max.max(0.0)
}

impl<'a> Add<&'a HermitianMatrix> for &'a HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        assert_eq!(self.dim(), rhs.dim(), "addition dimension mismatch");
        HermitianMatrix { m: &self.m + &rhs.m }
    }
}

impl<'a> Sub<&'a HermitianMatrix> for &'a HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        assert_eq!(self.dim(), rhs.dim(), "subtraction dimension mismatch");
        HermitianMatrix { m: &self.m - &rhs.m }
    }
}

impl Neg for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn neg(self) -> HermitianMatrix {
        HermitianMatrix { m: -&self.m }
    }
}

impl Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, rhs: f64) -> HermitianMatrix {
        self.scale(rhs)
    }
}

/// Spectral decomposition `M = V diag(λ) V†` with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<C64>,
}

impl EigenDecomposition {
    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// `V diag(f(λ)) V†`.
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let fj = f(lam);
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= fj;
            }
        }
        HermitianMatrix::symmetrized(scaled * v.adjoint())
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eig_hermitian(m: &HermitianMatrix) -> Result<EigenDecomposition> {
    let dim = m.dim();
    let eig = SymmetricEigen::try_new(m.m.clone(), f64::EPSILON, EIG_MAX_ITER)
        .ok_or(Error::EigenConvergence { dim, max_iter: EIG_MAX_ITER })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(dim, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = DMatrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenDecomposition { eigenvalues, eigenvectors })
}

/// `tr[M_+]`, the sum of the positive eigenvalues.
pub fn positive_part_trace(m: &HermitianMatrix) -> Result<f64> {
    Ok(eig_hermitian(m)?.eigenvalues.iter().filter(|&&x| x > 0.0).sum())
}

/// Kronecker product of two general complex matrices.
pub fn kron_matrix(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

pub fn kron(a: &HermitianMatrix, b: &HermitianMatrix) -> HermitianMatrix {
    HermitianMatrix::symmetrized(a.m.kronecker(&b.m))
}

fn check_bipartite(m: &HermitianMatrix, dim_a: usize, dim_b: usize) -> Result<()> {
    if dim_a == 0 || dim_b == 0 || dim_a * dim_b != m.dim() {
        return Err(Error::Dimension(format!(
            "matrix of dimension {} is not a {}x{} bipartite operator",
            m.dim(),
            dim_a,
            dim_b
        )));
    }
    Ok(())
}

/// Traces out one factor of `A ⊗ B` and returns the operator on `keep`.
pub fn partial_trace(
    m: &HermitianMatrix,
    dim_a: usize,
    dim_b: usize,
    keep: Subsystem,
) -> Result<HermitianMatrix> {
    check_bipartite(m, dim_a, dim_b)?;
    let out = match keep {
        Subsystem::A => DMatrix::from_fn(dim_a, dim_a, |i, j| {
            (0..dim_b).map(|k| m.m[(i * dim_b + k, j * dim_b + k)]).sum()
        }),
        Subsystem::B => DMatrix::from_fn(dim_b, dim_b, |i, j| {
            (0..dim_a).map(|k| m.m[(k * dim_b + i, k * dim_b + j)]).sum()
        }),
    };
    Ok(HermitianMatrix::symmetrized(out))
}

/// Transposes the chosen tensor factor of `A ⊗ B`.
pub fn partial_transpose(
    m: &HermitianMatrix,
    dim_a: usize,
    dim_b: usize,
    subsystem: Subsystem,
) -> Result<HermitianMatrix> {
    check_bipartite(m, dim_a, dim_b)?;
    let n = m.dim();
    let mut out = DMatrix::zeros(n, n);
    for a1 in 0..dim_a {
        for b1 in 0..dim_b {
            for a2 in 0..dim_a {
                for b2 in 0..dim_b {
                    let (ra, rb, ca, cb) = match subsystem {
                        Subsystem::A => (a2, b1, a1, b2),
                        Subsystem::B => (a1, b2, a2, b1),
                    };
                    out[(ra * dim_b + rb, ca * dim_b + cb)] = m.m[(a1 * dim_b + b1, a2 * dim_b + b2)];
                }
            }
        }
    }
    Ok(HermitianMatrix { m: out })
}

/// Pseudo-inverse square root: eigenvalues above `tol` go to `λ^{-1/2}`,
/// the rest to zero.
pub fn pinv_sqrt(m: &HermitianMatrix, tol: f64) -> Result<HermitianMatrix> {
    let eig = eig_hermitian(m)?;
    if eig.min() < -tol.max(SUPPORT_RTOL * eig.max().abs()) {
        return Err(Error::NotPsd { min_eigenvalue: eig.min() });
    }
    Ok(eig.reconstruct(|x| if x > tol { 1.0 / x.sqrt() } else { 0.0 }))
}

/// True iff `ker A ⊆ ker B`, i.e. `supp B ⊆ supp A`, tested by the norm of
/// `B` compressed to the kernel of `A`.
pub fn support_contains(a: &HermitianMatrix, b: &HermitianMatrix, tol: f64) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "support test needs equal dimensions, got {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let ea = eig_hermitian(a)?;
    let eb_min = b.min_eigenvalue()?;
    let psd_tol = SUPPORT_RTOL * ea.max().abs().max(1.0);
    if ea.min() < -psd_tol {
        return Err(Error::NotPsd { min_eigenvalue: ea.min() });
    }
    if eb_min < -SUPPORT_RTOL * b.max_abs().max(1.0) {
        return Err(Error::NotPsd { min_eigenvalue: eb_min });
    }
    let kernel = ea.reconstruct(|x| if x > support_threshold(ea.max()) { 0.0 } else { 1.0 });
    let leak = HermitianMatrix::symmetrized(kernel.matmul(b) * kernel.as_matrix());
    let norm = leak.frobenius_norm();
    Ok(norm <= tol.max(SUPPORT_RTOL * b.max_abs()))
}

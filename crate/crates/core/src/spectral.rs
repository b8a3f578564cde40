//! Max-relative entropy and the operator interval `μ Γ^M ⪯ Γ^N ⪯ λ Γ^M`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::channel::ChoiMatrix;
use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, support_contains, support_threshold, HermitianMatrix, C64, SUPPORT_RTOL};
use crate::sdp::{AffineExpr, LinearMap, Model, Sense, SolveStatus, SolverOptions, VarKind};

/// Default tolerance of the support test, relative to the operator scale.
pub const DMAX_TOL: f64 = 1e-9;

/// `λ = exp D_max(Γ^N‖Γ^M)` and `μ = exp(−D_max(Γ^M‖Γ^N))` (or 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntervalBounds {
    pub ln_lambda: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl IntervalBounds {
    /// Validates `0 ≤ μ ≤ λ`; `λ` may be `+∞`.
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda > 0.0) || !(mu >= 0.0) || mu > lambda || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid interval: lambda={lambda}, mu={mu}")));
        }
        Ok(Self { ln_lambda: lambda.ln(), lambda, mu })
    }

    pub fn infinite() -> Self {
        Self { ln_lambda: f64::INFINITY, lambda: f64::INFINITY, mu: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.lambda.is_finite()
    }

    /// `λ` and `μ` agree to rounding, so the integral term vanishes.
    pub fn is_degenerate(&self) -> bool {
        self.is_finite() && self.lambda - self.mu <= 1e-12 * self.lambda
    }
}

fn scale_tol(tol: f64, m: &HermitianMatrix) -> f64 {
    tol * m.max_abs().max(1.0)
}

/// Compression of `a` and `b` to the support of `b`: returns
/// `(V† a V, eigenvalues of b on its support)`.
fn compress_to_support(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<(HermitianMatrix, Vec<f64>, DMatrix<C64>)> {
    let eb = eig_hermitian(b)?;
    let thr = support_threshold(eb.max());
    let idx: Vec<usize> = (0..b.dim()).filter(|&i| eb.eigenvalues[i] > thr).collect();
    if idx.is_empty() {
        return Err(Error::InvalidParameter("second operator is zero".into()));
    }
    let v = DMatrix::from_fn(b.dim(), idx.len(), |i, j| eb.eigenvectors[(i, idx[j])]);
    let vals = idx.iter().map(|&i| eb.eigenvalues[i]).collect();
    let compressed = HermitianMatrix::symmetrized(v.adjoint() * a.as_matrix() * &v);
    Ok((compressed, vals, v))
}

fn check_psd_pair(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("dmax needs equal dimensions, got {} and {}", a.dim(), b.dim())));
    }
    for m in [a, b] {
        let min = m.min_eigenvalue()?;
        if min < -SUPPORT_RTOL * m.max_abs().max(1.0) {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
    }
    Ok(())
}

/// `ln min{γ : A ⪯ γB}`, computed as `ln λ_max(B^{-1/2} A B^{-1/2})` on the
/// support of `B`; `+∞` when the support of `A` is not inside that of `B`.
pub fn dmax(a: &HermitianMatrix, b: &HermitianMatrix, tol: f64) -> Result<f64> {
    check_psd_pair(a, b)?;
    if !support_contains(b, a, scale_tol(tol, a))? {
        return Ok(f64::INFINITY);
    }
    let (ac, vals, _) = compress_to_support(a, b)?;
    let inv_sqrt: Vec<f64> = vals.iter().map(|v| 1.0 / v.sqrt()).collect();
    let k = DMatrix::from_fn(ac.dim(), ac.dim(), |i, j| ac.get(i, j) * inv_sqrt[i] * inv_sqrt[j]);
    let top = eig_hermitian(&HermitianMatrix::symmetrized(k))?.max();
    Ok(top.max(0.0).ln())
}

/// Interval for a Choi pair. `λ = +∞` signals `D(N‖M) = +∞`.
pub fn interval_for_pair(g_n: &ChoiMatrix, g_m: &ChoiMatrix) -> Result<IntervalBounds> {
    g_n.same_dims(g_m)?;
    let ln_lambda = dmax(g_n.op(), g_m.op(), DMAX_TOL)?;
    if !ln_lambda.is_finite() {
        return Ok(IntervalBounds::infinite());
    }
    let lambda = ln_lambda.exp();
    let reverse = dmax(g_m.op(), g_n.op(), DMAX_TOL)?;
    let mu = if reverse.is_finite() { (-reverse).exp().min(lambda) } else { 0.0 };
    Ok(IntervalBounds { ln_lambda, lambda, mu })
}

/// Same quantity as [`dmax`] from the program `min t s.t. tB − A ⪰ 0`,
/// posed on the support of `B`. Support violations are screened first and
/// reported as `+∞`.
pub fn dmax_sdp(a: &HermitianMatrix, b: &HermitianMatrix, opts: &SolverOptions) -> Result<f64> {
    check_psd_pair(a, b)?;
    if !support_contains(b, a, scale_tol(DMAX_TOL, a))? {
        return Ok(f64::INFINITY);
    }
    let (ac, vals, _) = compress_to_support(a, b)?;
    let bc = HermitianMatrix::from_real_diagonal(&vals);
    let sol = dmax_program(&ac, &bc).solve(opts)?;
    match sol.status {
        SolveStatus::Infeasible => Ok(f64::INFINITY),
        _ => {
            let sol = sol.require_optimal("max-relative entropy program")?;
            Ok(sol.primal_objective.ln())
        }
    }
}

/// `min t s.t. t·B − A ⪰ 0` without any preprocessing.
pub fn dmax_program(a: &HermitianMatrix, b: &HermitianMatrix) -> Model {
    let mut m = Model::new();
    let t = m.add_var(VarKind::Free);
    m.add_psd(AffineExpr::constant(-a).term(t, 1.0, LinearMap::Embed(b.clone())));
    m.set_objective(Sense::Min, AffineExpr::zero(1).var(t, 1.0));
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{amplitude_damping, choi_from_kraus, conjugated_output, depolarizing, identity};
    use crate::testutil::{random_state, rng};

    #[test]
    fn dmax_examples() {
        let mut r = rng(1);
        let b = random_state(&mut r, 3, 3);
        assert!(dmax(&b, &b, DMAX_TOL).unwrap().abs() < 1e-12);
        assert!((dmax(&b.scale(2.0), &b, DMAX_TOL).unwrap() - 2f64.ln()).abs() < 1e-12);
        let a = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]);
        let c = HermitianMatrix::from_real_diagonal(&[0.0, 1.0]);
        assert_eq!(dmax(&a, &c, DMAX_TOL).unwrap(), f64::INFINITY);
        assert!(dmax(&HermitianMatrix::from_real_diagonal(&[1.0, -1.0]), &b.scale(1.0), DMAX_TOL).is_err());
    }

    #[test]
    fn intervals_of_builtin_pairs() {
        let id = choi_from_kraus(&identity(2).unwrap());
        let iv = interval_for_pair(&id, &id).unwrap();
        assert!((iv.lambda - 1.0).abs() < 1e-12 && (iv.mu - 1.0).abs() < 1e-12);
        assert!(iv.is_degenerate());

        let full = choi_from_kraus(&depolarizing(2, 1.0).unwrap());
        let iv = interval_for_pair(&id, &full).unwrap();
        assert!((iv.lambda - 4.0).abs() < 1e-10);
        assert_eq!(iv.mu, 0.0);

        let half = choi_from_kraus(&depolarizing(2, 0.5).unwrap());
        let iv = interval_for_pair(&id, &half).unwrap();
        assert!((iv.lambda - 1.6).abs() < 1e-10);

        let ad = choi_from_kraus(&amplitude_damping(0.5).unwrap());
        let iv = interval_for_pair(&id, &ad).unwrap();
        assert!(!iv.is_finite());
        assert_eq!(iv.lambda, f64::INFINITY);
    }

    #[test]
    fn conjugation_invariance() {
        let mut r = rng(2);
        let n = choi_from_kraus(&amplitude_damping(0.4).unwrap());
        let m = choi_from_kraus(&depolarizing(2, 0.3).unwrap());
        let base = dmax(n.op(), m.op(), DMAX_TOL).unwrap();
        assert!(base.is_finite());
        for _ in 0..5 {
            let rho = random_state(&mut r, 2, 2);
            let cn = conjugated_output(&n, &rho).unwrap();
            let cm = conjugated_output(&m, &rho).unwrap();
            assert!((dmax(&cn, &cm, DMAX_TOL).unwrap() - base).abs() < 1e-8);
        }
    }

    #[test]
    fn sdp_route_examples() {
        let mut r = rng(4);
        let b = random_state(&mut r, 4, 4);
        let opts = SolverOptions::default();
        assert!(dmax_sdp(&b, &b, &opts).unwrap().abs() < 1e-6);
        assert!((dmax_sdp(&b.scale(3.0), &b, &opts).unwrap() - 3f64.ln()).abs() < 1e-6);
        let a = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]);
        let c = HermitianMatrix::from_real_diagonal(&[0.0, 1.0]);
        assert_eq!(dmax_sdp(&a, &c, &opts).unwrap(), f64::INFINITY);
    }

    #[test]
    fn interval_rejects_bad_values() {
        assert!(IntervalBounds::new(1.0, 2.0).is_err());
        assert!(IntervalBounds::new(-1.0, 0.0).is_err());
        assert!(IntervalBounds::new(f64::INFINITY, 0.0).is_ok());
    }
}

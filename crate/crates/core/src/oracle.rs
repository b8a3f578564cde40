//! Reference computations that do not go through the semidefinite programs.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{conjugated_output, ChoiMatrix};
use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, positive_part_trace, support_contains, support_threshold, HermitianMatrix, C64, SUPPORT_RTOL};
use crate::spectral::{dmax, interval_for_pair, DMAX_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    Eigendecomposition,
    Quadrature,
    BruteForce,
    ClassicalVertex,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub value: f64,
    #[serde(skip)]
    pub witness: Option<HermitianMatrix>,
    pub method: OracleMethod,
    pub iterations: usize,
    pub evaluations: usize,
    /// False when some restart stopped on the iteration cap.
    pub converged: bool,
}

fn psd_check(m: &HermitianMatrix) -> Result<()> {
    m.ensure_psd(SUPPORT_RTOL * m.max_abs().max(1.0))
}

/// `tr[ρ(ln ρ − ln σ)]` in nats; `+∞` when `supp ρ ⊄ supp σ`.
pub fn umegaki(rho: &HermitianMatrix, sigma: &HermitianMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension(format!("relative entropy needs equal dimensions, got {} and {}", rho.dim(), sigma.dim())));
    }
    psd_check(rho)?;
    psd_check(sigma)?;
    if !support_contains(sigma, rho, DMAX_TOL * rho.max_abs().max(1.0))? {
        return Ok(f64::INFINITY);
    }
    let er = eig_hermitian(rho)?;
    let thr_r = support_threshold(er.max());
    let entropy_term: f64 = er.eigenvalues.iter().filter(|&&p| p > thr_r).map(|&p| p * p.ln()).sum();
    let es = eig_hermitian(sigma)?;
    let thr_s = support_threshold(es.max());
    let log_sigma = es.reconstruct(|s| if s > thr_s { s.ln() } else { 0.0 });
    Ok(entropy_term - rho.inner(&log_sigma))
}

// 15-point Kronrod nodes on [0, 1] (symmetric half) with Kronrod and the
// embedded 7-point Gauss weights.
const XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod(f: &mut dyn FnMut(f64) -> Result<f64>, a: f64, b: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XK[i];
        let s = f(c - x)? + f(c + x)?;
        k += WK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    Ok((k * h, ((k - g) * h).abs()))
}

fn adaptive(f: &mut dyn FnMut(f64) -> Result<f64>, a: f64, b: f64, tol: f64, depth: usize) -> Result<f64> {
    let (v, err) = gauss_kronrod(f, a, b)?;
    if err <= tol || depth == 0 {
        return Ok(v);
    }
    let c = 0.5 * (a + b);
    Ok(adaptive(f, a, c, 0.5 * tol, depth - 1)? + adaptive(f, c, b, 0.5 * tol, depth - 1)?)
}

/// Lower end used when `μ = 0`, relative to `λ`; the neglected tail is at
/// most this times `λ·tr σ`.
pub const QUADRATURE_FLOOR: f64 = 1e-12;

/// `tr[ρ−σ] + ∫_μ^λ ds/s tr[(sσ−ρ)₊] + tr ρ·ln λ + tr σ·(1−λ)`, integrated in
/// `u = ln s` by adaptive Gauss–Kronrod. For unit-trace pairs the constant
/// is `ln λ + 1 − λ`.
pub fn integral_quadrature(rho: &HermitianMatrix, sigma: &HermitianMatrix, rel_tol: f64) -> Result<f64> {
    let ln_lambda = dmax(rho, sigma, DMAX_TOL)?;
    if !ln_lambda.is_finite() {
        return Err(Error::InfiniteDivergence);
    }
    let lambda = ln_lambda.exp();
    let rev = dmax(sigma, rho, DMAX_TOL)?;
    let mu = if rev.is_finite() { (-rev).exp() } else { 0.0 };
    let lo = mu.max(lambda * QUADRATURE_FLOOR).min(lambda);
    let (tr_r, tr_s) = (rho.trace(), sigma.trace());
    let base = tr_r - tr_s + tr_r * ln_lambda + tr_s * (1.0 - lambda);
    if lambda - lo <= 1e-14 * lambda {
        return Ok(base);
    }
    let mut integrand = |u: f64| -> Result<f64> {
        let s = u.exp();
        positive_part_trace(&(&sigma.scale(s) - rho))
    };
    let scale = tr_r.abs() + tr_s.abs() + 1.0;
    let integral = adaptive(&mut integrand, lo.ln(), ln_lambda, rel_tol * 1e-2 * scale, 40)?;
    Ok(base + integral)
}

/// `max_x KL(P_x ‖ Q_x)` for row-stochastic `P`, `Q`: the objective is
/// linear in the input distribution, so a point mass attains the maximum.
pub fn classical_kl_channel(p: &[Vec<f64>], q: &[Vec<f64>]) -> Result<OracleReport> {
    if p.len() != q.len() || p.is_empty() || p.iter().zip(q).any(|(a, b)| a.len() != b.len() || a.is_empty()) {
        return Err(Error::Dimension("transition matrices must have equal, non-empty shapes".into()));
    }
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (x, (px, qx)) in p.iter().zip(q).enumerate() {
        for row in [px, qx] {
            if row.iter().any(|&v| !(v >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("row {x} is not a probability vector")));
            }
        }
        let mut kl = 0.0;
        for (&a, &b) in px.iter().zip(qx) {
            if a > 0.0 {
                if b == 0.0 {
                    kl = f64::INFINITY;
                    break;
                }
                kl += a * (a / b).ln();
            }
        }
        if kl > best {
            best = kl;
            arg = x;
        }
    }
    let mut w = vec![0.0; p.len()];
    w[arg] = 1.0;
    Ok(OracleReport {
        value: best,
        witness: Some(HermitianMatrix::from_real_diagonal(&w)),
        method: OracleMethod::ClassicalVertex,
        iterations: 0,
        evaluations: p.len(),
        converged: true,
    })
}

#[derive(Clone, Debug)]
pub struct BruteForceOptions {
    pub n_restarts: usize,
    /// Relative finite-difference step.
    pub step: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        Self { n_restarts: 6, step: 1e-5, max_iter: 300, seed: 0 }
    }
}

/// Weight of the maximally mixed state mixed into witnesses before evaluation.
pub const WITNESS_PULL: f64 = 1e-8;

/// `D` of the pair conjugated by `ρ^{1/2} ⊗ 1`, without any nudging.
pub fn state_value(g_n: &ChoiMatrix, g_m: &ChoiMatrix, rho: &HermitianMatrix) -> Result<f64> {
    umegaki(&conjugated_output(g_n, rho)?, &conjugated_output(g_m, rho)?)
}

struct Objective<'a> {
    g_n: &'a ChoiMatrix,
    g_m: &'a ChoiMatrix,
    evaluations: usize,
}

impl Objective<'_> {
    fn factor(&self, theta: &DVector<f64>) -> DMatrix<C64> {
        let d = self.g_n.dim_a();
        let x = DMatrix::from_fn(d, d, |i, j| C64::new(theta[2 * (i * d + j)], theta[2 * (i * d + j) + 1]));
        let norm = x.norm();
        x / C64::new(norm, 0.0)
    }

    /// `D((X⊗1)Γ^N(X⊗1)† ‖ (X⊗1)Γ^M(X⊗1)†)`, which equals the value at the
    /// state `X†X` because `X = W·(X†X)^{1/2}` for a unitary `W`.
    fn value(&mut self, theta: &DVector<f64>) -> Result<f64> {
        self.evaluations += 1;
        let x = self.factor(theta);
        let lift = x.kronecker(&DMatrix::<C64>::identity(self.g_n.dim_b(), self.g_n.dim_b()));
        let a = self.g_n.op().conjugate_by(&lift)?;
        let b = self.g_m.op().conjugate_by(&lift)?;
        umegaki(&a, &b)
    }

    fn gradient(&mut self, theta: &DVector<f64>, rel_step: f64) -> Result<DVector<f64>> {
        let mut g = DVector::zeros(theta.len());
        let mut t = theta.clone();
        for i in 0..theta.len() {
            let h = rel_step * theta[i].abs().max(1.0);
            t[i] = theta[i] + h;
            let up = self.value(&t)?;
            t[i] = theta[i] - h;
            let down = self.value(&t)?;
            t[i] = theta[i];
            g[i] = (up - down) / (2.0 * h);
        }
        Ok(g)
    }

    fn witness(&self, theta: &DVector<f64>) -> HermitianMatrix {
        let x = self.factor(theta);
        HermitianMatrix::symmetrized(x.adjoint() * x)
    }
}

/// Maximizes `φ(ρ) = D((ρ^{1/2}⊗1)Γ^N(ρ^{1/2}⊗1) ‖ (ρ^{1/2}⊗1)Γ^M(ρ^{1/2}⊗1))`
/// over states `ρ = X†X / tr` by BFGS on the entries of `X` with central
/// differences, restarting from the maximally mixed state and from seeded
/// random factors. `φ` is concave, so the best restart is the maximum.
pub fn brute_force_channel_re(g_n: &ChoiMatrix, g_m: &ChoiMatrix, opts: &BruteForceOptions) -> Result<OracleReport> {
    g_n.same_dims(g_m)?;
    let d = g_n.dim_a();
    if !interval_for_pair(g_n, g_m)?.is_finite() {
        return Ok(OracleReport {
            value: f64::INFINITY,
            witness: None,
            method: OracleMethod::BruteForce,
            iterations: 0,
            evaluations: 0,
            converged: true,
        });
    }
    let mut obj = Objective { g_n, g_m, evaluations: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let nparam = 2 * d * d;
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut iterations = 0;
    let mut converged = true;
    for restart in 0..opts.n_restarts.max(1) {
        let start = if restart == 0 {
            DVector::from_fn(nparam, |k, _| if k % 2 == 0 && (k / 2) % (d + 1) == 0 { 1.0 } else { 0.0 })
        } else {
            DVector::from_fn(nparam, |_, _| rng.gen_range(-1.0..1.0))
        };
        let (v, theta, it, ok) = bfgs_maximize(&mut obj, start, opts)?;
        iterations += it;
        converged &= ok;
        if best.as_ref().map_or(true, |(bv, _)| v > *bv) {
            best = Some((v, theta));
        }
    }
    let (_, theta) = best.expect("at least one restart");
    let rho = obj.witness(&theta);
    let pulled = &rho.scale(1.0 - WITNESS_PULL) + &HermitianMatrix::identity(d).scale(WITNESS_PULL / d as f64);
    let value = state_value(g_n, g_m, &pulled)?;
    Ok(OracleReport {
        value,
        witness: Some(pulled),
        method: OracleMethod::BruteForce,
        iterations,
        evaluations: obj.evaluations,
        converged,
    })
}

fn bfgs_maximize(
    obj: &mut Objective<'_>,
    mut theta: DVector<f64>,
    opts: &BruteForceOptions,
) -> Result<(f64, DVector<f64>, usize, bool)> {
    let n = theta.len();
    // minimize −φ
    let mut fx = -obj.value(&theta)?;
    let mut g = -obj.gradient(&theta, opts.step)?;
    let mut hinv = DMatrix::<f64>::identity(n, n);
    for it in 0..opts.max_iter {
        if g.norm() <= 1e-9 * (1.0 + fx.abs()) {
            return Ok((-fx, theta, it, true));
        }
        let mut p = -(&hinv * &g);
        if p.dot(&g) >= 0.0 {
            hinv = DMatrix::identity(n, n);
            p = -g.clone();
        }
        let slope = p.dot(&g);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &theta + &p * step;
            let fc = -obj.value(&cand)?;
            if fc.is_finite() && fc <= fx + 1e-4 * step * slope {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, fc)) = accepted else {
            return Ok((-fx, theta, it, true));
        };
        let gc = -obj.gradient(&cand, opts.step)?;
        let s = &cand - &theta;
        let yv = &gc - &g;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            let rho = 1.0 / sy;
            let hy = &hinv * &yv;
            let yhy = yv.dot(&hy);
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        let improvement = fx - fc;
        theta = cand;
        fx = fc;
        g = gc;
        if improvement.abs() <= 1e-15 * (1.0 + fx.abs()) {
            return Ok((-fx, theta, it + 1, true));
        }
    }
    Ok((-fx, theta, opts.max_iter, false))
}

//! Lower and upper semidefinite bounds on `D(N‖M)`, the adaptive sandwich
//! driver, and the duality check for energy-constrained eigenvalue problems.
//!
//! Both programs use the integral representation on `[t_0, λ]`. For trace
//! preserving pairs the additive constant is `ln λ + 1 − λ` and the trace term
//! is `tr[(ρ⊗1)(Γ^N − Γ^M)]`. Otherwise the conjugated operators do not have
//! unit trace and the constant becomes `tr ρ'·ln λ + tr σ'·(1 − λ)`, which is
//! linear in `ρ_A`; it is folded into the trace term as
//! `tr[(ρ⊗1)((1+ln λ)Γ^N − λΓ^M)]` and the outside constant is zero.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::channel::ChoiMatrix;
use crate::error::{Error, Result};
use crate::grid::{
    build_grid_with, lower_coefficients, r_for_epsilon, upper_coefficients, Grid, GridOptions, GridScheme,
    LowerCoefficients, UpperCoefficients, FLOOR_RATIO,
};
use crate::linalg::{eig_hermitian, partial_trace, pinv_sqrt, HermitianMatrix, Subsystem, C64};
use crate::oracle::state_value;
use crate::sdp::{AffineExpr, LinearMap, Model, Residuals, Sense, SolveStatus, SolverOptions, VarId, VarKind};
use crate::spectral::{interval_for_pair, IntervalBounds};

/// `tr[Hρ] ≤ E`.
#[derive(Clone, Debug)]
pub struct EnergyConstraint {
    pub h: HermitianMatrix,
    pub e: f64,
}

impl EnergyConstraint {
    pub fn new(h: HermitianMatrix, e: f64) -> Result<Self> {
        let c = Self { h, e };
        c.check()?;
        Ok(c)
    }

    fn tol(&self) -> f64 {
        1e-9 * self.h.max_abs().max(1.0)
    }

    /// Errors when no state satisfies the constraint.
    pub fn check(&self) -> Result<f64> {
        let min = self.h.min_eigenvalue()?;
        if self.e < min - self.tol() {
            return Err(Error::InfeasibleEnergy { min_energy: min, bound: self.e });
        }
        Ok(min)
    }

    pub(crate) fn is_tight(&self) -> Result<bool> {
        Ok(self.e - self.check()? <= self.tol())
    }

    /// Every state satisfies the constraint.
    pub(crate) fn is_inactive(&self) -> Result<bool> {
        Ok(self.e >= self.h.max_eigenvalue()? - self.tol())
    }
}

/// Weight of the maximally mixed state mixed into witnesses before they are
/// evaluated.
pub const WITNESS_NUDGE: f64 = 1e-9;

/// Default cap on the grid size.
pub const R_CAP: usize = 256;

#[derive(Clone, Debug)]
pub struct BoundRequest {
    pub g_n: ChoiMatrix,
    pub g_m: ChoiMatrix,
    pub eps: f64,
    /// Starting grid size; `None` uses [`r_for_epsilon`].
    pub r_init: Option<usize>,
    pub r_cap: usize,
    pub scheme: GridScheme,
    pub energy: Vec<EnergyConstraint>,
    pub solver: SolverOptions,
    /// Replaces the computed interval, e.g. with an inflated `λ`.
    pub interval: Option<IntervalBounds>,
}

impl BoundRequest {
    pub fn new(g_n: ChoiMatrix, g_m: ChoiMatrix, eps: f64) -> Self {
        Self {
            g_n,
            g_m,
            eps,
            r_init: None,
            r_cap: R_CAP,
            scheme: GridScheme::Geometric,
            energy: Vec::new(),
            solver: SolverOptions::default(),
            interval: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Converged,
    RCapReached,
    InfiniteDivergence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Program {
    Lower,
    Upper,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveDiagnostics {
    pub program: Program,
    pub r: usize,
    pub status: SolveStatus,
    pub iterations: usize,
    pub residuals: Residuals,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Round {
    pub r: usize,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundResult {
    pub status: BoundStatus,
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    pub lambda: f64,
    pub mu: f64,
    pub r_used: usize,
    #[serde(skip)]
    pub witness_rho_a: Option<HermitianMatrix>,
    pub rounds: Vec<Round>,
    pub diagnostics: Vec<SolveDiagnostics>,
}

impl BoundResult {
    fn infinite() -> Self {
        Self {
            status: BoundStatus::InfiniteDivergence,
            lower: f64::INFINITY,
            upper: f64::INFINITY,
            gap: 0.0,
            lambda: f64::INFINITY,
            mu: 0.0,
            r_used: 0,
            witness_rho_a: None,
            rounds: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

#[derive(Clone, Debug)]
pub struct LowerBound {
    pub value: f64,
    pub witness_rho_a: HermitianMatrix,
    pub q_blocks: Vec<HermitianMatrix>,
    pub diagnostics: SolveDiagnostics,
}

#[derive(Clone, Debug)]
pub struct UpperBound {
    pub value: f64,
    pub x: f64,
    pub y: f64,
    /// `N_0, N_1, …` for the nodes that carry weight, then the floor block.
    pub n_blocks: Vec<HermitianMatrix>,
    pub diagnostics: SolveDiagnostics,
}

/// Pair after removing energy constraints that are inactive (`E ≥ λ_max(H)`)
/// or tight (`E = λ_min(H)`). Tight constraints force `ρ_A` onto the ground
/// space of `H`, so the Choi matrices are compressed to it.
pub(crate) struct Reduced {
    pub g_n: ChoiMatrix,
    pub g_m: ChoiMatrix,
    pub energy: Vec<EnergyConstraint>,
    pub isometry: Option<DMatrix<C64>>,
}

impl Reduced {
    pub fn lift(&self, rho: &HermitianMatrix) -> Result<HermitianMatrix> {
        match &self.isometry {
            Some(v) => rho.conjugate_by(v),
            None => Ok(rho.clone()),
        }
    }
}

fn compress_choi(g: &ChoiMatrix, v: &DMatrix<C64>) -> Result<ChoiMatrix> {
    let lift = v.adjoint().kronecker(&DMatrix::<C64>::identity(g.dim_b(), g.dim_b()));
    ChoiMatrix::new(v.ncols(), g.dim_b(), g.op().conjugate_by(&lift)?, g.is_trace_preserving())
}

pub(crate) fn reduce_energy(g_n: &ChoiMatrix, g_m: &ChoiMatrix, energy: &[EnergyConstraint]) -> Result<Reduced> {
    g_n.same_dims(g_m)?;
    let mut cur = Reduced { g_n: g_n.clone(), g_m: g_m.clone(), energy: energy.to_vec(), isometry: None };
    for c in &cur.energy {
        if c.h.dim() != cur.g_n.dim_a() {
            return Err(Error::Dimension(format!(
                "Hamiltonian has dimension {}, input space has {}",
                c.h.dim(),
                cur.g_n.dim_a()
            )));
        }
    }
    loop {
        let mut kept = Vec::with_capacity(cur.energy.len());
        for c in std::mem::take(&mut cur.energy) {
            if !c.is_inactive()? {
                kept.push(c);
            }
        }
        cur.energy = kept;
        let mut tight = None;
        for (i, c) in cur.energy.iter().enumerate() {
            if c.is_tight()? {
                tight = Some(i);
                break;
            }
        }
        let Some(i) = tight else { return Ok(cur) };
        let c = cur.energy.remove(i);
        let eig = eig_hermitian(&c.h)?;
        let ground: Vec<usize> = (0..c.h.dim()).filter(|&k| eig.eigenvalues[k] <= eig.min() + c.tol()).collect();
        let v = DMatrix::from_fn(c.h.dim(), ground.len(), |a, j| eig.eigenvectors[(a, ground[j])]);
        if ground.len() == c.h.dim() {
            continue;
        }
        cur.g_n = compress_choi(&cur.g_n, &v)?;
        cur.g_m = compress_choi(&cur.g_m, &v)?;
        cur.energy = cur
            .energy
            .into_iter()
            .map(|e| EnergyConstraint { h: e.h.conjugate_by(&v.adjoint()).expect("dimensions checked"), e: e.e })
            .collect();
        cur.isometry = Some(match cur.isometry {
            Some(prev) => prev * v,
            None => v,
        });
    }
}

fn both_tp(g_n: &ChoiMatrix, g_m: &ChoiMatrix) -> bool {
    g_n.is_trace_preserving() && g_m.is_trace_preserving()
}

/// Operator of the trace term on `A⊗B` and the constant outside the program.
fn trace_term(g_n: &ChoiMatrix, g_m: &ChoiMatrix, lambda: f64) -> (HermitianMatrix, f64) {
    if both_tp(g_n, g_m) {
        (g_n.op() - g_m.op(), lambda.ln() + 1.0 - lambda)
    } else {
        (&g_n.op().scale(1.0 + lambda.ln()) - &g_m.op().scale(lambda), 0.0)
    }
}

pub(crate) fn diagnostics(program: Program, r: usize, sol: &crate::sdp::SdpSolution, start: Instant) -> SolveDiagnostics {
    SolveDiagnostics {
        program,
        r,
        status: sol.status,
        iterations: sol.iterations,
        residuals: sol.residuals,
        primal_objective: sol.primal_objective,
        dual_objective: sol.dual_objective,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Projects a solver block onto the state space.
pub(crate) fn clean_state(rho: &HermitianMatrix) -> Result<HermitianMatrix> {
    let p = rho.map_spectrum(|v| v.max(0.0))?;
    let t = p.trace();
    if !(t > 0.0) {
        return Err(Error::Solver { status: SolveStatus::NumericalFailure, detail: "witness block vanished".into() });
    }
    Ok(p.scale(1.0 / t))
}

/// Residual level at which a stalled solve is still used; the returned
/// point is repaired to exact feasibility before evaluation.
pub const NEAR_OPTIMAL_TOL: f64 = 1e-6;

/// Mixes in a ground state of each remaining constraint until it holds.
/// Remaining constraints are not tight, so this always succeeds.
fn restore_energy(rho: HermitianMatrix, energy: &[EnergyConstraint]) -> Result<HermitianMatrix> {
    let mut rho = rho;
    for c in energy {
        let v = rho.inner(&c.h);
        if v <= c.e {
            continue;
        }
        let eig = eig_hermitian(&c.h)?;
        let g = HermitianMatrix::outer(&eig.eigenvectors.column(0).into_owned());
        let t = ((v - c.e) / (v - eig.min())).clamp(0.0, 1.0);
        rho = &rho.scale(1.0 - t) + &g.scale(t);
    }
    Ok(rho)
}

/// Nearest-in-spirit point of `{0 ⪯ Q ⪯ ρ⊗1}`: `Q` is whitened by
/// `(ρ⊗1)^{+1/2}`, clipped to `[0, 1]` and mapped back.
fn repair_q(q: &HermitianMatrix, rho: &HermitianMatrix, db: usize) -> Result<HermitianMatrix> {
    let id = DMatrix::<C64>::identity(db, db);
    let w = pinv_sqrt(rho, 1e-14)?.as_matrix().kronecker(&id);
    let s = rho.sqrt_psd(1e-12)?.as_matrix().kronecker(&id);
    q.conjugate_by(&w)?.map_spectrum(|v| v.clamp(0.0, 1.0))?.conjugate_by(&s)
}

/// `N ⪰ C` (and `N ⪰ 0` for PSD blocks) by adding negative parts.
pub(crate) fn repair_block(nb: &HermitianMatrix, c: &HermitianMatrix, psd: bool) -> Result<HermitianMatrix> {
    let mut out = nb + &(c - nb).map_spectrum(|v| v.max(0.0))?;
    if psd {
        out = &out + &out.map_spectrum(|v| (-v).max(0.0))?;
    }
    Ok(out)
}

fn nonzero(a: f64, b: f64) -> bool {
    a != 0.0 || b != 0.0
}

/// The maximization program with `ρ_A` and `0 ⪯ Q_k ⪯ ρ_A ⊗ 1`. Intervals
/// whose coefficients vanish get no block.
pub fn lower_program(
    g_n: &ChoiMatrix,
    g_m: &ChoiMatrix,
    grid: &Grid,
    coeffs: &LowerCoefficients,
    energy: &[EnergyConstraint],
) -> Result<(Model, VarId, Vec<VarId>, f64)> {
    g_n.same_dims(g_m)?;
    if coeffs.alpha.len() != grid.r() || coeffs.beta.len() != grid.r() {
        return Err(Error::InvalidParameter("lower coefficients do not match the grid".into()));
    }
    let (da, db, n) = (g_n.dim_a(), g_n.dim_b(), g_n.dim());
    let mut m = Model::new();
    let rho = m.add_var(VarKind::Psd(da));
    m.add_zero(AffineExpr::scalar_constant(-1.0).term(rho, 1.0, LinearMap::Trace(HermitianMatrix::identity(da))));
    for c in energy {
        m.add_psd(AffineExpr::scalar_constant(c.e).term(rho, -1.0, LinearMap::Trace(c.h.clone())));
    }
    let (t_op, constant) = trace_term(g_n, g_m, grid.lambda());
    let t_a = partial_trace(&t_op, da, db, Subsystem::A)?;
    let mut obj = AffineExpr::scalar_constant(constant).term(rho, 1.0, LinearMap::Trace(t_a));
    let mut qs = Vec::new();
    for (&a, &b) in coeffs.alpha.iter().zip(&coeffs.beta) {
        if !nonzero(a, b) {
            continue;
        }
        let q = m.add_var(VarKind::Psd(n));
        m.add_psd(AffineExpr::zero(n).term(rho, 1.0, LinearMap::KronRight(db)).var(q, -1.0));
        let c = &g_n.op().scale(a) + &g_m.op().scale(b);
        obj = obj.term(q, 1.0, LinearMap::Trace(c));
        qs.push(q);
    }
    m.set_objective(Sense::Max, obj);
    Ok((m, rho, qs, constant))
}

pub fn lower_bound(
    g_n: &ChoiMatrix,
    g_m: &ChoiMatrix,
    grid: &Grid,
    coeffs: &LowerCoefficients,
    energy: &[EnergyConstraint],
    opts: &SolverOptions,
) -> Result<LowerBound> {
    let red = reduce_energy(g_n, g_m, energy)?;
    let start = Instant::now();
    let (model, rho, qs, _) = lower_program(&red.g_n, &red.g_m, grid, coeffs, &red.energy)?;
    let sol = model.solve(opts)?;
    let diag = diagnostics(Program::Lower, grid.r(), &sol, start);
    let sol = sol.require_near_optimal("lower-bound program", NEAR_OPTIMAL_TOL)?;
    let rho_a = restore_energy(clean_state(sol.matrix(rho))?, &red.energy)?;
    let db = red.g_n.dim_b();
    let q_blocks = qs.iter().map(|&q| repair_q(sol.matrix(q), &rho_a, db)).collect::<Result<Vec<_>>>()?;
    let mut values = sol.values.clone();
    values[rho.index()] = rho_a.clone();
    for (&q, b) in qs.iter().zip(&q_blocks) {
        values[q.index()] = b.clone();
    }
    let value = model.evaluate(model.objective().0, &values)?.get(0, 0).re;
    Ok(LowerBound { value, witness_rho_a: red.lift(&rho_a)?, q_blocks, diagnostics: diag })
}

pub struct UpperVars {
    pub x: VarId,
    pub y: Option<VarId>,
    pub blocks: Vec<VarId>,
}

/// Adds `N_k ⪰ γ_kΓ^N + δ_kΓ^M` blocks to `m` for the weighted nodes. The
/// `Γ^M` side is an expression so free-set programs can pass a variable.
pub(crate) fn add_upper_blocks(
    m: &mut Model,
    g_n: &HermitianMatrix,
    g_m: &AffineExpr,
    tp: bool,
    lambda: f64,
    coeffs: &UpperCoefficients,
) -> Vec<VarId> {
    let n = g_n.dim();
    let mut blocks = Vec::new();
    let mut push = |m: &mut Model, kind: VarKind, gamma: f64, delta: f64| {
        let v = m.add_var(kind);
        let mut e = AffineExpr::constant(g_n.scale(-gamma)).var(v, 1.0);
        for t in g_m.terms() {
            e = e.term(t.var, -delta * t.coef, t.map.clone());
        }
        if let Some(c) = g_m.constant_term() {
            e = e.plus_constant(&c.scale(-delta));
        }
        m.add_psd(e);
        blocks.push(v);
    };
    for (k, (gamma, delta)) in block_weights(tp, lambda, coeffs).into_iter().enumerate() {
        let kind = if k == 0 { VarKind::Hermitian(n) } else { VarKind::Psd(n) };
        push(m, kind, gamma, delta);
    }
    blocks
}

/// `(γ, δ)` of each block in the order [`add_upper_blocks`] creates them:
/// the Hermitian block at node 0, nonzero nodes, then the floor block.
fn block_weights(tp: bool, lambda: f64, coeffs: &UpperCoefficients) -> Vec<(f64, f64)> {
    let mut out = vec![if tp { (1.0, -1.0) } else { (1.0 + lambda.ln(), -lambda) }];
    for k in 1..coeffs.gamma.len() {
        if nonzero(coeffs.gamma[k], coeffs.delta[k]) {
            out.push((coeffs.gamma[k], coeffs.delta[k]));
        }
    }
    if let Some(f) = coeffs.floor {
        if f.weight > 0.0 {
            out.push((-f.weight, f.weight * f.t));
        }
    }
    out
}

pub(crate) fn upper_block_rhs(
    g_n: &HermitianMatrix,
    g_m: &HermitianMatrix,
    tp: bool,
    lambda: f64,
    coeffs: &UpperCoefficients,
) -> Vec<HermitianMatrix> {
    block_weights(tp, lambda, coeffs).into_iter().map(|(a, b)| &g_n.scale(a) + &g_m.scale(b)).collect()
}

/// `x·1 + y·H ⪰ tr_B Σ N_k`, objective `min x + yE + constant`.
pub(crate) fn add_upper_coupling(
    m: &mut Model,
    dims: (usize, usize),
    blocks: &[VarId],
    energy: Option<&EnergyConstraint>,
    constant: f64,
) -> UpperVars {
    let (da, db) = dims;
    let x = m.add_var(VarKind::Free);
    let mut lmi = AffineExpr::zero(da).term(x, 1.0, LinearMap::Embed(HermitianMatrix::identity(da)));
    let mut obj = AffineExpr::scalar_constant(constant).var(x, 1.0);
    let y = energy.map(|c| {
        let y = m.add_var(VarKind::NonNeg);
        lmi = std::mem::replace(&mut lmi, AffineExpr::zero(da)).term(y, 1.0, LinearMap::Embed(c.h.clone()));
        obj = std::mem::replace(&mut obj, AffineExpr::zero(1)).var(y, c.e);
        y
    });
    for &b in blocks {
        lmi = lmi.term(b, -1.0, LinearMap::PartialTrace { dim_a: da, dim_b: db, keep: Subsystem::A });
    }
    m.add_psd(lmi);
    m.set_objective(Sense::Min, obj);
    UpperVars { x, y, blocks: blocks.to_vec() }
}

/// The minimization program. Without an energy constraint the variable `y`
/// is omitted, which is the `H = 1_A, E = 1` case with `y = 0` eliminated.
pub fn upper_program(
    g_n: &ChoiMatrix,
    g_m: &ChoiMatrix,
    grid: &Grid,
    coeffs: &UpperCoefficients,
    energy: Option<&EnergyConstraint>,
) -> Result<(Model, UpperVars)> {
    g_n.same_dims(g_m)?;
    if coeffs.gamma.len() != grid.r() + 1 || coeffs.delta.len() != grid.r() + 1 {
        return Err(Error::InvalidParameter("upper coefficients do not match the grid".into()));
    }
    let tp = both_tp(g_n, g_m);
    let (_, constant) = trace_term(g_n, g_m, grid.lambda());
    let mut m = Model::new();
    let blocks = add_upper_blocks(&mut m, g_n.op(), &AffineExpr::constant(g_m.op().clone()), tp, grid.lambda(), coeffs);
    let vars = add_upper_coupling(&mut m, (g_n.dim_a(), g_n.dim_b()), &blocks, energy, constant);
    Ok((m, vars))
}

pub fn upper_bound(
    g_n: &ChoiMatrix,
    g_m: &ChoiMatrix,
    grid: &Grid,
    coeffs: &UpperCoefficients,
    energy: Option<&EnergyConstraint>,
    opts: &SolverOptions,
) -> Result<UpperBound> {
    let red = reduce_energy(g_n, g_m, energy.map(std::slice::from_ref).unwrap_or(&[]))?;
    let start = Instant::now();
    let (model, vars) = upper_program(&red.g_n, &red.g_m, grid, coeffs, red.energy.first())?;
    let sol = model.solve(opts)?;
    let diag = diagnostics(Program::Upper, grid.r(), &sol, start);
    let sol = sol.require_near_optimal("upper-bound program", NEAR_OPTIMAL_TOL)?;
    let tp = both_tp(&red.g_n, &red.g_m);
    let rhs = upper_block_rhs(red.g_n.op(), red.g_m.op(), tp, grid.lambda(), coeffs);
    let n_blocks = vars
        .blocks
        .iter()
        .zip(&rhs)
        .enumerate()
        .map(|(k, (&b, c))| repair_block(sol.matrix(b), c, k > 0))
        .collect::<Result<Vec<_>>>()?;
    let (da, db) = (red.g_n.dim_a(), red.g_n.dim_b());
    let mut load = HermitianMatrix::zeros(da);
    for b in &n_blocks {
        load = &load + &partial_trace(b, da, db, Subsystem::A)?;
    }
    let y = vars.y.map_or(0.0, |y| sol.scalar(y).max(0.0));
    if let Some(c) = red.energy.first() {
        load = &load - &c.h.scale(y);
    }
    let x = load.max_eigenvalue()?;
    let (_, constant) = trace_term(&red.g_n, &red.g_m, grid.lambda());
    let value = x + y * red.energy.first().map_or(0.0, |c| c.e) + constant;
    Ok(UpperBound { value, x, y, n_blocks, diagnostics: diag })
}

/// Grid floor used by [`sandwich`] when `μ` is small: the node weight at the
/// floor is at most about `ln(λ/t_0)`, but the tail it covers is at most
/// `t_0·λ_max(tr_B Γ^M)`, kept below a quarter of `ε`.
pub fn sandwich_floor(g_m: &ChoiMatrix, interval: &IntervalBounds, eps: f64) -> Result<f64> {
    let top = g_m.marginal_a().max_eigenvalue()?.max(f64::MIN_POSITIVE);
    Ok((interval.lambda * FLOOR_RATIO).min(eps / (4.0 * top)))
}

/// Both programs at one grid size.
pub fn bounds_at(
    g_n: &ChoiMatrix,
    g_m: &ChoiMatrix,
    grid: &Grid,
    energy: &[EnergyConstraint],
    opts: &SolverOptions,
) -> Result<(LowerBound, UpperBound)> {
    let lc = lower_coefficients(grid)?;
    let uc = upper_coefficients(grid)?;
    let upper_energy = match energy {
        [] => None,
        [c] => Some(c),
        _ => return Err(Error::Unsupported("the upper bound accepts a single energy constraint".into())),
    };
    std::thread::scope(|s| {
        let up = s.spawn(|| upper_bound(g_n, g_m, grid, &uc, upper_energy, opts));
        let lo = lower_bound(g_n, g_m, grid, &lc, energy, opts);
        let up = up.join().expect("upper-bound solve panicked");
        Ok((lo?, up?))
    })
}

/// Doubles `r` from the starting size until `upper − lower ≤ ε` or the cap.
pub fn sandwich(req: &BoundRequest) -> Result<BoundResult> {
    if !(req.eps > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", req.eps)));
    }
    let red = reduce_energy(&req.g_n, &req.g_m, &req.energy)?;
    if red.energy.len() > 1 {
        return Err(Error::Unsupported(
            "the upper bound accepts a single energy constraint that is not tight".into(),
        ));
    }
    let interval = match req.interval {
        Some(iv) => iv,
        None => interval_for_pair(&red.g_n, &red.g_m)?,
    };
    if !interval.is_finite() {
        return Ok(BoundResult::infinite());
    }
    let floor = sandwich_floor(&red.g_m, &interval, req.eps)?;
    let mut r = match req.r_init {
        Some(r) => r.max(1),
        None => r_for_epsilon(&interval, req.eps)?,
    }
    .min(req.r_cap.max(1));
    let mut rounds = Vec::new();
    let mut diags = Vec::new();
    loop {
        let grid = build_grid_with(&interval, r, req.scheme, GridOptions { floor: Some(floor), anchor: None })?;
        let (lo, up) = bounds_at(&red.g_n, &red.g_m, &grid, &red.energy, &req.solver)?;
        diags.push(lo.diagnostics.clone());
        diags.push(up.diagnostics.clone());
        rounds.push(Round { r, lower: lo.value, upper: up.value });
        let gap = up.value - lo.value;
        let done = gap <= req.eps;
        if done || r >= req.r_cap {
            return Ok(BoundResult {
                status: if done { BoundStatus::Converged } else { BoundStatus::RCapReached },
                lower: lo.value,
                upper: up.value,
                gap,
                lambda: interval.lambda,
                mu: interval.mu,
                r_used: r,
                witness_rho_a: Some(red.lift(&lo.witness_rho_a)?),
                rounds,
                diagnostics: diags,
            });
        }
        r = (2 * r).min(req.r_cap);
    }
}

/// `max tr[J(ρ⊗1)]` over states with `tr[Hρ] ≤ E`, and
/// `min x + yE` subject to `x·1 + yH ⪰ tr_B J`, `y ≥ 0`.
#[derive(Clone, Debug)]
pub struct EnergyDualInstance {
    pub j: HermitianMatrix,
    pub dim_a: usize,
    pub dim_b: usize,
    pub h: HermitianMatrix,
    pub e: f64,
}

pub fn energy_dual_pair(inst: &EnergyDualInstance, opts: &SolverOptions) -> Result<(f64, f64)> {
    let (da, db) = (inst.dim_a, inst.dim_b);
    if inst.j.dim() != da * db || inst.h.dim() != da {
        return Err(Error::Dimension("instance dimensions do not match".into()));
    }
    let c = EnergyConstraint::new(inst.h.clone(), inst.e)?;
    let mut j_a = partial_trace(&inst.j, da, db, Subsystem::A)?;
    let mut h = inst.h.clone();
    let tight = c.is_tight()?;
    let drop_constraint = tight || c.is_inactive()?;
    if tight {
        // States on the ground space of H only; compress both sides to it.
        let eig = eig_hermitian(&inst.h)?;
        let ground: Vec<usize> = (0..da).filter(|&k| eig.eigenvalues[k] <= eig.min() + c.tol()).collect();
        let v = DMatrix::from_fn(da, ground.len(), |a, k| eig.eigenvectors[(a, ground[k])]);
        j_a = j_a.conjugate_by(&v.adjoint())?;
        h = h.conjugate_by(&v.adjoint())?;
    }
    let k = j_a.dim();

    let mut p = Model::new();
    let rho = p.add_var(VarKind::Psd(k));
    p.add_zero(AffineExpr::scalar_constant(-1.0).term(rho, 1.0, LinearMap::Trace(HermitianMatrix::identity(k))));
    if !drop_constraint {
        p.add_psd(AffineExpr::scalar_constant(inst.e).term(rho, -1.0, LinearMap::Trace(h.clone())));
    }
    p.set_objective(Sense::Max, AffineExpr::zero(1).term(rho, 1.0, LinearMap::Trace(j_a.clone())));
    let primal = p.solve(opts)?.require_optimal("energy-constrained primal")?.primal_objective;

    let mut d = Model::new();
    let x = d.add_var(VarKind::Free);
    let mut lmi = AffineExpr::constant(-&j_a).term(x, 1.0, LinearMap::Embed(HermitianMatrix::identity(k)));
    let mut obj = AffineExpr::zero(1).var(x, 1.0);
    if !drop_constraint {
        let y = d.add_var(VarKind::NonNeg);
        lmi = lmi.term(y, 1.0, LinearMap::Embed(h));
        obj = obj.var(y, inst.e);
    }
    d.add_psd(lmi);
    d.set_objective(Sense::Min, obj);
    let dual = d.solve(opts)?.require_optimal("energy-constrained dual")?.primal_objective;
    Ok((primal, dual))
}

/// Umegaki divergence of the pair conjugated by a state, after mixing in
/// `WITNESS_NUDGE` of the maximally mixed state.
pub fn evaluate_at_state(g_n: &ChoiMatrix, g_m: &ChoiMatrix, rho_a: &HermitianMatrix) -> Result<f64> {
    g_n.same_dims(g_m)?;
    let d = g_n.dim_a();
    if rho_a.dim() != d {
        return Err(Error::Dimension(format!("state has dimension {}, channel expects {d}", rho_a.dim())));
    }
    rho_a.ensure_psd(1e-8)?;
    if (rho_a.trace() - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!("state must have unit trace, got {}", rho_a.trace())));
    }
    let nudged = &rho_a.scale(1.0 - WITNESS_NUDGE) + &HermitianMatrix::identity(d).scale(WITNESS_NUDGE / d as f64);
    state_value(g_n, g_m, &nudged)
}

//! Minimization of `D(N‖M)` over SDP-representable free sets of channels.
//!
//! The upper-bound program is solved with `Γ^M` promoted to a variable
//! constrained by `tr_B Γ^M = 1_A` and the membership LMIs. The integral
//! representation needs a `λ` that bounds `Γ^N ⪯ λΓ^M`, and that bound moves
//! with `Γ^M`, so one caller-chosen `λ̄` is used for every member and the
//! restriction `Γ^N ⪯ λ̄Γ^M` is added. The result is an upper bound on the
//! infimum over the restricted set, paired with the lower bound evaluated at
//! the returned optimizer.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    add_upper_blocks, add_upper_coupling, clean_state, diagnostics, lower_bound, repair_block, sandwich_floor,
    upper_block_rhs, BoundStatus, EnergyConstraint, Program, Round, SolveDiagnostics, UpperVars, NEAR_OPTIMAL_TOL,
    R_CAP,
};
use crate::channel::{ChannelSpec, ChoiMatrix, MatrixJson};
use crate::error::{Error, Result};
use crate::grid::{
    build_grid_with, lower_coefficients, r_for_epsilon, upper_coefficients, Grid, GridOptions, GridScheme,
    UpperCoefficients,
};
use crate::linalg::{kron, partial_trace, HermitianMatrix, Subsystem, C64};
use crate::sdp::{AffineExpr, LinearMap, Model, SolverOptions, VarId, VarKind};
use crate::spectral::{interval_for_pair, IntervalBounds};

/// `C + Σ_j c_j L_j(Γ^M) ⪰ 0`.
#[derive(Clone, Debug)]
pub struct CustomLmi {
    pub constant: Option<HermitianMatrix>,
    pub terms: Vec<(f64, LinearMap)>,
}

#[derive(Clone, Debug)]
pub enum FreeSetKind {
    Fixed(ChoiMatrix),
    /// `Γ^M = 1_A ⊗ σ_B`.
    Replacer,
    /// `(Γ^M)^{T_B} ⪰ 0`.
    Ppt,
    Custom(Vec<CustomLmi>),
}

#[derive(Clone, Debug)]
pub struct FreeSetSpec {
    pub kind: FreeSetKind,
    /// Uniform bound with `Γ^N ⪯ λ̄Γ^M`; `None` uses [`default_lambda_bar`].
    pub lambda_bar: Option<f64>,
    /// Optional `Γ^M ⪰ δ·1`.
    pub delta_reg: f64,
}

impl FreeSetSpec {
    pub fn new(kind: FreeSetKind) -> Self {
        Self { kind, lambda_bar: None, delta_reg: 0.0 }
    }

    pub fn with_lambda_bar(mut self, lambda_bar: f64) -> Self {
        self.lambda_bar = Some(lambda_bar);
        self
    }

    fn validate(&self, g_n: &ChoiMatrix) -> Result<()> {
        if let Some(l) = self.lambda_bar {
            if !(l >= 1.0) || !l.is_finite() {
                return Err(Error::InvalidParameter(format!("lambda_bar must be finite and at least 1, got {l}")));
            }
        }
        let cap = 1.0 / g_n.dim() as f64;
        if !(self.delta_reg >= 0.0 && self.delta_reg < cap) {
            return Err(Error::InvalidParameter(format!("delta_reg must lie in [0, {cap}), got {}", self.delta_reg)));
        }
        match &self.kind {
            FreeSetKind::Fixed(m) => {
                g_n.same_dims(m)?;
                if !m.is_trace_preserving() {
                    return Err(Error::InvalidParameter("the fixed free channel must be trace preserving".into()));
                }
            }
            FreeSetKind::Custom(lmis) => {
                for (i, l) in lmis.iter().enumerate() {
                    let mut dim = l.constant.as_ref().map(HermitianMatrix::dim);
                    for (_, map) in &l.terms {
                        let d = map.output_dim(g_n.dim()).map_err(|e| Error::InvalidParameter(format!("lmis[{i}]: {e}")))?;
                        if *dim.get_or_insert(d) != d {
                            return Err(Error::Dimension(format!("lmis[{i}]: terms have different output dimensions")));
                        }
                    }
                    if dim.is_none() {
                        return Err(Error::InvalidParameter(format!("lmis[{i}] is empty")));
                    }
                }
            }
            FreeSetKind::Replacer | FreeSetKind::Ppt => {}
        }
        Ok(())
    }

    /// `λ̄` for this set: the explicit value, the exact `λ` for a fixed
    /// channel, and `dimA·dimB·λ_max(Γ^N)` otherwise.
    pub fn lambda_bar_for(&self, g_n: &ChoiMatrix) -> Result<f64> {
        if let Some(l) = self.lambda_bar {
            return Ok(l);
        }
        match &self.kind {
            FreeSetKind::Fixed(m) => Ok(interval_for_pair(g_n, m)?.lambda.max(1.0)),
            _ => default_lambda_bar(g_n),
        }
    }
}

/// `dimA·dimB·λ_max(Γ^N)`, at least 1. For the identity channel and the
/// replacer set the smallest admissible value is `d²`; this leaves room by a
/// factor `d`.
pub fn default_lambda_bar(g_n: &ChoiMatrix) -> Result<f64> {
    Ok((g_n.dim() as f64 * g_n.op().max_eigenvalue()?).max(1.0))
}

/// Term of a custom LMI in JSON. At most one of `left` and
/// `partial_transpose` may be given; neither means the identity map.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LmiTermJson {
    #[serde(default = "one")]
    pub coef: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<MatrixJson>,
    /// `"A"` or `"B"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial_transpose: Option<String>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LmiJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<MatrixJson>,
    pub terms: Vec<LmiTermJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FreeKindJson {
    Replacer,
    Ppt,
    Fixed { choi: ChannelSpec },
    Custom { lmis: Vec<LmiJson> },
    EntanglementBreaking,
    Separable,
}

/// Free-set descriptor, e.g. `{"kind":"replacer","lambda_bar":8}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FreeSetJson {
    #[serde(flatten)]
    pub kind: FreeKindJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_reg: Option<f64>,
}

impl FreeSetJson {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Resolves the descriptor for channels from `dim_a` to `dim_b`.
    pub fn to_spec(&self, dim_a: usize, dim_b: usize) -> Result<FreeSetSpec> {
        let kind = match &self.kind {
            FreeKindJson::Replacer => FreeSetKind::Replacer,
            FreeKindJson::Ppt => FreeSetKind::Ppt,
            FreeKindJson::Fixed { choi } => FreeSetKind::Fixed(choi.to_choi()?),
            FreeKindJson::Custom { lmis } => FreeSetKind::Custom(
                lmis.iter()
                    .enumerate()
                    .map(|(i, l)| lmi_from_json(l, dim_a, dim_b).map_err(|e| Error::InvalidParameter(format!("lmis[{i}]: {e}"))))
                    .collect::<Result<_>>()?,
            ),
            FreeKindJson::EntanglementBreaking | FreeKindJson::Separable => {
                return Err(Error::Unsupported(
                    "entanglement-breaking and separable channel sets have no semidefinite representation; \
                     use the PPT set as an outer relaxation or supply custom LMIs"
                        .into(),
                ))
            }
        };
        Ok(FreeSetSpec { kind, lambda_bar: self.lambda_bar, delta_reg: self.delta_reg.unwrap_or(0.0) })
    }
}

fn lmi_from_json(l: &LmiJson, dim_a: usize, dim_b: usize) -> Result<CustomLmi> {
    let constant = l.constant.as_ref().map(MatrixJson::to_hermitian).transpose()?;
    let terms = l
        .terms
        .iter()
        .map(|t| {
            let map = match (&t.left, t.partial_transpose.as_deref()) {
                (None, None) => LinearMap::Identity,
                (Some(k), None) => {
                    let rows = match k {
                        MatrixJson::Nested(r) => r.len(),
                        MatrixJson::Flat(v) => v.len() / (dim_a * dim_b).max(1),
                    };
                    LinearMap::Conjugate(k.to_matrix(rows, dim_a * dim_b)?)
                }
                (None, Some(s)) => {
                    let subsystem = match s {
                        "A" | "a" => Subsystem::A,
                        "B" | "b" => Subsystem::B,
                        other => return Err(Error::InvalidParameter(format!("unknown subsystem '{other}'"))),
                    };
                    LinearMap::PartialTranspose { dim_a, dim_b, subsystem }
                }
                (Some(_), Some(_)) => {
                    return Err(Error::InvalidParameter("a term takes either 'left' or 'partial_transpose'".into()))
                }
            };
            Ok((t.coef, map))
        })
        .collect::<Result<_>>()?;
    Ok(CustomLmi { constant, terms })
}

/// The free Choi matrix inside a model.
#[derive(Clone, Debug)]
pub enum FreeChoi {
    Constant(HermitianMatrix),
    /// `Γ^M = 1_A ⊗ σ_B` with `σ_B` a variable.
    Replacer(VarId),
    Full(VarId),
}

impl FreeChoi {
    fn expr(&self, dim_a: usize, n: usize) -> AffineExpr {
        match self {
            FreeChoi::Constant(c) => AffineExpr::constant(c.clone()),
            FreeChoi::Replacer(s) => AffineExpr::zero(n).term(*s, 1.0, LinearMap::KronLeft(dim_a)),
            FreeChoi::Full(g) => AffineExpr::zero(n).var(*g, 1.0),
        }
    }
}

pub struct FreeVars {
    pub upper: UpperVars,
    pub choi: FreeChoi,
}

/// `σ_B` for [`replacer_program`].
#[derive(Clone, Debug)]
pub enum SigmaB {
    Variable,
    Fixed(HermitianMatrix),
}

fn outside_constant(tp: bool, lambda: f64) -> f64 {
    if tp {
        lambda.ln() + 1.0 - lambda
    } else {
        0.0
    }
}

fn check_grid(grid: &Grid, coeffs: &UpperCoefficients) -> Result<()> {
    if coeffs.gamma.len() != grid.r() + 1 || coeffs.delta.len() != grid.r() + 1 {
        return Err(Error::InvalidParameter("upper coefficients do not match the grid".into()));
    }
    Ok(())
}

/// Shared tail: restriction, regularization, blocks and coupling.
fn finish_program(
    m: &mut Model,
    g_n: &ChoiMatrix,
    choi: FreeChoi,
    delta_reg: f64,
    grid: &Grid,
    coeffs: &UpperCoefficients,
    energy: Option<&EnergyConstraint>,
) -> Result<FreeVars> {
    let (da, db, n) = (g_n.dim_a(), g_n.dim_b(), g_n.dim());
    let lambda = grid.lambda();
    let gm = choi.expr(da, n);
    match &choi {
        FreeChoi::Constant(c) => {
            let slack = &c.scale(lambda) - g_n.op();
            if slack.min_eigenvalue()? < -1e-9 * lambda * c.max_abs().max(1.0) {
                return Err(Error::Infeasible(format!(
                    "the fixed channel violates Γ^N ⪯ λ̄Γ^M for λ̄ = {lambda}; increase lambda_bar"
                )));
            }
        }
        FreeChoi::Replacer(s) => {
            if delta_reg > 0.0 {
                m.add_psd(AffineExpr::constant(HermitianMatrix::identity(db).scale(-delta_reg)).var(*s, 1.0));
            }
            m.add_psd(scaled(&gm, lambda).plus_constant(&g_n.op().scale(-1.0)));
        }
        FreeChoi::Full(g) => {
            if delta_reg > 0.0 {
                m.add_psd(AffineExpr::constant(HermitianMatrix::identity(n).scale(-delta_reg)).var(*g, 1.0));
            }
            m.add_psd(scaled(&gm, lambda).plus_constant(&g_n.op().scale(-1.0)));
        }
    }
    let tp = g_n.is_trace_preserving();
    let blocks = add_upper_blocks(m, g_n.op(), &gm, tp, lambda, coeffs);
    let upper = add_upper_coupling(m, (da, db), &blocks, energy, outside_constant(tp, lambda));
    Ok(FreeVars { upper, choi })
}

fn scaled(e: &AffineExpr, s: f64) -> AffineExpr {
    let mut out = AffineExpr::zero(e.dim());
    for t in e.terms() {
        out = out.term(t.var, s * t.coef, t.map.clone());
    }
    if let Some(c) = e.constant_term() {
        out = out.plus_constant(&c.scale(s));
    }
    out
}

/// Upper-bound program over replacer channels `ω ↦ tr[ω]·σ_B`:
/// `N_k ⪰ γ_kΓ^N + δ_k(1_A ⊗ σ_B)`, `σ_B ⪰ 0`, `tr σ_B = 1`, together with
/// `Γ^N ⪯ λ̄(1_A ⊗ σ_B)` where `λ̄` is the top grid node.
pub fn replacer_program(
    g_n: &ChoiMatrix,
    sigma: &SigmaB,
    grid: &Grid,
    coeffs: &UpperCoefficients,
    energy: Option<&EnergyConstraint>,
    delta_reg: f64,
) -> Result<(Model, FreeVars)> {
    check_grid(grid, coeffs)?;
    let mut m = Model::new();
    let db = g_n.dim_b();
    let choi = match sigma {
        SigmaB::Fixed(s) => {
            if s.dim() != db {
                return Err(Error::Dimension(format!("sigma has dimension {}, output space has {db}", s.dim())));
            }
            FreeChoi::Constant(kron(&HermitianMatrix::identity(g_n.dim_a()), s))
        }
        SigmaB::Variable => {
            let s = m.add_var(VarKind::Psd(db));
            m.add_zero(AffineExpr::scalar_constant(-1.0).term(s, 1.0, LinearMap::Trace(HermitianMatrix::identity(db))));
            FreeChoi::Replacer(s)
        }
    };
    let vars = finish_program(&mut m, g_n, choi, delta_reg, grid, coeffs, energy)?;
    Ok((m, vars))
}

/// The upper-bound program with `Γ^M` ranging over the free set.
pub fn free_program(
    g_n: &ChoiMatrix,
    free: &FreeSetSpec,
    grid: &Grid,
    coeffs: &UpperCoefficients,
    energy: Option<&EnergyConstraint>,
) -> Result<(Model, FreeVars)> {
    free.validate(g_n)?;
    check_grid(grid, coeffs)?;
    let (da, db, n) = (g_n.dim_a(), g_n.dim_b(), g_n.dim());
    match &free.kind {
        FreeSetKind::Replacer => return replacer_program(g_n, &SigmaB::Variable, grid, coeffs, energy, free.delta_reg),
        FreeSetKind::Fixed(c) => {
            let mut m = Model::new();
            let vars = finish_program(&mut m, g_n, FreeChoi::Constant(c.op().clone()), 0.0, grid, coeffs, energy)?;
            return Ok((m, vars));
        }
        FreeSetKind::Ppt | FreeSetKind::Custom(_) => {}
    }
    let mut m = Model::new();
    let g = m.add_var(VarKind::Psd(n));
    m.add_zero(
        AffineExpr::constant(HermitianMatrix::identity(da).scale(-1.0))
            .term(g, 1.0, LinearMap::PartialTrace { dim_a: da, dim_b: db, keep: Subsystem::A }),
    );
    match &free.kind {
        FreeSetKind::Ppt => {
            m.add_psd(AffineExpr::zero(n).term(g, 1.0, LinearMap::PartialTranspose { dim_a: da, dim_b: db, subsystem: Subsystem::B }));
        }
        FreeSetKind::Custom(lmis) => {
            for l in lmis {
                let dim = l.constant.as_ref().map_or_else(|| l.terms[0].1.output_dim(n), |c| Ok(c.dim()))?;
                let mut e = match &l.constant {
                    Some(c) => AffineExpr::constant(c.clone()),
                    None => AffineExpr::zero(dim),
                };
                for (coef, map) in &l.terms {
                    e = e.term(g, *coef, map.clone());
                }
                m.add_psd(e);
            }
        }
        _ => unreachable!("handled above"),
    }
    let vars = finish_program(&mut m, g_n, FreeChoi::Full(g), free.delta_reg, grid, coeffs, energy)?;
    Ok((m, vars))
}

#[derive(Clone, Debug, Serialize)]
pub struct FreeOptResult {
    pub upper: f64,
    #[serde(skip)]
    pub optimizer_choi: ChoiMatrix,
    /// Lower bound on `D(N‖M*)` at the optimizer `M*`.
    pub matching_lower: f64,
    pub gap: f64,
    pub lambda_bar: f64,
    /// Exact `λ` of the pair `(N, M*)`.
    pub lambda_optimizer: f64,
    pub r: usize,
    pub diagnostics: Vec<SolveDiagnostics>,
}

/// Turns the solver's `Γ^M` into an exact channel: negative eigenvalues are
/// clipped and `tr_B` is renormalized to `1_A` by a local conjugation, which
/// keeps positivity of the partial transpose.
fn clean_choi(g: &HermitianMatrix, da: usize, db: usize) -> Result<ChoiMatrix> {
    let p = g.map_spectrum(|v| v.max(0.0))?;
    let t = partial_trace(&p, da, db, Subsystem::A)?;
    let x = t.map_spectrum(|v| if v > 0.0 { 1.0 / v.sqrt() } else { 0.0 })?;
    let lift = x.as_matrix().kronecker(&DMatrix::<C64>::identity(db, db));
    let op = p.conjugate_by(&lift)?;
    ChoiMatrix::new(da, db, op, true)
}

fn single_energy(g_n: &ChoiMatrix, energy: &[EnergyConstraint]) -> Result<Option<EnergyConstraint>> {
    let mut kept = Vec::new();
    for c in energy {
        if c.h.dim() != g_n.dim_a() {
            return Err(Error::Dimension(format!("Hamiltonian has dimension {}, input space has {}", c.h.dim(), g_n.dim_a())));
        }
        c.check()?;
        if c.is_inactive()? {
            continue;
        }
        if c.is_tight()? {
            return Err(Error::Unsupported("free-set optimization does not accept tight energy constraints".into()));
        }
        kept.push(c.clone());
    }
    if kept.len() > 1 {
        return Err(Error::Unsupported("free-set optimization accepts a single energy constraint".into()));
    }
    Ok(kept.pop())
}

/// Solves [`free_program`] and evaluates the lower bound at the optimizer
/// on a grid of the same size over the optimizer's exact interval.
pub fn min_over_free_upper(
    g_n: &ChoiMatrix,
    free: &FreeSetSpec,
    grid: &Grid,
    coeffs: &UpperCoefficients,
    energy: &[EnergyConstraint],
    opts: &SolverOptions,
) -> Result<FreeOptResult> {
    let c = single_energy(g_n, energy)?;
    let (da, db) = (g_n.dim_a(), g_n.dim_b());
    let lambda_bar = grid.lambda();
    let start = Instant::now();
    let (model, vars) = free_program(g_n, free, grid, coeffs, c.as_ref())?;
    let sol = model.solve(opts)?;
    let diag = diagnostics(Program::Upper, grid.r(), &sol, start);
    if sol.status == crate::sdp::SolveStatus::Infeasible {
        return Err(Error::Infeasible(format!(
            "no free channel satisfies Γ^N ⪯ λ̄Γ^M with λ̄ = {lambda_bar}; increase lambda_bar"
        )));
    }
    let sol = sol.require_near_optimal("free-set program", NEAR_OPTIMAL_TOL)?;
    let optimizer = match &vars.choi {
        FreeChoi::Constant(op) => ChoiMatrix::new(da, db, op.clone(), true)?,
        FreeChoi::Replacer(s) => {
            let sigma = clean_state(sol.matrix(*s))?;
            ChoiMatrix::new(da, db, kron(&HermitianMatrix::identity(da), &sigma), true)?
        }
        FreeChoi::Full(g) => clean_choi(sol.matrix(*g), da, db)?,
    };
    let interval = interval_for_pair(g_n, &optimizer)?;
    if interval.lambda > lambda_bar * (1.0 + 1e-6) {
        return Err(Error::Solver {
            status: sol.status,
            detail: format!("optimizer violates the restriction: λ = {} > λ̄ = {lambda_bar}", interval.lambda),
        });
    }

    // Certified value with Γ^M frozen at the optimizer.
    let tp = g_n.is_trace_preserving();
    let rhs = upper_block_rhs(g_n.op(), optimizer.op(), tp, lambda_bar, coeffs);
    let mut load = HermitianMatrix::zeros(da);
    for (k, (&b, c)) in vars.upper.blocks.iter().zip(&rhs).enumerate() {
        let nb = repair_block(sol.matrix(b), c, k > 0)?;
        load = &load + &partial_trace(&nb, da, db, Subsystem::A)?;
    }
    let y = vars.upper.y.map_or(0.0, |y| sol.scalar(y).max(0.0));
    if let Some(c) = &c {
        load = &load - &c.h.scale(y);
    }
    let upper = load.max_eigenvalue()? + y * c.as_ref().map_or(0.0, |c| c.e) + outside_constant(tp, lambda_bar);

    let mut diags = vec![diag];
    let matching_lower = if interval.is_finite() {
        let eps = (upper.abs() * 1e-3).max(1e-6);
        let floor = sandwich_floor(&optimizer, &interval, eps)?;
        let g = build_grid_with(&interval, grid.r(), grid.scheme(), GridOptions { floor: Some(floor), anchor: None })?;
        let lo = lower_bound(g_n, &optimizer, &g, &lower_coefficients(&g)?, energy, opts)?;
        diags.push(lo.diagnostics.clone());
        lo.value
    } else {
        f64::INFINITY
    };
    Ok(FreeOptResult {
        upper,
        optimizer_choi: optimizer,
        matching_lower,
        gap: upper - matching_lower,
        lambda_bar,
        lambda_optimizer: interval.lambda,
        r: grid.r(),
        diagnostics: diags,
    })
}

/// Grid for a free-set problem: `[floor, λ̄]` with a node at 1, where the
/// integrand of a free channel `N` against itself has its kink.
pub fn free_grid(lambda_bar: f64, r: usize, scheme: GridScheme, eps: f64) -> Result<Grid> {
    let interval = IntervalBounds::new(lambda_bar, 0.0)?;
    let floor = (lambda_bar * crate::grid::FLOOR_RATIO).min(eps / 4.0);
    build_grid_with(&interval, r, scheme, GridOptions { floor: Some(floor), anchor: Some(1.0) })
}

#[derive(Clone, Debug)]
pub struct FreeRequest {
    pub g_n: ChoiMatrix,
    pub free: FreeSetSpec,
    pub eps: f64,
    pub r_init: Option<usize>,
    pub r_cap: usize,
    pub scheme: GridScheme,
    pub energy: Vec<EnergyConstraint>,
    pub solver: SolverOptions,
}

impl FreeRequest {
    pub fn new(g_n: ChoiMatrix, free: FreeSetSpec, eps: f64) -> Self {
        Self {
            g_n,
            free,
            eps,
            r_init: None,
            r_cap: R_CAP,
            scheme: GridScheme::Geometric,
            energy: Vec::new(),
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FreeRun {
    pub status: BoundStatus,
    #[serde(flatten)]
    pub result: FreeOptResult,
    pub rounds: Vec<Round>,
}

/// Doubles `r` until `upper − matching_lower ≤ eps` or the cap is reached.
pub fn min_over_free(req: &FreeRequest) -> Result<FreeRun> {
    if !(req.eps > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", req.eps)));
    }
    req.free.validate(&req.g_n)?;
    let lambda_bar = req.free.lambda_bar_for(&req.g_n)?;
    let mut r = match req.r_init {
        Some(r) => r.max(1),
        None => r_for_epsilon(&IntervalBounds::new(lambda_bar, 0.0)?, req.eps)?,
    }
    .min(req.r_cap.max(1));
    let mut rounds = Vec::new();
    loop {
        let grid = free_grid(lambda_bar, r, req.scheme, req.eps)?;
        let res = min_over_free_upper(&req.g_n, &req.free, &grid, &upper_coefficients(&grid)?, &req.energy, &req.solver)?;
        rounds.push(Round { r, lower: res.matching_lower, upper: res.upper });
        let done = res.gap <= req.eps;
        if done || r >= req.r_cap {
            let status = if done { BoundStatus::Converged } else { BoundStatus::RCapReached };
            return Ok(FreeRun { status, result: res, rounds });
        }
        r = (2 * r).min(req.r_cap);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::upper_bound;
    use crate::channel::{choi_from_kraus, dephasing, depolarizing, identity, replacer};

    fn choi(ch: crate::channel::KrausChannel) -> ChoiMatrix {
        choi_from_kraus(&ch)
    }

    #[test]
    fn fixed_set_matches_upper_bound() {
        let n = choi(depolarizing(2, 0.25).unwrap());
        let m = choi(depolarizing(2, 0.5).unwrap());
        let lb = interval_for_pair(&n, &m).unwrap().lambda;
        let grid = free_grid(lb, 8, GridScheme::Geometric, 1e-3).unwrap();
        let uc = upper_coefficients(&grid).unwrap();
        let opts = SolverOptions::default();
        let free = FreeSetSpec::new(FreeSetKind::Fixed(m.clone()));
        let res = min_over_free_upper(&n, &free, &grid, &uc, &[], &opts).unwrap();
        let direct = upper_bound(&n, &m, &grid, &uc, None, &opts).unwrap();
        assert!((res.upper - direct.value).abs() < 1e-8, "{} vs {}", res.upper, direct.value);
        assert!(res.matching_lower <= res.upper + 1e-6);
    }

    #[test]
    fn free_channel_gives_zero() {
        let opts = SolverOptions::default();
        let deph = choi(dephasing(2, 0.3).unwrap());
        let ppt = choi(depolarizing(2, 0.8).unwrap());
        for (n, kind) in [(deph.clone(), FreeSetKind::Fixed(deph)), (ppt, FreeSetKind::Ppt)] {
            let mut req = FreeRequest::new(n.clone(), FreeSetSpec::new(kind), 1e-3);
            req.r_init = Some(8);
            req.r_cap = 8;
            req.solver = opts.clone();
            let run = min_over_free(&req).unwrap();
            assert!(run.result.upper.abs() < 1e-6, "upper {}", run.result.upper);
        }
    }

    #[test]
    fn frozen_replacer_matches_fixed_set() {
        let n = choi(identity(2).unwrap());
        let half = HermitianMatrix::identity(2).scale(0.5);
        let fixed = choi(replacer(2, &half).unwrap());
        let grid = free_grid(8.0, 8, GridScheme::Geometric, 1e-2).unwrap();
        let uc = upper_coefficients(&grid).unwrap();
        let opts = SolverOptions::default();
        let (model, _) = replacer_program(&n, &SigmaB::Fixed(half), &grid, &uc, None, 0.0).unwrap();
        let a = model.solve(&opts).unwrap().require_optimal("frozen").unwrap().primal_objective;
        let free = FreeSetSpec::new(FreeSetKind::Fixed(fixed)).with_lambda_bar(8.0);
        let b = min_over_free_upper(&n, &free, &grid, &uc, &[], &opts).unwrap().upper;
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn small_lambda_bar_is_infeasible() {
        let n = choi(identity(2).unwrap());
        let grid = free_grid(2.0, 4, GridScheme::Geometric, 1e-2).unwrap();
        let uc = upper_coefficients(&grid).unwrap();
        let free = FreeSetSpec::new(FreeSetKind::Replacer).with_lambda_bar(2.0);
        let err = min_over_free_upper(&n, &free, &grid, &uc, &[], &SolverOptions::default()).unwrap_err();
        assert!(err.to_string().contains("lambda_bar"), "{err}");
    }

    #[test]
    fn descriptors() {
        let f = FreeSetJson::from_json(r#"{"kind":"replacer","lambda_bar":8}"#).unwrap();
        let spec = f.to_spec(2, 2).unwrap();
        assert!(matches!(spec.kind, FreeSetKind::Replacer));
        assert_eq!(spec.lambda_bar, Some(8.0));
        for k in ["separable", "entanglement_breaking"] {
            let f = FreeSetJson::from_json(&format!(r#"{{"kind":"{k}"}}"#)).unwrap();
            let err = f.to_spec(2, 2).unwrap_err();
            assert!(err.to_string().contains("semidefinite representation"), "{err}");
        }
        let f = FreeSetJson::from_json(
            r#"{"kind":"custom","lmis":[{"terms":[{"partial_transpose":"B"}]}],"delta_reg":0.01}"#,
        )
        .unwrap();
        let spec = f.to_spec(2, 2).unwrap();
        assert_eq!(spec.delta_reg, 0.01);
        assert!(FreeSetJson::from_json(r#"{"kind":"custom","lmis":[{"terms":[{"left":[1,0,0,1],"partial_transpose":"B"}]}]}"#)
            .unwrap()
            .to_spec(2, 2)
            .is_err());
        assert!(FreeSetSpec { kind: FreeSetKind::Ppt, lambda_bar: Some(0.5), delta_reg: 0.0 }
            .validate(&choi(identity(2).unwrap()))
            .is_err());
    }

    #[test]
    fn custom_ppt_matches_builtin_ppt() {
        let n = choi(depolarizing(2, 0.2).unwrap());
        let grid = free_grid(8.0, 6, GridScheme::Geometric, 1e-2).unwrap();
        let uc = upper_coefficients(&grid).unwrap();
        let opts = SolverOptions::default();
        let custom = FreeSetSpec::new(FreeSetKind::Custom(vec![CustomLmi {
            constant: None,
            terms: vec![(1.0, LinearMap::PartialTranspose { dim_a: 2, dim_b: 2, subsystem: Subsystem::B })],
        }]))
        .with_lambda_bar(8.0);
        let ppt = FreeSetSpec::new(FreeSetKind::Ppt).with_lambda_bar(8.0);
        let a = min_over_free_upper(&n, &custom, &grid, &uc, &[], &opts).unwrap().upper;
        let b = min_over_free_upper(&n, &ppt, &grid, &uc, &[], &opts).unwrap().upper;
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

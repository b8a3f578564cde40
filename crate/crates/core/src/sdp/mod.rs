//! Block-structured semidefinite programs over complex Hermitian matrices.
//!
//! A [`Model`] holds variables (PSD blocks, free Hermitian blocks, scalars),
//! affine matrix constraints and a real objective. [`Model::solve`] compiles
//! it to a real standard form (see [`compile`]) and runs the primal-dual
//! interior-point method in [`ipm`].

pub mod compile;
pub(crate) mod dense;
pub mod ipm;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{kron, partial_trace, partial_transpose, HermitianMatrix, Subsystem, C64};

pub use compile::{compile, StandardForm};
pub use ipm::SolverOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    /// Complex Hermitian `n×n` block constrained to be PSD.
    Psd(usize),
    /// Unconstrained complex Hermitian `n×n` block.
    Hermitian(usize),
    NonNeg,
    Free,
}

impl VarKind {
    pub fn dim(self) -> usize {
        match self {
            VarKind::Psd(n) | VarKind::Hermitian(n) => n,
            VarKind::NonNeg | VarKind::Free => 1,
        }
    }
}

/// Linear maps from a variable block to the space of an expression.
/// Scalars are treated as `1×1` matrices.
#[derive(Clone, Debug)]
pub enum LinearMap {
    Identity,
    /// `X ↦ X ⊗ 1_d`.
    KronRight(usize),
    /// `X ↦ 1_d ⊗ X`.
    KronLeft(usize),
    PartialTrace { dim_a: usize, dim_b: usize, keep: Subsystem },
    PartialTranspose { dim_a: usize, dim_b: usize, subsystem: Subsystem },
    /// Scalar `s ↦ s·C`.
    Embed(HermitianMatrix),
    /// `X ↦ tr[C X]` as a `1×1` matrix.
    Trace(HermitianMatrix),
    /// `X ↦ K X K†`.
    Conjugate(DMatrix<C64>),
}

fn scalar(v: f64) -> HermitianMatrix {
    HermitianMatrix::from_real_diagonal(&[v])
}

impl LinearMap {
    /// Output dimension for an input of dimension `n`, or an error when
    /// the map does not accept that input.
    pub fn output_dim(&self, n: usize) -> Result<usize> {
        let bad = |what: &str| Err(Error::Model(format!("{what} cannot act on a {n}x{n} block")));
        match self {
            LinearMap::Identity => Ok(n),
            LinearMap::KronRight(d) | LinearMap::KronLeft(d) => Ok(n * d),
            LinearMap::PartialTrace { dim_a, dim_b, keep } => {
                if n != dim_a * dim_b {
                    return bad("partial trace");
                }
                Ok(match keep {
                    Subsystem::A => *dim_a,
                    Subsystem::B => *dim_b,
                })
            }
            LinearMap::PartialTranspose { dim_a, dim_b, .. } => {
                if n != dim_a * dim_b {
                    return bad("partial transpose");
                }
                Ok(n)
            }
            LinearMap::Embed(c) => {
                if n != 1 {
                    return bad("scalar embedding");
                }
                Ok(c.dim())
            }
            LinearMap::Trace(c) => {
                if n != c.dim() {
                    return bad("trace functional");
                }
                Ok(1)
            }
            LinearMap::Conjugate(k) => {
                if n != k.ncols() {
                    return bad("conjugation");
                }
                Ok(k.nrows())
            }
        }
    }

    pub fn apply(&self, x: &HermitianMatrix) -> Result<HermitianMatrix> {
        self.output_dim(x.dim())?;
        Ok(match self {
            LinearMap::Identity => x.clone(),
            LinearMap::KronRight(d) => kron(x, &HermitianMatrix::identity(*d)),
            LinearMap::KronLeft(d) => kron(&HermitianMatrix::identity(*d), x),
            LinearMap::PartialTrace { dim_a, dim_b, keep } => partial_trace(x, *dim_a, *dim_b, *keep)?,
            LinearMap::PartialTranspose { dim_a, dim_b, subsystem } => {
                partial_transpose(x, *dim_a, *dim_b, *subsystem)?
            }
            LinearMap::Embed(c) => c.scale(x.get(0, 0).re),
            LinearMap::Trace(c) => scalar(c.inner(x)),
            LinearMap::Conjugate(k) => x.conjugate_by(k)?,
        })
    }

    /// Adjoint with respect to `⟨A, B⟩ = Re tr[A B]`; `n` is the input
    /// dimension of the forward map.
    pub fn adjoint(&self, y: &HermitianMatrix, n: usize) -> Result<HermitianMatrix> {
        let out = self.output_dim(n)?;
        if y.dim() != out {
            return Err(Error::Model(format!("adjoint expects dimension {out}, got {}", y.dim())));
        }
        Ok(match self {
            LinearMap::Identity => y.clone(),
            LinearMap::KronRight(d) => partial_trace(y, n, *d, Subsystem::A)?,
            LinearMap::KronLeft(d) => partial_trace(y, *d, n, Subsystem::B)?,
            LinearMap::PartialTrace { dim_a, dim_b, keep } => match keep {
                Subsystem::A => kron(y, &HermitianMatrix::identity(*dim_b)),
                Subsystem::B => kron(&HermitianMatrix::identity(*dim_a), y),
            },
            LinearMap::PartialTranspose { dim_a, dim_b, subsystem } => {
                partial_transpose(y, *dim_a, *dim_b, *subsystem)?
            }
            LinearMap::Embed(c) => scalar(c.inner(y)),
            LinearMap::Trace(c) => c.scale(y.get(0, 0).re),
            LinearMap::Conjugate(k) => y.conjugate_by(&k.adjoint())?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Term {
    pub var: VarId,
    pub coef: f64,
    pub map: LinearMap,
}

/// `Σ coef·map(var) + constant`, a Hermitian matrix of dimension `dim`.
#[derive(Clone, Debug)]
pub struct AffineExpr {
    dim: usize,
    terms: Vec<Term>,
    constant: Option<HermitianMatrix>,
}

impl AffineExpr {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new(), constant: None }
    }

    pub fn constant(c: HermitianMatrix) -> Self {
        Self { dim: c.dim(), terms: Vec::new(), constant: Some(c) }
    }

    pub fn scalar_constant(v: f64) -> Self {
        Self::constant(scalar(v))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn constant_term(&self) -> Option<&HermitianMatrix> {
        self.constant.as_ref()
    }

    pub fn term(mut self, var: VarId, coef: f64, map: LinearMap) -> Self {
        self.terms.push(Term { var, coef, map });
        self
    }

    pub fn var(self, var: VarId, coef: f64) -> Self {
        self.term(var, coef, LinearMap::Identity)
    }

    pub fn plus_constant(mut self, c: &HermitianMatrix) -> Self {
        self.constant = Some(match self.constant {
            Some(old) => &old + c,
            None => c.clone(),
        });
        self
    }

    pub fn extend(mut self, other: AffineExpr) -> Self {
        self.terms.extend(other.terms);
        if let Some(c) = other.constant {
            self = self.plus_constant(&c);
        }
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Clone, Debug)]
pub enum Constraint {
    /// `expr ⪰ 0`.
    Psd(AffineExpr),
    /// `expr = 0`.
    Zero(AffineExpr),
}

impl Constraint {
    pub fn expr(&self) -> &AffineExpr {
        match self {
            Constraint::Psd(e) | Constraint::Zero(e) => e,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Model {
    vars: Vec<VarKind>,
    constraints: Vec<Constraint>,
    objective: AffineExpr,
    sense: Sense,
}

impl Default for Model {
    fn default() -> Self {
        Self::new()
    }
}

impl Model {
    pub fn new() -> Self {
        Self { vars: Vec::new(), constraints: Vec::new(), objective: AffineExpr::zero(1), sense: Sense::Min }
    }

    pub fn add_var(&mut self, kind: VarKind) -> VarId {
        assert!(kind.dim() >= 1, "variable blocks must have dimension >= 1");
        self.vars.push(kind);
        VarId(self.vars.len() - 1)
    }

    pub fn kind(&self, v: VarId) -> VarKind {
        self.vars[v.0]
    }

    pub fn vars(&self) -> &[VarKind] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> (&AffineExpr, Sense) {
        (&self.objective, self.sense)
    }

    pub fn add_psd(&mut self, expr: AffineExpr) {
        self.constraints.push(Constraint::Psd(expr));
    }

    pub fn add_zero(&mut self, expr: AffineExpr) {
        self.constraints.push(Constraint::Zero(expr));
    }

    /// Objective must be a `1×1` expression.
    pub fn set_objective(&mut self, sense: Sense, expr: AffineExpr) {
        self.objective = expr;
        self.sense = sense;
    }

    /// `0 ⪯ X ⪯ upper`. The lower half is implied for PSD variables.
    pub fn box_constraint(&mut self, x: VarId, upper: AffineExpr) {
        if !matches!(self.kind(x), VarKind::Psd(_) | VarKind::NonNeg) {
            self.add_psd(AffineExpr::zero(self.kind(x).dim()).var(x, 1.0));
        }
        self.add_psd(upper.var(x, -1.0));
    }

    /// Evaluates an expression at given variable values.
    pub fn evaluate(&self, expr: &AffineExpr, values: &[HermitianMatrix]) -> Result<HermitianMatrix> {
        let mut acc = expr.constant.clone().unwrap_or_else(|| HermitianMatrix::zeros(expr.dim));
        for t in &expr.terms {
            acc = &acc + &t.map.apply(&values[t.var.0])?.scale(t.coef);
        }
        Ok(acc)
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<SdpSolution> {
        let sf = compile(self)?;
        let raw = ipm::solve_standard(&sf, opts);
        Ok(sf.recover(self, raw))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
    NumericalFailure,
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Residuals {
    pub primal_feas: f64,
    pub dual_feas: f64,
    pub rel_gap: f64,
}

/// Solver output. Objectives are in the model's sense, constants included.
#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub values: Vec<HermitianMatrix>,
    pub residuals: Residuals,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn matrix(&self, v: VarId) -> &HermitianMatrix {
        &self.values[v.0]
    }

    pub fn scalar(&self, v: VarId) -> f64 {
        self.values[v.0].get(0, 0).re
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Converts a non-optimal status into an error.
    pub fn require_optimal(self, what: &str) -> Result<Self> {
        self.require_near_optimal(what, 0.0)
    }

    /// Also accepts a stalled or truncated run whose residuals are all at
    /// most `tol`.
    pub fn require_near_optimal(self, what: &str, tol: f64) -> Result<Self> {
        let r = &self.residuals;
        let close = matches!(self.status, SolveStatus::MaxIter | SolveStatus::NumericalFailure)
            && r.primal_feas <= tol
            && r.dual_feas <= tol
            && r.rel_gap <= tol;
        if self.is_optimal() || close {
            Ok(self)
        } else {
            Err(Error::Solver {
                status: self.status,
                detail: format!(
                    "{what}: {} iterations, primal infeasibility {:e}, dual infeasibility {:e}, relative gap {:e}",
                    self.iterations, self.residuals.primal_feas, self.residuals.dual_feas, self.residuals.rel_gap
                ),
            })
        }
    }
}

//! Completely positive maps, their Choi matrices and a few standard families.
//!
//! The Choi matrix is unnormalized: `Γ = Σ_ij |i⟩⟨j| ⊗ N(|i⟩⟨j|)`, so a
//! channel on a `d`-dimensional input has `tr Γ = d`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, partial_trace, HermitianMatrix, Subsystem, C64};

/// Tolerance for the trace-preservation and complete-positivity checks.
pub const CHANNEL_TOL: f64 = 1e-9;

/// Kraus representation `ρ ↦ Σ K_i ρ K_i†` with `K_i` of shape `dim_b × dim_a`.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    dim_a: usize,
    dim_b: usize,
    ops: Vec<DMatrix<C64>>,
    trace_preserving: bool,
}

impl KrausChannel {
    /// Validates shapes and `Σ K†K = 1` (trace preserving) or `Σ K†K ⪯ 1`.
    pub fn new(
        dim_a: usize,
        dim_b: usize,
        ops: Vec<DMatrix<C64>>,
        trace_preserving: bool,
    ) -> Result<Self> {
        if dim_a == 0 || dim_b == 0 {
            return Err(Error::Dimension("channel dimensions must be >= 1".into()));
        }
        if ops.is_empty() {
            return Err(Error::InvalidChannel("at least one Kraus operator is required".into()));
        }
        for (i, k) in ops.iter().enumerate() {
            if k.nrows() != dim_b || k.ncols() != dim_a {
                return Err(Error::Dimension(format!(
                    "Kraus operator {i} is {}x{}, expected {dim_b}x{dim_a}",
                    k.nrows(),
                    k.ncols()
                )));
            }
        }
        let ch = Self { dim_a, dim_b, ops, trace_preserving };
        let s = ch.kraus_sum();
        let dev = &s - &HermitianMatrix::identity(dim_a);
        if trace_preserving {
            if dev.max_abs() > CHANNEL_TOL {
                return Err(Error::InvalidChannel(format!(
                    "sum of K†K deviates from the identity by {:e}",
                    dev.max_abs()
                )));
            }
        } else if dev.max_eigenvalue()? > CHANNEL_TOL {
            return Err(Error::InvalidChannel("sum of K†K exceeds the identity".into()));
        }
        Ok(ch)
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn ops(&self) -> &[DMatrix<C64>] {
        &self.ops
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    fn kraus_sum(&self) -> HermitianMatrix {
        let mut s = DMatrix::zeros(self.dim_a, self.dim_a);
        for k in &self.ops {
            s += k.adjoint() * k;
        }
        HermitianMatrix::symmetrized(s)
    }

    /// `Σ K_i ρ K_i†`.
    pub fn apply(&self, rho: &HermitianMatrix) -> Result<HermitianMatrix> {
        if rho.dim() != self.dim_a {
            return Err(Error::Dimension(format!(
                "input has dimension {}, channel expects {}",
                rho.dim(),
                self.dim_a
            )));
        }
        let mut out = DMatrix::zeros(self.dim_b, self.dim_b);
        for k in &self.ops {
            out += k * rho.as_matrix() * k.adjoint();
        }
        Ok(HermitianMatrix::symmetrized(out))
    }
}

/// Choi matrix of a completely positive map from `A` to `B`.
#[derive(Clone, Debug)]
pub struct ChoiMatrix {
    dim_a: usize,
    dim_b: usize,
    op: HermitianMatrix,
    trace_preserving: bool,
}

impl ChoiMatrix {
    /// Wraps an operator on `A ⊗ B`, checking complete positivity and, when
    /// flagged, `tr_B Γ = 1_A`.
    pub fn new(dim_a: usize, dim_b: usize, op: HermitianMatrix, trace_preserving: bool) -> Result<Self> {
        if dim_a == 0 || dim_b == 0 || op.dim() != dim_a * dim_b {
            return Err(Error::Dimension(format!(
                "Choi operator of dimension {} does not match dimA={dim_a}, dimB={dim_b}",
                op.dim()
            )));
        }
        let min = op.min_eigenvalue()?;
        if min < -CHANNEL_TOL * op.max_abs().max(1.0) {
            return Err(Error::InvalidChannel(format!(
                "Choi matrix is not positive semidefinite (minimum eigenvalue {min:e})"
            )));
        }
        let choi = Self { dim_a, dim_b, op, trace_preserving };
        if trace_preserving {
            let dev = &choi.marginal_a() - &HermitianMatrix::identity(dim_a);
            if dev.max_abs() > CHANNEL_TOL {
                return Err(Error::InvalidChannel(format!(
                    "partial trace over B deviates from the identity by {:e}",
                    dev.max_abs()
                )));
            }
        }
        Ok(choi)
    }

    pub fn from_kraus(ch: &KrausChannel) -> Self {
        choi_from_kraus(ch)
    }

    /// Choi matrix of a classical channel with row-stochastic (or
    /// sub-stochastic) transition matrix `p[x][y]`.
    pub fn classical(p: &[Vec<f64>]) -> Result<Self> {
        let dim_a = p.len();
        let dim_b = p.first().map_or(0, Vec::len);
        if dim_a == 0 || dim_b == 0 || p.iter().any(|row| row.len() != dim_b) {
            return Err(Error::Dimension("transition matrix must be rectangular and non-empty".into()));
        }
        if p.iter().flatten().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidChannel("transition probabilities must be non-negative".into()));
        }
        let tp = p.iter().all(|row| (row.iter().sum::<f64>() - 1.0).abs() <= CHANNEL_TOL);
        let diag: Vec<f64> = p.iter().flatten().copied().collect();
        Self::new(dim_a, dim_b, HermitianMatrix::from_real_diagonal(&diag), tp)
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn dim(&self) -> usize {
        self.dim_a * self.dim_b
    }

    pub fn op(&self) -> &HermitianMatrix {
        &self.op
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    /// `tr_B Γ`, an operator on `A`.
    pub fn marginal_a(&self) -> HermitianMatrix {
        partial_trace(&self.op, self.dim_a, self.dim_b, Subsystem::A).expect("dimensions checked at construction")
    }

    pub fn same_dims(&self, other: &ChoiMatrix) -> Result<()> {
        if self.dim_a != other.dim_a || self.dim_b != other.dim_b {
            return Err(Error::Dimension(format!(
                "channel dimensions differ: {}->{} vs {}->{}",
                self.dim_a, self.dim_b, other.dim_a, other.dim_b
            )));
        }
        Ok(())
    }
}

/// `Γ = Σ_i (1 ⊗ K_i)|Γ⟩⟨Γ|(1 ⊗ K_i)†`.
pub fn choi_from_kraus(ch: &KrausChannel) -> ChoiMatrix {
    let (da, db) = (ch.dim_a, ch.dim_b);
    let mut op = DMatrix::zeros(da * db, da * db);
    for k in &ch.ops {
        let v = DVector::from_fn(da * db, |idx, _| k[(idx % db, idx / db)]);
        op += &v * v.adjoint();
    }
    ChoiMatrix {
        dim_a: da,
        dim_b: db,
        op: HermitianMatrix::symmetrized(op),
        trace_preserving: ch.trace_preserving,
    }
}

/// `N(ρ) = tr_A[(ρ^T ⊗ 1_B) Γ]`.
pub fn apply_channel(choi: &ChoiMatrix, rho: &HermitianMatrix) -> Result<HermitianMatrix> {
    let (da, db) = (choi.dim_a, choi.dim_b);
    if rho.dim() != da {
        return Err(Error::Dimension(format!("input has dimension {}, channel expects {da}", rho.dim())));
    }
    let g = choi.op.as_matrix();
    let out = DMatrix::from_fn(db, db, |b, bp| {
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..da {
            for ap in 0..da {
                acc += rho.get(ap, a) * g[(ap * db + b, a * db + bp)];
            }
        }
        acc
    });
    Ok(HermitianMatrix::symmetrized(out))
}

/// `(ρ_A^{1/2} ⊗ 1_B) Γ (ρ_A^{1/2} ⊗ 1_B)`.
pub fn conjugated_output(choi: &ChoiMatrix, rho_a: &HermitianMatrix) -> Result<HermitianMatrix> {
    if rho_a.dim() != choi.dim_a {
        return Err(Error::Dimension(format!(
            "state has dimension {}, channel expects {}",
            rho_a.dim(),
            choi.dim_a
        )));
    }
    let sqrt = rho_a.sqrt_psd(CHANNEL_TOL * rho_a.max_abs().max(1.0))?;
    let lifted = sqrt.as_matrix().kronecker(&DMatrix::<C64>::identity(choi.dim_b, choi.dim_b));
    choi.op.conjugate_by(&lifted)
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Standard channel families. Serialized as `{"name": ..., ...}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Builtin {
    Identity {
        dim: usize,
    },
    /// `ρ ↦ (1−p)ρ + p·tr[ρ]·1/d`.
    Depolarizing {
        dim: usize,
        p: f64,
    },
    /// Qubit amplitude damping with decay probability `gamma`.
    AmplitudeDamping {
        gamma: f64,
    },
    /// `ρ ↦ (1−p)ρ + p·diag(ρ)`; off-diagonal entries shrink by `1−p`.
    Dephasing {
        dim: usize,
        p: f64,
    },
    /// `ρ ↦ tr[ρ]·σ` from a `dim_a`-dimensional input.
    Replacer {
        dim_a: usize,
        sigma: MatrixJson,
    },
}

impl Builtin {
    pub fn kraus(&self) -> Result<KrausChannel> {
        match self {
            Builtin::Identity { dim } => identity(*dim),
            Builtin::Depolarizing { dim, p } => depolarizing(*dim, *p),
            Builtin::AmplitudeDamping { gamma } => amplitude_damping(*gamma),
            Builtin::Dephasing { dim, p } => dephasing(*dim, *p),
            Builtin::Replacer { dim_a, sigma } => replacer(*dim_a, &sigma.to_hermitian()?),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Builtin::Identity { dim } => format!("identity{dim}"),
            Builtin::Depolarizing { dim, p } => format!("depolarizing{dim}_{p}"),
            Builtin::AmplitudeDamping { gamma } => format!("amplitude_damping_{gamma}"),
            Builtin::Dephasing { dim, p } => format!("dephasing{dim}_{p}"),
            Builtin::Replacer { dim_a, .. } => format!("replacer{dim_a}"),
        }
    }
}

pub fn identity(dim: usize) -> Result<KrausChannel> {
    KrausChannel::new(dim, dim, vec![DMatrix::identity(dim, dim)], true)
}

/// Weyl operators `X^a Z^b` scaled so the twirl is exact.
pub fn depolarizing(dim: usize, p: f64) -> Result<KrausChannel> {
    check_prob("depolarizing probability", p)?;
    if dim == 0 {
        return Err(Error::Dimension("dimension must be >= 1".into()));
    }
    let d2 = (dim * dim) as f64;
    let mut ops = Vec::with_capacity(dim * dim);
    for a in 0..dim {
        for b in 0..dim {
            let weight = if a == 0 && b == 0 { 1.0 - p + p / d2 } else { p / d2 };
            if weight == 0.0 {
                continue;
            }
            let s = weight.sqrt();
            let w = DMatrix::from_fn(dim, dim, |i, j| {
                if i == (j + a) % dim {
                    let phase = 2.0 * std::f64::consts::PI * (b * j) as f64 / dim as f64;
                    C64::from_polar(s, phase)
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            ops.push(w);
        }
    }
    KrausChannel::new(dim, dim, ops, true)
}

pub fn amplitude_damping(gamma: f64) -> Result<KrausChannel> {
    check_prob("damping parameter", gamma)?;
    let k0 = DMatrix::from_row_slice(2, 2, &[real(1.0), real(0.0), real(0.0), real((1.0 - gamma).sqrt())]);
    let k1 = DMatrix::from_row_slice(2, 2, &[real(0.0), real(gamma.sqrt()), real(0.0), real(0.0)]);
    KrausChannel::new(2, 2, vec![k0, k1], true)
}

pub fn dephasing(dim: usize, p: f64) -> Result<KrausChannel> {
    check_prob("dephasing probability", p)?;
    if dim == 0 {
        return Err(Error::Dimension("dimension must be >= 1".into()));
    }
    let mut ops = vec![DMatrix::identity(dim, dim) * real((1.0 - p).sqrt())];
    if p > 0.0 {
        for i in 0..dim {
            let mut k = DMatrix::zeros(dim, dim);
            k[(i, i)] = real(p.sqrt());
            ops.push(k);
        }
    }
    KrausChannel::new(dim, dim, ops, true)
}

/// Kraus operators `√s_i |v_i⟩⟨j|` from the spectral decomposition of `σ`.
pub fn replacer(dim_a: usize, sigma: &HermitianMatrix) -> Result<KrausChannel> {
    let eig = eig_hermitian(sigma)?;
    if eig.min() < -CHANNEL_TOL || (sigma.trace() - 1.0).abs() > CHANNEL_TOL {
        return Err(Error::InvalidParameter("replacer output must be a density matrix".into()));
    }
    let db = sigma.dim();
    let mut ops = Vec::new();
    for (i, &s) in eig.eigenvalues.iter().enumerate() {
        if s <= 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(i) * real(s.sqrt());
        for j in 0..dim_a {
            let mut k = DMatrix::zeros(db, dim_a);
            k.set_column(j, &v);
            ops.push(k);
        }
    }
    KrausChannel::new(dim_a, db, ops, true)
}

/// A complex number in JSON: `[re, im]` or a bare real.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ComplexJson {
    Pair([f64; 2]),
    Real(f64),
}

impl ComplexJson {
    pub fn value(self) -> C64 {
        match self {
            ComplexJson::Pair([re, im]) => C64::new(re, im),
            ComplexJson::Real(re) => C64::new(re, 0.0),
        }
    }
}

/// A matrix in JSON, either a flat row-major list or a list of rows.
///
/// A list of two-element arrays is read as a flat list of `[re, im]` pairs,
/// so a nested real matrix with two columns must spell its entries as pairs.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MatrixJson {
    Flat(Vec<ComplexJson>),
    Nested(Vec<Vec<ComplexJson>>),
}

impl MatrixJson {
    pub fn from_matrix(m: &DMatrix<C64>) -> Self {
        let rows = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| ComplexJson::Pair([m[(i, j)].re, m[(i, j)].im])).collect())
            .collect();
        MatrixJson::Nested(rows)
    }

    /// Reads a `rows × cols` matrix; flat input must have exactly `rows·cols` entries.
    pub fn to_matrix(&self, rows: usize, cols: usize) -> Result<DMatrix<C64>> {
        match self {
            MatrixJson::Flat(v) => {
                if v.len() != rows * cols {
                    return Err(Error::Dimension(format!(
                        "flat matrix has {} entries, expected {rows}x{cols}",
                        v.len()
                    )));
                }
                Ok(DMatrix::from_fn(rows, cols, |i, j| v[i * cols + j].value()))
            }
            MatrixJson::Nested(r) => {
                if r.len() != rows || r.iter().any(|row| row.len() != cols) {
                    return Err(Error::Dimension(format!("nested matrix does not have shape {rows}x{cols}")));
                }
                Ok(DMatrix::from_fn(rows, cols, |i, j| r[i][j].value()))
            }
        }
    }

    /// Square matrix with the dimension inferred from the entry count.
    pub fn to_square(&self) -> Result<DMatrix<C64>> {
        let n = match self {
            MatrixJson::Flat(v) => {
                let n = (v.len() as f64).sqrt().round() as usize;
                if n * n != v.len() {
                    return Err(Error::Dimension(format!("{} entries do not form a square matrix", v.len())));
                }
                n
            }
            MatrixJson::Nested(r) => r.len(),
        };
        self.to_matrix(n, n)
    }

    pub fn to_hermitian(&self) -> Result<HermitianMatrix> {
        let m = self.to_square()?;
        let skew = (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if skew > 1e-9 * m.iter().map(|z| z.norm()).fold(1.0, f64::max) {
            return Err(Error::InvalidParameter(format!("matrix is not Hermitian (deviation {skew:e})")));
        }
        HermitianMatrix::new(m)
    }
}

/// JSON channel description accepted by the command line.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelSpec {
    Kraus {
        #[serde(rename = "dimA")]
        dim_a: usize,
        #[serde(rename = "dimB")]
        dim_b: usize,
        ops: Vec<MatrixJson>,
        #[serde(default = "default_tp")]
        trace_preserving: bool,
    },
    Choi {
        #[serde(rename = "dimA")]
        dim_a: usize,
        #[serde(rename = "dimB")]
        dim_b: usize,
        matrix: MatrixJson,
        #[serde(default = "default_tp")]
        trace_preserving: bool,
    },
    Builtin {
        #[serde(flatten)]
        channel: Builtin,
    },
}

fn default_tp() -> bool {
    true
}

impl ChannelSpec {
    pub fn from_kraus(ch: &KrausChannel) -> Self {
        ChannelSpec::Kraus {
            dim_a: ch.dim_a,
            dim_b: ch.dim_b,
            ops: ch.ops.iter().map(MatrixJson::from_matrix).collect(),
            trace_preserving: ch.trace_preserving,
        }
    }

    pub fn to_choi(&self) -> Result<ChoiMatrix> {
        match self {
            ChannelSpec::Kraus { dim_a, dim_b, ops, trace_preserving } => {
                let mats = ops
                    .iter()
                    .enumerate()
                    .map(|(i, m)| {
                        m.to_matrix(*dim_b, *dim_a)
                            .map_err(|e| Error::InvalidChannel(format!("ops[{i}]: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(choi_from_kraus(&KrausChannel::new(*dim_a, *dim_b, mats, *trace_preserving)?))
            }
            ChannelSpec::Choi { dim_a, dim_b, matrix, trace_preserving } => {
                let n = dim_a * dim_b;
                let m = matrix.to_matrix(n, n).map_err(|e| Error::InvalidChannel(format!("matrix: {e}")))?;
                ChoiMatrix::new(*dim_a, *dim_b, HermitianMatrix::new(m)?, *trace_preserving)
            }
            ChannelSpec::Builtin { channel } => Ok(choi_from_kraus(&channel.kraus()?)),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &HermitianMatrix, b: &HermitianMatrix, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    #[test]
    fn identity_choi_is_rank_one() {
        let g = choi_from_kraus(&identity(2).unwrap());
        assert!((g.op().trace() - 2.0).abs() < 1e-14);
        let e = eig_hermitian(g.op()).unwrap();
        assert!((e.max() - 2.0).abs() < 1e-13);
        assert!(e.eigenvalues.iter().take(3).all(|x| x.abs() < 1e-13));
    }

    #[test]
    fn fully_depolarizing_choi() {
        let g = choi_from_kraus(&depolarizing(2, 1.0).unwrap());
        let expect = HermitianMatrix::identity(4).scale(0.5);
        assert!(close(g.op(), &expect, 1e-14));
    }

    #[test]
    fn replacer_choi_is_product() {
        let sigma = HermitianMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[real(0.7), C64::new(0.1, 0.2), C64::new(0.1, -0.2), real(0.3)],
        ))
        .unwrap();
        let g = choi_from_kraus(&replacer(2, &sigma).unwrap());
        let expect = crate::linalg::kron(&HermitianMatrix::identity(2), &sigma);
        assert!(close(g.op(), &expect, 1e-13));
        let rho = HermitianMatrix::from_real_diagonal(&[0.25, 0.75]);
        assert!(close(&apply_channel(&g, &rho).unwrap(), &sigma, 1e-13));
    }

    #[test]
    fn depolarizing_action() {
        let rho = HermitianMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[real(0.6), C64::new(0.2, -0.1), C64::new(0.2, 0.1), real(0.4)],
        ))
        .unwrap();
        let k = depolarizing(2, 0.5).unwrap();
        let g = choi_from_kraus(&k);
        let expect = &rho.scale(0.5) + &HermitianMatrix::identity(2).scale(0.25);
        assert!(close(&apply_channel(&g, &rho).unwrap(), &expect, 1e-13));
        assert!(close(&k.apply(&rho).unwrap(), &expect, 1e-13));
        assert!(close(&choi_from_kraus(&depolarizing(2, 0.0).unwrap()).op().clone(), choi_from_kraus(&identity(2).unwrap()).op(), 1e-12));
    }

    #[test]
    fn qubit_depolarizing_weights_match_pauli_form() {
        let k = depolarizing(2, 0.5).unwrap();
        let w0 = k.ops()[0][(0, 0)].norm_sqr();
        assert!((w0 - (1.0 - 3.0 * 0.5 / 4.0)).abs() < 1e-14);
    }

    #[test]
    fn amplitude_damping_full() {
        let g = choi_from_kraus(&amplitude_damping(1.0).unwrap());
        let ground = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]);
        for rho in [HermitianMatrix::from_real_diagonal(&[0.0, 1.0]), HermitianMatrix::from_real_diagonal(&[0.5, 0.5])] {
            assert!(close(&apply_channel(&g, &rho).unwrap(), &ground, 1e-14));
        }
    }

    #[test]
    fn dephasing_against_hand_map() {
        let rho = HermitianMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[real(0.3), C64::new(0.4, 0.1), C64::new(0.4, -0.1), real(0.7)],
        ))
        .unwrap();
        let g = choi_from_kraus(&dephasing(2, 0.5).unwrap());
        let out = apply_channel(&g, &rho).unwrap();
        let expect = HermitianMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[real(0.3), C64::new(0.2, 0.05), C64::new(0.2, -0.05), real(0.7)],
        ))
        .unwrap();
        assert!(close(&out, &expect, 1e-14));
    }

    #[test]
    fn conjugation_examples() {
        let g = choi_from_kraus(&amplitude_damping(0.3).unwrap());
        let same = conjugated_output(&g, &HermitianMatrix::identity(2)).unwrap();
        assert!(close(&same, g.op(), 1e-13));
        let proj = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]);
        let out = conjugated_output(&g, &proj).unwrap();
        let expect = crate::linalg::kron(&proj, &apply_channel(&g, &proj).unwrap());
        assert!(close(&out, &expect, 1e-13));
        assert!(conjugated_output(&g, &HermitianMatrix::from_real_diagonal(&[1.0, -0.5])).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(depolarizing(2, 1.5).is_err());
        assert!(amplitude_damping(-0.1).is_err());
        assert!(dephasing(2, 2.0).is_err());
        let bad = vec![DMatrix::identity(2, 2) * real(1.1)];
        assert!(KrausChannel::new(2, 2, bad.clone(), true).is_err());
        assert!(KrausChannel::new(2, 2, bad, false).is_err());
        let sub = vec![DMatrix::identity(2, 2) * real(0.9)];
        assert!(KrausChannel::new(2, 2, sub.clone(), false).is_ok());
        assert!(KrausChannel::new(2, 2, sub, true).is_err());
    }

    #[test]
    fn json_formats() {
        let flat = r#"{"dimA":2,"dimB":2,"kind":"kraus","ops":[[[1,0],[0,0],[0,0],[1,0]]]}"#;
        let g = ChannelSpec::from_json(flat).unwrap().to_choi().unwrap();
        let id = choi_from_kraus(&identity(2).unwrap());
        assert!(close(g.op(), id.op(), 0.0));
        let nested = r#"{"dimA":2,"dimB":2,"kind":"kraus","ops":[[[1,0],[0,0]],[[0,0],[1,0]]]}"#;
        // two 2-entry "ops" are not 2x2 matrices
        assert!(ChannelSpec::from_json(nested).unwrap().to_choi().is_err());
        let nested = r#"{"dimA":2,"dimB":2,"kind":"kraus","ops":[[[[1,0],[0,0]],[[0,0],[1,0]]]]}"#;
        assert!(close(ChannelSpec::from_json(nested).unwrap().to_choi().unwrap().op(), id.op(), 0.0));
        let choi = r#"{"kind":"choi","dimA":1,"dimB":2,"matrix":[0.5,0,0,0.5]}"#;
        let g = ChannelSpec::from_json(choi).unwrap().to_choi().unwrap();
        assert!(g.is_trace_preserving());
        let b = r#"{"kind":"builtin","name":"depolarizing","dim":2,"p":0.5}"#;
        let g = ChannelSpec::from_json(b).unwrap().to_choi().unwrap();
        assert!(close(g.op(), choi_from_kraus(&depolarizing(2, 0.5).unwrap()).op(), 1e-15));
        assert!(ChannelSpec::from_json(r#"{"kind":"nope"}"#).is_err());
    }

    #[test]
    fn kraus_spec_round_trip() {
        let k = amplitude_damping(0.4).unwrap();
        let text = serde_json::to_string(&ChannelSpec::from_kraus(&k)).unwrap();
        let g = ChannelSpec::from_json(&text).unwrap().to_choi().unwrap();
        assert!(close(g.op(), choi_from_kraus(&k).op(), 1e-15));
    }

    #[test]
    fn classical_choi() {
        let g = ChoiMatrix::classical(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        assert!(g.is_trace_preserving());
        let out = apply_channel(&g, &HermitianMatrix::from_real_diagonal(&[0.0, 1.0])).unwrap();
        assert!(close(&out, &HermitianMatrix::from_real_diagonal(&[0.2, 0.8]), 1e-15));
    }
}

//! Compilation of a [`Model`] to the real standard form
//! `min c·x  s.t.  A x = b,  x ∈ S₊^{n_1} × … × R₊^{l} × R^{f}`.
//!
//! Complex `n×n` PSD blocks become real symmetric `2n×2n` blocks through
//! `X ↦ [[Re X, −Im X], [Im X, Re X]]`; a Hermitian functional `F` acts on the
//! real block as `tr[emb(F) X̃] / 2`. Free Hermitian blocks are expanded in
//! the orthonormal basis `E_ii`, `(E_ij + E_ji)/√2`, `i(E_ij − E_ji)/√2`, and
//! every matrix constraint contributes one row per basis element.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::dense::{complexify, embed_complex, svec, svec_len, SQRT2};
use super::ipm::RawSolution;
use super::{Constraint, Model, Residuals, SdpSolution, Sense, SolveStatus, VarKind};
use crate::error::{Error, Result};
use crate::linalg::{HermitianMatrix, C64};

/// A real PSD block with the rows of `A` that touch it.
#[derive(Clone, Debug)]
pub struct PsdBlock {
    pub n: usize,
    pub rows: Vec<usize>,
    /// `rows.len() × svec_len(n)`.
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
}

#[derive(Clone, Copy, Debug)]
enum Layout {
    Block(usize),
    Lp(usize),
    Free(usize),
    /// `n²` consecutive free columns.
    HermFree(usize, usize),
}

#[derive(Clone, Debug)]
pub struct StandardForm {
    pub m: usize,
    pub blocks: Vec<PsdBlock>,
    pub lp_a: DMatrix<f64>,
    pub lp_c: DVector<f64>,
    pub free_a: DMatrix<f64>,
    pub free_c: DVector<f64>,
    pub b: DVector<f64>,
    objective_constant: f64,
    sense: Sense,
    layout: Vec<Layout>,
}

/// Coordinates of a Hermitian matrix in the orthonormal Hermitian basis.
pub(crate) fn herm_coords(m: &HermitianMatrix) -> Vec<f64> {
    let n = m.dim();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        out.push(m.get(i, i).re);
    }
    for i in 0..n {
        for j in i + 1..n {
            let z = m.get(i, j);
            out.push(SQRT2 * z.re);
            out.push(SQRT2 * z.im);
        }
    }
    out
}

pub(crate) fn herm_basis(n: usize, idx: usize) -> HermitianMatrix {
    let mut m = DMatrix::<C64>::zeros(n, n);
    if idx < n {
        m[(idx, idx)] = C64::new(1.0, 0.0);
    } else {
        let mut k = (idx - n) / 2;
        let imag = (idx - n) % 2 == 1;
        let mut i = 0;
        while k >= n - i - 1 {
            k -= n - i - 1;
            i += 1;
        }
        let j = i + 1 + k;
        let s = 1.0 / SQRT2;
        if imag {
            m[(i, j)] = C64::new(0.0, s);
            m[(j, i)] = C64::new(0.0, -s);
        } else {
            m[(i, j)] = C64::new(s, 0.0);
            m[(j, i)] = C64::new(s, 0.0);
        }
    }
    HermitianMatrix::symmetrized(m)
}

pub(crate) fn from_herm_coords(v: &[f64], n: usize) -> HermitianMatrix {
    let mut m = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(v[i], 0.0);
    }
    let mut k = n;
    for i in 0..n {
        for j in i + 1..n {
            let z = C64::new(v[k], v[k + 1]) / SQRT2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    HermitianMatrix::symmetrized(m)
}

/// Contributions of one functional to the columns of a variable.
fn functional_svec(f: &HermitianMatrix) -> DVector<f64> {
    svec(&embed_complex(f.as_matrix())) * 0.5
}

struct Builder {
    m: usize,
    blocks: Vec<(usize, BTreeMap<usize, DVector<f64>>, DVector<f64>)>,
    lp: Vec<(BTreeMap<usize, f64>, f64)>,
    free: Vec<(BTreeMap<usize, f64>, f64)>,
    b: Vec<f64>,
}

impl Builder {
    fn new_block(&mut self, n_complex: usize) -> usize {
        let n = 2 * n_complex;
        self.blocks.push((n, BTreeMap::new(), DVector::zeros(svec_len(n))));
        self.blocks.len() - 1
    }

    fn new_lp(&mut self) -> usize {
        self.lp.push((BTreeMap::new(), 0.0));
        self.lp.len() - 1
    }

    fn new_free(&mut self) -> usize {
        self.free.push((BTreeMap::new(), 0.0));
        self.free.len() - 1
    }

    /// Adds `⟨F, X⟩` to row `row` (or to the cost when `row` is `None`).
    fn add(&mut self, layout: Layout, row: Option<usize>, f: &HermitianMatrix) {
        match layout {
            Layout::Block(k) => {
                let v = functional_svec(f);
                let blk = &mut self.blocks[k];
                match row {
                    Some(r) => {
                        let len = v.len();
                        *blk.1.entry(r).or_insert_with(|| DVector::zeros(len)) += v;
                    }
                    None => blk.2 += v,
                }
            }
            Layout::Lp(k) => add_scalar(&mut self.lp[k], row, f.get(0, 0).re),
            Layout::Free(k) => add_scalar(&mut self.free[k], row, f.get(0, 0).re),
            Layout::HermFree(start, n) => {
                let coords = herm_coords(f);
                debug_assert_eq!(coords.len(), n * n);
                for (j, c) in coords.into_iter().enumerate() {
                    add_scalar(&mut self.free[start + j], row, c);
                }
            }
        }
    }
}

fn add_scalar(col: &mut (BTreeMap<usize, f64>, f64), row: Option<usize>, v: f64) {
    if v == 0.0 {
        return;
    }
    match row {
        Some(r) => *col.0.entry(r).or_insert(0.0) += v,
        None => col.1 += v,
    }
}

fn check_expr(model: &Model, e: &super::AffineExpr) -> Result<()> {
    if let Some(c) = e.constant_term() {
        if c.dim() != e.dim() {
            return Err(Error::Model(format!(
                "constant of dimension {} in an expression of dimension {}",
                c.dim(),
                e.dim()
            )));
        }
    }
    for t in e.terms() {
        if t.var.0 >= model.vars().len() {
            return Err(Error::Model(format!("unknown variable {}", t.var.0)));
        }
        let n = model.kind(t.var).dim();
        let out = t.map.output_dim(n)?;
        if out != e.dim() {
            return Err(Error::Model(format!(
                "term on variable {} has dimension {out}, expression has dimension {}",
                t.var.0,
                e.dim()
            )));
        }
    }
    Ok(())
}

/// Builds the standard form; rejects inconsistent dimensions.
pub fn compile(model: &Model) -> Result<StandardForm> {
    let (obj, sense) = model.objective();
    if obj.dim() != 1 {
        return Err(Error::Model("objective must be a scalar expression".into()));
    }
    check_expr(model, obj)?;
    for c in model.constraints() {
        check_expr(model, c.expr())?;
    }

    let mut bld = Builder { m: 0, blocks: Vec::new(), lp: Vec::new(), free: Vec::new(), b: Vec::new() };
    let mut layout = Vec::with_capacity(model.vars().len());
    for &kind in model.vars() {
        let l = match kind {
            VarKind::Psd(1) | VarKind::NonNeg => Layout::Lp(bld.new_lp()),
            VarKind::Psd(n) => Layout::Block(bld.new_block(n)),
            VarKind::Hermitian(1) | VarKind::Free => Layout::Free(bld.new_free()),
            VarKind::Hermitian(n) => {
                let start = bld.free.len();
                for _ in 0..n * n {
                    bld.new_free();
                }
                Layout::HermFree(start, n)
            }
        };
        layout.push(l);
    }

    let sign = match sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let one = HermitianMatrix::identity(1);
    for t in obj.terms() {
        let n = model.kind(t.var).dim();
        let f = t.map.adjoint(&one, n)?.scale(sign * t.coef);
        bld.add(layout[t.var.0], None, &f);
    }
    let objective_constant = obj.constant_term().map_or(0.0, |c| c.get(0, 0).re);

    for con in model.constraints() {
        let e = con.expr();
        let n = e.dim();
        let rows = n * n;
        let base = bld.m;
        bld.m += rows;
        let consts = e.constant_term().map(herm_coords).unwrap_or_else(|| vec![0.0; rows]);
        bld.b.extend(consts.iter().map(|v| -v));
        let slack = match con {
            Constraint::Psd(_) if n == 1 => Some(Layout::Lp(bld.new_lp())),
            Constraint::Psd(_) => Some(Layout::Block(bld.new_block(n))),
            Constraint::Zero(_) => None,
        };
        for i in 0..rows {
            let basis = herm_basis(n, i);
            for t in e.terms() {
                let vn = model.kind(t.var).dim();
                let f = t.map.adjoint(&basis, vn)?.scale(t.coef);
                bld.add(layout[t.var.0], Some(base + i), &f);
            }
            if let Some(s) = slack {
                bld.add(s, Some(base + i), &(-&basis));
            }
        }
    }

    let m = bld.m;
    let blocks = bld
        .blocks
        .into_iter()
        .map(|(n, rows_map, c)| {
            let rows: Vec<usize> = rows_map.keys().copied().collect();
            let mut a = DMatrix::zeros(rows.len(), svec_len(n));
            for (k, v) in rows_map.values().enumerate() {
                a.row_mut(k).copy_from(&v.transpose());
            }
            PsdBlock { n, rows, a, c }
        })
        .collect();
    let dense_cols = |cols: Vec<(BTreeMap<usize, f64>, f64)>| {
        let mut a = DMatrix::zeros(m, cols.len());
        let mut c = DVector::zeros(cols.len());
        for (j, (entries, cost)) in cols.into_iter().enumerate() {
            for (r, v) in entries {
                a[(r, j)] = v;
            }
            c[j] = cost;
        }
        (a, c)
    };
    let (lp_a, lp_c) = dense_cols(bld.lp);
    let (free_a, free_c) = dense_cols(bld.free);
    Ok(StandardForm {
        m,
        blocks,
        lp_a,
        lp_c,
        free_a,
        free_c,
        b: DVector::from_vec(bld.b),
        objective_constant,
        sense,
        layout,
    })
}

impl StandardForm {
    pub fn num_lp(&self) -> usize {
        self.lp_c.len()
    }

    pub fn num_free(&self) -> usize {
        self.free_c.len()
    }

    /// Column offsets: blocks in order (svec), then LP, then free.
    fn column_offsets(&self) -> (Vec<usize>, usize, usize) {
        let mut offs = Vec::with_capacity(self.blocks.len());
        let mut k = 0;
        for b in &self.blocks {
            offs.push(k);
            k += svec_len(b.n);
        }
        let lp = k;
        (offs, lp, lp + self.num_lp())
    }

    /// Plain-text dump of the standard form.
    ///
    /// ```text
    /// m <rows>
    /// blocks <n_1> <n_2> ...      real block orders; columns are svec entries
    /// lp <count>
    /// free <count>
    /// c <col> <value>
    /// A <row> <col> <value>
    /// b <row> <value>
    /// ```
    /// Columns run over all block svec entries (lower triangle, column
    /// major, off-diagonals scaled by √2), then LP, then free variables.
    /// Indices are zero based; zero entries are omitted.
    pub fn dump(&self) -> String {
        let (offs, lp0, free0) = self.column_offsets();
        let mut s = String::new();
        let _ = writeln!(s, "m {}", self.m);
        let orders: Vec<String> = self.blocks.iter().map(|b| b.n.to_string()).collect();
        let _ = writeln!(s, "blocks {}", orders.join(" "));
        let _ = writeln!(s, "lp {}", self.num_lp());
        let _ = writeln!(s, "free {}", self.num_free());
        for (bi, blk) in self.blocks.iter().enumerate() {
            for (j, v) in blk.c.iter().enumerate() {
                if *v != 0.0 {
                    let _ = writeln!(s, "c {} {:e}", offs[bi] + j, v);
                }
            }
        }
        for (j, v) in self.lp_c.iter().enumerate() {
            if *v != 0.0 {
                let _ = writeln!(s, "c {} {:e}", lp0 + j, v);
            }
        }
        for (j, v) in self.free_c.iter().enumerate() {
            if *v != 0.0 {
                let _ = writeln!(s, "c {} {:e}", free0 + j, v);
            }
        }
        for (bi, blk) in self.blocks.iter().enumerate() {
            for (k, &row) in blk.rows.iter().enumerate() {
                for j in 0..blk.a.ncols() {
                    let v = blk.a[(k, j)];
                    if v != 0.0 {
                        let _ = writeln!(s, "A {row} {} {v:e}", offs[bi] + j);
                    }
                }
            }
        }
        for (base, a) in [(lp0, &self.lp_a), (free0, &self.free_a)] {
            for j in 0..a.ncols() {
                for i in 0..a.nrows() {
                    if a[(i, j)] != 0.0 {
                        let _ = writeln!(s, "A {i} {} {:e}", base + j, a[(i, j)]);
                    }
                }
            }
        }
        for (i, v) in self.b.iter().enumerate() {
            if *v != 0.0 {
                let _ = writeln!(s, "b {i} {v:e}");
            }
        }
        s
    }

    pub(crate) fn recover(&self, model: &Model, raw: RawSolution) -> SdpSolution {
        let sign = match self.sense {
            Sense::Min => 1.0,
            Sense::Max => -1.0,
        };
        let values = self
            .layout
            .iter()
            .map(|l| match *l {
                Layout::Block(k) => HermitianMatrix::symmetrized(complexify(&raw.x_blocks[k])),
                Layout::Lp(k) => HermitianMatrix::from_real_diagonal(&[raw.x_lp[k]]),
                Layout::Free(k) => HermitianMatrix::from_real_diagonal(&[raw.x_free[k]]),
                Layout::HermFree(start, n) => from_herm_coords(&raw.x_free.as_slice()[start..start + n * n], n),
            })
            .collect();
        debug_assert_eq!(self.layout.len(), model.vars().len());
        let (primal, dual) = match raw.status {
            SolveStatus::Infeasible => (sign * f64::INFINITY, sign * f64::INFINITY),
            SolveStatus::Unbounded => (-sign * f64::INFINITY, -sign * f64::INFINITY),
            _ => (sign * raw.primal_objective + self.objective_constant, sign * raw.dual_objective + self.objective_constant),
        };
        SdpSolution {
            status: raw.status,
            primal_objective: primal,
            dual_objective: dual,
            values,
            residuals: Residuals { primal_feas: raw.pinf, dual_feas: raw.dinf, rel_gap: raw.rel_gap },
            iterations: raw.iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal_and_coordinates_invert() {
        for n in 1..5 {
            for i in 0..n * n {
                for j in 0..n * n {
                    let ip = herm_basis(n, i).inner(&herm_basis(n, j));
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - want).abs() < 1e-14, "n={n} i={i} j={j}");
                }
            }
            let m = HermitianMatrix::new(DMatrix::from_fn(n, n, |i, j| C64::new((i + 2 * j) as f64, i as f64 - j as f64))).unwrap();
            let back = from_herm_coords(&herm_coords(&m), n);
            assert!((&back - &m).max_abs() < 1e-14);
            for (i, c) in herm_coords(&m).iter().enumerate() {
                assert!((herm_basis(n, i).inner(&m) - c).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn embedded_spectrum_is_doubled() {
        // [[1, -i], [i, 2]] has eigenvalues (3 ± √5)/2
        let m = DMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(2.0, 0.0)]);
        let e = embed_complex(&m);
        let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(e).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let lo = (3.0 - 5f64.sqrt()) / 2.0;
        let hi = (3.0 + 5f64.sqrt()) / 2.0;
        for (got, want) in ev.iter().zip([lo, lo, hi, hi]) {
            assert!((got - want).abs() < 1e-13);
        }
    }

    #[test]
    fn functional_is_halved_trace() {
        let f = HermitianMatrix::new(DMatrix::from_row_slice(2, 2, &[C64::new(0.3, 0.0), C64::new(0.1, 0.7), C64::new(0.1, -0.7), C64::new(-1.0, 0.0)])).unwrap();
        let x = HermitianMatrix::new(DMatrix::from_row_slice(2, 2, &[C64::new(2.0, 0.0), C64::new(-0.4, 0.2), C64::new(-0.4, -0.2), C64::new(1.0, 0.0)])).unwrap();
        let xt = embed_complex(x.as_matrix());
        assert!((functional_svec(&f).dot(&svec(&xt)) - f.inner(&x)).abs() < 1e-14);
    }

    #[test]
    fn dimension_errors() {
        let mut model = Model::new();
        let x = model.add_var(VarKind::Psd(2));
        model.add_psd(super::super::AffineExpr::zero(3).var(x, 1.0));
        assert!(compile(&model).is_err());
    }
}

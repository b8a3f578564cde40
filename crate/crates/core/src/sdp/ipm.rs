//! Infeasible-start primal-dual interior-point method with Nesterov-Todd
//! scaling and Mehrotra predictor-corrector steps.
//!
//! Primal: `min c·x  s.t. A x = b, x ∈ K`; dual: `max b·y  s.t. c − Aᵀy = z ∈ K*`,
//! with `z = 0` on the free coordinates. Each iteration solves the Schur
//! complement system `M Δy + A_f Δx_f = h`, `A_fᵀ Δy = r_f` by eliminating
//! the free variables.

use nalgebra::{DMatrix, DVector, SVD};

use super::compile::StandardForm;
use super::dense::{cholesky, min_eigenvalue, regularized_cholesky, smat, svec, symmetrize, ScaledCholesky};
use super::SolveStatus;

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iter: usize,
    /// Prints one line per iteration to stderr.
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol_gap: 1e-8, tol_feas: 1e-8, max_iter: 200, verbose: false }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct RawSolution {
    pub status: SolveStatus,
    pub x_blocks: Vec<DMatrix<f64>>,
    pub x_lp: DVector<f64>,
    pub x_free: DVector<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub pinf: f64,
    pub dinf: f64,
    pub rel_gap: f64,
    pub iterations: usize,
}

const STEP_FRACTION: f64 = 0.98;
const INFEASIBILITY_TOL: f64 = 1e-8;
const REG: f64 = 1e-14;
/// Iterations without a 10% improvement of the stopping measure.
const STALL_ITERS: usize = 8;

#[derive(Clone)]
struct Iterate {
    xb: Vec<DMatrix<f64>>,
    zb: Vec<DMatrix<f64>>,
    xl: DVector<f64>,
    zl: DVector<f64>,
    xf: DVector<f64>,
    y: DVector<f64>,
}

struct Direction {
    dxb: Vec<DMatrix<f64>>,
    dzb: Vec<DMatrix<f64>>,
    dxl: DVector<f64>,
    dzl: DVector<f64>,
    dxf: DVector<f64>,
    dy: DVector<f64>,
}

struct Scaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    lam: DVector<f64>,
    w: DMatrix<f64>,
}

struct Kkt {
    m: DMatrix<f64>,
    chol_m: ScaledCholesky,
    af: DMatrix<f64>,
    minv_af: DMatrix<f64>,
    chol_s: Option<ScaledCholesky>,
}

impl Kkt {
    fn solve_once(&self, h: &DVector<f64>, rf: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let dy0 = self.chol_m.solve(h);
        match &self.chol_s {
            None => (dy0, DVector::zeros(0)),
            Some(cs) => {
                let dxf = cs.solve(&(self.af.tr_mul(&dy0) - rf));
                let dy = dy0 - &self.minv_af * &dxf;
                (dy, dxf)
            }
        }
    }

    fn solve(&self, h: &DVector<f64>, rf: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (mut dy, mut dxf) = self.solve_once(h, rf);
        for _ in 0..2 {
            let r1 = h - (&self.m * &dy + &self.af * &dxf);
            let r2 = rf - self.af.tr_mul(&dy);
            if r1.amax() <= 1e-15 * h.amax().max(1.0) && r2.amax() <= 1e-15 * rf.amax().max(1.0) {
                break;
            }
            let (cy, cf) = self.solve_once(&r1, &r2);
            dy += cy;
            dxf += cf;
        }
        (dy, dxf)
    }
}

fn mat_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    l.solve_lower_triangular(&DMatrix::identity(n, n)).expect("nonsingular Cholesky factor")
}

/// Largest step `α` with `x + α dx ⪰ 0` (may be infinite).
fn max_step_psd(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let Some(ch) = cholesky(x) else { return 0.0 };
    let linv = lower_inverse(&ch.unpack());
    let e = &linv * dx * linv.transpose();
    let lmin = min_eigenvalue(&e);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

struct Solver<'a> {
    sf: &'a StandardForm,
    opts: &'a SolverOptions,
    free_active: Vec<usize>,
    nu: f64,
}

impl<'a> Solver<'a> {
    fn a_blocks(&self, xs: &[DMatrix<f64>], out: &mut DVector<f64>) {
        for (blk, x) in self.sf.blocks.iter().zip(xs) {
            let v = &blk.a * svec(x);
            for (k, &r) in blk.rows.iter().enumerate() {
                out[r] += v[k];
            }
        }
    }

    /// Refines the direction against `A ΔX = r_p`. With an extreme scaling
    /// `W`, `ΔX = G D Gᵀ − W ΔZ W` loses the primal equations through
    /// cancellation; the residual is pushed back through the Newton system,
    /// which leaves the dual and complementarity equations intact.
    fn refine_primal(&self, rp: &DVector<f64>, sc: &[Scaling], kkt: &Kkt, xz: &DVector<f64>, dir: &mut Direction) {
        let sf = self.sf;
        let zero_f = DVector::zeros(self.free_active.len());
        for _ in 0..2 {
            let mut ax = &sf.lp_a * &dir.dxl + &sf.free_a * &dir.dxf;
            self.a_blocks(&dir.dxb, &mut ax);
            let e = rp - ax;
            if e.amax() <= 1e-15 * (1.0 + rp.amax()) {
                return;
            }
            let (w, wf) = kkt.solve(&e, &zero_f);
            for k in 0..sc.len() {
                let aty = self.at_y_block(k, &w);
                let mut dx = &sc[k].w * &aty * &sc[k].w;
                symmetrize(&mut dx);
                dir.dxb[k] += dx;
                dir.dzb[k] -= aty;
            }
            let atl = sf.lp_a.tr_mul(&w);
            dir.dxl += xz.component_mul(&atl);
            dir.dzl -= atl;
            for (k, &j) in self.free_active.iter().enumerate() {
                dir.dxf[j] += wf[k];
            }
            dir.dy += w;
        }
    }

    fn a_x(&self, it: &Iterate) -> DVector<f64> {
        let mut out = &self.sf.lp_a * &it.xl + &self.sf.free_a * &it.xf;
        self.a_blocks(&it.xb, &mut out);
        out
    }

    fn at_y_block(&self, k: usize, y: &DVector<f64>) -> DMatrix<f64> {
        let blk = &self.sf.blocks[k];
        let yr = DVector::from_iterator(blk.rows.len(), blk.rows.iter().map(|&r| y[r]));
        smat(blk.a.tr_mul(&yr).as_slice(), blk.n)
    }

    fn residuals(&self, it: &Iterate) -> (DVector<f64>, Vec<DMatrix<f64>>, DVector<f64>, DVector<f64>) {
        let rp = &self.sf.b - self.a_x(it);
        let rdb = (0..self.sf.blocks.len())
            .map(|k| smat(self.sf.blocks[k].c.as_slice(), self.sf.blocks[k].n) - self.at_y_block(k, &it.y) - &it.zb[k])
            .collect();
        let rdl = &self.sf.lp_c - self.sf.lp_a.tr_mul(&it.y) - &it.zl;
        let rdf = &self.sf.free_c - self.sf.free_a.tr_mul(&it.y);
        (rp, rdb, rdl, rdf)
    }

    fn objectives(&self, it: &Iterate) -> (f64, f64) {
        let mut p = self.sf.lp_c.dot(&it.xl) + self.sf.free_c.dot(&it.xf);
        for (blk, x) in self.sf.blocks.iter().zip(&it.xb) {
            p += blk.c.dot(&svec(x));
        }
        (p, self.sf.b.dot(&it.y))
    }

    fn mu(&self, xb: &[DMatrix<f64>], zb: &[DMatrix<f64>], xl: &DVector<f64>, zl: &DVector<f64>) -> f64 {
        if self.nu == 0.0 {
            return 0.0;
        }
        let s: f64 = xb.iter().zip(zb).map(|(x, z)| mat_dot(x, z)).sum::<f64>() + xl.dot(zl);
        s / self.nu
    }

    fn initial(&self) -> Iterate {
        let sf = self.sf;
        let m = sf.m;
        let row_norm = |a: &DMatrix<f64>, k: usize| a.row(k).norm();
        let mut xb = Vec::new();
        let mut zb = Vec::new();
        for blk in &sf.blocks {
            let n = blk.n as f64;
            let mut xi: f64 = 10f64.max(n.sqrt());
            let mut eta: f64 = 10f64.max(n.sqrt()).max(blk.c.norm());
            for (k, &r) in blk.rows.iter().enumerate() {
                let na = row_norm(&blk.a, k);
                xi = xi.max(n * (1.0 + sf.b[r].abs()) / (1.0 + na));
                eta = eta.max(na);
            }
            xb.push(DMatrix::identity(blk.n, blk.n) * xi);
            zb.push(DMatrix::identity(blk.n, blk.n) * eta);
        }
        let nl = sf.num_lp();
        let mut xl = DVector::zeros(nl);
        let mut zl = DVector::zeros(nl);
        for j in 0..nl {
            let col = sf.lp_a.column(j);
            let na = col.norm();
            let mut xi: f64 = 10.0;
            for r in 0..m {
                if col[r] != 0.0 {
                    xi = xi.max((1.0 + sf.b[r].abs()) / (1.0 + na));
                }
            }
            xl[j] = xi;
            zl[j] = 10f64.max(na).max(sf.lp_c[j].abs());
        }
        Iterate { xb, zb, xl, zl, xf: DVector::zeros(sf.num_free()), y: DVector::zeros(m) }
    }

    fn scaling(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Scaling> {
        let lx = cholesky(x)?.unpack();
        let lz = cholesky(z)?.unpack();
        let svd = SVD::new(lz.transpose() * &lx, true, true);
        let v = svd.v_t?.transpose();
        let lam = svd.singular_values;
        if lam.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return None;
        }
        let n = lam.len();
        let mut g = &lx * &v;
        for j in 0..n {
            let s = 1.0 / lam[j].sqrt();
            g.column_mut(j).scale_mut(s);
        }
        let mut g_inv = v.transpose() * lower_inverse(&lx);
        for i in 0..n {
            let s = lam[i].sqrt();
            g_inv.row_mut(i).scale_mut(s);
        }
        let mut w = &g * g.transpose();
        symmetrize(&mut w);
        Some(Scaling { g, g_inv, lam, w })
    }

    fn schur(&self, sc: &[Scaling], it: &Iterate) -> Option<Kkt> {
        let sf = self.sf;
        let m = sf.m;
        let mut mm = DMatrix::zeros(m, m);
        for (blk, s) in sf.blocks.iter().zip(sc) {
            let nr = blk.rows.len();
            if nr == 0 {
                continue;
            }
            let mut bmat = DMatrix::zeros(nr, blk.a.ncols());
            for k in 0..nr {
                let ak = smat(blk.a.row(k).transpose().as_slice(), blk.n);
                let t = s.g.transpose() * ak * &s.g;
                bmat.row_mut(k).copy_from(&svec(&t).transpose());
            }
            let local = &bmat * bmat.transpose();
            for (i, &ri) in blk.rows.iter().enumerate() {
                for (j, &rj) in blk.rows.iter().enumerate() {
                    mm[(ri, rj)] += local[(i, j)];
                }
            }
        }
        if sf.num_lp() > 0 {
            let d = it.xl.component_div(&it.zl);
            let mut scaled = sf.lp_a.clone();
            for j in 0..scaled.ncols() {
                scaled.column_mut(j).scale_mut(d[j]);
            }
            mm.gemm(1.0, &scaled, &sf.lp_a.transpose(), 1.0);
        }
        symmetrize(&mut mm);
        let chol_m = regularized_cholesky(&mm, REG)?;
        let af = DMatrix::from_fn(m, self.free_active.len(), |i, j| sf.free_a[(i, self.free_active[j])]);
        let (minv_af, chol_s) = if af.ncols() > 0 {
            let minv_af = chol_m.solve_matrix(&af);
            let mut s = af.tr_mul(&minv_af);
            symmetrize(&mut s);
            let cs = regularized_cholesky(&s, REG)?;
            (minv_af, Some(cs))
        } else {
            (DMatrix::zeros(m, 0), None)
        };
        Some(Kkt { m: mm, chol_m, af, minv_af, chol_s })
    }

    /// Solves the Newton system for complementarity targets `d` (scaled
    /// space, `ΔX̂ + ΔẐ = d`) and LP targets `rc` (`zΔx + xΔz = rc`).
    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        it: &Iterate,
        sc: &[Scaling],
        kkt: &Kkt,
        rp: &DVector<f64>,
        rdb: &[DMatrix<f64>],
        rdl: &DVector<f64>,
        rdf: &DVector<f64>,
        d: &[DMatrix<f64>],
        rc: &DVector<f64>,
    ) -> Direction {
        let sf = self.sf;
        let mut h = rp.clone();
        let gdg: Vec<DMatrix<f64>> = sc.iter().zip(d).map(|(s, dk)| &s.g * dk * s.g.transpose()).collect();
        let wrw: Vec<DMatrix<f64>> = sc.iter().zip(rdb).map(|(s, r)| &s.w * r * &s.w).collect();
        let diff: Vec<DMatrix<f64>> = gdg.iter().zip(&wrw).map(|(a, b)| b - a).collect();
        self.a_blocks(&diff, &mut h);
        let xz = it.xl.component_div(&it.zl);
        let dl = rc.component_div(&it.zl);
        if sf.num_lp() > 0 {
            h -= &sf.lp_a * (&dl - xz.component_mul(rdl));
        }
        let rf = DVector::from_iterator(self.free_active.len(), self.free_active.iter().map(|&j| rdf[j]));
        let (dy, dxf_active) = kkt.solve(&h, &rf);
        let mut dxf = DVector::zeros(sf.num_free());
        for (k, &j) in self.free_active.iter().enumerate() {
            dxf[j] = dxf_active[k];
        }
        let mut dzb = Vec::with_capacity(sc.len());
        let mut dxb = Vec::with_capacity(sc.len());
        for k in 0..sc.len() {
            let mut dz = &rdb[k] - self.at_y_block(k, &dy);
            symmetrize(&mut dz);
            let mut dx = &gdg[k] - &sc[k].w * &dz * &sc[k].w;
            symmetrize(&mut dx);
            dzb.push(dz);
            dxb.push(dx);
        }
        let dzl = rdl - sf.lp_a.tr_mul(&dy);
        let dxl = &dl - xz.component_mul(&dzl);
        let mut dir = Direction { dxb, dzb, dxl, dzl, dxf, dy };
        self.refine_primal(rp, sc, kkt, &xz, &mut dir);
        dir
    }

    fn step_lengths(&self, it: &Iterate, dir: &Direction) -> (f64, f64) {
        let mut ap = max_step_lp(&it.xl, &dir.dxl);
        let mut ad = max_step_lp(&it.zl, &dir.dzl);
        for k in 0..it.xb.len() {
            ap = ap.min(max_step_psd(&it.xb[k], &dir.dxb[k]));
            ad = ad.min(max_step_psd(&it.zb[k], &dir.dzb[k]));
        }
        (ap, ad)
    }

    fn raw(&self, it: &Iterate, status: SolveStatus, stats: (f64, f64, f64, f64, f64), iterations: usize) -> RawSolution {
        RawSolution {
            status,
            x_blocks: it.xb.clone(),
            x_lp: it.xl.clone(),
            x_free: it.xf.clone(),
            primal_objective: stats.0,
            dual_objective: stats.1,
            pinf: stats.2,
            dinf: stats.3,
            rel_gap: stats.4,
            iterations,
        }
    }

    fn run(&self) -> RawSolution {
        let sf = self.sf;
        let opts = self.opts;
        let mut it = self.initial();
        let bnorm = sf.b.norm();
        let cnorm = (sf.lp_c.norm_squared()
            + sf.free_c.norm_squared()
            + sf.blocks.iter().map(|b| b.c.norm_squared()).sum::<f64>())
        .sqrt();
        let mut stats = (0.0, 0.0, f64::INFINITY, f64::INFINITY, f64::INFINITY);
        // Best iterate by distance to the stopping test; returned when the
        // method stalls, runs out of iterations or breaks down.
        let mut best: Option<(f64, Iterate, (f64, f64, f64, f64, f64), usize)> = None;
        let mut since_progress = 0;
        for iter in 0..opts.max_iter {
            let (rp, rdb, rdl, rdf) = self.residuals(&it);
            let (pobj, dobj) = self.objectives(&it);
            let rd_norm = (rdb.iter().map(|r| r.norm_squared()).sum::<f64>()
                + rdl.norm_squared()
                + rdf.norm_squared())
            .sqrt();
            let pinf = rp.norm() / (1.0 + bnorm);
            let dinf = rd_norm / (1.0 + cnorm);
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            let mu = self.mu(&it.xb, &it.zb, &it.xl, &it.zl);
            stats = (pobj, dobj, pinf, dinf, gap);
            if opts.verbose {
                eprintln!("{iter:3} pobj {pobj:+.10e} dobj {dobj:+.10e} pinf {pinf:.2e} dinf {dinf:.2e} gap {gap:.2e} mu {mu:.2e}");
            }
            if pinf <= opts.tol_feas && dinf <= opts.tol_feas && gap <= opts.tol_gap {
                return self.raw(&it, SolveStatus::Optimal, stats, iter);
            }
            let merit = (pinf / opts.tol_feas).max(dinf / opts.tol_feas).max(gap / opts.tol_gap);
            match &best {
                Some((b, ..)) if !(merit < 0.9 * b) => since_progress += 1,
                _ => since_progress = 0,
            }
            if best.as_ref().map_or(true, |(b, ..)| merit < *b) {
                best = Some((merit, it.clone(), stats, iter));
            }
            if since_progress >= STALL_ITERS {
                let (_, b, st, i) = best.expect("set above");
                return self.raw(&b, SolveStatus::NumericalFailure, st, i);
            }
            // A^T y + z = c − r_d, so a large b·y with a small left side is
            // a Farkas certificate for primal infeasibility.
            if dobj > 0.0 {
                let aty_z = {
                    let c_minus: f64 = sf
                        .blocks
                        .iter()
                        .zip(&rdb)
                        .map(|(b, r)| (smat(b.c.as_slice(), b.n) - r).norm_squared())
                        .sum::<f64>()
                        + (&sf.lp_c - &rdl).norm_squared()
                        + (&sf.free_c - &rdf).norm_squared();
                    c_minus.sqrt()
                };
                if aty_z / dobj < INFEASIBILITY_TOL && pinf > opts.tol_feas {
                    return self.raw(&it, SolveStatus::Infeasible, stats, iter);
                }
            }
            if pobj < 0.0 {
                let ax = (&sf.b - &rp).norm();
                if ax / (-pobj) < INFEASIBILITY_TOL && dinf > opts.tol_feas {
                    return self.raw(&it, SolveStatus::Unbounded, stats, iter);
                }
            }

            let fail = |best: Option<(f64, Iterate, (f64, f64, f64, f64, f64), usize)>| {
                let (_, b, st, i) = best.expect("set above");
                self.raw(&b, SolveStatus::NumericalFailure, st, i)
            };
            let Some(sc) = it.xb.iter().zip(&it.zb).map(|(x, z)| Self::scaling(x, z)).collect::<Option<Vec<_>>>() else {
                return fail(best);
            };
            let Some(kkt) = self.schur(&sc, &it) else {
                return fail(best);
            };

            // predictor
            let d_aff: Vec<DMatrix<f64>> = sc.iter().map(|s| DMatrix::from_diagonal(&(-&s.lam))).collect();
            let rc_aff = -it.xl.component_mul(&it.zl);
            let aff = self.direction(&it, &sc, &kkt, &rp, &rdb, &rdl, &rdf, &d_aff, &rc_aff);
            let (ap, ad) = self.step_lengths(&it, &aff);
            let (ap, ad) = (ap.min(1.0), ad.min(1.0));
            let sigma = if self.nu > 0.0 && mu > 0.0 {
                let xb: Vec<_> = it.xb.iter().zip(&aff.dxb).map(|(x, d)| x + d * ap).collect();
                let zb: Vec<_> = it.zb.iter().zip(&aff.dzb).map(|(z, d)| z + d * ad).collect();
                let xl = &it.xl + &aff.dxl * ap;
                let zl = &it.zl + &aff.dzl * ad;
                let mu_aff = self.mu(&xb, &zb, &xl, &zl);
                (mu_aff / mu).clamp(0.0, 1.0).powi(3)
            } else {
                0.0
            };

            // corrector
            let target = sigma * mu;
            let d_cor: Vec<DMatrix<f64>> = sc
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let dxh = &s.g_inv * &aff.dxb[k] * s.g_inv.transpose();
                    let dzh = s.g.transpose() * &aff.dzb[k] * &s.g;
                    let prod = &dxh * &dzh;
                    let sym = (&prod + prod.transpose()) * 0.5;
                    let n = s.lam.len();
                    DMatrix::from_fn(n, n, |i, j| {
                        let diag = if i == j { target - s.lam[i] * s.lam[i] } else { 0.0 };
                        2.0 * (diag - sym[(i, j)]) / (s.lam[i] + s.lam[j])
                    })
                })
                .collect();
            let rc = DVector::from_fn(sf.num_lp(), |j, _| target - it.xl[j] * it.zl[j] - aff.dxl[j] * aff.dzl[j]);
            let dir = self.direction(&it, &sc, &kkt, &rp, &rdb, &rdl, &rdf, &d_cor, &rc);
            let (ap, ad) = self.step_lengths(&it, &dir);
            let ap = (STEP_FRACTION * ap).min(1.0);
            let ad = (STEP_FRACTION * ad).min(1.0);
            if opts.verbose {
                eprintln!("    sigma {sigma:.2e} steps {ap:.3e} {ad:.3e}");
            }
            if !(ap.is_finite() && ad.is_finite()) {
                return fail(best);
            }
            for k in 0..it.xb.len() {
                it.xb[k] += &dir.dxb[k] * ap;
                it.zb[k] += &dir.dzb[k] * ad;
                symmetrize(&mut it.xb[k]);
                symmetrize(&mut it.zb[k]);
            }
            it.xl += &dir.dxl * ap;
            it.zl += &dir.dzl * ad;
            it.xf += &dir.dxf * ap;
            it.y += &dir.dy * ad;
        }
        match best {
            Some((_, b, st, _)) => self.raw(&b, SolveStatus::MaxIter, st, opts.max_iter),
            None => self.raw(&it, SolveStatus::MaxIter, stats, opts.max_iter),
        }
    }
}

/// Screens trivially unbounded columns, then runs the interior-point loop.
pub(crate) fn solve_standard(sf: &StandardForm, opts: &SolverOptions) -> RawSolution {
    let nf = sf.num_free();
    let mut free_active = Vec::with_capacity(nf);
    let unbounded = |sf: &StandardForm| RawSolution {
        status: SolveStatus::Unbounded,
        x_blocks: sf.blocks.iter().map(|b| DMatrix::zeros(b.n, b.n)).collect(),
        x_lp: DVector::zeros(sf.num_lp()),
        x_free: DVector::zeros(sf.num_free()),
        primal_objective: f64::NEG_INFINITY,
        dual_objective: f64::NEG_INFINITY,
        pinf: 0.0,
        dinf: f64::INFINITY,
        rel_gap: f64::INFINITY,
        iterations: 0,
    };
    for j in 0..nf {
        let empty = sf.free_a.column(j).iter().all(|&v| v == 0.0);
        if empty {
            if sf.free_c[j] != 0.0 {
                return unbounded(sf);
            }
        } else {
            free_active.push(j);
        }
    }
    for j in 0..sf.num_lp() {
        if sf.lp_a.column(j).iter().all(|&v| v == 0.0) && sf.lp_c[j] < 0.0 {
            return unbounded(sf);
        }
    }
    for blk in &sf.blocks {
        if blk.rows.is_empty() && min_eigenvalue(&smat(blk.c.as_slice(), blk.n)) < 0.0 {
            return unbounded(sf);
        }
    }
    let nu = sf.blocks.iter().map(|b| b.n).sum::<usize>() + sf.num_lp();
    let solver = Solver { sf, opts, free_active, nu: nu as f64 };
    if sf.m == 0 {
        // every remaining column has nonnegative cost on its cone: x = 0 is optimal
        let it = Iterate {
            xb: sf.blocks.iter().map(|b| DMatrix::zeros(b.n, b.n)).collect(),
            zb: Vec::new(),
            xl: DVector::zeros(sf.num_lp()),
            zl: DVector::zeros(0),
            xf: DVector::zeros(nf),
            y: DVector::zeros(0),
        };
        return solver.raw(&it, SolveStatus::Optimal, (0.0, 0.0, 0.0, 0.0, 0.0), 0);
    }
    solver.run()
}

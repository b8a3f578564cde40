//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the test
//! fails if any criterion fails.

mod common;

use std::time::Instant;

use choi_divergence::bounds::{energy_dual_pair, sandwich, BoundRequest, BoundResult, BoundStatus, EnergyConstraint, EnergyDualInstance};
use choi_divergence::channel::{
    amplitude_damping, apply_channel, choi_from_kraus, dephasing, depolarizing, identity, replacer, ChoiMatrix,
    KrausChannel,
};
use choi_divergence::grid::{upper_coefficients, GridScheme};
use choi_divergence::linalg::HermitianMatrix;
use choi_divergence::oracle::{brute_force_channel_re, classical_kl_channel, integral_quadrature, umegaki, BruteForceOptions};
use choi_divergence::resource::{default_lambda_bar, free_grid, min_over_free_upper, FreeSetKind, FreeSetSpec};
use choi_divergence::sdp::SolverOptions;
use choi_divergence::spectral::{dmax, dmax_sdp, IntervalBounds, DMAX_TOL};
use common::{classical_pair, random_hermitian, random_psd, random_state, rng};
use rand::Rng;

/// Slack for comparing values from different numerical routes.
const BRACKET_SLACK: f64 = 1e-6;

fn choi(ch: KrausChannel) -> ChoiMatrix {
    choi_from_kraus(&ch)
}

struct Report {
    failed: Vec<usize>,
}

impl Report {
    fn record(&mut self, n: usize, ok: bool, detail: String) {
        println!("criterion {n:2}: {} {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed.push(n);
        }
    }
}

fn criterion2_pairs() -> Vec<(&'static str, ChoiMatrix, ChoiMatrix)> {
    let id = choi(identity(2).unwrap());
    let mut v: Vec<_> = [(0.25, "id/depol(0.25)"), (0.5, "id/depol(0.5)"), (0.75, "id/depol(0.75)")]
        .into_iter()
        .map(|(p, name)| (name, id.clone(), choi(depolarizing(2, p).unwrap())))
        .collect();
    v.push(("deph(0.3)/deph(0.6)", choi(dephasing(2, 0.3).unwrap()), choi(dephasing(2, 0.6).unwrap())));
    v
}

fn bracketed(res: &BoundResult, value: f64) -> bool {
    res.lower <= value + BRACKET_SLACK && value <= res.upper + BRACKET_SLACK
}

fn criterion1(rep: &mut Report) {
    let sigma = HermitianMatrix::from_real_diagonal(&[0.7, 0.3]);
    let channels = [
        ("identity(2)", choi(identity(2).unwrap())),
        ("identity(3)", choi(identity(3).unwrap())),
        ("depolarizing(2,0.5)", choi(depolarizing(2, 0.5).unwrap())),
        ("amplitude_damping(0.5)", choi(amplitude_damping(0.5).unwrap())),
        ("dephasing(2,0.3)", choi(dephasing(2, 0.3).unwrap())),
        ("replacer(2)", choi(replacer(2, &sigma).unwrap())),
    ];
    let mut ok = true;
    let mut worst = (0.0f64, 0.0f64);
    for (name, g) in &channels {
        let t = Instant::now();
        let res = sandwich(&BoundRequest::new(g.clone(), g.clone(), 1e-3)).unwrap();
        let secs = t.elapsed().as_secs_f64();
        let good = res.lower.abs() <= 1e-6 && res.upper.abs() <= 1e-6 && secs < 5.0;
        if !good {
            println!("  {name}: lower {:e} upper {:e} in {secs:.2}s", res.lower, res.upper);
        }
        ok &= good;
        worst = (worst.0.max(res.lower.abs().max(res.upper.abs())), worst.1.max(secs));
    }
    rep.record(1, ok, format!("identical channels: max |bound| {:.1e}, slowest {:.2}s", worst.0, worst.1));
}

/// Returns the converged sandwiches for criterion 10.
fn criterion2(rep: &mut Report) -> Vec<(BoundResult, f64)> {
    let mut ok = true;
    let mut out = Vec::new();
    for (name, n, m) in criterion2_pairs() {
        let t = Instant::now();
        let res = sandwich(&BoundRequest::new(n.clone(), m.clone(), 1e-2)).unwrap();
        let bf = brute_force_channel_re(&n, &m, &BruteForceOptions::default()).unwrap().value;
        let secs = t.elapsed().as_secs_f64();
        let good = res.status == BoundStatus::Converged && bracketed(&res, bf) && res.gap <= 1e-2 && secs < 60.0;
        println!(
            "  {name}: lower {:.8} oracle {:.8} upper {:.8} gap {:.1e} r {} in {secs:.2}s",
            res.lower, bf, res.upper, res.gap, res.r_used
        );
        ok &= good;
        out.push((res, bf));
    }
    rep.record(2, ok, "sandwich brackets the brute-force oracle with gap <= 1e-2".into());
    out
}

fn criterion3(rep: &mut Report) {
    let mut ok = true;
    for (name, n, m) in criterion2_pairs() {
        let gaps: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&r| {
                let mut req = BoundRequest::new(n.clone(), m.clone(), 1e-12);
                req.r_init = Some(r);
                req.r_cap = r;
                sandwich(&req).unwrap().gap
            })
            .collect();
        let good = gaps[1] <= gaps[0] / 2.0 && gaps[2] <= gaps[1] / 2.0;
        println!("  {name}: gaps r=16 {:.3e} r=32 {:.3e} r=64 {:.3e}", gaps[0], gaps[1], gaps[2]);
        ok &= good;
    }
    rep.record(3, ok, "gap halves for each doubling of r from 16 to 64".into());
}

fn criterion4(rep: &mut Report) {
    let mut r = rng(4);
    let opts = SolverOptions::default();
    let mut worst = 0.0f64;
    let mut ok = true;
    for _ in 0..20 {
        let a = random_psd(&mut r, 4, 4);
        let b = random_psd(&mut r, 4, 4);
        let spec = dmax(&a, &b, DMAX_TOL).unwrap();
        let sdp = dmax_sdp(&a, &b, &opts).unwrap();
        worst = worst.max((spec - sdp).abs());
        ok &= (spec - sdp).abs() <= 1e-6;
    }
    for _ in 0..5 {
        let a = random_psd(&mut r, 4, 3);
        let b = random_psd(&mut r, 4, 2);
        ok &= dmax(&a, &b, DMAX_TOL).unwrap() == f64::INFINITY;
        ok &= dmax_sdp(&a, &b, &opts).unwrap() == f64::INFINITY;
    }
    rep.record(4, ok, format!("spectral vs SDP max-relative entropy: max deviation {worst:.1e}; support violations flagged"));
}

fn criterion5(rep: &mut Report) {
    let mut r = rng(5);
    let opts = SolverOptions::default();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let j = random_psd(&mut r, 4, 4);
        let h = random_hermitian(&mut r, 2);
        let (lo, hi) = (h.min_eigenvalue().unwrap(), h.max_eigenvalue().unwrap());
        let e = lo + r.gen_range(0.1..0.9) * (hi - lo);
        let inst = EnergyDualInstance { j, dim_a: 2, dim_b: 2, h, e };
        let (p, d) = energy_dual_pair(&inst, &opts).unwrap();
        worst = worst.max((p - d).abs());
    }
    rep.record(5, worst <= 1e-6, format!("energy-constrained strong duality: max |primal - dual| {worst:.1e}"));
}

fn criterion6(rep: &mut Report) {
    let mut r = rng(6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let rho = random_state(&mut r, 2, 2);
        let sigma = random_state(&mut r, 2, 2);
        let a = umegaki(&rho, &sigma).unwrap();
        let b = integral_quadrature(&rho, &sigma, 1e-6).unwrap();
        worst = worst.max((a - b).abs());
    }
    rep.record(6, worst <= 1e-4, format!("integral representation vs Umegaki: max deviation {worst:.1e}"));
}

fn criterion7(rep: &mut Report) {
    let mut ok = true;
    for seed in 0..5 {
        let (p, q, gp, gq) = classical_pair(700 + seed, 2, 3);
        let kl = classical_kl_channel(&p, &q).unwrap().value;
        let res = sandwich(&BoundRequest::new(gp, gq, 1e-2)).unwrap();
        println!("  seed {seed}: lower {:.6} kl {:.6} upper {:.6} gap {:.1e}", res.lower, kl, res.upper, res.gap);
        ok &= bracketed(&res, kl) && res.gap <= 1e-2;
    }
    rep.record(7, ok, "classical pairs bracket the classical channel divergence".into());
}

fn criterion8(rep: &mut Report) {
    let opts = SolverOptions::default();
    let mut ok = true;
    let mut detail = Vec::new();
    for (d, r, tol) in [(2usize, 64usize, 1e-2), (3, 32, 2e-2)] {
        let t = Instant::now();
        let n = choi(identity(d).unwrap());
        let grid = free_grid(default_lambda_bar(&n).unwrap(), r, GridScheme::Geometric, 1e-2).unwrap();
        let uc = upper_coefficients(&grid).unwrap();
        let res = min_over_free_upper(&n, &FreeSetSpec::new(FreeSetKind::Replacer), &grid, &uc, &[], &opts).unwrap();
        let secs = t.elapsed().as_secs_f64();
        let target = 2.0 * (d as f64).ln();
        ok &= (res.upper - target).abs() <= tol && secs < 120.0;
        detail.push(format!("d={d}: {:.6} vs {target:.6} in {secs:.1}s", res.upper));
    }
    rep.record(8, ok, format!("replacer free set: {}", detail.join(", ")));
}

fn criterion9(rep: &mut Report) {
    let n = choi(dephasing(2, 0.3).unwrap());
    let m = choi(depolarizing(2, 0.5).unwrap());
    let h = HermitianMatrix::from_real_diagonal(&[0.0, 1.0]);
    let zero = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]);
    let target = umegaki(&apply_channel(&n, &zero).unwrap(), &apply_channel(&m, &zero).unwrap()).unwrap();
    let mut req = BoundRequest::new(n, m, 1e-2);
    req.energy = vec![EnergyConstraint::new(h, 0.0).unwrap()];
    let res = sandwich(&req).unwrap();
    let ok = res.status == BoundStatus::Converged
        && (res.lower - target).abs() <= 1e-2
        && (res.upper - target).abs() <= 1e-2;
    rep.record(9, ok, format!("energy-pinned input: [{:.6}, {:.6}] vs {target:.6}", res.lower, res.upper));
}

fn criterion10(rep: &mut Report, base: &[(BoundResult, f64)]) {
    let mut ok = true;
    for ((name, n, m), (orig, bf)) in criterion2_pairs().into_iter().zip(base) {
        let mut req = BoundRequest::new(n, m, 1e-2);
        req.interval = Some(IntervalBounds::new(2.0 * orig.lambda, orig.mu).unwrap());
        req.r_init = Some(2 * orig.r_used);
        let res = sandwich(&req).unwrap();
        let shift = (res.midpoint() - orig.midpoint()).abs();
        println!("  {name}: midpoint {:.8} vs {:.8}, gap {:.1e}", res.midpoint(), orig.midpoint(), res.gap);
        ok &= bracketed(&res, *bf) && shift <= 2e-2;
    }
    rep.record(10, ok, "doubling lambda keeps valid sandwiches with agreeing midpoints".into());
}

fn criterion11(rep: &mut Report) {
    let t = Instant::now();
    let req = BoundRequest::new(choi(identity(2).unwrap()), choi(amplitude_damping(0.5).unwrap()), 1e-3);
    let res = sandwich(&req).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let ok = res.status == BoundStatus::InfiniteDivergence
        && res.upper == f64::INFINITY
        && res.diagnostics.is_empty()
        && res.rounds.is_empty()
        && secs < 1.0;
    rep.record(11, ok, format!("infinite divergence detected without any solve in {secs:.3}s"));
}

#[test]
fn acceptance() {
    let mut rep = Report { failed: Vec::new() };
    criterion1(&mut rep);
    let base = criterion2(&mut rep);
    criterion3(&mut rep);
    criterion4(&mut rep);
    criterion5(&mut rep);
    criterion6(&mut rep);
    criterion7(&mut rep);
    criterion8(&mut rep);
    criterion9(&mut rep);
    criterion10(&mut rep, &base);
    criterion11(&mut rep);
    assert!(rep.failed.is_empty(), "failed criteria: {:?}", rep.failed);
}

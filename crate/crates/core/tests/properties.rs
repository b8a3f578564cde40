//! Invariants over seeded random channels.

mod common;

use choi_divergence::bounds::{evaluate_at_state, sandwich, BoundRequest};
use choi_divergence::channel::{ChoiMatrix, KrausChannel};
use choi_divergence::linalg::{kron, pinv_sqrt, HermitianMatrix};
use choi_divergence::oracle::{brute_force_channel_re, integral_quadrature, umegaki, BruteForceOptions};
use choi_divergence::spectral::{dmax, interval_for_pair, IntervalBounds, DMAX_TOL};
use common::{random_complex, random_psd, random_state, rng};
use nalgebra::DMatrix;
use proptest::prelude::*;

const SLACK: f64 = 1e-6;

/// Random qubit channel with `kraus` operators from an isometry.
fn random_channel(seed: u64, kraus: usize) -> ChoiMatrix {
    let mut r = rng(seed);
    let g = random_complex(&mut r, 2 * kraus, 2);
    let gram = HermitianMatrix::new(g.adjoint() * &g).unwrap();
    let v = &g * pinv_sqrt(&gram, 1e-12).unwrap().as_matrix();
    let ops = (0..kraus).map(|k| v.rows(2 * k, 2).into_owned()).collect();
    ChoiMatrix::from_kraus(&KrausChannel::new(2, 2, ops, true).unwrap())
}

/// Mixture with the fully depolarizing channel, so the Choi matrix has full rank.
fn full_rank(g: &ChoiMatrix, w: f64) -> ChoiMatrix {
    let mixed = kron(&HermitianMatrix::identity(2), &HermitianMatrix::identity(2).scale(0.5));
    let op = &g.op().scale(1.0 - w) + &mixed.scale(w);
    ChoiMatrix::new(2, 2, op, true).unwrap()
}

fn pair(seed: u64) -> (ChoiMatrix, ChoiMatrix) {
    (random_channel(seed, 2), full_rank(&random_channel(seed ^ 0x9e37, 2), 0.4))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sandwich_brackets_the_oracle(seed in any::<u64>()) {
        let (n, m) = pair(seed);
        let mut req = BoundRequest::new(n.clone(), m.clone(), 1e-12);
        req.r_init = Some(8);
        req.r_cap = 8;
        let res = sandwich(&req).unwrap();
        let bf = brute_force_channel_re(&n, &m, &BruteForceOptions::default()).unwrap().value;
        prop_assert!(res.lower <= bf + SLACK, "lower {} oracle {}", res.lower, bf);
        prop_assert!(bf <= res.upper + SLACK, "oracle {} upper {}", bf, res.upper);
        let w = res.witness_rho_a.unwrap();
        prop_assert!((w.trace() - 1.0).abs() < 1e-9 && w.min_eigenvalue().unwrap() >= -1e-12);
    }

    #[test]
    fn inflated_interval_stays_valid(seed in any::<u64>(), factor in 1.2f64..3.0) {
        let (n, m) = pair(seed);
        let iv = interval_for_pair(&n, &m).unwrap();
        let mut req = BoundRequest::new(n.clone(), m.clone(), 1e-12);
        req.interval = Some(IntervalBounds::new(factor * iv.lambda, iv.mu / factor).unwrap());
        req.r_init = Some(8);
        req.r_cap = 8;
        let res = sandwich(&req).unwrap();
        let bf = brute_force_channel_re(&n, &m, &BruteForceOptions::default()).unwrap().value;
        prop_assert!(res.lower <= bf + SLACK && bf <= res.upper + SLACK);
    }

    #[test]
    fn point_values_never_exceed_the_supremum(seed in any::<u64>()) {
        let (n, m) = pair(seed);
        let bf = brute_force_channel_re(&n, &m, &BruteForceOptions::default()).unwrap().value;
        let mut r = rng(seed.wrapping_add(1));
        for _ in 0..10 {
            let rho = random_state(&mut r, 2, 2);
            prop_assert!(evaluate_at_state(&n, &m, &rho).unwrap() <= bf + 1e-7);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn dmax_scaling_and_unitary_invariance(seed in any::<u64>(), c in 0.1f64..10.0) {
        let mut r = rng(seed);
        let a = random_psd(&mut r, 3, 3);
        let b = random_psd(&mut r, 3, 3);
        let base = dmax(&a, &b, DMAX_TOL).unwrap();
        prop_assert!((dmax(&a.scale(c), &b, DMAX_TOL).unwrap() - base - c.ln()).abs() < 1e-8);
        let q = random_complex(&mut r, 3, 3).qr().q();
        let (ua, ub) = (a.conjugate_by(&q).unwrap(), b.conjugate_by(&q).unwrap());
        prop_assert!((dmax(&ua, &ub, DMAX_TOL).unwrap() - base).abs() < 1e-8);
    }

    #[test]
    fn quadrature_matches_umegaki_for_equal_traces(seed in any::<u64>(), t in 0.2f64..3.0) {
        let mut r = rng(seed);
        let rho = random_state(&mut r, 2, 2).scale(t);
        let sigma = random_state(&mut r, 2, 2).scale(t);
        let a = umegaki(&rho, &sigma).unwrap();
        let b = integral_quadrature(&rho, &sigma, 1e-6).unwrap();
        prop_assert!((a - b).abs() <= 1e-4 * t.max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn umegaki_is_nonnegative_on_states(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rho = random_state(&mut r, 3, 2);
        let sigma = random_state(&mut r, 3, 3);
        prop_assert!(umegaki(&rho, &sigma).unwrap() >= -1e-12);
        let id = DMatrix::identity(3, 3);
        prop_assert!(umegaki(&rho, &rho.conjugate_by(&id).unwrap()).unwrap().abs() < 1e-10);
    }
}

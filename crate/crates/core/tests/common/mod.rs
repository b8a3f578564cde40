#![allow(dead_code)]

use choi_divergence::channel::ChoiMatrix;
use choi_divergence::linalg::{HermitianMatrix, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> HermitianMatrix {
    let x = random_complex(rng, n, n);
    HermitianMatrix::new((&x + x.adjoint()).scale(0.5)).unwrap()
}

pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> HermitianMatrix {
    let g = random_complex(rng, n, rank);
    let m = &g * g.adjoint();
    HermitianMatrix::new((&m + m.adjoint()).scale(0.5)).unwrap()
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> HermitianMatrix {
    let m = random_psd(rng, n, rank);
    let t = m.trace();
    m.scale(1.0 / t)
}

/// Row-stochastic matrix with entries bounded away from zero.
pub fn random_stochastic(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            let w: Vec<f64> = (0..cols).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.iter().map(|v| v / s).collect()
        })
        .collect()
}

pub fn classical_pair(seed: u64, dim_a: usize, dim_b: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, ChoiMatrix, ChoiMatrix) {
    let mut r = rng(seed);
    let p = random_stochastic(&mut r, dim_a, dim_b);
    let q = random_stochastic(&mut r, dim_a, dim_b);
    let gp = ChoiMatrix::classical(&p).unwrap();
    let gq = ChoiMatrix::classical(&q).unwrap();
    (p, q, gp, gq)
}

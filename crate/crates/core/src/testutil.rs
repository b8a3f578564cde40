use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{HermitianMatrix, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> HermitianMatrix {
    HermitianMatrix::symmetrized(random_complex(rng, n, n))
}

/// `G G† / tr` with `G` of shape `n × rank`.
pub fn random_state(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> HermitianMatrix {
    let g = random_complex(rng, n, rank);
    let m = HermitianMatrix::symmetrized(&g * g.adjoint());
    let t = m.trace();
    m.scale(1.0 / t)
}

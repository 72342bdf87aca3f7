//! Timing harnesses for the DAMAS sweep, PSF assembly and grid compression.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::matrix::DenseMatrix;
use crate::metrics::{bench, BenchStats};
use crate::scalar::Real;
use crate::solver::damas_sweep;

/// Dense random system shaped like a PSF matrix: unit diagonal, off-diagonal
/// entries uniform in `[0, 0.5)`, and a nonnegative right-hand side.
pub fn random_system<T: Real>(dim: usize, seed: u64) -> (DenseMatrix<T>, Vec<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let v = if i == j {
                1.0
            } else {
                0.5 * rng.random::<f64>()
            };
            data.push(T::lit(v));
        }
    }
    let b = (0..dim).map(|_| T::lit(rng.random::<f64>())).collect();
    (DenseMatrix::from_row_major(dim, data).expect("square"), b)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTiming {
    pub unknowns: usize,
    pub per_sweep: BenchStats,
}

/// Per-sweep wall time on random dense systems of each size.
pub fn sweep_scaling<T: Real>(
    sizes: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<SweepTiming>> {
    sizes
        .iter()
        .map(|&dim| {
            let (a, b) = random_system::<T>(dim, seed);
            let mut x = vec![T::zero(); dim];
            let per_sweep = bench(repeats, || {
                damas_sweep(&a, &b, &mut x, false).expect("finite sweep");
            })?;
            Ok(SweepTiming {
                unknowns: dim,
                per_sweep,
            })
        })
        .collect()
}

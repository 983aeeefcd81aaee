//! Seeded generators for test corpora. Every draw goes through a
//! [`ChaCha8Rng`] stream derived from one 64-bit seed, so a seed pins down
//! every matrix, spec and problem produced here.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gauss::LinearSystem;
use crate::mask_move::MskMovSpec;
use crate::matrix::{BlockSpec, Matrix};
use crate::ridge::RidgeProblem;

/// Generator for stream `stream` of `seed`. Distinct streams never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn uniform_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..=hi))
}

/// Entries in `[-1, 1]`.
pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    uniform_matrix(rng, rows, cols, -1.0, 1.0)
}

/// A valid mask-and-move spec for an `m x n` host.
pub fn random_mskmov_spec<R: Rng>(rng: &mut R, m: usize, n: usize) -> MskMovSpec {
    let i = rng.random_range(1..=m);
    let j = rng.random_range(i..=m);
    let k = rng.random_range(1..=n);
    let l = rng.random_range(k..=n);
    // feasible offsets keep the moved block inside the host
    let a = rng.random_range(1 - i as i64..=(m - j) as i64) as isize;
    let b = rng.random_range(1 - k as i64..=(n - l) as i64) as isize;
    MskMovSpec::new(BlockSpec::new(i, j, k, l), (m, n), a, b)
}

/// Ridge problem with `X`, `y`, `u` in `[-1, 1]`, zero start and the stable
/// learning rate.
pub fn random_ridge_problem<R: Rng>(
    rng: &mut R,
    n: usize,
    d: usize,
    lambda: f64,
    steps: usize,
) -> RidgeProblem {
    let x = random_matrix(rng, n, d);
    let y = random_matrix(rng, n, 1);
    let u = random_matrix(rng, d, 1);
    RidgeProblem::with_auto_eta(x, y, u, lambda, steps).expect("generated problem is valid")
}

/// Strictly diagonally dominant system: off-diagonal magnitudes drawn from
/// `[lo, hi]` with random sign, diagonal at least the off-diagonal row sum
/// plus one, right-hand side in `[-1, 1]`.
pub fn diagonally_dominant_system<R: Rng>(rng: &mut R, m: usize, lo: f64, hi: f64, signed: bool) -> LinearSystem {
    let mut f = Matrix::zeros(m, m);
    for i in 0..m {
        let mut row_sum = 0.0;
        for j in 0..m {
            if i == j {
                continue;
            }
            let mut v = rng.random_range(lo..=hi);
            if signed && rng.random_bool(0.5) {
                v = -v;
            }
            f.set(i, j, v);
            row_sum += v.abs();
        }
        f.set(i, i, row_sum + 1.0 + rng.random_range(0.0..1.0));
    }
    let alpha = random_matrix(rng, m, 1);
    LinearSystem::new(f, alpha).expect("generated system is valid")
}

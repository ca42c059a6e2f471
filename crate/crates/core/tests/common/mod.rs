#![allow(dead_code)]

use gridfeas::grid::GridModel;
use gridfeas::synth::random_small_model;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn grid(seed: u64, max_loads: usize, max_sources: usize) -> GridModel {
    random_small_model(max_loads, max_sources, &mut rng(seed))
}

/// Irreducible Z-matrix: a random directed cycle plus sparse extra
/// nonpositive entries, arbitrary diagonal.
pub fn irreducible_z<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    for k in 0..n {
        let (i, j) = (order[k], order[(k + 1) % n]);
        if i != j {
            a[(i, j)] = -rng.random_range(0.1..2.0);
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < 0.3 {
                a[(i, j)] = -rng.random_range(0.0..2.0);
            }
        }
        a[(i, i)] = rng.random_range(-3.0..6.0);
    }
    a
}

pub fn symmetric_irreducible_z<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let a = irreducible_z(n, rng);
    (&a + a.transpose()) * 0.5
}

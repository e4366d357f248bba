//! Seeded random draws shared by channel generation, simulation and tests.
//!
//! Every consumer gets a `ChaCha8Rng` keyed by `(seed, stream)`, so trial `i`
//! of a sweep draws the same numbers whether it runs first, last or on another
//! thread.

use crate::numerics::{CMatrix, CVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type DfrcRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64, stream: u64) -> DfrcRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One draw from CN(0, variance).
pub fn complex_gaussian<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Matrix with i.i.d. CN(0, variance) entries, filled row by row.
pub fn complex_gaussian_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    variance: f64,
    rng: &mut R,
) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = complex_gaussian(variance, rng);
        }
    }
    m
}

pub fn complex_gaussian_vector<R: Rng + ?Sized>(n: usize, variance: f64, rng: &mut R) -> CVector {
    let mut v = CVector::zeros(n);
    for z in v.iter_mut() {
        *z = complex_gaussian(variance, rng);
    }
    v
}

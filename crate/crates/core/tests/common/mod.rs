#![allow(dead_code)]

use ifc_core::correlation::{correlation_from_angles, param_count};
use ifc_core::{c, ChannelMatrix, NoiseCorrelation, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex(rng: &mut ChaCha8Rng, scale: f64) -> C64 {
    c(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Direct gains log-uniform in [0.25, 4], cross gains uniform in a square.
pub fn channel(rng: &mut ChaCha8Rng, k: usize) -> ChannelMatrix {
    let mut m = DMatrix::<C64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            m[(i, j)] = if i == j { c(log_uniform(rng, 0.25, 4.0), 0.0) } else { complex(rng, 1.0) };
        }
    }
    ChannelMatrix::new(m).unwrap()
}

pub fn real_channel(rng: &mut ChaCha8Rng, k: usize) -> ChannelMatrix {
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { log_uniform(rng, 0.25, 4.0) } else { rng.gen_range(-1.5..1.5) }).collect())
        .collect();
    ChannelMatrix::from_real_rows(&rows).unwrap()
}

/// Random correlation through the angle parameterization, pulled into the
/// strict interior by mixing with the identity.
pub fn sigma(rng: &mut ChaCha8Rng, k: usize) -> NoiseCorrelation {
    let params: Vec<f64> = (0..param_count(k)).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    let raw = correlation_from_angles(k, &params);
    let t = rng.gen_range(0.05..0.95);
    let mixed = raw.map(|z| z * t) + DMatrix::identity(k, k) * c(1.0 - t, 0.0);
    NoiseCorrelation::new(mixed).unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Genie correlation small enough that `count` genies stay jointly feasible with `sigma`.
pub fn genie_rho(rng: &mut ChaCha8Rng, sigma: &NoiseCorrelation, count: usize) -> C64 {
    let lambda = ifc_core::linalg::hermitian_eigenvalues(sigma.matrix())
        .into_iter()
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let cap = 0.9 * (lambda / count.max(1) as f64).sqrt();
    C64::from_polar(cap * rng.gen_range(0.0..1.0f64).sqrt(), rng.gen_range(0.0..std::f64::consts::TAU))
}

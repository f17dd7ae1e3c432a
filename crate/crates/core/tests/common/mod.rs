//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::sync::OnceLock;

use kcm_core::harness::{reference_conformation, SimConfig, REFERENCE_THETA};
use kcm_core::Topology;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn topology() -> &'static Topology {
    static T: OnceLock<Topology> = OnceLock::new();
    T.get_or_init(Topology::default)
}

pub fn footnote() -> Vec<f64> {
    REFERENCE_THETA.to_vec()
}

/// Folded reference of the embedded topology under the default fold schedule.
pub fn folded() -> &'static [f64] {
    static R: OnceLock<Vec<f64>> = OnceLock::new();
    R.get_or_init(|| {
        reference_conformation(topology(), &SimConfig::default())
            .expect("reference folds")
            .0
    })
}

/// Uniform samples from `[lo, hi]^n`.
pub fn random_thetas(count: usize, n: usize, lo: f64, hi: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..n).map(|_| rng.gen_range(lo..=hi)).collect())
        .collect()
}

/// Perturbations of `center` with each coordinate in `[−r, r]`.
pub fn near(center: &[f64], count: usize, r: f64, seed: u64) -> Vec<Vec<f64>> {
    random_thetas(count, center.len(), -r, r, seed)
        .into_iter()
        .map(|d| center.iter().zip(d).map(|(a, b)| a + b).collect())
        .collect()
}

/// Central difference of a scalar function along coordinate `j`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], j: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    let mut m = x.to_vec();
    p[j] += h;
    m[j] -= h;
    (f(&p) - f(&m)) / (2.0 * h)
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(f64::MIN_POSITIVE)
}

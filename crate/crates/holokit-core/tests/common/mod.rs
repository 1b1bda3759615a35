#![allow(dead_code)]

use holokit_core::model::ParameterPoint;
use holokit_core::C64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Amplitudes with |Re|, |Im| <= scale.
pub fn random_amplitudes(rng: &mut StdRng, d: usize, scale: f64) -> Vec<C64> {
    (0..d).map(|_| C64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale))).collect()
}

pub fn random_point(rng: &mut StdRng, d: usize, scale: f64) -> ParameterPoint {
    ParameterPoint::from_amplitudes(&random_amplitudes(rng, d, scale))
}

pub fn random_unit(rng: &mut StdRng, d: usize) -> Vec<C64> {
    let v = random_amplitudes(rng, d, 1.0);
    let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

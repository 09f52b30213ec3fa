#![allow(dead_code)]

use rand::Rng;
use tierprice::{MuDistribution, MuQuadrature};

pub fn uniform_quad(sigma: f64) -> MuQuadrature {
    MuQuadrature::new(MuDistribution::Uniform, sigma, 101).unwrap()
}

pub fn normal_quad(sigma: f64) -> MuQuadrature {
    MuQuadrature::new(MuDistribution::Normal, sigma, 101).unwrap()
}

pub fn draw<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

/// Uniform magnitude in `[lo, hi)` with a random sign.
pub fn signed<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let m = rng.gen_range(lo..hi);
    if rng.gen_bool(0.5) {
        m
    } else {
        -m
    }
}

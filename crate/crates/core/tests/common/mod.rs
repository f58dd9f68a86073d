#![allow(dead_code)]

use aoi_relay::params::{SystemParams, ValidatedParams};
use aoi_relay::validate;
use rand::Rng;

pub fn reference() -> SystemParams<f64> {
    SystemParams::new(0.4, 0.25, 1.0 / 3.0, 1.0 / 3.0)
}

pub fn reference_validated() -> ValidatedParams<f64> {
    validate(&reference()).unwrap()
}

/// 5 x 5 x 2 x 2 lattice of regular parameter sets.
pub fn grid() -> Vec<ValidatedParams<f64>> {
    let mut out = Vec::with_capacity(100);
    for p in [0.2, 0.4, 0.6, 0.8, 1.0] {
        for p1 in [0.1, 0.3, 0.5, 0.7, 0.9] {
            for p2 in [0.25, 0.75] {
                for p3 in [0.3, 0.6] {
                    out.push(validate(&SystemParams::new(p, p1, p2, p3)).expect("grid point is regular"));
                }
            }
        }
    }
    out
}

/// Uniform draw from the domain used for random cross-validation, rejecting
/// parameter sets where any closed form is near-singular.
pub fn random_regular<R: Rng>(rng: &mut R) -> ValidatedParams<f64> {
    loop {
        let params = SystemParams::new(
            rng.gen_range(0.25..=1.0),
            rng.gen_range(0.25..=1.0),
            rng.gen_range(0.1..1.0),
            rng.gen_range(0.05..0.95),
        );
        if let Ok(v) = validate(&params) {
            return v;
        }
    }
}

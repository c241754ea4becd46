#![allow(dead_code)]

use mft_core::numerics::{DensityProfile, Grid, Params};
use std::f64::consts::PI;

pub fn params() -> Params {
    Params::new(0.2, 0.8, 1.0, 1.0).unwrap()
}

pub fn grid(n: usize) -> Grid {
    Grid::new(n).unwrap()
}

/// Smoothed step from `lo` to `hi` centred at `c` with width `w`.
pub fn smooth_step(x: f64, lo: f64, hi: f64, c: f64, w: f64) -> f64 {
    lo + (hi - lo) * 0.5 * (1.0 + ((x - c) / w).tanh())
}

/// Twelve test densities: constants, ramps, bumps and mollified steps.
pub fn battery() -> Vec<(&'static str, Box<dyn Fn(f64) -> f64>)> {
    vec![
        ("const_0.5", Box::new(|_| 0.5)),
        ("const_0.3", Box::new(|_| 0.3)),
        ("const_0.75", Box::new(|_| 0.75)),
        ("ramp_up", Box::new(|x| 0.25 + 0.5 * x)),
        ("ramp_down", Box::new(|x| 0.7 - 0.4 * x)),
        ("ramp_steep", Box::new(|x| 0.1 + 0.8 * x)),
        ("bump_sin", Box::new(|x| 0.5 + 0.2 * (PI * x).sin())),
        ("bump_gauss", Box::new(|x| 0.35 + 0.3 * (-((x - 0.4) / 0.15).powi(2)).exp())),
        ("dip_cos", Box::new(|x| 0.5 - 0.25 * (2.0 * PI * x).cos())),
        ("step_up", Box::new(|x| smooth_step(x, 0.2, 0.7, 0.5, 0.05))),
        ("step_down", Box::new(|x| smooth_step(x, 0.8, 0.3, 0.4, 0.08))),
        ("step_pair", Box::new(|x| {
            smooth_step(x, 0.3, 0.6, 0.3, 0.05) + smooth_step(x, 0.0, -0.2, 0.7, 0.05)
        })),
    ]
}

pub fn sample(f: &dyn Fn(f64) -> f64, n: usize) -> DensityProfile {
    DensityProfile::from_fn(grid(n), f).unwrap()
}

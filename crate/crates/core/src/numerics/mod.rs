//! Grids, sampled profiles, quadrature, finite differences and norms.

mod io;
mod ops;
mod params;
mod profile;

pub use io::{fmt_real, read_profile_csv, read_profile_file, write_path_csv, write_profile_csv};
pub use ops::{
    cumulative_trapezoid, derivative, inner_product, integrate, laplacian, norm,
    quadrature_weights, solve_tridiagonal, stationary_coefficients, stationary_profile, NormKind,
};
pub use params::Params;
pub use profile::{DensityProfile, Grid, Path, Profile};

/// Uniform grid with `n` intervals.
pub fn make_grid(n: usize) -> crate::Result<Grid> {
    Grid::new(n)
}

/// Mobility `a (1 - a)`.
#[inline]
pub fn sigma(a: f64) -> f64 {
    a * (1.0 - a)
}

#[inline]
pub fn logit(a: f64) -> f64 {
    (a / (1.0 - a)).ln()
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

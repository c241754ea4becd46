use std::fmt;
use std::str::FromStr;

use super::params::Params;
use super::profile::{DensityProfile, Grid, Profile};
use crate::error::{MftError, Result};

/// Quadrature weights on `grid`.
///
/// Trapezoid weights plus the `h^2` Euler-Maclaurin end correction, with the
/// endpoint derivatives replaced by the one-sided second-order stencil. The
/// rule integrates quadratics exactly, is Simpson's rule for `n = 2`, and
/// keeps all weights positive.
pub fn quadrature_weights(grid: Grid) -> Vec<f64> {
    let n = grid.n();
    let h = grid.h();
    let mut w = vec![h; n + 1];
    w[0] = 0.5 * h;
    w[n] = 0.5 * h;
    let c = h / 24.0;
    for (i, s) in [(0usize, 3.0), (1, -4.0), (2, 1.0)] {
        w[i] -= c * s;
        w[n - i] -= c * s;
    }
    w
}

/// `∫_0^1 f(x) dx` from grid samples.
pub fn integrate(f: &Profile) -> f64 {
    integrate_values(f.grid(), f.values())
}

pub(crate) fn integrate_values(grid: Grid, values: &[f64]) -> f64 {
    quadrature_weights(grid)
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .sum()
}

/// `∫_0^1 f g dx`.
pub fn inner_product(f: &Profile, g: &Profile) -> Result<f64> {
    f.grid().check_same(&g.grid())?;
    let w = quadrature_weights(f.grid());
    Ok(f.values()
        .iter()
        .zip(g.values())
        .zip(&w)
        .map(|((a, b), w)| a * b * w)
        .sum())
}

/// Running integral `∫_0^{x_i} f` by the plain trapezoid rule.
pub fn cumulative_trapezoid(f: &Profile) -> Profile {
    let h = f.grid().h();
    let v = f.values();
    let mut out = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in v.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    Profile::new(f.grid(), out).expect("finite input gives finite output")
}

/// Discrete first derivative: centered in the interior, one-sided
/// second-order at the two endpoints.
pub fn derivative(f: &Profile) -> Profile {
    let g = f.grid();
    let v = f.values();
    let n = g.n();
    let ih = 1.0 / g.h();
    let mut d = vec![0.0; n + 1];
    d[0] = 0.5 * ih * (-3.0 * v[0] + 4.0 * v[1] - v[2]);
    d[n] = 0.5 * ih * (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]);
    for i in 1..n {
        d[i] = 0.5 * ih * (v[i + 1] - v[i - 1]);
    }
    Profile::new(g, d).expect("stencil of finite values")
}

/// Discrete Laplacian: centered three-point stencil in the interior and the
/// four-point second-order stencil at the endpoints. Needs `n >= 4`.
pub fn laplacian(f: &Profile) -> Result<Profile> {
    let g = f.grid();
    let n = g.n();
    if n < 4 {
        return Err(MftError::GridTooSmall { need: 4, got: n });
    }
    let v = f.values();
    let ih2 = 1.0 / (g.h() * g.h());
    let mut d = vec![0.0; n + 1];
    d[0] = ih2 * (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]);
    d[n] = ih2 * (2.0 * v[n] - 5.0 * v[n - 1] + 4.0 * v[n - 2] - v[n - 3]);
    for i in 1..n {
        d[i] = ih2 * (v[i + 1] - 2.0 * v[i] + v[i - 1]);
    }
    Profile::new(g, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    Linf,
    C1,
    H1,
}

impl FromStr for NormKind {
    type Err = MftError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(NormKind::L2),
            "linf" | "sup" => Ok(NormKind::Linf),
            "c1" => Ok(NormKind::C1),
            "h1" => Ok(NormKind::H1),
            other => Err(MftError::InvalidInput(format!("unknown norm kind '{other}'"))),
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NormKind::L2 => "L2",
            NormKind::Linf => "Linf",
            NormKind::C1 => "C1",
            NormKind::H1 => "H1",
        };
        f.write_str(s)
    }
}

pub fn norm(f: &Profile, kind: NormKind) -> f64 {
    match kind {
        NormKind::L2 => inner_product(f, f).unwrap().max(0.0).sqrt(),
        NormKind::Linf => f.max_abs(),
        NormKind::C1 => {
            let d = derivative(f);
            f.values()
                .iter()
                .zip(d.values())
                .fold(0.0, |m, (a, b)| m.max(a.abs() + b.abs()))
        }
        NormKind::H1 => {
            let d = derivative(f);
            (inner_product(f, f).unwrap() + inner_product(&d, &d).unwrap())
                .max(0.0)
                .sqrt()
        }
    }
}

/// The linear stationary profile of the hydrodynamic equation.
pub fn stationary_profile(params: &Params, grid: Grid) -> DensityProfile {
    let (c0, slope) = stationary_coefficients(params);
    DensityProfile::from_fn(grid, |x| c0 + slope * x)
        .expect("stationary profile lies between alpha and beta")
}

/// Intercept and slope of the stationary profile.
pub fn stationary_coefficients(params: &Params) -> (f64, f64) {
    let (al, be, a, b) = (params.alpha(), params.beta(), params.a(), params.b());
    let d = 1.0 + a + b;
    ((al * (1.0 + b) + be * a) / d, (be - al) / d)
}

/// Solves a tridiagonal system by the Thomas algorithm.
///
/// `lower[i]` multiplies `x[i-1]` in row `i` (so `lower[0]` is ignored) and
/// `upper[i]` multiplies `x[i+1]` (so the last entry is ignored).
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = diag.len();
    if lower.len() != m || upper.len() != m || rhs.len() != m {
        return Err(MftError::InvalidInput("tridiagonal bands differ in length".into()));
    }
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut beta = diag[0];
    if beta.abs() < 1e-300 {
        return Err(MftError::Singular(0));
    }
    c[0] = upper[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..m {
        beta = diag[i] - lower[i] * c[i - 1];
        if beta.abs() < 1e-300 || !beta.is_finite() {
            return Err(MftError::Singular(i));
        }
        c[i] = upper[i] / beta;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / beta;
    }
    for i in (0..m - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

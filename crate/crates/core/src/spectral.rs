//! Eigen-decomposition of the Robin Laplacian `-f'' = λ f`,
//! `f'(0) = f(0)/A`, `f'(1) = -f(1)/B`, and the objects built from it.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{MftError, Result};
use crate::numerics::{derivative, inner_product, integrate, Grid, Params, Profile};

/// Residual threshold accepted for a root of the transcendental equation.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;

/// `sin θ (θ² A B - 1) - (A + B) θ cos θ`, whose positive zeros are the
/// square roots of the eigenvalues.
fn secular(params: &Params, theta: f64) -> f64 {
    let (a, b) = (params.a(), params.b());
    theta.sin() * (theta * theta * a * b - 1.0) - (a + b) * theta * theta.cos()
}

/// Scale-free residual of the secular equation at `θ = √λ`.
pub fn eigen_residual(params: &Params, lambda: f64) -> f64 {
    let theta = lambda.sqrt();
    let (a, b) = (params.a(), params.b());
    let scale = (theta * theta * a * b - 1.0).abs() + (a + b) * theta;
    secular(params, theta).abs() / scale
}

/// `tan θ - (A+B) θ / (θ² A B - 1)`. Strictly increasing between
/// consecutive breakpoints.
fn monotone_form(params: &Params, theta: f64) -> f64 {
    let (a, b) = (params.a(), params.b());
    theta.tan() - (a + b) * theta / (theta * theta * a * b - 1.0)
}

fn bisect(params: &Params, lo: f64, hi: f64) -> Result<f64> {
    let (mut l, mut r) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (l + r);
        if mid <= l || mid >= r {
            break;
        }
        if monotone_form(params, mid) < 0.0 {
            l = mid;
        } else {
            r = mid;
        }
    }
    let root = 0.5 * (l + r);
    let res = eigen_residual(params, root * root);
    if res < EIGEN_RESIDUAL_TOL {
        Ok(root)
    } else {
        Err(MftError::Bracketing {
            lo,
            hi,
            reason: format!("bisection ended at θ={root} with residual {res:.3e}"),
        })
    }
}

/// The `k` smallest eigenvalues in ascending order.
pub fn eigenvalues(params: &Params, k: usize) -> Result<Vec<f64>> {
    Ok(eigen_thetas(params, k)?.into_iter().map(|t| t * t).collect())
}

fn eigen_thetas(params: &Params, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(MftError::InvalidInput("need at least one mode".into()));
    }
    let theta_star = 1.0 / (params.a() * params.b()).sqrt();
    let mut breaks: Vec<f64> = (1..=k + 1).map(|j| (j as f64 - 0.5) * PI).collect();
    let mut coincident = None;
    match breaks
        .iter()
        .position(|&p| (p - theta_star).abs() <= 1e-12 * p)
    {
        Some(i) => coincident = Some(breaks[i]),
        None => breaks.push(theta_star),
    }
    breaks.sort_by(f64::total_cmp);

    // The first interval (0, breaks[0]) holds no root; every later one holds
    // exactly one, and a tangent pole that meets the hyperbola pole is itself
    // a root.
    let mut roots = Vec::with_capacity(k + 1);
    for w in breaks.windows(2) {
        roots.push(bisect(params, w[0], w[1])?);
    }
    if let Some(p) = coincident {
        roots.push(p);
        roots.sort_by(f64::total_cmp);
    }
    roots.truncate(k);
    if roots.len() < k {
        return Err(MftError::Bracketing {
            lo: 0.0,
            hi: breaks[breaks.len() - 1],
            reason: format!("isolated {} roots, {} requested", roots.len(), k),
        });
    }
    Ok(roots)
}

/// Unnormalised mode `cos θx + sin θx / (Aθ)` and its derivative.
fn raw_mode(a: f64, theta: f64, x: f64) -> (f64, f64) {
    let b = 1.0 / (a * theta);
    let (s, c) = (theta * x).sin_cos();
    (c + b * s, theta * (-s + b * c))
}

/// `∫_0^1 (cos θx + sin θx/(Aθ))² dx` in closed form.
pub fn analytic_norm_sq(a: f64, theta: f64) -> f64 {
    let b = 1.0 / (a * theta);
    let s2 = (2.0 * theta).sin() / (4.0 * theta);
    let s = theta.sin();
    0.5 + s2 + b * s * s / theta + b * b * (0.5 - s2)
}

const EM_TERMS: usize = 4;

/// `B_{2k} / (2k)!` for `k = 1..=4`.
const EM_COEFFS: [f64; EM_TERMS] = [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0];

/// Finite-difference weights (Fornberg) for derivatives `0..=max_d` at `z`
/// from unit-spaced nodes `0, 1, .., m-1`.
fn fornberg(m: usize, max_d: usize, z: f64) -> Vec<Vec<f64>> {
    let mut c = vec![vec![0.0; m]; max_d + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = -z;
    for i in 1..m {
        let xi = i as f64;
        let mn = i.min(max_d);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xi - z;
        for j in 0..i {
            let c3 = xi - j as f64;
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] *= c4 / c3;
        }
        c1 = c2;
    }
    c
}

/// One-sided estimates of `g, g', .., g^(max_d)` at both ends of the grid.
fn end_derivatives(values: &[f64], h: f64, max_d: usize) -> (Vec<f64>, Vec<f64>) {
    let n = values.len() - 1;
    let m = (max_d + 3).min(n + 1);
    let w = fornberg(m, max_d, 0.0);
    let mut left = vec![0.0; max_d + 1];
    let mut right = vec![0.0; max_d + 1];
    for d in 0..=max_d {
        let scale = h.powi(-(d as i32));
        let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
        left[d] = scale * (0..m).map(|j| w[d][j] * values[j]).sum::<f64>();
        right[d] = sign * scale * (0..m).map(|j| w[d][j] * values[n - j]).sum::<f64>();
    }
    (left, right)
}

/// Derivatives `0..=max_d` of a Robin mode from its value, slope and eigenvalue.
fn mode_end_derivatives(f: f64, df: f64, lambda: f64, max_d: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_d + 1);
    let mut scale = 1.0;
    for d in 0..=max_d {
        if d > 0 && d % 2 == 0 {
            scale *= -lambda;
        }
        out.push(scale * if d % 2 == 0 { f } else { df });
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Derivative of order `r` of a product by the Leibniz rule.
fn leibniz(g: &[f64], f: &[f64], r: usize) -> f64 {
    (0..=r).map(|i| binomial(r, i) * g[i] * f[r - i]).sum()
}

fn trapezoid_product(h: f64, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() - 1;
    let mut t = 0.5 * (a[0] * b[0] + a[n] * b[n]);
    for i in 1..n {
        t += a[i] * b[i];
    }
    h * t
}

/// Trapezoid plus Euler-Maclaurin end corrections, given derivatives of both
/// factors at each end.
fn corrected_product(h: f64, a: &[f64], b: &[f64], ends: [(&[f64], &[f64]); 2], terms: usize) -> f64 {
    let mut t = trapezoid_product(h, a, b);
    let [(ga0, gb0), (ga1, gb1)] = ends;
    for (k, coef) in EM_COEFFS.iter().enumerate().take(terms) {
        let r = 2 * k + 1;
        t -= coef * h.powi(r as i32 + 1) * (leibniz(ga1, gb1, r) - leibniz(ga0, gb0, r));
    }
    t
}

/// `∫ f_j f_k` for two Robin modes with exact endpoint derivatives.
fn mode_product(
    h: f64,
    (fj, dj, lj): (&[f64], &[f64], f64),
    (fk, dk, lk): (&[f64], &[f64], f64),
) -> f64 {
    let n = fj.len() - 1;
    let max_d = 2 * EM_TERMS - 1;
    let ej0 = mode_end_derivatives(fj[0], dj[0], lj, max_d);
    let ej1 = mode_end_derivatives(fj[n], dj[n], lj, max_d);
    let ek0 = mode_end_derivatives(fk[0], dk[0], lk, max_d);
    let ek1 = mode_end_derivatives(fk[n], dk[n], lk, max_d);
    corrected_product(h, fj, fk, [(&ej0, &ek0), (&ej1, &ek1)], EM_TERMS)
}

fn sample_mode(params: &Params, theta: f64, grid: Grid) -> (Vec<f64>, Vec<f64>) {
    let mut f = Vec::with_capacity(grid.len());
    let mut d = Vec::with_capacity(grid.len());
    for x in grid.nodes() {
        let (v, dv) = raw_mode(params.a(), theta, x);
        f.push(v);
        d.push(dv);
    }
    // Exact Robin derivatives at the endpoints.
    let n = grid.n();
    d[0] = f[0] / params.a();
    d[n] = -f[n] / params.b();
    let lam = theta * theta;
    let norm_sq = mode_product(grid.h(), (&f, &d, lam), (&f, &d, lam));
    let a = 1.0 / norm_sq.sqrt();
    f.iter_mut().for_each(|v| *v *= a);
    d.iter_mut().for_each(|v| *v *= a);
    (f, d)
}

/// Samples the normalised eigenfunction for `lambda` on `grid`.
pub fn eigenfunction(params: &Params, lambda: f64, grid: Grid) -> Result<Profile> {
    if !(lambda > 0.0) {
        return Err(MftError::InvalidInput(format!("eigenvalue must be positive, got {lambda}")));
    }
    let res = eigen_residual(params, lambda);
    if res >= EIGEN_RESIDUAL_TOL {
        return Err(MftError::InvalidInput(format!(
            "{lambda} is not an eigenvalue (residual {res:.3e})"
        )));
    }
    let (f, _) = sample_mode(params, lambda.sqrt(), grid);
    Profile::new(grid, f)
}

/// The Green kernel of `-Δ` with the Robin conditions.
pub fn green_kernel(params: &Params, x: f64, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(MftError::InvalidInput(format!("({x}, {y}) outside the unit square")));
    }
    let (a, b) = (params.a(), params.b());
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    Ok((b + 1.0 - hi) * (a + lo) / (1.0 + a + b))
}

/// Applies the integral operator with the Green kernel.
pub fn apply_green(params: &Params, f: &Profile) -> Profile {
    let g = f.grid();
    let nodes = g.nodes();
    let h = g.h();
    let v = f.values();
    let vals = nodes
        .iter()
        .map(|&x| {
            let k: Vec<f64> = nodes
                .iter()
                .zip(v)
                .map(|(&y, fy)| green_kernel(params, x, y).unwrap() * fy)
                .collect();
            let n = k.len() - 1;
            h * (k.iter().sum::<f64>() - 0.5 * (k[0] + k[n]))
        })
        .collect();
    Profile::new(g, vals).expect("finite kernel sums")
}

/// Truncated eigenbasis of the Robin Laplacian on a grid.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    params: Params,
    grid: Grid,
    thetas: Vec<f64>,
    eigenvalues: Vec<f64>,
    modes: Vec<Profile>,
    mode_derivs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthConstants {
    /// `min_j λ_j / j²`.
    pub c0: f64,
    /// `max_j λ_j / j²`.
    pub c1: f64,
}

impl SpectralBasis {
    pub fn new(params: &Params, grid: Grid, k: usize) -> Result<Self> {
        let thetas = eigen_thetas(params, k)?;
        let mut modes = Vec::with_capacity(k);
        let mut mode_derivs = Vec::with_capacity(k);
        for &t in &thetas {
            let (f, d) = sample_mode(params, t, grid);
            modes.push(Profile::new(grid, f)?);
            mode_derivs.push(d);
        }
        Ok(SpectralBasis {
            params: *params,
            grid,
            eigenvalues: thetas.iter().map(|t| t * t).collect(),
            thetas,
            modes,
            mode_derivs,
        })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn count(&self) -> usize {
        self.modes.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn eigenfunctions(&self) -> &[Profile] {
        &self.modes
    }

    /// Exact derivative samples of mode `k`.
    pub fn eigenfunction_derivative(&self, k: usize) -> Profile {
        Profile::new(self.grid, self.mode_derivs[k].clone()).expect("finite samples")
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .map(|&l| eigen_residual(&self.params, l))
            .collect()
    }

    pub fn growth_constants(&self) -> GrowthConstants {
        let ratios = self
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(j, l)| l / ((j + 1) * (j + 1)) as f64);
        let (c0, c1) = ratios.fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
        GrowthConstants { c0, c1 }
    }

    /// `max_j ‖f_j‖_∞`.
    pub fn sup_constant(&self) -> f64 {
        self.modes.iter().map(|f| f.max_abs()).fold(0.0, f64::max)
    }

    /// Inner product of two basis functions.
    pub fn mode_inner(&self, j: usize, k: usize) -> f64 {
        mode_product(
            self.grid.h(),
            (self.modes[j].values(), &self.mode_derivs[j], self.eigenvalues[j]),
            (self.modes[k].values(), &self.mode_derivs[k], self.eigenvalues[k]),
        )
    }

    pub fn gram_matrix(&self) -> Vec<Vec<f64>> {
        let k = self.count();
        (0..k)
            .map(|i| (0..k).map(|j| self.mode_inner(i, j)).collect())
            .collect()
    }

    /// Coefficients `⟨f, f_k⟩`.
    pub fn coefficients(&self, f: &Profile) -> Result<Vec<f64>> {
        self.grid.check_same(&f.grid())?;
        let h = self.grid.h();
        let n = self.grid.n();
        let terms = EM_TERMS.min(n.saturating_sub(1) / 2).max(1);
        let max_d = 2 * terms - 1;
        let (g0, g1) = end_derivatives(f.values(), h, max_d);
        Ok(self
            .modes
            .iter()
            .zip(&self.mode_derivs)
            .zip(&self.eigenvalues)
            .map(|((m, dm), &lam)| {
                let mv = m.values();
                let e0 = mode_end_derivatives(mv[0], dm[0], lam, max_d);
                let e1 = mode_end_derivatives(mv[n], dm[n], lam, max_d);
                corrected_product(h, f.values(), mv, [(&g0, &e0), (&g1, &e1)], terms)
            })
            .collect())
    }

    /// `Σ c_k f_k`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Profile {
        self.combine(coeffs, |k| self.modes[k].values())
    }

    /// `Σ c_k f_k'` from the exact mode derivatives.
    pub fn synthesize_derivative(&self, coeffs: &[f64]) -> Profile {
        self.combine(coeffs, |k| &self.mode_derivs[k])
    }

    fn combine<'a>(&'a self, coeffs: &[f64], mode: impl Fn(usize) -> &'a [f64]) -> Profile {
        let mut out = vec![0.0; self.grid.len()];
        for (k, &c) in coeffs.iter().enumerate().take(self.count()) {
            if c == 0.0 {
                continue;
            }
            for (o, m) in out.iter_mut().zip(mode(k)) {
                *o += c * m;
            }
        }
        Profile::new(self.grid, out).expect("finite mode sums")
    }

    /// Orthogonal projection onto the span of the basis.
    pub fn project(&self, f: &Profile) -> Result<Profile> {
        Ok(self.synthesize(&self.coefficients(f)?))
    }
}

/// Squared `H_R` norm evaluated two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HrNorm {
    /// `f(0)²/A + ∫(∇f)² + f(1)²/B`.
    pub boundary_form: f64,
    /// `Σ_k λ_k ⟨f, f_k⟩²` over the basis.
    pub spectral_form: f64,
}

impl HrNorm {
    /// The canonical value, the boundary form.
    pub fn value(&self) -> f64 {
        self.boundary_form
    }
}

pub fn hr_norm(f: &Profile, params: &Params, basis: &SpectralBasis) -> Result<HrNorm> {
    basis.grid().check_same(&f.grid())?;
    let d = derivative(f);
    let boundary_form = f.first().powi(2) / params.a()
        + integrate(&d.map(|v| v * v))
        + f.last().powi(2) / params.b();
    let spectral_form = basis
        .coefficients(f)?
        .iter()
        .zip(basis.eigenvalues())
        .map(|(c, l)| l * c * c)
        .sum();
    Ok(HrNorm {
        boundary_form,
        spectral_form,
    })
}

/// `P_t f = Σ e^{-λ_k t} ⟨f, f_k⟩ f_k`.
pub fn semigroup_apply(f: &Profile, t: f64, basis: &SpectralBasis) -> Result<Profile> {
    if !(t >= 0.0) {
        return Err(MftError::InvalidInput(format!("time must be >= 0, got {t}")));
    }
    let c: Vec<f64> = basis
        .coefficients(f)?
        .iter()
        .zip(basis.eigenvalues())
        .map(|(c, l)| c * (-l * t).exp())
        .collect();
    Ok(basis.synthesize(&c))
}

/// `‖f‖_2` with the crate quadrature; a convenience for the spectral checks.
pub fn l2(f: &Profile) -> f64 {
    inner_product(f, f).unwrap().max(0.0).sqrt()
}

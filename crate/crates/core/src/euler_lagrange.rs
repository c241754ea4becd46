//! The Euler-Lagrange problem
//!
//! ```text
//! ΔF = (γ - F)(∇F)² / (F(1-F)),   ∇F(0) = (F(0) - α)/A,   ∇F(1) = (β - F(1))/B
//! ```
//!
//! solved through its integral form `F = K_γ(F)`.

use serde::Serialize;

use crate::error::{MftError, Result};
use crate::numerics::{
    cumulative_trapezoid, derivative, laplacian, logistic, logit, norm, solve_tridiagonal,
    stationary_profile, DensityProfile, NormKind, Params, Profile,
};

const STRICT_MARGIN: f64 = 1e-12;

/// Converged solution of the Euler-Lagrange problem.
#[derive(Debug, Clone, Serialize)]
pub struct ElSolution {
    #[serde(skip)]
    pub f: Profile,
    pub iterations: usize,
    /// `‖K_γ(F) - F‖_{C¹}` at the returned `F`.
    pub residual_c1: f64,
    pub p: f64,
    pub q: f64,
    pub history: Vec<f64>,
}

fn check_increasing(f: &Profile) -> Result<Profile> {
    if f.min() <= STRICT_MARGIN || f.max() >= 1.0 - STRICT_MARGIN {
        return Err(MftError::NotAdmissible(format!(
            "F must lie strictly inside (0, 1), range [{}, {}]",
            f.min(),
            f.max()
        )));
    }
    let d = derivative(f);
    if let Some(i) = d.values().iter().position(|&v| v <= 0.0) {
        return Err(MftError::NotAdmissible(format!(
            "∇F = {} <= 0 at node {i}",
            d.values()[i]
        )));
    }
    Ok(d)
}

fn r_with_gradient(f: &Profile, df: &Profile, gamma: &DensityProfile) -> Result<Profile> {
    let fv = f.values();
    let vals = gamma
        .values()
        .iter()
        .zip(fv)
        .zip(df.values())
        .map(|((g, f), d)| (g - f) * d / (f * (1.0 - f)))
        .collect();
    Profile::new(f.grid(), vals)
}

/// `(γ - F) ∇F / (F (1 - F))`.
pub fn r_gamma(f: &Profile, gamma: &DensityProfile, _params: &Params) -> Result<Profile> {
    f.grid().check_same(&gamma.grid())?;
    let df = check_increasing(f)?;
    r_with_gradient(f, &df, gamma)
}

/// Image of the fixed-point map and its exact derivative.
#[derive(Debug, Clone)]
pub struct KmapImage {
    pub value: Profile,
    pub gradient: Profile,
}

/// Evaluates `K_γ(F)` with nested cumulative trapezoid integrals.
pub fn kmap(f: &Profile, gamma: &DensityProfile, params: &Params) -> Result<Profile> {
    Ok(kmap_full(f, gamma, params)?.value)
}

pub fn kmap_full(f: &Profile, gamma: &DensityProfile, params: &Params) -> Result<KmapImage> {
    let r = r_gamma(f, gamma, params)?;
    let e = cumulative_trapezoid(&r).map(f64::exp);
    let c = cumulative_trapezoid(&e);
    let (al, be, a, b) = (params.alpha(), params.beta(), params.a(), params.b());
    let denom = a + c.last() + b * e.last();
    let scale = (be - al) / denom;
    Ok(KmapImage {
        value: c.map(|ci| al + scale * (a + ci)),
        gradient: e.scale(scale),
    })
}

/// Solves `F = K_γ(F)` by damped Picard iteration from the stationary profile.
pub fn solve_el(
    gamma: &DensityProfile,
    params: &Params,
    tol: f64,
    max_iter: usize,
) -> Result<ElSolution> {
    params.require_driven()?;
    if !(tol > 0.0) {
        return Err(MftError::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let (p, q) = params.derivative_bounds();
    let mut f = stationary_profile(params, gamma.grid()).into_profile();
    let mut omega = 1.0;
    let mut history = Vec::new();
    let mut prev = f64::INFINITY;
    for it in 1..=max_iter {
        let k = kmap(&f, gamma, params)?;
        let diff = k.sub(&f)?;
        let res = norm(&diff, NormKind::C1);
        history.push(res);
        if res < tol {
            return Ok(ElSolution {
                f,
                iterations: it,
                residual_c1: res,
                p,
                q,
                history,
            });
        }
        if res > prev {
            omega *= 0.5;
        }
        prev = res;
        f = f.axpy(omega, &diff)?;
    }
    Err(MftError::NoConvergence {
        iterations: max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

/// `‖ΔF - (γ - F)(∇F)²/(F(1-F))‖_∞` with the finite-difference operators.
pub fn el_residual(f: &Profile, gamma: &DensityProfile) -> Result<f64> {
    f.grid().check_same(&gamma.grid())?;
    let lap = laplacian(f)?;
    let d = derivative(f);
    let mut worst: f64 = 0.0;
    for i in 0..f.grid().len() {
        let fv = f.values()[i];
        let rhs = (gamma.values()[i] - fv) * d.values()[i].powi(2) / (fv * (1.0 - fv));
        worst = worst.max((lap.values()[i] - rhs).abs());
    }
    Ok(worst)
}

/// Largest difference quotient of `∇K_γ(F)` between neighbouring nodes.
pub fn gradient_lipschitz(image: &KmapImage) -> f64 {
    let h = image.gradient.grid().h();
    image
        .gradient
        .values()
        .windows(2)
        .map(|w| (w[1] - w[0]).abs() / h)
        .fold(0.0, f64::max)
}

/// Recovers the density whose Euler-Lagrange solution is `F`:
/// `γ = F + F(1-F) ΔF / (∇F)²`.
pub fn gamma_from_f(f: &Profile, _params: &Params) -> Result<DensityProfile> {
    let d = check_increasing(f)?;
    let lap = laplacian(f)?;
    let mut vals = Vec::with_capacity(f.grid().len());
    for i in 0..f.grid().len() {
        let fv = f.values()[i];
        let g = fv + fv * (1.0 - fv) * lap.values()[i] / d.values()[i].powi(2);
        let clipped = g.clamp(0.0, 1.0);
        if (g - clipped).abs() > 1e-8 {
            return Err(MftError::NotAdmissible(format!(
                "recovered density {g} at node {i} leaves [0, 1]"
            )));
        }
        vals.push(clipped);
    }
    DensityProfile::new(Profile::new(f.grid(), vals)?)
}

/// `φ = log(F / (1 - F))` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiProfile(Profile);

impl PhiProfile {
    pub fn profile(&self) -> &Profile {
        &self.0
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    /// Smallest `C` with `1/C <= ∇φ <= C` on the grid.
    pub fn measured_c1(&self) -> f64 {
        let d = derivative(&self.0);
        let (lo, hi) = (d.min(), d.max());
        hi.max(1.0 / lo)
    }

    /// Checks `φ_- < φ < φ_+` and `∇φ > 0`.
    pub fn check_admissible(&self, params: &Params) -> Result<()> {
        let (lo, hi) = (logit(params.alpha()), logit(params.beta()));
        if self.0.min() <= lo || self.0.max() >= hi {
            return Err(MftError::NotAdmissible(format!(
                "φ range [{}, {}] not inside ({lo}, {hi})",
                self.0.min(),
                self.0.max()
            )));
        }
        if derivative(&self.0).min() <= 0.0 {
            return Err(MftError::NotAdmissible("φ is not increasing".into()));
        }
        Ok(())
    }
}

pub fn phi_transform(f: &Profile) -> Result<PhiProfile> {
    if f.min() <= 0.0 || f.max() >= 1.0 {
        return Err(MftError::NotAdmissible(format!(
            "logit needs values in (0, 1), range [{}, {}]",
            f.min(),
            f.max()
        )));
    }
    Ok(PhiProfile(f.map(logit)))
}

pub fn phi_inverse(phi: &PhiProfile) -> Profile {
    phi.0.map(logistic)
}

pub fn phi_from_values(profile: Profile) -> PhiProfile {
    PhiProfile(profile)
}

struct LinearizedSystem {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

/// Finite-volume discretisation of
/// `∇[∇ψ/(∇φ)²] - e^φ/(1+e^φ)² ψ` with the Robin-type boundary rows.
fn linearized_system(phi: &PhiProfile, params: &Params) -> LinearizedSystem {
    let g = phi.profile().grid();
    let n = g.n();
    let h = g.h();
    let v = phi.values();
    let dphi = derivative(phi.profile());
    let face_k: Vec<f64> = v
        .windows(2)
        .map(|w| {
            let s = (w[1] - w[0]) / h;
            1.0 / (s * s)
        })
        .collect();
    let node_k = |i: usize| 1.0 / dphi.values()[i].powi(2);
    let m = |i: usize| {
        let e = v[i].exp();
        e / ((1.0 + e) * (1.0 + e))
    };
    let (al, be) = (params.alpha(), params.beta());
    let c0 = ((1.0 - al) * v[0].exp() + al * (-v[0]).exp()) / params.a();
    let c1 = ((1.0 - be) * v[n].exp() + be * (-v[n]).exp()) / params.b();

    let mut lower = vec![0.0; n + 1];
    let mut diag = vec![0.0; n + 1];
    let mut upper = vec![0.0; n + 1];
    let ih2 = 1.0 / (h * h);
    for i in 1..n {
        lower[i] = face_k[i - 1] * ih2;
        upper[i] = face_k[i] * ih2;
        diag[i] = -(face_k[i - 1] + face_k[i]) * ih2 - m(i);
    }
    // Half cells: the boundary flux k ∇ψ is k(0) c0 ψ0 at x = 0 and
    // -k(1) c1 ψn at x = 1.
    upper[0] = 2.0 * face_k[0] * ih2;
    diag[0] = -2.0 * face_k[0] * ih2 - 2.0 * node_k(0) * c0 / h - m(0);
    lower[n] = 2.0 * face_k[n - 1] * ih2;
    diag[n] = -2.0 * face_k[n - 1] * ih2 - 2.0 * node_k(n) * c1 / h - m(n);
    LinearizedSystem { lower, diag, upper }
}

/// Solves the linearised boundary value problem for `ψ = ∂_t φ` given `∂_t u`.
pub fn solve_linearized(phi: &PhiProfile, du_dt: &Profile, params: &Params) -> Result<Profile> {
    phi.profile().grid().check_same(&du_dt.grid())?;
    let sys = linearized_system(phi, params);
    let psi = solve_tridiagonal(&sys.lower, &sys.diag, &sys.upper, du_dt.values())?;
    Profile::new(du_dt.grid(), psi)
}

/// Max-norm residual of the discrete linearised problem at `psi`.
pub fn linearized_residual(
    phi: &PhiProfile,
    psi: &Profile,
    du_dt: &Profile,
    params: &Params,
) -> Result<f64> {
    phi.profile().grid().check_same(&psi.grid())?;
    let sys = linearized_system(phi, params);
    let p = psi.values();
    let n = p.len() - 1;
    let mut worst: f64 = 0.0;
    for i in 0..=n {
        let mut lhs = sys.diag[i] * p[i];
        if i > 0 {
            lhs += sys.lower[i] * p[i - 1];
        }
        if i < n {
            lhs += sys.upper[i] * p[i + 1];
        }
        worst = worst.max((lhs - du_dt.values()[i]).abs());
    }
    Ok(worst)
}

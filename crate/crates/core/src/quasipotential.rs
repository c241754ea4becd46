//! The static functional `S(γ) = S₀(γ) - S₀(ρ̄)`, the conjugate field
//! `Γ = δS/δγ`, the Hamiltonian and the boundary cost functions.

use serde::Serialize;

use crate::error::{MftError, Result};
use crate::euler_lagrange::{solve_el, ElSolution};
use crate::numerics::{
    derivative, inner_product, integrate, logit, sigma, stationary_profile, DensityProfile,
    Params, Profile,
};

/// Default tolerance and iteration cap for the inner Euler-Lagrange solve.
pub const EL_TOL: f64 = 1e-10;
pub const EL_MAX_ITER: usize = 20_000;

/// Default interior margin for operations that need `logit γ`.
pub const DEFAULT_DELTA: f64 = 1e-6;

/// The four boundary functions at `(ϱ, D, a, M)`, where `ϱ` is the reservoir
/// density, `D` the coupling, `a` the boundary density and `M` the field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryCosts {
    pub b: f64,
    pub p: f64,
    pub c: f64,
    pub q: f64,
}

pub fn boundary_costs(rho: f64, d: f64, a: f64, m: f64) -> Result<BoundaryCosts> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(MftError::InvalidInput(format!("reservoir density {rho} not in (0, 1)")));
    }
    if !(d > 0.0) || !d.is_finite() {
        return Err(MftError::InvalidInput(format!("coupling {d} must be positive")));
    }
    if !(0.0..=1.0).contains(&a) {
        return Err(MftError::InvalidInput(format!("density {a} not in [0, 1]")));
    }
    if !m.is_finite() {
        return Err(MftError::InvalidInput("field value must be finite".into()));
    }
    Ok(BoundaryCosts {
        b: b_fn(rho, d, a, m),
        p: p_fn(rho, d, a, m),
        c: c_fn(rho, d, a, m),
        q: q_fn(rho, d, a, m),
    })
}

#[inline]
pub fn b_fn(rho: f64, d: f64, a: f64, m: f64) -> f64 {
    ((1.0 - a) * rho * m.exp_m1() + a * (1.0 - rho) * (-m).exp_m1()) / d
}

#[inline]
pub fn p_fn(rho: f64, d: f64, a: f64, m: f64) -> f64 {
    ((1.0 - a) * rho * m.exp() - a * (1.0 - rho) * (-m).exp()) / d
}

#[inline]
pub fn c_fn(rho: f64, d: f64, a: f64, m: f64) -> f64 {
    let (ep, em) = (m.exp(), (-m).exp());
    ((1.0 - a) * rho * (1.0 - ep + m * ep) + a * (1.0 - rho) * (1.0 - em - m * em)) / d
}

#[inline]
pub fn q_fn(rho: f64, d: f64, a: f64, m: f64) -> f64 {
    ((1.0 - a) * rho * (m.exp_m1() - m) + a * (1.0 - rho) * ((-m).exp_m1() + m)) / d
}

/// `x log x` with the convention `0 log 0 = 0`.
#[inline]
fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `γ log(γ/F) + (1-γ) log((1-γ)/(1-F))` with `0 log 0 = 0`.
#[inline]
fn relative_entropy_density(g: f64, f: f64) -> f64 {
    let mut v = xlogx(g) + xlogx(1.0 - g);
    if g > 0.0 {
        v -= g * f.ln();
    }
    if g < 1.0 {
        v -= (1.0 - g) * (1.0 - f).ln();
    }
    v
}

fn check_gradient(f: &Profile) -> Result<Profile> {
    let d = derivative(f);
    if let Some(i) = d.values().iter().position(|&v| v <= 0.0) {
        return Err(MftError::NotAdmissible(format!(
            "∇F = {} <= 0 at node {i}",
            d.values()[i]
        )));
    }
    if f.min() <= 0.0 || f.max() >= 1.0 {
        return Err(MftError::NotAdmissible("F must lie strictly inside (0, 1)".into()));
    }
    Ok(d)
}

/// Bulk part of the functional maximised by `F(γ)`.
pub fn g_bulk(gamma: &DensityProfile, f: &Profile, params: &Params) -> Result<f64> {
    params.require_driven()?;
    f.grid().check_same(&gamma.grid())?;
    let d = check_gradient(f)?;
    let span = params.beta() - params.alpha();
    let vals = gamma
        .values()
        .iter()
        .zip(f.values())
        .zip(d.values())
        .map(|((&g, &fv), &dv)| relative_entropy_density(g, fv) + (dv / span).ln())
        .collect();
    Ok(integrate(&Profile::new(f.grid(), vals)?))
}

fn boundary_logs(f0: f64, f1: f64, params: &Params) -> Result<f64> {
    let (al, be, a, b) = (params.alpha(), params.beta(), params.a(), params.b());
    if !(f0 > al) || !(f1 < be) {
        return Err(MftError::NotAdmissible(format!(
            "need F(0) > alpha and F(1) < beta, got F(0)={f0}, F(1)={f1}"
        )));
    }
    Ok(a * ((f0 - al) / (a * (be - al))).ln() + b * ((be - f1) / (b * (be - al))).ln())
}

/// Bulk functional plus the two boundary logarithms.
pub fn g_total(gamma: &DensityProfile, f: &Profile, params: &Params) -> Result<f64> {
    let bulk = g_bulk(gamma, f, params)?;
    Ok(bulk + boundary_logs(f.first(), f.last(), params)?)
}

/// The functional in the variable `φ = logit F`, bulk plus boundary terms.
/// Concave in `φ`.
pub fn g_tilde(gamma: &DensityProfile, phi: &Profile, params: &Params) -> Result<f64> {
    params.require_driven()?;
    phi.grid().check_same(&gamma.grid())?;
    let d = derivative(phi);
    if d.min() <= 0.0 {
        return Err(MftError::NotAdmissible("φ is not increasing".into()));
    }
    let span = params.beta() - params.alpha();
    let vals = gamma
        .values()
        .iter()
        .zip(phi.values())
        .zip(d.values())
        .map(|((&g, &p), &dp)| {
            xlogx(g) + xlogx(1.0 - g) + (1.0 - g) * p - softplus(p) + (dp / span).ln()
        })
        .collect();
    let bulk = integrate(&Profile::new(phi.grid(), vals)?);
    let lg = |x: f64| crate::numerics::logistic(x);
    Ok(bulk + boundary_logs(lg(phi.first()), lg(phi.last()), params)?)
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QuasiPotentialReport {
    pub s0_gamma: f64,
    pub s0_rho: f64,
    pub s: f64,
    #[serde(skip)]
    pub f: Profile,
    /// `|ℋ(γ, Γ(γ))|`; `None` when `γ` touches `{0, 1}`.
    pub hj_residual: Option<f64>,
    pub el: ElSolution,
}

/// `-(1+A+B) log(1+A+B)`, the value of `S₀` at the stationary profile.
pub fn s0_stationary_exact(params: &Params) -> f64 {
    let k = 1.0 + params.a() + params.b();
    -k * k.ln()
}

/// Value of `S₀` at the stationary profile evaluated on the grid.
pub fn s0_stationary(params: &Params, grid: crate::numerics::Grid) -> Result<f64> {
    let rho = stationary_profile(params, grid);
    g_total(&rho, rho.profile(), params)
}

pub fn s0(gamma: &DensityProfile, params: &Params) -> Result<QuasiPotentialReport> {
    s0_with(gamma, params, EL_TOL, EL_MAX_ITER)
}

pub fn s0_with(
    gamma: &DensityProfile,
    params: &Params,
    tol: f64,
    max_iter: usize,
) -> Result<QuasiPotentialReport> {
    let el = solve_el(gamma, params, tol, max_iter)?;
    let s0_gamma = g_total(gamma, &el.f, params)?;
    let s0_rho = s0_stationary(params, gamma.grid())?;
    let hj_residual = if gamma.require_interior(DEFAULT_DELTA).is_ok() {
        let big_gamma = gamma_field(gamma, &el.f)?;
        Some(hamiltonian(gamma, &big_gamma, params)?.abs())
    } else {
        None
    };
    Ok(QuasiPotentialReport {
        s0_gamma,
        s0_rho,
        s: s0_gamma - s0_rho,
        f: el.f.clone(),
        hj_residual,
        el,
    })
}

/// `S(γ) = S₀(γ) - S₀(ρ̄)`.
pub fn s(gamma: &DensityProfile, params: &Params) -> Result<f64> {
    Ok(s0(gamma, params)?.s)
}

/// Relative entropy of `γ` with respect to the Bernoulli product at density
/// `alpha`; the quasi-potential in the equilibrium case.
pub fn s_equilibrium(gamma: &DensityProfile, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MftError::InvalidInput(format!("alpha = {alpha} not in (0, 1)")));
    }
    let vals = gamma
        .values()
        .iter()
        .map(|&g| relative_entropy_density(g, alpha))
        .collect();
    Ok(integrate(&Profile::new(gamma.grid(), vals)?))
}

/// `Γ = logit γ - logit F`.
pub fn gamma_field(gamma: &DensityProfile, f: &Profile) -> Result<Profile> {
    f.grid().check_same(&gamma.grid())?;
    let interior = |v: &[f64]| v.iter().all(|&x| x > 0.0 && x < 1.0);
    if !interior(gamma.values()) || !interior(f.values()) {
        return Err(MftError::NotAdmissible(
            "Γ needs γ and F strictly inside (0, 1)".into(),
        ));
    }
    gamma.profile().zip_map(f, |g, fv| logit(g) - logit(fv))
}

/// The Hamiltonian `ℋ(γ, H)`.
pub fn hamiltonian(gamma: &DensityProfile, h: &Profile, params: &Params) -> Result<f64> {
    h.grid().check_same(&gamma.grid())?;
    let dg = derivative(gamma.profile());
    let dh = derivative(h);
    let sig = gamma.profile().map(sigma);
    let dh2 = dh.map(|v| v * v);
    let g0 = gamma.values()[0];
    let g1 = gamma.values()[gamma.grid().n()];
    Ok(-inner_product(&dg, &dh)?
        + inner_product(&sig, &dh2)?
        + b_fn(params.alpha(), params.a(), g0, h.first())
        + b_fn(params.beta(), params.b(), g1, h.last()))
}

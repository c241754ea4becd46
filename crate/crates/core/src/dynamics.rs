//! Robin heat flow, the controlled weakly asymmetric equation and the
//! adjoint hydrodynamics that generates the optimal fluctuation path.

use serde::Serialize;

use crate::error::{MftError, Result};
use crate::euler_lagrange::{kmap_full, solve_el};
use crate::numerics::{
    derivative, logit, sigma, solve_tridiagonal, stationary_coefficients, stationary_profile,
    DensityProfile, Grid, Params, Path, Profile,
};
use crate::quasipotential::{p_fn, EL_MAX_ITER, EL_TOL};
use crate::spectral::SpectralBasis;

const BOUNDS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatMethod {
    Spectral,
    FiniteDifference,
}

#[derive(Debug, Clone)]
pub struct HeatSolution {
    pub path: Path,
    pub method: HeatMethod,
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times[0] != 0.0 {
        return Err(MftError::InvalidInput("times must start at 0".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MftError::InvalidInput("times must be strictly increasing".into()));
    }
    Ok(())
}

/// `u(t) = ρ̄ + P_t(γ - ρ̄)`; the frame at `t = 0` is `γ` itself.
pub fn solve_heat_robin(
    gamma: &DensityProfile,
    params: &Params,
    times: &[f64],
    modes: usize,
) -> Result<HeatSolution> {
    let basis = SpectralBasis::new(params, gamma.grid(), modes)?;
    solve_heat_robin_with(gamma, &basis, times)
}

pub fn solve_heat_robin_with(
    gamma: &DensityProfile,
    basis: &SpectralBasis,
    times: &[f64],
) -> Result<HeatSolution> {
    check_times(times)?;
    let rho = stationary_profile(basis.params(), gamma.grid());
    let c = basis.coefficients(&gamma.profile().sub(rho.profile())?)?;
    let frames = times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                gamma.profile().clone()
            } else {
                decayed(basis, &c, t).add(rho.profile()).unwrap()
            }
        })
        .collect();
    Ok(HeatSolution {
        path: Path::new(times.to_vec(), frames)?,
        method: HeatMethod::Spectral,
    })
}

fn decay(basis: &SpectralBasis, c: &[f64], t: f64) -> Vec<f64> {
    c.iter()
        .zip(basis.eigenvalues())
        .map(|(c, l)| c * (-l * t).exp())
        .collect()
}

fn decayed(basis: &SpectralBasis, c: &[f64], t: f64) -> Profile {
    basis.synthesize(&decay(basis, c, t))
}

/// `P_t φ` framewise, with the frame at `t = 0` equal to `φ`.
pub fn solve_heat_homogeneous(
    phi: &Profile,
    params: &Params,
    times: &[f64],
    modes: usize,
) -> Result<Path> {
    check_times(times)?;
    let basis = SpectralBasis::new(params, phi.grid(), modes)?;
    let c = basis.coefficients(phi)?;
    let frames = times
        .iter()
        .map(|&t| if t == 0.0 { phi.clone() } else { decayed(&basis, &c, t) })
        .collect();
    Path::new(times.to_vec(), frames)
}

/// Largest violation of `min(α, inf γ) <= u <= max(β, sup γ)` over a path.
pub fn max_principle_violation(path: &Path, gamma: &Profile, params: &Params) -> f64 {
    let lo = params.alpha().min(gamma.min());
    let hi = params.beta().max(gamma.max());
    path.frames()
        .iter()
        .map(|f| (lo - f.min()).max(f.max() - hi).max(0.0))
        .fold(0.0, f64::max)
}

/// Time levels for a scheme with step at most `dt` that lands on every
/// requested output time.
fn step_plan(outputs: &[f64], dt: f64) -> Vec<(f64, f64, Option<usize>)> {
    let mut plan = Vec::new();
    let mut t = 0.0;
    for (k, &target) in outputs.iter().enumerate().skip(1) {
        let span = target - t;
        let steps = (span / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for s in 0..steps {
            let t0 = t + s as f64 * h;
            plan.push((t0, h, if s + 1 == steps { Some(k) } else { None }));
        }
        t = target;
    }
    plan
}

/// Finite-volume solution of `∂_t u = Δu - 2∇(σ(u)∇H)` with the boundary
/// fluxes `p_{α,A}(u(0), H(0))` entering at the left and
/// `p_{β,B}(u(1), H(1))` entering at the right.
///
/// Diffusion and the affine part of the boundary flux are Crank-Nicolson,
/// the drift is explicit with `σ` averaged at cell faces. Frames are
/// returned at the frame times of `h` that do not exceed `t_end`, plus
/// `t_end`. `h` is linearly interpolated in time and held constant beyond
/// its last frame.
pub fn solve_wasep(
    gamma: &DensityProfile,
    h: &Path,
    params: &Params,
    t_end: f64,
    dt: f64,
) -> Result<Path> {
    let grid = gamma.grid();
    grid.check_same(&h.grid())?;
    if !(t_end > 0.0) {
        return Err(MftError::InvalidInput(format!("final time must be positive, got {t_end}")));
    }
    let hx = grid.h();
    if !(dt > 0.0) || dt > 0.25 * hx * hx * (1.0 + 1e-12) {
        return Err(MftError::Stability(format!(
            "time step {dt} exceeds h²/4 = {}",
            0.25 * hx * hx
        )));
    }
    let mut outputs: Vec<f64> = std::iter::once(0.0)
        .chain(h.times().iter().copied().filter(|&t| t > 0.0 && t < t_end))
        .collect();
    outputs.push(t_end);

    let n = grid.n();
    let ih2 = 1.0 / (hx * hx);
    let (al, be, a, b) = (params.alpha(), params.beta(), params.a(), params.b());

    // Diffusion operator rows (without boundary flux), applied as L u.
    let apply_l = |u: &[f64], out: &mut [f64], kl: f64, kr: f64| {
        out[0] = 2.0 * ih2 * (u[1] - u[0]) - 2.0 / hx * kl * u[0];
        out[n] = 2.0 * ih2 * (u[n - 1] - u[n]) - 2.0 / hx * kr * u[n];
        for i in 1..n {
            out[i] = ih2 * (u[i + 1] - 2.0 * u[i] + u[i - 1]);
        }
    };

    let mut u = gamma.values().to_vec();
    let mut frames = vec![gamma.profile().clone()];
    let mut lu = vec![0.0; n + 1];
    let mut rhs = vec![0.0; n + 1];
    let mut lower = vec![0.0; n + 1];
    let mut diag = vec![0.0; n + 1];
    let mut upper = vec![0.0; n + 1];
    for (t0, step, emit) in step_plan(&outputs, dt) {
        let hf = h.at(t0 + 0.5 * step);
        let hv = hf.values();
        // p = s - k u at each end with s, k >= 0.
        let (ep0, em0) = (hv[0].exp(), (-hv[0]).exp());
        let (ep1, em1) = (hv[n].exp(), (-hv[n]).exp());
        let (s_l, k_l) = (al * ep0 / a, (al * ep0 + (1.0 - al) * em0) / a);
        let (s_r, k_r) = (be * ep1 / b, (be * ep1 + (1.0 - be) * em1) / b);

        apply_l(&u, &mut lu, k_l, k_r);
        // Explicit drift: -∂_x(2σ∇H) in flux form.
        let drift_flux: Vec<f64> = (0..n)
            .map(|i| {
                let sf = sigma(0.5 * (u[i] + u[i + 1]));
                2.0 * sf * (hv[i + 1] - hv[i]) / hx
            })
            .collect();
        for i in 0..=n {
            let src = if i == 0 {
                -2.0 / hx * drift_flux[0] + 2.0 / hx * s_l
            } else if i == n {
                2.0 / hx * drift_flux[n - 1] + 2.0 / hx * s_r
            } else {
                -(drift_flux[i] - drift_flux[i - 1]) / hx
            };
            rhs[i] = u[i] + 0.5 * step * lu[i] + step * src;
        }
        for i in 1..n {
            lower[i] = -0.5 * step * ih2;
            upper[i] = -0.5 * step * ih2;
            diag[i] = 1.0 + step * ih2;
        }
        upper[0] = -step * ih2;
        diag[0] = 1.0 + step * ih2 + step / hx * k_l;
        lower[n] = -step * ih2;
        diag[n] = 1.0 + step * ih2 + step / hx * k_r;
        u = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;

        if emit.is_some() {
            let lo = u.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo < -BOUNDS_TOL || hi > 1.0 + BOUNDS_TOL || !lo.is_finite() || !hi.is_finite() {
                return Err(MftError::Stability(format!(
                    "density left [0, 1] at t = {}: range [{lo}, {hi}]",
                    t0 + step
                )));
            }
            u.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
            frames.push(Profile::new(grid, u.clone())?);
        }
    }
    Path::new(outputs, frames)
}

/// Boundary parameters seen by the adjoint dynamics at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveBoundary {
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

pub fn effective_boundary(f: &Profile, params: &Params) -> Result<EffectiveBoundary> {
    let (f0, f1) = (f.first(), f.last());
    if !(f0 > 0.0 && f0 < 1.0 && f1 > 0.0 && f1 < 1.0) {
        return Err(MftError::NotAdmissible("F must lie strictly inside (0, 1)".into()));
    }
    let (r0, r1) = (logit(f0), logit(f1));
    let (al, be) = (params.alpha(), params.beta());
    let (l0, m0) = ((1.0 - al) * r0.exp(), al * (-r0).exp());
    let (l1, m1) = ((1.0 - be) * r1.exp(), be * (-r1).exp());
    Ok(EffectiveBoundary {
        alpha: l0 / (l0 + m0),
        beta: l1 / (l1 + m1),
        a: params.a() / (l0 + m0),
        b: params.b() / (l1 + m1),
    })
}

/// `∇ logit F`, the drift of the adjoint dynamics.
pub fn drift_field(f: &Profile) -> Result<Profile> {
    if f.min() <= 0.0 || f.max() >= 1.0 {
        return Err(MftError::NotAdmissible("F must lie strictly inside (0, 1)".into()));
    }
    let d = derivative(f);
    if d.min() <= 0.0 {
        return Err(MftError::NotAdmissible("F is not strictly increasing".into()));
    }
    d.zip_map(f, |dv, fv| dv / sigma(fv))
}

#[derive(Debug, Clone)]
pub struct AdjointOptions {
    /// Number of spectral modes.
    pub modes: usize,
    /// Stop once `‖v - ρ̄‖_∞` falls below this value.
    pub eps_relax: f64,
    /// Hard limit on the time horizon.
    pub t_max: f64,
    /// Explicit frame times; when set, `eps_relax` only marks `relax_time`.
    pub times: Option<Vec<f64>>,
    /// Smallest positive frame time of the default schedule.
    pub t_first: f64,
    /// Ratio of consecutive frame times in the geometric part.
    pub growth: f64,
    /// Largest step of the default schedule.
    pub max_step: f64,
}

impl Default for AdjointOptions {
    fn default() -> Self {
        AdjointOptions {
            modes: 60,
            eps_relax: 1e-3,
            t_max: 50.0,
            times: None,
            t_first: 1e-6,
            growth: 1.04,
            max_step: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdjointSolution {
    pub v_path: Path,
    pub f_path: Path,
    /// `∇v`, from the closed form with spectral derivatives of `F`.
    pub grad_v: Path,
    /// `∇F`, spectral.
    pub grad_f: Path,
    pub effective: Vec<EffectiveBoundary>,
    /// First frame time with `‖v - ρ̄‖_∞ < eps_relax`.
    pub relax_time: Option<f64>,
    pub v_min: f64,
    pub v_max: f64,
    pub warnings: Vec<String>,
}

impl AdjointSolution {
    /// The control `Γ = logit v - logit F` along the path.
    pub fn control(&self) -> Result<Path> {
        let frames = self
            .v_path
            .frames()
            .iter()
            .zip(self.f_path.frames())
            .map(|(v, f)| v.zip_map(f, |a, b| logit(a) - logit(b)))
            .collect::<Result<Vec<_>>>()?;
        Path::new(self.v_path.times().to_vec(), frames)
    }

    /// `∇Γ = ∇v/σ(v) - ∇F/σ(F)` from the closed-form gradients.
    pub fn control_gradient(&self) -> Result<Path> {
        let mut frames = Vec::with_capacity(self.v_path.len());
        for k in 0..self.v_path.len() {
            let v = &self.v_path.frames()[k];
            let f = &self.f_path.frames()[k];
            let dv = &self.grad_v.frames()[k];
            let df = &self.grad_f.frames()[k];
            let vals = (0..v.grid().len())
                .map(|i| {
                    dv.values()[i] / sigma(v.values()[i]) - df.values()[i] / sigma(f.values()[i])
                })
                .collect();
            frames.push(Profile::new(v.grid(), vals)?);
        }
        Path::new(self.v_path.times().to_vec(), frames)
    }

    /// `‖v(t) - ρ̄‖_∞` per frame.
    pub fn distance_to_stationary(&self, params: &Params) -> Vec<f64> {
        let rho = stationary_profile(params, self.v_path.grid());
        self.v_path
            .frames()
            .iter()
            .map(|v| v.dist_inf(rho.profile()).unwrap())
            .collect()
    }
}

/// Default frame times: `0`, then geometric from `t_first` with ratio
/// `growth` until the step reaches `max_step`, then uniform.
pub fn default_times(opts: &AdjointOptions, t_end: f64) -> Vec<f64> {
    let mut ts = vec![0.0];
    let mut t = opts.t_first;
    while t < t_end {
        ts.push(t);
        let step = (t * (opts.growth - 1.0)).min(opts.max_step);
        t += step;
    }
    if t_end - ts[ts.len() - 1] > 1e-12 {
        ts.push(t_end);
    }
    ts
}

struct AdjointFrame {
    v: Profile,
    dv: Profile,
    f: Profile,
    df: Profile,
}

struct AdjointEngine<'a> {
    basis: &'a SpectralBasis,
    gamma: &'a DensityProfile,
    f0: Profile,
    df0: Profile,
    /// Coefficients of `F(γ) - ρ̄`.
    c: Vec<f64>,
    /// Coefficients of `ΔF(γ)`.
    d: Vec<f64>,
    slope: f64,
    rho: Profile,
}

impl AdjointEngine<'_> {
    fn frame(&self, t: f64) -> Result<AdjointFrame> {
        let grid = self.rho.grid();
        if t == 0.0 {
            return Ok(AdjointFrame {
                v: self.gamma.profile().clone(),
                dv: derivative(self.gamma.profile()),
                f: self.f0.clone(),
                df: self.df0.clone(),
            });
        }
        let ct = decay(self.basis, &self.c, t);
        let dt = decay(self.basis, &self.d, t);
        let f = self.basis.synthesize(&ct).add(&self.rho)?;
        let df = self.basis.synthesize_derivative(&ct).map(|v| v + self.slope);
        let lap = self.basis.synthesize(&dt);
        let dlap = self.basis.synthesize_derivative(&dt);
        let mut v = Vec::with_capacity(grid.len());
        let mut dv = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let (fv, g, l, dl) = (f.values()[i], df.values()[i], lap.values()[i], dlap.values()[i]);
            let s = sigma(fv);
            v.push(fv + s * l / (g * g));
            dv.push(g + (1.0 - 2.0 * fv) * l / g + s * dl / (g * g) - 2.0 * s * l * l / (g * g * g));
        }
        Ok(AdjointFrame {
            v: Profile::new(grid, v)?,
            dv: Profile::new(grid, dv)?,
            f,
            df,
        })
    }
}

/// Builds `F_t` (heat flow from `F(γ)`) and `v_t = F + σ(F) ΔF/(∇F)²`.
pub fn adjoint_path(
    gamma: &DensityProfile,
    params: &Params,
    opts: &AdjointOptions,
) -> Result<AdjointSolution> {
    let basis = SpectralBasis::new(params, gamma.grid(), opts.modes)?;
    adjoint_path_with(gamma, params, &basis, opts)
}

pub fn adjoint_path_with(
    gamma: &DensityProfile,
    params: &Params,
    basis: &SpectralBasis,
    opts: &AdjointOptions,
) -> Result<AdjointSolution> {
    let grid = gamma.grid();
    let el = solve_el(gamma, params, EL_TOL, EL_MAX_ITER)?;
    let image = kmap_full(&el.f, gamma, params)?;
    let f0 = el.f.clone();
    let df0 = image.gradient;
    let lap0 = {
        let vals = (0..grid.len())
            .map(|i| {
                let (g, fv, d) = (gamma.values()[i], f0.values()[i], df0.values()[i]);
                (g - fv) * d * d / sigma(fv)
            })
            .collect();
        Profile::new(grid, vals)?
    };
    let rho = stationary_profile(params, grid);
    let (_, slope) = stationary_coefficients(params);
    let engine = AdjointEngine {
        basis,
        gamma,
        c: basis.coefficients(&f0.sub(rho.profile())?)?,
        d: basis.coefficients(&lap0)?,
        f0,
        df0,
        slope,
        rho: rho.profile().clone(),
    };

    let explicit = opts.times.is_some();
    let times = match &opts.times {
        Some(t) => {
            check_times(t)?;
            t.clone()
        }
        None => default_times(opts, opts.t_max),
    };

    let c1 = {
        let d = &engine.df0;
        d.min().min(1.0 / d.max())
    };
    let mut warnings = Vec::new();
    let mut out_t = Vec::new();
    let mut frames = Vec::new();
    let mut relax_time = None;
    for &t in &times {
        let fr = engine.frame(t)?;
        let dist = fr.v.dist_inf(&engine.rho)?;
        if fr.df.min() < 0.99 * c1 || fr.df.max() > 1.01 / c1 {
            return Err(MftError::Stability(format!(
                "∇F at t = {t} left [{c1}, {}]: spectral truncation too coarse",
                1.0 / c1
            )));
        }
        out_t.push(t);
        frames.push(fr);
        if relax_time.is_none() && dist < opts.eps_relax {
            relax_time = Some(t);
            if !explicit {
                break;
            }
        }
    }
    if relax_time.is_none() && !explicit {
        return Err(MftError::NoConvergence {
            iterations: out_t.len(),
            residual: frames.last().map(|f| f.v.dist_inf(&engine.rho).unwrap()).unwrap_or(f64::NAN),
            history: Vec::new(),
        });
    }

    let (mut v_min, mut v_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (t, fr) in out_t.iter().zip(&frames) {
        v_min = v_min.min(fr.v.min());
        v_max = v_max.max(fr.v.max());
        if fr.v.min() < 0.0 || fr.v.max() > 1.0 {
            warnings.push(format!("v leaves [0, 1] at t = {t}"));
        }
    }
    let effective = frames
        .iter()
        .map(|fr| effective_boundary(&fr.f, params))
        .collect::<Result<Vec<_>>>()?;
    let (mut v, mut dv, mut f, mut df) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for fr in frames {
        v.push(fr.v);
        dv.push(fr.dv);
        f.push(fr.f);
        df.push(fr.df);
    }
    Ok(AdjointSolution {
        v_path: Path::new(out_t.clone(), v)?,
        f_path: Path::new(out_t.clone(), f)?,
        grad_v: Path::new(out_t.clone(), dv)?,
        grad_f: Path::new(out_t, df)?,
        effective,
        relax_time,
        v_min,
        v_max,
        warnings,
    })
}

/// Residuals of the adjoint boundary conditions at one frame:
/// `∇v - 2σ(v)∇R ∓ p_{1-·,·}(v, R)` at `x = 0` and `x = 1`.
pub fn adjoint_boundary_residual(
    v: f64,
    dv: f64,
    f: f64,
    df: f64,
    left: bool,
    params: &Params,
) -> f64 {
    let r = logit(f);
    let dr = df / sigma(f);
    let lhs = dv - 2.0 * sigma(v) * dr;
    let rhs = if left {
        -p_fn(1.0 - params.alpha(), params.a(), v, r)
    } else {
        p_fn(1.0 - params.beta(), params.b(), v, r)
    };
    lhs - rhs
}

/// Weak-form residual of the controlled equation against one test function
/// `g(t, x)` with its partial derivatives `g_t`, `g_x`.
pub fn weak_form_residual(
    u: &Path,
    h: &Path,
    params: &Params,
    g: impl Fn(f64, f64) -> f64,
    g_t: impl Fn(f64, f64) -> f64,
    g_x: impl Fn(f64, f64) -> f64,
) -> Result<f64> {
    u.check_compatible(h)?;
    let grid = u.grid();
    let nodes = grid.nodes();
    let n = grid.n();
    let space = |vals: Vec<f64>| crate::numerics::integrate(&Profile::new(grid, vals).unwrap());
    let ts = u.times();
    let per_frame: Vec<(f64, f64)> = (0..u.len())
        .map(|k| {
            let t = ts[k];
            let uf = &u.frames()[k];
            let hf = &h.frames()[k];
            let du = derivative(uf);
            let dh = derivative(hf);
            let uv = uf.values();
            let lhs_int = space(nodes.iter().zip(uv).map(|(&x, &v)| v * g_t(t, x)).collect());
            let rhs_int = space(
                (0..=n)
                    .map(|i| {
                        let x = nodes[i];
                        (-du.values()[i] + 2.0 * sigma(uv[i]) * dh.values()[i]) * g_x(t, x)
                    })
                    .collect(),
            );
            let bnd = p_fn(params.beta(), params.b(), uv[n], hf.last()) * g(t, 1.0)
                + p_fn(params.alpha(), params.a(), uv[0], hf.first()) * g(t, 0.0);
            (lhs_int, rhs_int + bnd)
        })
        .collect();
    let trap = |f: &dyn Fn(usize) -> f64| -> f64 {
        (1..ts.len()).map(|k| 0.5 * (ts[k] - ts[k - 1]) * (f(k) + f(k - 1))).sum()
    };
    let t_end = u.final_time();
    let t0 = ts[0];
    let end_term = space(nodes.iter().zip(u.last().values()).map(|(&x, &v)| v * g(t_end, x)).collect());
    let start_term = space(nodes.iter().zip(u.first().values()).map(|(&x, &v)| v * g(t0, x)).collect());
    let lhs = end_term - start_term - trap(&|k| per_frame[k].0);
    let rhs = trap(&|k| per_frame[k].1);
    Ok(lhs - rhs)
}

/// Uniform grid of `frames + 1` times on `[0, t_end]`.
pub fn uniform_times(t_end: f64, frames: usize) -> Vec<f64> {
    (0..=frames).map(|k| t_end * k as f64 / frames as f64).collect()
}

/// A path of zero fields on the given grid and times.
pub fn zero_control(grid: Grid, times: &[f64]) -> Result<Path> {
    Path::new(times.to_vec(), vec![Profile::zeros(grid); times.len()])
}

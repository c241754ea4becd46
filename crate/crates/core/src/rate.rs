//! Dynamical rate functionals: the variational functional `J_{T,H}`, the
//! explicit cost of a controlled path, the energy, the connecting path out
//! of `ρ̄`, and the `V = S` verification pipeline.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::{adjoint_path_with, weak_form_residual, AdjointOptions};
use crate::error::{MftError, Result};
use crate::numerics::{
    derivative, inner_product, integrate, norm, sigma, stationary_profile, DensityProfile,
    NormKind, Params, Path, Profile,
};
use crate::quasipotential::{b_fn, c_fn, q_fn, s0, EL_MAX_ITER, EL_TOL};
use crate::quasipotential::s0_with;
use crate::spectral::SpectralBasis;

/// Trapezoid rule over the frame times of a path.
fn time_trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// The separate groups of `J_{T,H}(u)`; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JTerms {
    /// `⟨u_T,H_T⟩ - ⟨u_0,H_0⟩ - ∫⟨u,∂_tH⟩`, summed by parts between frames.
    pub time: f64,
    /// `∫⟨∇u,∇H⟩`.
    pub gradient: f64,
    /// `-∫⟨σ(u),(∇H)²⟩`.
    pub mobility: f64,
    /// `-∫ b_{α,A}(u(0),H(0))`.
    pub left: f64,
    /// `-∫ b_{β,B}(u(1),H(1))`.
    pub right: f64,
    pub total: f64,
}

pub fn j_terms(u: &Path, h: &Path, params: &Params) -> Result<JTerms> {
    u.check_compatible(h)?;
    let ts = u.times();
    let (uf, hf) = (u.frames(), h.frames());
    let mut time = 0.0;
    for k in 1..ts.len() {
        let du = uf[k].sub(&uf[k - 1])?;
        let hm = hf[k].add(&hf[k - 1])?.scale(0.5);
        time += inner_product(&du, &hm)?;
    }
    let m = ts.len();
    let (mut grad, mut mob, mut left, mut right) =
        (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for k in 0..m {
        let du = derivative(&uf[k]);
        let dh = derivative(&hf[k]);
        grad[k] = inner_product(&du, &dh)?;
        let s = uf[k].map(sigma);
        mob[k] = -inner_product(&s, &dh.map(|v| v * v))?;
        left[k] = -b_fn(params.alpha(), params.a(), uf[k].first(), hf[k].first());
        right[k] = -b_fn(params.beta(), params.b(), uf[k].last(), hf[k].last());
    }
    let gradient = time_trapezoid(ts, &grad);
    let mobility = time_trapezoid(ts, &mob);
    let left = time_trapezoid(ts, &left);
    let right = time_trapezoid(ts, &right);
    Ok(JTerms {
        time,
        gradient,
        mobility,
        left,
        right,
        total: time + gradient + mobility + left + right,
    })
}

/// `J_{T,H}(u)` in its integrated-by-parts form.
pub fn j_functional(u: &Path, h: &Path, params: &Params) -> Result<f64> {
    Ok(j_terms(u, h, params)?.total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateBreakdown {
    /// `∫⟨σ(u),(∇H)²⟩`.
    pub bulk: f64,
    /// `∫ c_{α,A}(u(0),H(0))`.
    pub left: f64,
    /// `∫ c_{β,B}(u(1),H(1))`.
    pub right: f64,
    pub total: f64,
    /// Largest weak-form residual of the controlled equation over a few
    /// test functions.
    pub control_residual: f64,
    pub warnings: Vec<String>,
}

/// Residual threshold above which the control is flagged as not driving `u`.
pub const CONTROL_WARN: f64 = 1e-2;

/// Cost of a path `u` driven by the control `H`, with `∇H` by finite
/// differences.
pub fn rate_from_control(u: &Path, h: &Path, params: &Params) -> Result<RateBreakdown> {
    let grad = Path::new(h.times().to_vec(), h.frames().iter().map(derivative).collect())?;
    rate_from_control_with_gradient(u, h, &grad, params)
}

/// As [`rate_from_control`] with a supplied `∇H`.
pub fn rate_from_control_with_gradient(
    u: &Path,
    h: &Path,
    grad_h: &Path,
    params: &Params,
) -> Result<RateBreakdown> {
    u.check_compatible(h)?;
    u.check_compatible(grad_h)?;
    let ts = u.times();
    let m = ts.len();
    let (mut bulk, mut left, mut right) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for k in 0..m {
        let uf = &u.frames()[k];
        let hf = &h.frames()[k];
        let dh = &grad_h.frames()[k];
        let integrand = uf.zip_map(dh, |a, g| sigma(a) * g * g)?;
        bulk[k] = integrate(&integrand);
        left[k] = c_fn(params.alpha(), params.a(), uf.first(), hf.first());
        right[k] = c_fn(params.beta(), params.b(), uf.last(), hf.last());
    }
    let bulk = time_trapezoid(ts, &bulk);
    let left = time_trapezoid(ts, &left);
    let right = time_trapezoid(ts, &right);

    let pi = std::f64::consts::PI;
    let mut control_residual = 0.0f64;
    if m > 1 {
        let tests: [(&dyn Fn(f64, f64) -> f64, &dyn Fn(f64, f64) -> f64); 3] = [
            (&|_, _| 1.0, &|_, _| 0.0),
            (&|_, x| x, &|_, _| 1.0),
            (&|_, x| (pi * x).cos(), &|_, x| -pi * (pi * x).sin()),
        ];
        for (g, gx) in tests {
            let r = weak_form_residual(u, h, params, g, |_, _| 0.0, gx)?;
            control_residual = control_residual.max(r.abs());
        }
    }
    let mut warnings = Vec::new();
    if control_residual > CONTROL_WARN {
        warnings.push(format!(
            "control does not drive the path: weak-form residual {control_residual:.3e}"
        ));
    }
    Ok(RateBreakdown {
        bulk,
        left,
        right,
        total: bulk + left + right,
        control_residual,
        warnings,
    })
}

/// `½∫dt∫(∇u)²/σ(u)`, or `+∞` when some frame touches 0 or 1.
pub fn energy(u: &Path) -> f64 {
    let mut per = Vec::with_capacity(u.len());
    for f in u.frames() {
        if f.min() <= 0.0 || f.max() >= 1.0 {
            return f64::INFINITY;
        }
        let d = derivative(f);
        let integrand = d.zip_map(f, |g, a| g * g / sigma(a)).unwrap();
        per.push(0.5 * integrate(&integrand));
    }
    time_trapezoid(u.times(), &per)
}

#[derive(Debug, Clone)]
pub struct ConnectingPath {
    /// `w(t)` on `[0, 1]`, from `ρ̄` to `γ`.
    pub path: Path,
    /// `∂_t w - Δw` at the same times.
    pub source: Path,
    /// Sum over time of the per-frame supremum over the control basket.
    pub cost: f64,
    /// `(2J/δ₀)²‖γ - ρ̄‖₂²`.
    pub bound: f64,
    /// `J = (1 - e^{-λ₁})⁻¹`.
    pub j_const: f64,
    /// `Λ = 16 √(A/λ₁)`.
    pub lambda_const: f64,
    /// `δ₀ min(1/4, 1/Λ)`.
    pub radius: f64,
    pub distance: f64,
    pub hypothesis_met: bool,
    /// `‖γ - ρ̄ - Σ c_k f_k‖_∞`, the part of `γ` the series misses.
    pub truncation: f64,
}

/// Number of eigenfunctions, besides the constant, in the control basket.
pub const BASKET_MODES: usize = 12;

/// Time nodes on `[0, 1]` graded towards `t = 1`.
fn graded_times(frames: usize) -> Vec<f64> {
    (0..=frames)
        .map(|j| {
            let s = 1.0 - j as f64 / frames as f64;
            1.0 - s * s * s
        })
        .collect()
}

/// The path `w(t) = ρ̄ + Σ (e^{λ_k t}-1)/(e^{λ_k}-1) c_k f_k` from `ρ̄` to
/// `γ`, rejected when `‖γ - ρ̄‖_∞` exceeds `δ₀ min(1/4, 1/Λ)`.
pub fn connecting_path(
    gamma: &DensityProfile,
    params: &Params,
    basis: &SpectralBasis,
    frames: usize,
) -> Result<ConnectingPath> {
    let cp = connecting_path_unchecked(gamma, params, basis, frames)?;
    if !cp.hypothesis_met {
        return Err(MftError::InvalidInput(format!(
            "‖γ - ρ̄‖_∞ = {:.6e} exceeds the admissible radius {:.6e}",
            cp.distance, cp.radius
        )));
    }
    Ok(cp)
}

/// [`connecting_path`] without the distance restriction.
pub fn connecting_path_unchecked(
    gamma: &DensityProfile,
    params: &Params,
    basis: &SpectralBasis,
    frames: usize,
) -> Result<ConnectingPath> {
    params.require_driven()?;
    if frames < 2 {
        return Err(MftError::InvalidInput("connecting path needs at least 2 frames".into()));
    }
    let grid = gamma.grid();
    grid.check_same(&basis.grid())?;
    let rho = stationary_profile(params, grid);
    let diff = gamma.profile().sub(rho.profile())?;
    let c = basis.coefficients(&diff)?;
    let lam = basis.eigenvalues();
    let lambda1 = lam[0];
    let j_const = 1.0 / (1.0 - (-lambda1).exp());
    let delta0 = params.delta0();
    let lambda_const = 16.0 * (params.a() / lambda1).sqrt();
    let radius = delta0 * (0.25f64).min(1.0 / lambda_const);
    let distance = diff.max_abs();
    let bound = (2.0 * j_const / delta0).powi(2) * inner_product(&diff, &diff)?;
    let truncation = basis.synthesize(&c).dist_inf(&diff)?;

    // e^{λ(t-1)} forms avoid overflow for the large eigenvalues.
    let weight = |l: f64, t: f64| ((l * (t - 1.0)).exp() - (-l).exp()) / (-(-l).exp_m1());
    let source_weight =
        |l: f64, t: f64| l * (2.0 * (l * (t - 1.0)).exp() - (-l).exp()) / (-(-l).exp_m1());

    let times = graded_times(frames);
    let mut w_frames = Vec::with_capacity(times.len());
    let mut src_frames = Vec::with_capacity(times.len());
    for &t in &times {
        let cw: Vec<f64> = c.iter().zip(lam).map(|(c, &l)| c * weight(l, t)).collect();
        let cs: Vec<f64> = c.iter().zip(lam).map(|(c, &l)| c * source_weight(l, t)).collect();
        let w = if t == 0.0 {
            rho.profile().clone()
        } else if t == 1.0 {
            gamma.profile().clone()
        } else {
            basis.synthesize(&cw).add(rho.profile())?
        };
        w_frames.push(w);
        src_frames.push(basis.synthesize(&cs));
    }
    let path = Path::new(times.clone(), w_frames)?;
    let source = Path::new(times.clone(), src_frames)?;

    let basket = ControlBasket::new(basis, BASKET_MODES);
    let per: Vec<f64> = path
        .frames()
        .iter()
        .zip(source.frames())
        .map(|(w, h)| basket.sup(w, h, params))
        .collect::<Result<_>>()?;
    let cost = time_trapezoid(&times, &per);
    Ok(ConnectingPath {
        path,
        source,
        cost,
        bound,
        j_const,
        lambda_const,
        radius,
        distance,
        hypothesis_met: distance <= radius,
        truncation,
    })
}

/// `span{1, f_1, …, f_m}` with the data needed for the per-frame
/// maximization of `⟨h,H⟩ - ⟨σ(w),(∇H)²⟩ - q_{α,A}(w(0),H(0)) - q_{β,B}(w(1),H(1))`.
struct ControlBasket {
    values: Vec<Profile>,
    grads: Vec<Profile>,
}

impl ControlBasket {
    fn new(basis: &SpectralBasis, modes: usize) -> Self {
        let m = modes.min(basis.count());
        let grid = basis.grid();
        let mut values = vec![Profile::constant(grid, 1.0)];
        let mut grads = vec![Profile::zeros(grid)];
        for k in 0..m {
            values.push(basis.eigenfunctions()[k].clone());
            grads.push(basis.eigenfunction_derivative(k));
        }
        ControlBasket { values, grads }
    }

    fn sup(&self, w: &Profile, h: &Profile, params: &Params) -> Result<f64> {
        let d = self.values.len();
        let s = w.map(sigma);
        let mut gram = DMatrix::zeros(d, d);
        for i in 1..d {
            let si = s.zip_map(&self.grads[i], |a, b| a * b)?;
            for j in i..d {
                let v = inner_product(&si, &self.grads[j])?;
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let b = DVector::from_iterator(d, self.values.iter().map(|f| inner_product(h, f).unwrap()));
        let e0 = DVector::from_iterator(d, self.values.iter().map(|f| f.first()));
        let e1 = DVector::from_iterator(d, self.values.iter().map(|f| f.last()));
        let (al, be, a, bb) = (params.alpha(), params.beta(), params.a(), params.b());
        let (w0, w1) = (w.first(), w.last());

        let objective = |c: &DVector<f64>| {
            let m0 = e0.dot(c);
            let m1 = e1.dot(c);
            b.dot(c) - c.dot(&(&gram * c)) - q_fn(al, a, w0, m0) - q_fn(be, bb, w1, m1)
        };
        // First and second derivatives in M of q_{ϱ,D}(a, M).
        let dq = |rho: f64, dd: f64, u: f64, m: f64| {
            ((1.0 - u) * rho * m.exp_m1() - u * (1.0 - rho) * (-m).exp_m1()) / dd
        };
        let d2q = |rho: f64, dd: f64, u: f64, m: f64| {
            ((1.0 - u) * rho * m.exp() + u * (1.0 - rho) * (-m).exp()) / dd
        };

        let mut c = DVector::zeros(d);
        let mut value = 0.0;
        for _ in 0..100 {
            let (m0, m1) = (e0.dot(&c), e1.dot(&c));
            let grad = &b - 2.0 * (&gram * &c) - dq(al, a, w0, m0) * &e0 - dq(be, bb, w1, m1) * &e1;
            let neg_hess = 2.0 * &gram
                + d2q(al, a, w0, m0) * (&e0 * e0.transpose())
                + d2q(be, bb, w1, m1) * (&e1 * e1.transpose());
            let chol = neg_hess
                .cholesky()
                .ok_or_else(|| MftError::Singular(0))?;
            let step = chol.solve(&grad);
            let decrement = grad.dot(&step);
            if decrement < 1e-26 {
                break;
            }
            let mut tau = 1.0;
            loop {
                let trial = &c + tau * &step;
                let v = objective(&trial);
                if v >= value + 0.25 * tau * decrement || tau < 1e-12 {
                    c = trial;
                    value = v;
                    break;
                }
                tau *= 0.5;
            }
        }
        Ok(value.max(0.0))
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub modes: usize,
    pub eps_relax: f64,
    pub t_max: f64,
    pub connecting_frames: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            modes: 60,
            eps_relax: 1e-3,
            t_max: 50.0,
            connecting_frames: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    #[serde(rename = "S")]
    pub s: f64,
    pub upper: f64,
    pub lower: f64,
    /// `|upper - S| / max(|S|, 1e-6)`.
    pub gap: f64,
    pub gap_abs: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
    pub eps_relax: f64,
    /// Cost of the reversed adjoint path from `v(T₁)` to `γ`.
    pub adjoint_rate: RateBreakdown,
    /// `S₀(γ) - S₀(v(T₁))`.
    pub s0_drop: f64,
    pub connecting_cost: f64,
    pub connecting_bound: f64,
    pub connecting_hypothesis_met: bool,
    pub connecting_distance: f64,
    pub connecting_radius: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub warnings: Vec<String>,
}

/// Upper estimate of `V(γ)` by concatenating the connecting path from `ρ̄`
/// to `v(T₁)` with the time-reversed adjoint path, compared with `S(γ)`.
pub fn verify_v_equals_s(
    gamma: &DensityProfile,
    params: &Params,
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    params.require_driven()?;
    let grid = gamma.grid();
    let basis = SpectralBasis::new(params, grid, opts.modes)?;
    let report = s0(gamma, params)?;
    let s = report.s;

    let adj_opts = AdjointOptions {
        modes: opts.modes,
        eps_relax: opts.eps_relax,
        t_max: opts.t_max,
        ..Default::default()
    };
    let adj = adjoint_path_with(gamma, params, &basis, &adj_opts)?;
    let t1 = adj.relax_time.expect("adjoint path stops at relaxation");
    let u = adj.v_path.reversed();
    let h = adj.control()?.reversed();
    let grad_h = adj.control_gradient()?.reversed();
    let adjoint_rate = rate_from_control_with_gradient(&u, &h, &grad_h, params)?;

    let end = DensityProfile::new(adj.v_path.last().clone())?;
    let s0_end = s0_with(&end, params, EL_TOL, EL_MAX_ITER)?.s0_gamma;
    let s0_drop = report.s0_gamma - s0_end;

    let cp = connecting_path_unchecked(&end, params, &basis, opts.connecting_frames)?;
    let upper = adjoint_rate.total + cp.cost;
    let mut warnings = adj.warnings.clone();
    warnings.extend(adjoint_rate.warnings.iter().cloned());
    if !cp.hypothesis_met {
        warnings.push(format!(
            "v(T1) is {:.3e} from the stationary profile, outside the radius {:.3e} where the connecting cost bound is proved",
            cp.distance, cp.radius
        ));
    }
    let gap_abs = (upper - s).abs();
    Ok(VerifyReport {
        s,
        upper,
        lower: s,
        gap: gap_abs / s.abs().max(1e-6),
        gap_abs,
        t1,
        eps_relax: opts.eps_relax,
        adjoint_rate,
        s0_drop,
        connecting_cost: cp.cost,
        connecting_bound: cp.bound,
        connecting_hypothesis_met: cp.hypothesis_met,
        connecting_distance: cp.distance,
        connecting_radius: cp.radius,
        v_min: adj.v_min,
        v_max: adj.v_max,
        warnings,
    })
}

/// `‖γ - ρ̄‖` in the given norm.
pub fn distance_to_stationary(gamma: &DensityProfile, params: &Params, kind: NormKind) -> f64 {
    let rho = stationary_profile(params, gamma.grid());
    norm(&gamma.profile().sub(rho.profile()).unwrap(), kind)
}

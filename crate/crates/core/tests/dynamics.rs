mod common;

use common::{battery, grid, params, sample, smooth_step};
use mft_core::dynamics::{
    adjoint_boundary_residual, adjoint_path, adjoint_path_with, drift_field, effective_boundary,
    max_principle_violation, solve_heat_homogeneous, solve_heat_robin, solve_heat_robin_with,
    solve_wasep, uniform_times, weak_form_residual, zero_control, AdjointOptions,
};
use mft_core::euler_lagrange::solve_el;
use mft_core::numerics::{
    integrate, stationary_profile, DensityProfile, Params, Path, Profile,
};
use mft_core::spectral::SpectralBasis;
use mft_core::MftError;
use proptest::prelude::*;
use std::f64::consts::PI;

fn field(times: &[f64], n: usize, h: impl Fn(f64, f64) -> f64) -> Path {
    let g = grid(n);
    let frames = times.iter().map(|&t| Profile::from_fn(g, |x| h(t, x))).collect();
    Path::new(times.to_vec(), frames).unwrap()
}

#[test]
fn spectral_heat_and_finite_volume_agree_without_control() {
    let p = params();
    let n = 400;
    let dt = 0.25 / (n * n) as f64;
    let times = [0.0, 0.01, 0.03, 0.06, 0.1];
    let zero = zero_control(grid(n), &times).unwrap();
    for name in ["bump_sin", "step_up"] {
        let f = battery().into_iter().find(|(k, _)| *k == name).unwrap().1;
        let gamma = sample(&*f, n);
        let spec = solve_heat_robin(&gamma, &p, &times, 60).unwrap().path;
        let fv = solve_wasep(&gamma, &zero, &p, 0.1, dt).unwrap();
        assert_eq!(fv.times(), &times);
        for k in 1..times.len() {
            let d = spec.frames()[k].dist_inf(&fv.frames()[k]).unwrap();
            assert!(d < 1e-3, "{name} t={} {d}", times[k]);
        }
    }
}

#[test]
fn controlled_solution_satisfies_weak_form_for_a_basket_of_tests() {
    let p = params();
    let n = 200;
    let dt = 0.25 / (n * n) as f64;
    let times = uniform_times(0.2, 40);
    let h = field(&times, n, |t, x| 0.3 * (PI * x).sin() * t.cos() + 0.2 * x - 0.1);
    let gamma = sample(&|x| 0.5 + 0.2 * (PI * x).sin(), n);
    let u = solve_wasep(&gamma, &h, &p, 0.2, dt).unwrap();

    let tests: Vec<(Box<dyn Fn(f64, f64) -> f64>, Box<dyn Fn(f64, f64) -> f64>, Box<dyn Fn(f64, f64) -> f64>)> = vec![
        (Box::new(|_, _| 1.0), Box::new(|_, _| 0.0), Box::new(|_, _| 0.0)),
        (Box::new(|_, x| x), Box::new(|_, _| 0.0), Box::new(|_, _| 1.0)),
        (Box::new(|_, x| (PI * x).cos()), Box::new(|_, _| 0.0), Box::new(|_, x| -PI * (PI * x).sin())),
        (
            Box::new(|t, x| (-t).exp() * x * x),
            Box::new(|t, x| -(-t).exp() * x * x),
            Box::new(|t, x| 2.0 * (-t).exp() * x),
        ),
    ];
    for (g, gt, gx) in &tests {
        let r = weak_form_residual(&u, &h, &p, g, gt, gx).unwrap();
        assert!(r.abs() < 1e-3, "{r}");
    }

    // The same path is not a solution for a different control.
    let other = field(&times, n, |_, x| 0.5 * x);
    let (g, gt, gx) = &tests[1];
    let r = weak_form_residual(&u, &other, &p, g, gt, gx).unwrap();
    assert!(r.abs() > 1e-2, "{r}");
}

#[test]
fn mass_changes_by_boundary_inflow() {
    let p = params();
    let n = 200;
    let dt = 0.25 / (n * n) as f64;
    let times = uniform_times(0.1, 50);
    let h = field(&times, n, |t, x| 0.4 * (1.0 - x) - 0.3 * x * (1.0 + t));
    let gamma = sample(&|x| smooth_step(x, 0.3, 0.6, 0.5, 0.1), n);
    let u = solve_wasep(&gamma, &h, &p, 0.1, dt).unwrap();
    let inflow = |rho: f64, d: f64, a: f64, m: f64| {
        (rho * (1.0 - a) * m.exp() - a * (1.0 - rho) * (-m).exp()) / d
    };
    let rate: Vec<f64> = (0..u.len())
        .map(|k| {
            let (uf, hf) = (&u.frames()[k], &h.frames()[k]);
            inflow(p.alpha(), p.a(), uf.first(), hf.first())
                + inflow(p.beta(), p.b(), uf.last(), hf.last())
        })
        .collect();
    let ts = u.times();
    let total: f64 = (1..ts.len()).map(|k| 0.5 * (ts[k] - ts[k - 1]) * (rate[k] + rate[k - 1])).sum();
    let mass = integrate(u.last()) - integrate(u.first());
    assert!((mass - total).abs() < 1e-3, "{mass} {total}");
    assert!(mass.abs() > 1e-2);
}

#[test]
fn heat_flow_decays_at_the_first_eigenvalue() {
    let p = params();
    let g = grid(200);
    let basis = SpectralBasis::new(&p, g, 40).unwrap();
    let lambda1 = basis.eigenvalues()[0];
    let gamma = sample(&|x| 0.3 + 0.4 * x * x, 200);
    let t_end = (1e6f64).ln() / lambda1 + 3.0;
    let times = [0.0, t_end - 1.0, t_end];
    let sol = solve_heat_robin_with(&gamma, &basis, &times).unwrap().path;
    let rho = stationary_profile(&p, g);
    let d: Vec<f64> = sol.frames().iter().map(|f| f.dist_inf(rho.profile()).unwrap()).collect();
    assert!(d[2] < 1e-6, "{d:?}");
    assert!((d[2] / d[1] - (-lambda1).exp()).abs() < 1e-6 * (-lambda1).exp() + 1e-9, "{d:?}");
}

#[test]
fn homogeneous_flow_examples() {
    let p = params();
    let g = grid(200);
    let zero = solve_heat_homogeneous(&Profile::zeros(g), &p, &[0.0, 0.5], 30).unwrap();
    assert_eq!(zero.last().max_abs(), 0.0);

    let half = solve_heat_homogeneous(&Profile::constant(g, 0.5), &p, &[0.0, 0.05, 0.2, 1.0], 60).unwrap();
    for f in &half.frames()[1..] {
        assert!(f.max() < 0.5 - 1e-3 && f.min() > -1e-9);
    }
    assert!(half.frames().windows(2).all(|w| w[1].max() <= w[0].max() + 1e-12));
}

#[test]
fn heat_bounds_hold_for_a_mollified_indicator() {
    let p = params();
    let n = 400;
    let gamma = sample(&|x| smooth_step(x, 0.0, 1.0, 0.3, 0.02) * smooth_step(x, 1.0, 0.0, 0.6, 0.02), n);
    let times = uniform_times(0.5, 25);
    let sol = solve_heat_robin(&gamma, &p, &times[..], 80).unwrap().path;
    let tail = Path::new(times[1..].to_vec(), sol.frames()[1..].to_vec()).unwrap();
    assert!(max_principle_violation(&tail, gamma.profile(), &p) < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn maximum_principles_hold_framewise(
        c in prop::collection::vec(-0.15f64..0.15, 4),
        mean in 0.2f64..0.8,
    ) {
        let p = params();
        let n = 100;
        let g = grid(n);
        let wave = |x: f64| -> f64 {
            c.iter().enumerate().map(|(k, ck)| ck * ((k + 1) as f64 * PI * x).cos()).sum()
        };
        let gamma = DensityProfile::from_fn(g, |x| (mean + wave(x)).clamp(0.0, 1.0)).unwrap();
        let times = uniform_times(0.3, 15);

        let spec = solve_heat_robin(&gamma, &p, &times, 60).unwrap().path;
        prop_assert!(max_principle_violation(&spec, gamma.profile(), &p) < 1e-6);

        let dt = 0.25 / (n * n) as f64;
        let fv = solve_wasep(&gamma, &zero_control(g, &times).unwrap(), &p, 0.3, dt).unwrap();
        prop_assert!(max_principle_violation(&fv, gamma.profile(), &p) < 1e-9);

        let phi = Profile::from_fn(g, wave);
        let hom = solve_heat_homogeneous(&phi, &p, &times, 60).unwrap();
        let (lo, hi) = (phi.min().min(0.0), phi.max().max(0.0));
        for f in &hom.frames()[1..] {
            prop_assert!(f.min() >= lo - 1e-6 && f.max() <= hi + 1e-6);
        }
    }

    #[test]
    fn effective_parameters_stay_admissible(
        f0 in 0.001f64..0.999, f1 in 0.001f64..0.999,
        alpha in 0.01f64..0.5, gap in 0.0f64..0.49,
        a in 0.05f64..5.0, b in 0.05f64..5.0,
    ) {
        let p = Params::new(alpha, alpha + gap, a, b).unwrap();
        let f = Profile::from_fn(grid(10), |x| f0 + (f1 - f0) * x);
        let e = effective_boundary(&f, &p).unwrap();
        prop_assert!(e.alpha > 0.0 && e.alpha < 1.0 && e.beta > 0.0 && e.beta < 1.0);
        prop_assert!(e.a > 0.0 && e.b > 0.0);
    }
}

#[test]
fn effective_parameters_at_half_density() {
    let p = Params::new(0.3, 0.6, 1.7, 0.4).unwrap();
    let f = Profile::from_fn(grid(20), |x| 0.5 + 0.2 * x);
    let e = effective_boundary(&f, &p).unwrap();
    assert!((e.alpha - 0.7).abs() < 1e-15 && (e.a - 1.7).abs() < 1e-15);
    assert!(effective_boundary(&Profile::from_fn(grid(20), |x| x), &p).is_err());
    assert!(drift_field(&Profile::constant(grid(20), 0.4)).is_err());
}

#[test]
fn adjoint_path_starts_at_gamma_and_meets_boundary_conditions() {
    let p = params();
    let n = 400;
    let gamma = sample(&|x| 0.5 + 0.2 * (PI * x).sin(), n);
    let opts = AdjointOptions {
        times: Some(vec![0.0, 1e-3, 0.01, 0.05, 0.2, 1.0]),
        ..Default::default()
    };
    let adj = adjoint_path(&gamma, &p, &opts).unwrap();
    assert!(adj.v_path.first().dist_inf(gamma.profile()).unwrap() < 1e-10);
    for k in 1..adj.v_path.len() {
        let (v, dv) = (&adj.v_path.frames()[k], &adj.grad_v.frames()[k]);
        let (f, df) = (&adj.f_path.frames()[k], &adj.grad_f.frames()[k]);
        let l = adjoint_boundary_residual(v.first(), dv.first(), f.first(), df.first(), true, &p);
        let r = adjoint_boundary_residual(v.last(), dv.last(), f.last(), df.last(), false, &p);
        assert!(l.abs() < 1e-3 && r.abs() < 1e-3, "t={} {l} {r}", adj.v_path.times()[k]);
    }
    assert!(adj.warnings.is_empty());
}

#[test]
fn momentum_evolves_autonomously() {
    let p = params();
    let n = 400;
    let gamma = sample(&|x| 0.35 + 0.3 * (-((x - 0.4) / 0.15).powi(2)).exp(), n);
    let times = vec![0.0, 0.01, 0.05, 0.2, 0.5];
    let basis = SpectralBasis::new(&p, gamma.grid(), 60).unwrap();
    let opts = AdjointOptions { times: Some(times.clone()), ..Default::default() };
    let adj = adjoint_path_with(&gamma, &p, &basis, &opts).unwrap();

    let f0 = DensityProfile::new(adj.f_path.first().clone()).unwrap();
    let heat = solve_heat_robin_with(&f0, &basis, &times).unwrap().path;
    for (a, b) in adj.f_path.frames().iter().zip(heat.frames()) {
        assert!(a.dist_inf(b).unwrap() < 1e-12);
    }
    for k in 1..times.len() {
        let v = DensityProfile::new(adj.v_path.frames()[k].clone()).unwrap();
        let fv = solve_el(&v, &p, 1e-10, 20_000).unwrap().f;
        let d = fv.dist_inf(&adj.f_path.frames()[k]).unwrap();
        assert!(d < 1e-3, "t={} {d}", times[k]);
    }
}

#[test]
fn adjoint_relaxes_uniformly_over_a_batch() {
    let p = params();
    let n = 400;
    let names = ["const_0.3", "ramp_down", "ramp_steep", "bump_sin", "dip_cos", "step_pair"];
    let profiles: Vec<DensityProfile> = battery()
        .into_iter()
        .filter(|(k, _)| names.contains(k))
        .map(|(_, f)| sample(&*f, n))
        .collect();
    assert_eq!(profiles.len(), 6);
    let basis = SpectralBasis::new(&p, grid(n), 60).unwrap();

    let mut t1 = 0.0f64;
    for gamma in &profiles {
        let adj = adjoint_path_with(gamma, &p, &basis, &AdjointOptions::default()).unwrap();
        t1 = t1.max(adj.relax_time.unwrap());
    }
    assert!(t1.is_finite() && t1 < 20.0);

    let mut times = vec![0.0];
    times.extend((0..=60).map(|k| 0.5 + (t1 - 0.5) * k as f64 / 60.0));
    let opts = AdjointOptions { times: Some(times), ..Default::default() };
    for gamma in &profiles {
        let adj = adjoint_path_with(gamma, &p, &basis, &opts).unwrap();
        let d = adj.distance_to_stationary(&p);
        assert!(d[1..].windows(2).all(|w| w[1] < w[0] || w[1] < 1e-12), "{d:?}");
        assert!(*d.last().unwrap() < 1e-3);
    }
}

#[test]
fn momentum_stays_above_its_initial_gradient_floor() {
    let p = params();
    let (lo, _) = p.derivative_bounds();
    let basis = SpectralBasis::new(&p, grid(400), 60).unwrap();
    let opts = AdjointOptions { times: Some(uniform_times(2.0, 40)), ..Default::default() };
    for (name, f) in battery() {
        let gamma = sample(&*f, 400);
        let adj = adjoint_path_with(&gamma, &p, &basis, &opts).unwrap();
        let df0 = adj.grad_f.first();
        let c1 = df0.min().min(1.0 / df0.max());
        for (fr, df) in adj.f_path.frames().iter().zip(adj.grad_f.frames()) {
            assert!(fr.min() >= p.alpha() + p.a() * lo - 1e-6, "{name}");
            assert!(fr.max() <= p.beta() - p.b() * lo + 1e-6, "{name}");
            assert!(df.min() >= 0.99 * c1 && df.max() <= 1.01 / c1, "{name}");
        }
    }
}

#[test]
fn heat_flow_depends_continuously_on_initial_density() {
    let p = params();
    let n = 400;
    let times = uniform_times(0.5, 10);
    let sharp = sample(&|x| if x < 0.5 { 0.2 } else { 0.7 }, n);
    let target = solve_heat_robin(&sharp, &p, &times, 60).unwrap().path;
    let mut dists = Vec::new();
    for w in [0.1, 0.05, 0.025, 0.0125] {
        let gamma = sample(&|x| smooth_step(x, 0.2, 0.7, 0.5, w), n);
        let sol = solve_heat_robin(&gamma, &p, &times, 60).unwrap().path;
        let d = sol.frames()[1..]
            .iter()
            .zip(&target.frames()[1..])
            .map(|(a, b)| a.dist_inf(b).unwrap())
            .fold(0.0, f64::max);
        dists.push(d);
    }
    assert!(dists.windows(2).all(|d| d[1] < d[0]), "{dists:?}");
}

#[test]
fn wasep_rejects_unstable_steps_and_bad_horizons() {
    let p = params();
    let g = grid(50);
    let gamma = stationary_profile(&p, g);
    let zero = zero_control(g, &[0.0, 1.0]).unwrap();
    assert!(matches!(solve_wasep(&gamma, &zero, &p, 0.1, 1e-3), Err(MftError::Stability(_))));
    assert!(solve_wasep(&gamma, &zero, &p, 0.0, 1e-5).is_err());
}

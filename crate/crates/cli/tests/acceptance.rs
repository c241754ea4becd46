//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any of them fails.

use std::f64::consts::PI;
use std::time::Instant;

use mft_core::dynamics::{
    adjoint_path_with, max_principle_violation, solve_heat_robin, solve_wasep, uniform_times,
    weak_form_residual, zero_control, AdjointOptions,
};
use mft_core::euler_lagrange::{el_residual, solve_el};
use mft_core::numerics::{
    derivative, inner_product, DensityProfile, Grid, Params, Path, Profile,
};
use mft_core::quasipotential::{
    b_fn, c_fn, gamma_field, p_fn, q_fn, s0, s0_stationary, s0_stationary_exact,
};
use mft_core::rate::{verify_v_equals_s, VerifyOptions};
use mft_core::spectral::{apply_green, hr_norm, l2, semigroup_apply, SpectralBasis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssep_lattice::{particle_number_test, stationary_check};

type Outcome = Result<String, String>;

fn driven() -> Params {
    Params::new(0.2, 0.8, 1.0, 1.0).unwrap()
}

fn grid(n: usize) -> Grid {
    Grid::new(n).unwrap()
}

fn smooth_step(x: f64, lo: f64, hi: f64, c: f64, w: f64) -> f64 {
    lo + (hi - lo) * 0.5 * (1.0 + ((x - c) / w).tanh())
}

type Shape = Box<dyn Fn(f64) -> f64>;

fn battery() -> Vec<(&'static str, Shape)> {
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
        ("step_pair", Box::new(|x| smooth_step(x, 0.3, 0.6, 0.3, 0.05) + smooth_step(x, 0.0, -0.2, 0.7, 0.05))),
    ]
}

fn sample(f: &dyn Fn(f64) -> f64, n: usize) -> DensityProfile {
    DensityProfile::from_fn(grid(n), f).unwrap()
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn stationary_value() -> Outcome {
    let mut worst: f64 = 0.0;
    for (a, b) in [(1.0, 1.0), (0.5, 2.0), (3.0, 0.2)] {
        for (al, be) in [(0.2, 0.8), (0.3, 0.4)] {
            let p = Params::new(al, be, a, b).unwrap();
            let t = Instant::now();
            let got = s0_stationary(&p, grid(400)).map_err(|e| e.to_string())?;
            let k = 1.0 + a + b;
            let want = -k * k.ln();
            let rel = ((got - want) / want).abs();
            worst = worst.max(rel);
            check(rel < 1e-6, || format!("A={a} B={b} alpha={al} beta={be}: {got} vs {want}"))?;
            check((s0_stationary_exact(&p) - want).abs() < 1e-15, || "closed form disagrees".into())?;
            check(t.elapsed().as_secs_f64() < 1.0, || "slower than 1 s".into())?;
        }
    }
    Ok(format!("worst relative error {worst:.1e}"))
}

fn euler_lagrange() -> Outcome {
    let p = driven();
    let (lo, hi) = p.derivative_bounds();
    let mut worst_res: f64 = 0.0;
    let mut worst_order = f64::INFINITY;
    for (name, f) in battery() {
        let mut res = Vec::new();
        for n in [100, 200, 400] {
            let gamma = sample(&*f, n);
            let sol = solve_el(&gamma, &p, 1e-10, 20_000).map_err(|e| format!("{name}: {e}"))?;
            check(sol.residual_c1 < 1e-10, || format!("{name}: C1 residual {}", sol.residual_c1))?;
            let d = derivative(&sol.f);
            check(d.min() >= lo * (1.0 - 1e-6) && d.max() <= hi * (1.0 + 1e-6), || {
                format!("{name}: gradient [{}, {}] outside [{lo}, {hi}]", d.min(), d.max())
            })?;
            res.push(el_residual(&sol.f, &gamma).unwrap());
        }
        check(res[2] < 1e-4, || format!("{name}: residual {} at n=400", res[2]))?;
        let orders = [(res[0] / res[1]).log2(), (res[1] / res[2]).log2()];
        check(orders.iter().all(|o| *o > 1.6), || format!("{name}: orders {orders:?}"))?;
        worst_res = worst_res.max(res[2]);
        worst_order = worst_order.min(orders[0].min(orders[1]));
    }
    Ok(format!("12 profiles, max residual {worst_res:.2e} at n=400, min observed order {worst_order:.2}"))
}

fn hamilton_jacobi() -> Outcome {
    let p = driven();
    let mut worst: f64 = 0.0;
    for (name, f) in battery().into_iter().filter(|(n, _)| *n != "ramp_steep") {
        let res: Vec<f64> = [100, 200, 400]
            .iter()
            .map(|&n| s0(&sample(&*f, n), &p).map(|r| r.hj_residual.unwrap_or(f64::INFINITY)))
            .collect::<Result<_, _>>()
            .map_err(|e| format!("{name}: {e}"))?;
        check(res[2] < 1e-3, || format!("{name}: {res:?}"))?;
        if res[0] > 1e-9 {
            check(res[0] / res[2] > 10.0, || format!("{name}: no second-order decay {res:?}"))?;
        }
        worst = worst.max(res[2]);
    }
    Ok(format!("11 smooth profiles, max |H| {worst:.2e} at n=400"))
}

fn derivative_identity() -> Outcome {
    let p = driven();
    let n = 400;
    let gamma = sample(&|x| 0.5 + 0.2 * (PI * x).sin(), n);
    let r = s0(&gamma, &p).map_err(|e| e.to_string())?;
    let field = gamma_field(&gamma, &r.f).map_err(|e| e.to_string())?;
    let eps = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let (a, k, c) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..3.0), rng.gen_range(-1.0..1.0));
        let delta = Profile::from_fn(grid(n), |x| a * (k * PI * x).cos() + c * x * x + 0.1);
        let shifted = |s: f64| DensityProfile::new(gamma.profile().axpy(s, &delta).unwrap()).unwrap();
        let fd = (s0(&shifted(eps), &p).unwrap().s0_gamma - s0(&shifted(-eps), &p).unwrap().s0_gamma) / (2.0 * eps);
        let ip = inner_product(&field, &delta).unwrap();
        worst = worst.max((fd - ip).abs());
    }
    check(worst < 1e-4, || format!("max |fd - <Gamma, delta>| = {worst:.2e}"))?;
    Ok(format!("5 directions, max deviation {worst:.2e}"))
}

fn v_equals_s() -> Outcome {
    let t = Instant::now();
    let p = driven();
    let gamma = sample(&|x| 0.5 + 0.2 * (PI * x).sin(), 400);
    let mut gaps = Vec::new();
    for eps in [1e-1, 1e-2, 1e-3] {
        let opts = VerifyOptions {
            eps_relax: eps,
            ..Default::default()
        };
        gaps.push(verify_v_equals_s(&gamma, &p, &opts).map_err(|e| e.to_string())?.gap);
    }
    check(gaps[2] < 0.02, || format!("gap {} at eps_relax 1e-3", gaps[2]))?;
    check(gaps[0] > gaps[1] && gaps[1] > gaps[2], || format!("gaps not monotone {gaps:?}"))?;
    let secs = t.elapsed().as_secs_f64();
    check(secs < 60.0, || format!("took {secs:.0} s"))?;
    Ok(format!("relative gaps {:.2e}, {:.2e}, {:.2e} in {secs:.1} s", gaps[0], gaps[1], gaps[2]))
}

fn adjoint_relaxation() -> Outcome {
    let p = driven();
    let n = 400;
    let names = ["const_0.3", "ramp_down", "ramp_steep", "bump_sin", "dip_cos", "step_pair"];
    let profiles: Vec<DensityProfile> = battery()
        .into_iter()
        .filter(|(k, _)| names.contains(k))
        .map(|(_, f)| sample(&*f, n))
        .collect();
    let basis = SpectralBasis::new(&p, grid(n), 60).map_err(|e| e.to_string())?;
    let mut t1: f64 = 0.0;
    for gamma in &profiles {
        let adj = adjoint_path_with(gamma, &p, &basis, &AdjointOptions::default()).map_err(|e| e.to_string())?;
        t1 = t1.max(adj.relax_time.ok_or("no relaxation time")?);
    }
    let mut times = vec![0.0];
    times.extend((0..=60).map(|k| 0.5 + (t1 - 0.5) * k as f64 / 60.0));
    let opts = AdjointOptions {
        times: Some(times),
        ..Default::default()
    };
    for (gamma, name) in profiles.iter().zip(names) {
        let d = adjoint_path_with(gamma, &p, &basis, &opts).map_err(|e| e.to_string())?.distance_to_stationary(&p);
        check(d[1..].windows(2).all(|w| w[1] < w[0] || w[1] < 1e-12), || format!("{name}: not monotone past 0.5"))?;
        check(*d.last().unwrap() < 1e-3, || format!("{name}: {} at T1", d.last().unwrap()))?;
    }
    Ok(format!("T1 = {t1:.3}"))
}

/// Residual of `tan θ (θ²AB - 1) = (A+B)θ`, scaled, written out here.
fn secular(p: &Params, lambda: f64) -> f64 {
    let t = lambda.sqrt();
    let (a, b) = (p.a(), p.b());
    let lhs = t.sin() * (t * t * a * b - 1.0);
    let rhs = (a + b) * t * t.cos();
    (lhs - rhs).abs() / (t * t * a * b + 1.0 + (a + b) * t)
}

fn spectral_suite() -> Outcome {
    let t = Instant::now();
    let p = driven();
    let g = grid(400);
    let basis = SpectralBasis::new(&p, g, 40).map_err(|e| e.to_string())?;
    let res = basis.eigenvalues().iter().map(|&l| secular(&p, l)).fold(0.0, f64::max);
    let lib = basis.residuals().iter().fold(0.0f64, |a, r| a.max(r.abs()));
    check(res < 1e-10 && lib < 1e-10, || format!("residuals {res:.1e}, {lib:.1e}"))?;

    let gram = basis.gram_matrix();
    let mut dev: f64 = 0.0;
    for (i, row) in gram.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            dev = dev.max((v - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    check(dev < 1e-6, || format!("Gram deviation {dev:.1e}"))?;

    let mut green: f64 = 0.0;
    for (f, &l) in basis.eigenfunctions().iter().zip(basis.eigenvalues()).take(6) {
        green = green.max(apply_green(&p, f).dist_inf(&f.scale(1.0 / l)).unwrap());
    }
    check(green < 1e-4, || format!("Green inverse error {green:.1e}"))?;

    let coarse = SpectralBasis::new(&p, grid(200), 40).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..100 {
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let time = rng.gen_range(1e-4..2.0);
        let f = Profile::from_fn(coarse.grid(), |x| c[0] + c[1] * (PI * x).cos() + c[2] * (3.0 * x).sin() + c[3] * x * x);
        let pt = semigroup_apply(&f, time, &coarse).unwrap();
        check(l2(&pt) <= l2(&f) * (1.0 + 1e-9) + 1e-12, || format!("contraction fails on input {trial}"))?;
        let n = hr_norm(&f, &p, &coarse).unwrap();
        check(f.max_abs().powi(2) <= 2.0 * p.a().max(1.0) * n.value() * (1.0 + 1e-9), || {
            format!("sup bound fails on input {trial}")
        })?;
    }
    let secs = t.elapsed().as_secs_f64();
    check(secs < 10.0, || format!("took {secs:.1} s"))?;
    Ok(format!("residual {res:.1e}, Gram {dev:.1e}, Green {green:.1e}, 100 random inputs ok"))
}

fn pde_cross_validation() -> Outcome {
    let p = driven();
    let n = 400;
    let dt = 0.25 / (n * n) as f64;
    let times = [0.0, 0.01, 0.03, 0.06, 0.1];
    let zero = zero_control(grid(n), &times).unwrap();
    let mut worst: f64 = 0.0;
    for f in [
        Box::new(|x: f64| 0.5 + 0.2 * (PI * x).sin()) as Shape,
        Box::new(|x| smooth_step(x, 0.2, 0.7, 0.5, 0.05)),
    ] {
        let gamma = sample(&*f, n);
        let spec = solve_heat_robin(&gamma, &p, &times, 60).map_err(|e| e.to_string())?.path;
        let fv = solve_wasep(&gamma, &zero, &p, 0.1, dt).map_err(|e| e.to_string())?;
        for k in 1..times.len() {
            worst = worst.max(spec.frames()[k].dist_inf(&fv.frames()[k]).unwrap());
        }
    }
    check(worst < 1e-3, || format!("spectral vs finite volume {worst:.1e}"))?;

    let m = 200;
    let dt = 0.25 / (m * m) as f64;
    let wt = uniform_times(0.2, 40);
    let frames = wt
        .iter()
        .map(|&t| Profile::from_fn(grid(m), |x| 0.3 * (PI * x).sin() * t.cos() + 0.2 * x - 0.1))
        .collect();
    let h = Path::new(wt.clone(), frames).unwrap();
    let u = solve_wasep(&sample(&|x| 0.5 + 0.2 * (PI * x).sin(), m), &h, &p, 0.2, dt).map_err(|e| e.to_string())?;
    let weak = weak_form_residual(&u, &h, &p, &|_: f64, x: f64| (PI * x).cos(), &|_: f64, _: f64| 0.0, &|_: f64, x: f64| -PI * (PI * x).sin())
        .map_err(|e| e.to_string())?
        .abs();
    check(weak < 1e-3, || format!("weak-form residual {weak:.1e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mt = uniform_times(0.3, 15);
    let k = 100;
    for trial in 0..20 {
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.15..0.15)).collect();
        let mean = rng.gen_range(0.2..0.8);
        let gamma = DensityProfile::from_fn(grid(k), |x| {
            (mean + c.iter().enumerate().map(|(j, cj)| cj * ((j + 1) as f64 * PI * x).cos()).sum::<f64>()).clamp(0.0, 1.0)
        })
        .unwrap();
        let spec = solve_heat_robin(&gamma, &p, &mt, 60).unwrap().path;
        let fv = solve_wasep(&gamma, &zero_control(grid(k), &mt).unwrap(), &p, 0.3, 0.25 / (k * k) as f64).unwrap();
        let v = max_principle_violation(&spec, gamma.profile(), &p).max(max_principle_violation(&fv, gamma.profile(), &p));
        check(v < 1e-6, || format!("maximum principle violated by {v:.1e} on input {trial}"))?;
    }
    Ok(format!("L-inf {worst:.1e}, weak form {weak:.1e}, 20 random inputs within bounds"))
}

fn microscopic() -> Outcome {
    let t = Instant::now();
    let p = driven();
    let flat = |c: f64| DensityProfile::from_fn(grid(400), move |_| c).unwrap();
    let st = stationary_check(&p, 200, &flat(0.5), 3.0, 2.0, 0.01, 10, 32, 42).map_err(|e| e.to_string())?;
    check(st.linf < 0.02 && st.max_z < 3.0, || {
        format!("stationary profile off by {:.4} ({:.2} standard errors)", st.linf, st.max_z)
    })?;
    let eq = Params::new(0.5, 0.5, 1.0, 1.0).unwrap();
    let chi = particle_number_test(&eq, 200, &flat(0.1), 5.0, 2.5, 8, 32, 42).map_err(|e| e.to_string())?;
    check(chi.passes(0.01), || format!("chi-square p = {:.4}", chi.p_value))?;
    let secs = t.elapsed().as_secs_f64();
    check(secs < 300.0, || format!("took {secs:.0} s"))?;
    Ok(format!(
        "profile L-inf {:.4} (max z {:.2}); chi-square p = {:.3} on {} samples, {} cells; {secs:.0} s",
        st.linf,
        st.max_z,
        chi.p_value,
        chi.samples,
        chi.cells.len()
    ))
}

fn cost_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let rho = rng.gen_range(0.001..0.999);
        let d = rng.gen_range(0.01..10.0);
        let a = rng.gen_range(0.0..=1.0);
        let m = rng.gen_range(-5.0..5.0);
        let (b, pv, c, q) = (b_fn(rho, d, a, m), p_fn(rho, d, a, m), c_fn(rho, d, a, m), q_fn(rho, d, a, m));
        let p0 = p_fn(rho, d, a, 0.0);
        let scale = 1.0 + b.abs() + (m * pv).abs();
        let e = ((c - (m * pv - b)).abs().max((q - (b - m * p0)).abs())) / scale;
        worst = worst.max(e);
        check(e <= 1e-14, || format!("identity off by {e:.1e} at ({rho}, {d}, {a}, {m})"))?;
        check(q >= 0.0, || format!("q = {q} < 0 at ({rho}, {d}, {a}, {m})"))?;
    }
    Ok(format!("1000 points, max scaled error {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("exact stationary value", stationary_value),
        ("Euler-Lagrange fixed point", euler_lagrange),
        ("Hamilton-Jacobi identity", hamilton_jacobi),
        ("derivative identity", derivative_identity),
        ("V = S sandwich", v_equals_s),
        ("adjoint relaxation", adjoint_relaxation),
        ("spectral suite", spectral_suite),
        ("PDE cross-validation", pde_cross_validation),
        ("microscopic validation", microscopic),
        ("cost-function identities", cost_identities),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = (k + 1).to_string();
        if filter.as_deref().is_some_and(|f| f != id) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail} [{secs:.1} s]"),
            Err(why) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {why} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

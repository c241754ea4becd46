use mft_core::dynamics::{adjoint_path, effective_boundary, AdjointOptions};
use mft_core::euler_lagrange::{el_residual, kmap_full, solve_el};
use mft_core::numerics::{fmt_real, write_path_csv, Grid};
use mft_core::quasipotential::{gamma_field, s0_stationary_exact, s0_with, EL_MAX_ITER};
use mft_core::rate::{rate_from_control_with_gradient, verify_v_equals_s, VerifyOptions};
use mft_core::spectral::SpectralBasis;
use serde::Serialize;
use ssep_lattice::{bin_centers, hydrodynamic_check, run_replicas, SimOptions};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Artifacts;

fn row(values: &[f64]) -> String {
    let mut s = values.iter().map(|v| fmt_real(*v)).collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

fn table(header: &str, rows: impl Iterator<Item = String>) -> Vec<u8> {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
    }
    out.into_bytes()
}

fn grid(cfg: &RunConfig) -> Result<Grid, CliError> {
    Grid::new(cfg.grid_n).map_err(|e| CliError::Validation(e.to_string()))
}

#[derive(Serialize)]
struct SpectrumSummary {
    count: usize,
    max_residual: f64,
    growth_c0: f64,
    growth_c1: f64,
    sup_constant: f64,
    gram_max_deviation: f64,
}

pub fn spectrum(cfg: &RunConfig, out: &mut Artifacts) -> Result<String, CliError> {
    let basis = SpectralBasis::new(&cfg.params, grid(cfg)?, cfg.modes_k)?;
    let residuals = basis.residuals();
    let rows = basis
        .thetas()
        .iter()
        .zip(basis.eigenvalues())
        .zip(&residuals)
        .enumerate()
        .map(|(j, ((th, lam), res))| {
            let j1 = (j + 1) as f64;
            row(&[j1, *th, *lam, *res, lam / (j1 * j1)])
        });
    out.csv("spectrum.csv", cfg, &table("j,theta,lambda,residual,lambda_over_j2", rows))?;

    let gram = basis.gram_matrix();
    let mut deviation: f64 = 0.0;
    for (i, r) in gram.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            let id = if i == j { 1.0 } else { 0.0 };
            deviation = deviation.max((v - id).abs());
        }
    }
    let growth = basis.growth_constants();
    let summary = SpectrumSummary {
        count: basis.count(),
        max_residual: residuals.iter().fold(0.0, |a, r| a.max(r.abs())),
        growth_c0: growth.c0,
        growth_c1: growth.c1,
        sup_constant: basis.sup_constant(),
        gram_max_deviation: deviation,
    };
    out.json("spectrum.json", cfg, &summary)?;
    Ok(format!(
        "{} eigenvalues, lambda_1 = {:.6}, max residual {:.2e}",
        summary.count,
        basis.eigenvalues()[0],
        summary.max_residual
    ))
}

#[derive(Serialize)]
struct ElSummary {
    iterations: usize,
    residual_c1: f64,
    el_residual: f64,
    p: f64,
    q: f64,
    gradient_min: f64,
    gradient_max: f64,
    history: Vec<f64>,
}

pub fn solve_el_cmd(cfg: &RunConfig, out: &mut Artifacts) -> Result<String, CliError> {
    let gamma = cfg.load_gamma()?;
    let el = solve_el(&gamma, &cfg.params, cfg.tol("el_tol"), EL_MAX_ITER)?;
    let image = kmap_full(&el.f, &gamma, &cfg.params)?;
    let g = gamma.grid();
    let rows = (0..g.len()).map(|i| {
        row(&[g.node(i), gamma.values()[i], el.f.values()[i], image.gradient.values()[i]])
    });
    out.csv("el.csv", cfg, &table("x,gamma,F,dF", rows))?;
    let summary = ElSummary {
        iterations: el.iterations,
        residual_c1: el.residual_c1,
        el_residual: el_residual(&el.f, &gamma)?,
        p: el.p,
        q: el.q,
        gradient_min: image.gradient.min(),
        gradient_max: image.gradient.max(),
        history: el.history.clone(),
    };
    out.json("el.json", cfg, &summary)?;
    Ok(format!(
        "converged in {} iterations, C1 residual {:.2e}",
        el.iterations, el.residual_c1
    ))
}

#[derive(Serialize)]
struct QpSummary {
    #[serde(rename = "S")]
    s: f64,
    s0_gamma: f64,
    s0_rho: f64,
    s0_rho_exact: f64,
    hj_residual: Option<f64>,
    iterations: usize,
    residual_c1: f64,
}

pub fn quasipotential(cfg: &RunConfig, out: &mut Artifacts) -> Result<String, CliError> {
    let gamma = cfg.load_gamma()?;
    let report = s0_with(&gamma, &cfg.params, cfg.tol("el_tol"), EL_MAX_ITER)?;
    let g = gamma.grid();
    let big_gamma = gamma_field(&gamma, &report.f).ok();
    let rows = (0..g.len()).map(|i| {
        let field = big_gamma.as_ref().map_or(f64::NAN, |h| h.values()[i]);
        row(&[g.node(i), gamma.values()[i], report.f.values()[i], field])
    });
    out.csv("quasipotential.csv", cfg, &table("x,gamma,F,Gamma", rows))?;
    let summary = QpSummary {
        s: report.s,
        s0_gamma: report.s0_gamma,
        s0_rho: report.s0_rho,
        s0_rho_exact: s0_stationary_exact(&cfg.params),
        hj_residual: report.hj_residual,
        iterations: report.el.iterations,
        residual_c1: report.el.residual_c1,
    };
    out.json("quasipotential.json", cfg, &summary)?;
    Ok(format!("S = {:.10}", report.s))
}

#[derive(Serialize)]
struct PathSummary {
    #[serde(rename = "T1")]
    t1: Option<f64>,
    frames: usize,
    v_min: f64,
    v_max: f64,
    rate: mft_core::rate::RateBreakdown,
    effective_start: mft_core::dynamics::EffectiveBoundary,
    effective_end: mft_core::dynamics::EffectiveBoundary,
    warnings: Vec<String>,
}

pub fn optimal_path(cfg: &RunConfig, out: &mut Artifacts) -> Result<String, CliError> {
    let gamma = cfg.load_gamma()?;
    let opts = AdjointOptions {
        modes: cfg.modes_k,
        eps_relax: cfg.tol("eps_relax"),
        t_max: cfg.tol("t_max"),
        ..Default::default()
    };
    let adj = adjoint_path(&gamma, &cfg.params, &opts)?;
    let u = adj.v_path.reversed();
    let h = adj.control()?.reversed();
    let grad_h = adj.control_gradient()?.reversed();
    let rate = rate_from_control_with_gradient(&u, &h, &grad_h, &cfg.params)?;

    let mut buf = Vec::new();
    write_path_csv(&u, &mut buf)?;
    out.csv("optimal_path.csv", cfg, &buf)?;
    let mut buf = Vec::new();
    write_path_csv(&h, &mut buf)?;
    out.csv("control.csv", cfg, &buf)?;

    let summary = PathSummary {
        t1: adj.relax_time,
        frames: u.len(),
        v_min: adj.v_min,
        v_max: adj.v_max,
        effective_start: effective_boundary(adj.f_path.last(), &cfg.params)?,
        effective_end: effective_boundary(adj.f_path.first(), &cfg.params)?,
        warnings: adj.warnings.clone(),
        rate,
    };
    out.json("optimal_path.json", cfg, &summary)?;
    Ok(format!(
        "{} frames over T1 = {}, path cost {:.8}",
        summary.frames,
        summary.t1.map_or("none".to_string(), |t| format!("{t:.4}")),
        summary.rate.total
    ))
}

pub fn verify_vs(cfg: &RunConfig, out: &mut Artifacts) -> Result<String, CliError> {
    let gamma = cfg.load_gamma()?;
    let opts = VerifyOptions {
        modes: cfg.modes_k,
        eps_relax: cfg.tol("eps_relax"),
        t_max: cfg.tol("t_max"),
        ..Default::default()
    };
    let report = verify_v_equals_s(&gamma, &cfg.params, &opts)?;
    out.json("verify.json", cfg, &report)?;
    Ok(format!(
        "S = {:.8}, upper = {:.8}, relative gap {:.3e}",
        report.s, report.upper, report.gap
    ))
}

#[derive(Serialize)]
struct SimSummary {
    prng: &'static str,
    seeds: Vec<u64>,
    event_count: Vec<u64>,
    rate_checks: Vec<u64>,
    final_particles: Vec<usize>,
}

pub fn simulate(cfg: &RunConfig, out: &mut Artifacts) -> Result<String, CliError> {
    let gamma = cfg.load_gamma()?;
    let analysis = Grid::new(cfg.bins.max(2).min(cfg.n - 1)).map_err(|e| CliError::Validation(e.to_string()))?;
    let opts = SimOptions::uniform(cfg.n, cfg.t, cfg.sample_dt, analysis, cfg.bins)?;
    let runs = run_replicas(&cfg.params, &gamma, &opts, cfg.replicas, cfg.seed)?;

    let centers = bin_centers(cfg.bins);
    let r = runs.len() as f64;
    let mut body = String::from("t,bin,x,mean,stderr\n");
    for (k, t) in runs[0].times.iter().enumerate() {
        for (b, x) in centers.iter().enumerate() {
            let mean = runs.iter().map(|run| run.bins[k][b]).sum::<f64>() / r;
            let se = if runs.len() > 1 {
                let ss: f64 = runs.iter().map(|run| (run.bins[k][b] - mean).powi(2)).sum();
                (ss / (r - 1.0) / r).sqrt()
            } else {
                0.0
            };
            body.push_str(&format!("{},{b},{},{},{}\n", fmt_real(*t), fmt_real(*x), fmt_real(mean), fmt_real(se)));
        }
    }
    out.csv("simulate.csv", cfg, body.as_bytes())?;
    let summary = SimSummary {
        prng: "ChaCha8",
        seeds: runs.iter().map(|r| r.seed).collect(),
        event_count: runs.iter().map(|r| r.event_count).collect(),
        rate_checks: runs.iter().map(|r| r.rate_checks).collect(),
        final_particles: runs.iter().map(|r| *r.particles.last().unwrap()).collect(),
    };
    out.json("simulate.json", cfg, &summary)?;
    let events: u64 = summary.event_count.iter().sum();
    Ok(format!("{} replicas, {events} events", runs.len()))
}

pub fn hydro_check(cfg: &RunConfig, out: &mut Artifacts) -> Result<String, CliError> {
    let gamma = cfg.load_gamma()?;
    let report = hydrodynamic_check(&cfg.params, cfg.n, &gamma, &cfg.times, cfg.replicas, cfg.bins, cfg.seed)?;
    let mut body = String::from("t,bin,x,mean,stderr,pde\n");
    for (k, t) in report.times.iter().enumerate() {
        for (b, x) in report.bin_centers.iter().enumerate() {
            body.push_str(&format!(
                "{},{b},{},{},{},{}\n",
                fmt_real(*t),
                fmt_real(*x),
                fmt_real(report.mean[k][b]),
                fmt_real(report.stderr[k][b]),
                fmt_real(report.pde[k][b])
            ));
        }
    }
    out.csv("hydro.csv", cfg, body.as_bytes())?;
    let within = report.within(3.0);
    out.json(
        "hydro.json",
        cfg,
        &serde_json::json!({
            "discrepancy": report.discrepancy,
            "max_z": report.max_z,
            "within_3_stderr": within,
            "event_count": report.event_count,
        }),
    )?;
    let worst = report.max_z.iter().fold(0.0f64, |a, &z| a.max(z));
    Ok(format!("max discrepancy over times {:.4}, worst z {worst:.2}", report.discrepancy.iter().fold(0.0f64, |a, &d| a.max(d))))
}

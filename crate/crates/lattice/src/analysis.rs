use mft_core::dynamics::solve_heat_robin;
use mft_core::numerics::{stationary_profile, DensityProfile, Grid, Params, Profile};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

use crate::error::{LatticeError, Result};
use crate::sim::{run_replicas, simulate_from, SimOptions};
use crate::state::{bin_centers, bin_sums, interpolate, LatticeState};

/// Mean of `f` over the sites of each bin.
fn site_bin_average(f: &Profile, n: usize, bins: usize) -> Result<Vec<f64>> {
    let values = (1..n).map(|i| interpolate(f, i as f64 / n as f64));
    let (sum, count) = bin_sums(n, values, bins)?;
    Ok(sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect())
}

/// Mean and standard error of the mean across replicas, per bin.
fn replica_moments(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let r = samples.len() as f64;
    let bins = samples[0].len();
    let mean: Vec<f64> = (0..bins).map(|b| samples.iter().map(|s| s[b]).sum::<f64>() / r).collect();
    let se = (0..bins)
        .map(|b| {
            let ss: f64 = samples.iter().map(|s| (s[b] - mean[b]).powi(2)).sum();
            (ss / (r - 1.0) / r).sqrt()
        })
        .collect();
    (mean, se)
}

/// `|d| / se`, with a zero standard error allowed only for an exact match.
fn z_score(d: f64, se: f64) -> f64 {
    if se > 0.0 {
        d.abs() / se
    } else if d.abs() < 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HydroReport {
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub bin_centers: Vec<f64>,
    /// Replica mean of the bin averages, per time.
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// Heat-flow solution averaged over the sites of each bin.
    pub pde: Vec<Vec<f64>>,
    /// `max_b |mean - pde|` per time.
    pub discrepancy: Vec<f64>,
    /// `max_b |mean - pde| / stderr` per time.
    pub max_z: Vec<f64>,
    pub event_count: u64,
}

impl HydroReport {
    pub fn within(&self, z: f64) -> bool {
        self.max_z.iter().all(|&m| m <= z)
    }
}

/// Replica-averaged empirical density against the Robin heat flow from the
/// same initial profile.
pub fn hydrodynamic_check(
    params: &Params,
    n: usize,
    gamma0: &DensityProfile,
    times: &[f64],
    replicas: usize,
    bins: usize,
    seed: u64,
) -> Result<HydroReport> {
    if replicas < 8 {
        return Err(LatticeError::InvalidInput(format!("need at least 8 replicas, got {replicas}")));
    }
    let grid = Grid::new(bins.min(n - 1))?;
    let opts = SimOptions {
        n,
        sample_times: times.to_vec(),
        grid,
        bins,
        max_events: u64::MAX,
    };
    let runs = run_replicas(params, gamma0, &opts, replicas, seed)?;
    let pde_path = solve_heat_robin(gamma0, params, times, 60)?.path;

    let mut report = HydroReport {
        n,
        replicas,
        seed,
        times: times.to_vec(),
        bin_centers: bin_centers(bins),
        mean: Vec::new(),
        stderr: Vec::new(),
        pde: Vec::new(),
        discrepancy: Vec::new(),
        max_z: Vec::new(),
        event_count: runs.iter().map(|r| r.event_count).sum(),
    };
    for (k, frame) in pde_path.frames().iter().enumerate() {
        let samples: Vec<Vec<f64>> = runs.iter().map(|r| r.bins[k].clone()).collect();
        let (mean, se) = replica_moments(&samples);
        let pde = site_bin_average(frame, n, bins)?;
        let diffs: Vec<f64> = mean.iter().zip(&pde).map(|(m, p)| m - p).collect();
        report.discrepancy.push(diffs.iter().fold(0.0, |a, d| a.max(d.abs())));
        report
            .max_z
            .push(diffs.iter().zip(&se).map(|(d, s)| z_score(*d, *s)).fold(0.0, f64::max));
        report.mean.push(mean);
        report.stderr.push(se);
        report.pde.push(pde);
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryReport {
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
    pub burn_in: f64,
    pub t_avg: f64,
    pub samples_per_replica: usize,
    pub bin_centers: Vec<f64>,
    /// Time- and replica-averaged occupation per bin.
    pub mean: Vec<f64>,
    /// Standard error across replicas of the per-replica time averages.
    pub stderr: Vec<f64>,
    /// The stationary profile averaged over the sites of each bin.
    pub reference: Vec<f64>,
    pub linf: f64,
    pub max_z: f64,
    pub event_count: u64,
}

/// Time average of the bin occupations over `[burn_in, burn_in + t_avg]`,
/// compared with the stationary profile of the hydrodynamic equation.
#[allow(clippy::too_many_arguments)]
pub fn stationary_check(
    params: &Params,
    n: usize,
    gamma0: &DensityProfile,
    burn_in: f64,
    t_avg: f64,
    sample_dt: f64,
    bins: usize,
    replicas: usize,
    seed: u64,
) -> Result<StationaryReport> {
    if replicas < 2 {
        return Err(LatticeError::InvalidInput("need at least 2 replicas".into()));
    }
    if !(burn_in >= 0.0) || !(t_avg > 0.0) {
        return Err(LatticeError::InvalidInput("need burn_in >= 0 and t_avg > 0".into()));
    }
    let grid = Grid::new(bins.min(n - 1))?;
    let opts = SimOptions::uniform(n, burn_in + t_avg, sample_dt, grid, bins)?;
    let runs = run_replicas(params, gamma0, &opts, replicas, seed)?;
    let averages: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| {
            let kept: Vec<&Vec<f64>> = r
                .times
                .iter()
                .zip(&r.bins)
                .filter(|(t, _)| **t >= burn_in)
                .map(|(_, b)| b)
                .collect();
            let mut avg = vec![0.0; bins];
            for b in &kept {
                for (a, v) in avg.iter_mut().zip(b.iter()) {
                    *a += v;
                }
            }
            avg.iter().map(|a| a / kept.len() as f64).collect()
        })
        .collect();
    let samples_per_replica = runs[0].times.iter().filter(|t| **t >= burn_in).count();
    let (mean, stderr) = replica_moments(&averages);
    let rho = stationary_profile(params, Grid::new(1000)?);
    let reference = site_bin_average(rho.profile(), n, bins)?;
    let diffs: Vec<f64> = mean.iter().zip(&reference).map(|(m, r)| m - r).collect();
    Ok(StationaryReport {
        n,
        replicas,
        seed,
        burn_in,
        t_avg,
        samples_per_replica,
        bin_centers: bin_centers(bins),
        linf: diffs.iter().fold(0.0, |a, d| a.max(d.abs())),
        max_z: diffs.iter().zip(&stderr).map(|(d, s)| z_score(*d, *s)).fold(0.0, f64::max),
        mean,
        stderr,
        reference,
        event_count: runs.iter().map(|r| r.event_count).sum(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ChiSquareCell {
    pub lo: usize,
    pub hi: usize,
    pub observed: u64,
    pub expected: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChiSquareReport {
    pub samples: u64,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub mean: f64,
    pub expected_mean: f64,
    pub cells: Vec<ChiSquareCell>,
}

impl ChiSquareReport {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value > level
    }
}

/// Pearson test of a particle-number histogram against
/// `Binomial(trials, p)`, with neighbouring counts pooled until each cell
/// expects at least 5 observations.
pub fn binomial_chi_square(counts: &[u64], trials: usize, p: f64) -> Result<ChiSquareReport> {
    if counts.len() != trials + 1 {
        return Err(LatticeError::InvalidInput(format!(
            "histogram has {} cells, expected {}",
            counts.len(),
            trials + 1
        )));
    }
    let total: u64 = counts.iter().sum();
    let dist = Binomial::new(p, trials as u64)
        .map_err(|e| LatticeError::InvalidInput(format!("binomial law: {e}")))?;
    let mut cells: Vec<ChiSquareCell> = Vec::new();
    let mut open = ChiSquareCell { lo: 0, hi: 0, observed: 0, expected: 0.0 };
    for (k, &c) in counts.iter().enumerate() {
        open.hi = k;
        open.observed += c;
        open.expected += total as f64 * dist.pmf(k as u64);
        if open.expected >= 5.0 {
            cells.push(open);
            open = ChiSquareCell { lo: k + 1, hi: k + 1, observed: 0, expected: 0.0 };
        }
    }
    if open.expected > 0.0 || open.observed > 0 {
        match cells.last_mut() {
            Some(last) => {
                last.hi = open.hi;
                last.observed += open.observed;
                last.expected += open.expected;
            }
            None => cells.push(open),
        }
    }
    if cells.len() < 2 {
        return Err(LatticeError::InvalidInput("too few samples for a chi-square test".into()));
    }
    let statistic: f64 = cells
        .iter()
        .map(|c| (c.observed as f64 - c.expected).powi(2) / c.expected)
        .sum();
    let dof = cells.len() - 1;
    let chi = ChiSquared::new(dof as f64)
        .map_err(|e| LatticeError::InvalidInput(format!("chi-square law: {e}")))?;
    let mean = counts.iter().enumerate().map(|(k, &c)| k as f64 * c as f64).sum::<f64>() / total as f64;
    Ok(ChiSquareReport {
        samples: total,
        statistic,
        dof,
        p_value: 1.0 - chi.cdf(statistic),
        mean,
        expected_mean: trials as f64 * p,
        cells,
    })
}

/// Particle numbers sampled every `spacing` after `burn_in` from equal
/// reservoir densities, tested against the Bernoulli product law.
#[allow(clippy::too_many_arguments)]
pub fn particle_number_test(
    params: &Params,
    n: usize,
    gamma0: &DensityProfile,
    burn_in: f64,
    spacing: f64,
    samples_per_replica: usize,
    replicas: usize,
    seed: u64,
) -> Result<ChiSquareReport> {
    if params.alpha() != params.beta() {
        return Err(LatticeError::InvalidInput(format!(
            "product stationary law needs alpha = beta, got {} and {}",
            params.alpha(),
            params.beta()
        )));
    }
    if samples_per_replica == 0 || replicas == 0 || !(spacing > 0.0) || !(burn_in >= 0.0) {
        return Err(LatticeError::InvalidInput("empty sampling plan".into()));
    }
    let sample_times: Vec<f64> = std::iter::once(0.0)
        .chain((0..samples_per_replica).map(|k| burn_in + k as f64 * spacing).filter(|&t| t > 0.0))
        .collect();
    let opts = SimOptions {
        n,
        sample_times,
        grid: Grid::new(2)?,
        bins: 1,
        max_events: u64::MAX,
    };
    let runs = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let s = seed.wrapping_add(r);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let state = LatticeState::bernoulli(n, gamma0, &mut rng)?;
            simulate_from(params, state, &opts, s, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0u64; n];
    for run in &runs {
        for (t, &k) in run.times.iter().zip(&run.particles) {
            if *t >= burn_in && (*t > 0.0 || burn_in == 0.0) {
                counts[k] += 1;
            }
        }
    }
    binomial_chi_square(&counts, n - 1, params.alpha())
}

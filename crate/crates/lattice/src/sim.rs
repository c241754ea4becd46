use mft_core::numerics::{DensityProfile, Grid, Params};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LatticeError, Result};
use crate::state::{bin_profile, boundary_rate, empirical_profile, LatticeState};

/// Events between two recounts of the discordant bonds.
pub const RECOUNT_EVERY: u64 = 1_000_000;

#[derive(Debug, Clone)]
pub struct SimOptions {
    /// Scaling parameter `N`; the lattice has `N - 1` sites.
    pub n: usize,
    /// Sampling times, starting at 0 and strictly increasing. The run stops
    /// at the last one.
    pub sample_times: Vec<f64>,
    /// Analysis grid for the recorded profiles.
    pub grid: Grid,
    /// Number of equal bins for the recorded bin averages.
    pub bins: usize,
    pub max_events: u64,
}

impl SimOptions {
    /// Samples every `sample_dt` on `[0, t_end]`, with `t_end` always
    /// included.
    pub fn uniform(n: usize, t_end: f64, sample_dt: f64, grid: Grid, bins: usize) -> Result<Self> {
        if !(t_end > 0.0) || !(sample_dt > 0.0) {
            return Err(LatticeError::InvalidInput(format!(
                "need T > 0 and sample_dt > 0, got T = {t_end}, sample_dt = {sample_dt}"
            )));
        }
        let steps = (t_end / sample_dt * (1.0 - 1e-12)).ceil() as usize;
        let mut sample_times: Vec<f64> = (0..steps).map(|k| k as f64 * sample_dt).collect();
        sample_times.push(t_end);
        Ok(SimOptions {
            n,
            sample_times,
            grid,
            bins,
            max_events: u64::MAX,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(LatticeError::InvalidInput(format!("N must be at least 3, got {}", self.n)));
        }
        let t = &self.sample_times;
        if t.is_empty() || t[0] != 0.0 || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LatticeError::InvalidInput(
                "sample times must start at 0 and increase strictly".into(),
            ));
        }
        if self.grid.n() > self.n - 1 {
            return Err(LatticeError::InvalidInput(format!(
                "analysis grid with {} intervals is finer than the {} sites",
                self.grid.n(),
                self.n - 1
            )));
        }
        if self.bins == 0 || self.bins > self.n - 1 {
            return Err(LatticeError::InvalidInput(format!(
                "bin count {} must lie in [1, {}]",
                self.bins,
                self.n - 1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub profiles: Vec<DensityProfile>,
    /// Bin averages per sample.
    pub bins: Vec<Vec<f64>>,
    /// Particle number per sample.
    pub particles: Vec<usize>,
    pub seed: u64,
    pub event_count: u64,
    /// Number of times the tracked rates were checked against a recount.
    pub rate_checks: u64,
    #[serde(skip)]
    pub final_state: Option<LatticeState>,
}

/// Set of discordant bonds with O(1) insertion, removal and uniform choice.
/// Bond `b` joins sites `b` and `b + 1` (0-based).
struct BondSet {
    items: Vec<u32>,
    slot: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl BondSet {
    fn new(occ: &[u8]) -> Self {
        let bonds = occ.len() - 1;
        let mut set = BondSet {
            items: Vec::with_capacity(bonds),
            slot: vec![ABSENT; bonds],
        };
        for b in 0..bonds {
            if occ[b] != occ[b + 1] {
                set.insert(b);
            }
        }
        set
    }

    #[inline]
    fn insert(&mut self, b: usize) {
        self.slot[b] = self.items.len() as u32;
        self.items.push(b as u32);
    }

    #[inline]
    fn remove(&mut self, b: usize) {
        let k = self.slot[b] as usize;
        let last = self.items.pop().expect("bond present");
        if last as usize != b {
            self.items[k] = last;
            self.slot[last as usize] = k as u32;
        }
        self.slot[b] = ABSENT;
    }

    #[inline]
    fn refresh(&mut self, b: usize, occ: &[u8]) {
        let discordant = occ[b] != occ[b + 1];
        let present = self.slot[b] != ABSENT;
        if discordant && !present {
            self.insert(b);
        } else if !discordant && present {
            self.remove(b);
        }
    }

    fn len(&self) -> usize {
        self.items.len()
    }
}

/// Exact simulation of the exclusion process with bulk jumps at rate `N²`
/// per discordant bond and boundary flips at rate
/// `(N/A)[(1-η)α + (1-α)η]` and `(N/B)[(1-η)β + (1-β)η]`, started from a
/// product Bernoulli(`γ₀`) configuration.
pub fn simulate(
    params: &Params,
    gamma0: &DensityProfile,
    opts: &SimOptions,
    seed: u64,
) -> Result<SimResult> {
    opts.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = LatticeState::bernoulli(opts.n, gamma0, &mut rng)?;
    simulate_from(params, state, opts, seed, &mut rng)
}

pub(crate) fn simulate_from(
    params: &Params,
    mut state: LatticeState,
    opts: &SimOptions,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<SimResult> {
    opts.validate()?;
    if state.scale() != opts.n {
        return Err(LatticeError::InvalidInput("state and options disagree on N".into()));
    }
    let nf = opts.n as f64;
    let bulk = nf * nf;
    let inv_bulk = 1.0 / bulk;
    let (al, be, a, b) = (params.alpha(), params.beta(), params.a(), params.b());
    let last = state.sites() - 1;
    let mut bonds = BondSet::new(state.occupations());

    let mut result = SimResult {
        times: Vec::with_capacity(opts.sample_times.len()),
        profiles: Vec::with_capacity(opts.sample_times.len()),
        bins: Vec::with_capacity(opts.sample_times.len()),
        particles: Vec::with_capacity(opts.sample_times.len()),
        seed,
        event_count: 0,
        rate_checks: 0,
        final_state: None,
    };
    let record = |state: &LatticeState, t: f64, result: &mut SimResult| -> Result<()> {
        result.times.push(t);
        result.profiles.push(empirical_profile(state, opts.grid)?);
        result.bins.push(bin_profile(state, opts.bins)?);
        result.particles.push(state.particles());
        Ok(())
    };

    let mut t = 0.0;
    let mut next = 0;
    let t_end = *opts.sample_times.last().unwrap();
    loop {
        let occ = state.occupations();
        let r_left = boundary_rate(nf, al, a, occ[0]);
        let r_right = boundary_rate(nf, be, b, occ[last]);
        let r_bulk = bulk * bonds.len() as f64;
        let total = r_bulk + r_left + r_right;
        let inv_total = 1.0 / total;
        let wait = -(1.0 - rng.gen::<f64>()).ln() * inv_total;
        let t_new = t + wait;
        while next < opts.sample_times.len() && opts.sample_times[next] <= t_new {
            record(&state, opts.sample_times[next], &mut result)?;
            next += 1;
        }
        if t_new >= t_end {
            break;
        }
        t = t_new;
        if result.event_count >= opts.max_events {
            return Err(LatticeError::EventBudget {
                limit: opts.max_events,
                time: t,
            });
        }

        let x = rng.gen::<f64>() * total;
        let occ = state.occupations_mut();
        if x < r_bulk {
            let k = ((x * inv_bulk) as usize).min(bonds.len() - 1);
            let bond = bonds.items[k] as usize;
            occ[bond] ^= 1;
            occ[bond + 1] ^= 1;
            if bond > 0 {
                bonds.refresh(bond - 1, occ);
            }
            if bond + 1 < last {
                bonds.refresh(bond + 1, occ);
            }
        } else if x < r_bulk + r_left {
            occ[0] ^= 1;
            bonds.refresh(0, occ);
        } else {
            occ[last] ^= 1;
            bonds.refresh(last - 1, occ);
        }
        result.event_count += 1;

        if result.event_count.is_multiple_of(RECOUNT_EVERY) {
            let recount = state.discordant_pairs();
            let tracked = r_track(&state, params, bonds.len());
            result.rate_checks += 1;
            if recount != bonds.len() || (tracked - state.exit_rate(params)).abs() > 1e-9 * tracked {
                return Err(LatticeError::RateMismatch {
                    events: result.event_count,
                    incremental: bonds.len(),
                    recount,
                });
            }
        }
    }
    result.final_state = Some(state);
    Ok(result)
}

/// Exit rate assembled from the tracked bond count.
fn r_track(state: &LatticeState, params: &Params, discordant: usize) -> f64 {
    let nf = state.scale() as f64;
    let occ = state.occupations();
    nf * nf * discordant as f64
        + boundary_rate(nf, params.alpha(), params.a(), occ[0])
        + boundary_rate(nf, params.beta(), params.b(), occ[occ.len() - 1])
}

/// Independent replicas with seeds `seed, seed + 1, …`, returned in replica
/// order.
pub fn run_replicas(
    params: &Params,
    gamma0: &DensityProfile,
    opts: &SimOptions,
    replicas: usize,
    seed: u64,
) -> Result<Vec<SimResult>> {
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| simulate(params, gamma0, opts, seed.wrapping_add(r)))
        .collect()
}

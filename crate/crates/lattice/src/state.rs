use mft_core::numerics::{DensityProfile, Grid, Params, Profile};
use rand::Rng;

use crate::error::{LatticeError, Result};

/// Occupations of the sites `x_i = i/N`, `i = 1, …, N-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeState {
    n: usize,
    occ: Vec<u8>,
}

impl LatticeState {
    pub fn new(n: usize, occ: Vec<u8>) -> Result<Self> {
        if n < 3 {
            return Err(LatticeError::InvalidInput(format!("N must be at least 3, got {n}")));
        }
        if occ.len() != n - 1 {
            return Err(LatticeError::InvalidInput(format!(
                "expected {} occupations for N = {n}, got {}",
                n - 1,
                occ.len()
            )));
        }
        if let Some(i) = occ.iter().position(|&v| v > 1) {
            return Err(LatticeError::InvalidInput(format!("occupation {} at site {}", occ[i], i + 1)));
        }
        Ok(LatticeState { n, occ })
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::new(n, vec![0; n.saturating_sub(1)])
    }

    pub fn full(n: usize) -> Result<Self> {
        Self::new(n, vec![1; n.saturating_sub(1)])
    }

    /// Independent occupations with `P(η_i = 1) = γ(x_i)`, `γ` linearly
    /// interpolated between its grid nodes.
    pub fn bernoulli<R: Rng>(n: usize, gamma: &DensityProfile, rng: &mut R) -> Result<Self> {
        if n < 3 {
            return Err(LatticeError::InvalidInput(format!("N must be at least 3, got {n}")));
        }
        let occ = (1..n)
            .map(|i| {
                let p = interpolate(gamma.profile(), i as f64 / n as f64);
                u8::from(rng.gen::<f64>() < p)
            })
            .collect();
        Self::new(n, occ)
    }

    /// The scaling parameter `N`.
    pub fn scale(&self) -> usize {
        self.n
    }

    pub fn sites(&self) -> usize {
        self.occ.len()
    }

    pub fn occupations(&self) -> &[u8] {
        &self.occ
    }

    pub(crate) fn occupations_mut(&mut self) -> &mut [u8] {
        &mut self.occ
    }

    pub fn particles(&self) -> usize {
        self.occ.iter().map(|&v| v as usize).sum()
    }

    pub fn discordant_pairs(&self) -> usize {
        self.occ.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Total jump rate out of the current configuration, counted directly.
    pub fn exit_rate(&self, params: &Params) -> f64 {
        let n = self.n as f64;
        let left = boundary_rate(n, params.alpha(), params.a(), self.occ[0]);
        let right = boundary_rate(n, params.beta(), params.b(), self.occ[self.occ.len() - 1]);
        n * n * self.discordant_pairs() as f64 + left + right
    }
}

/// Flip rate `(N/D)[(1-η)ϱ + (1-ϱ)η]` of a site in contact with a reservoir.
#[inline]
pub(crate) fn boundary_rate(n: f64, rho: f64, d: f64, eta: u8) -> f64 {
    if eta == 0 {
        n * rho / d
    } else {
        n * (1.0 - rho) / d
    }
}

/// Linear interpolation of a profile at `x ∈ [0, 1]`.
pub(crate) fn interpolate(f: &Profile, x: f64) -> f64 {
    let n = f.grid().n();
    let s = (x * n as f64).clamp(0.0, n as f64);
    let i = (s.floor() as usize).min(n - 1);
    let w = s - i as f64;
    let v = f.values();
    (1.0 - w) * v[i] + w * v[i + 1]
}

/// Mean occupation over `bins` equal subintervals of `[0, 1]`; site `i`
/// belongs to bin `⌊bins · i/N⌋`.
pub fn bin_profile(state: &LatticeState, bins: usize) -> Result<Vec<f64>> {
    let (sum, count) = bin_sums(state.scale(), state.occupations().iter().map(|&v| v as f64), bins)?;
    Ok(sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect())
}

pub(crate) fn bin_sums(
    n: usize,
    values: impl Iterator<Item = f64>,
    bins: usize,
) -> Result<(Vec<f64>, Vec<usize>)> {
    if bins == 0 || bins > n - 1 {
        return Err(LatticeError::InvalidInput(format!(
            "bin count {bins} must lie in [1, {}]",
            n - 1
        )));
    }
    let mut sum = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for (k, v) in values.enumerate() {
        let b = bin_of(n, k + 1, bins);
        sum[b] += v;
        count[b] += 1;
    }
    if count.contains(&0) {
        return Err(LatticeError::InvalidInput(format!("{bins} bins leave a bin without sites")));
    }
    Ok((sum, count))
}

#[inline]
pub(crate) fn bin_of(n: usize, site: usize, bins: usize) -> usize {
    (site * bins / n).min(bins - 1)
}

pub fn bin_centers(bins: usize) -> Vec<f64> {
    (0..bins).map(|b| (b as f64 + 0.5) / bins as f64).collect()
}

/// The empirical density on `grid`: each node takes the mean occupation of
/// the sites nearest to it, or the nearest site when none is.
pub fn empirical_profile(state: &LatticeState, grid: Grid) -> Result<DensityProfile> {
    let n = state.scale();
    let m = grid.n();
    if m > n - 1 {
        return Err(LatticeError::InvalidInput(format!(
            "grid with {m} intervals is finer than the {} sites",
            n - 1
        )));
    }
    let mut sum = vec![0.0; m + 1];
    let mut count = vec![0usize; m + 1];
    for (k, &v) in state.occupations().iter().enumerate() {
        let j = (((k + 1) * m) as f64 / n as f64).round() as usize;
        sum[j] += v as f64;
        count[j] += 1;
    }
    let occ = state.occupations();
    let values = (0..=m)
        .map(|j| {
            if count[j] > 0 {
                sum[j] / count[j] as f64
            } else {
                let site = ((j as f64 / m as f64) * n as f64).round().clamp(1.0, (n - 1) as f64) as usize;
                occ[site - 1] as f64
            }
        })
        .collect();
    Ok(DensityProfile::new(Profile::new(grid, values)?)?)
}

use crate::error::{MftError, Result};

/// Uniform grid `x_i = i / n`, `i = 0..=n`, on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(MftError::GridTooSmall { need: 2, got: n });
        }
        Ok(Grid { n })
    }

    /// Number of intervals.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.node(i)).collect()
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self.n == other.n {
            Ok(())
        } else {
            Err(MftError::GridMismatch {
                left: self.n,
                right: other.n,
            })
        }
    }
}

/// Finite samples of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    grid: Grid,
    values: Vec<f64>,
}

impl Profile {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(MftError::InvalidInput(format!(
                "profile has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MftError::InvalidInput(format!(
                "non-finite value at node {i}"
            )));
        }
        Ok(Profile { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..=grid.n()).map(|i| f(grid.node(i))).collect();
        Profile { grid, values }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Profile {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.grid.n()]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Profile {
        Profile {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Profile, f: impl Fn(f64, f64) -> f64) -> Result<Profile> {
        self.grid.check_same(&other.grid)?;
        Ok(Profile {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Profile) -> Result<Profile> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Profile) -> Result<Profile> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Profile {
        self.map(|v| c * v)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Profile) -> Result<Profile> {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max_i |self_i - other_i|`.
    pub fn dist_inf(&self, other: &Profile) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// A profile with every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile(Profile);

impl DensityProfile {
    pub fn new(profile: Profile) -> Result<Self> {
        if let Some(i) = profile
            .values()
            .iter()
            .position(|&v| !(0.0..=1.0).contains(&v))
        {
            return Err(MftError::NotAdmissible(format!(
                "density {} at node {i} outside [0, 1]",
                profile.values()[i]
            )));
        }
        Ok(DensityProfile(profile))
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(Profile::from_fn(grid, f))
    }

    pub fn profile(&self) -> &Profile {
        &self.0
    }

    pub fn into_profile(self) -> Profile {
        self.0
    }

    pub fn grid(&self) -> Grid {
        self.0.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    /// Checks `delta <= value <= 1 - delta` everywhere.
    pub fn require_interior(&self, delta: f64) -> Result<()> {
        let (lo, hi) = (self.0.min(), self.0.max());
        if lo < delta || hi > 1.0 - delta {
            return Err(MftError::NotAdmissible(format!(
                "density range [{lo}, {hi}] not inside [{delta}, {}]",
                1.0 - delta
            )));
        }
        Ok(())
    }
}

impl AsRef<Profile> for DensityProfile {
    fn as_ref(&self) -> &Profile {
        &self.0
    }
}

/// Time-indexed frames on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    grid: Grid,
    times: Vec<f64>,
    frames: Vec<Profile>,
}

impl Path {
    pub fn new(times: Vec<f64>, frames: Vec<Profile>) -> Result<Self> {
        if times.is_empty() || times.len() != frames.len() {
            return Err(MftError::InvalidInput(format!(
                "{} times for {} frames",
                times.len(),
                frames.len()
            )));
        }
        if times[0] < 0.0 || !times.iter().all(|t| t.is_finite()) {
            return Err(MftError::InvalidInput("times must be finite and >= 0".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MftError::InvalidInput("times must be strictly increasing".into()));
        }
        let grid = frames[0].grid();
        for f in &frames[1..] {
            grid.check_same(&f.grid())?;
        }
        Ok(Path {
            grid,
            times,
            frames,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn frames(&self) -> &[Profile] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first(&self) -> &Profile {
        &self.frames[0]
    }

    pub fn last(&self) -> &Profile {
        &self.frames[self.frames.len() - 1]
    }

    pub fn final_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Frames in reverse order on the reflected clock `t -> T - t`.
    pub fn reversed(&self) -> Path {
        let t_end = self.final_time();
        let t0 = self.times[0];
        let times = self.times.iter().rev().map(|t| (t_end - t) + t0).collect();
        let frames = self.frames.iter().rev().cloned().collect();
        Path {
            grid: self.grid,
            times,
            frames,
        }
    }

    /// Frames with `t <= t_end`.
    pub fn truncated(&self, t_end: f64) -> Path {
        let k = self.times.iter().take_while(|&&t| t <= t_end).count().max(1);
        Path {
            grid: self.grid,
            times: self.times[..k].to_vec(),
            frames: self.frames[..k].to_vec(),
        }
    }

    /// Linear interpolation in time, clamped to the covered interval.
    pub fn at(&self, t: f64) -> Profile {
        let ts = &self.times;
        if t <= ts[0] {
            return self.frames[0].clone();
        }
        if t >= ts[ts.len() - 1] {
            return self.last().clone();
        }
        let k = ts.partition_point(|&s| s <= t) - 1;
        let w = (t - ts[k]) / (ts[k + 1] - ts[k]);
        self.frames[k]
            .zip_map(&self.frames[k + 1], |a, b| (1.0 - w) * a + w * b)
            .expect("frames share a grid")
    }

    pub fn check_compatible(&self, other: &Path) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        let same_times = self.times.len() == other.times.len()
            && self
                .times
                .iter()
                .zip(&other.times)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        if same_times {
            Ok(())
        } else {
            Err(MftError::InvalidInput("paths have different time grids".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        let g = Grid::new(2).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 0.5, 1.0]);
        assert_eq!(Grid::new(4).unwrap().h(), 0.25);
        assert!(matches!(
            Grid::new(1),
            Err(MftError::GridTooSmall { need: 2, got: 1 })
        ));
    }

    #[test]
    fn profile_rejects_bad_lengths_and_nan() {
        let g = Grid::new(4).unwrap();
        assert!(Profile::new(g, vec![0.0; 4]).is_err());
        assert!(Profile::new(g, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn density_bounds() {
        let g = Grid::new(4).unwrap();
        assert!(DensityProfile::from_fn(g, |x| x).is_ok());
        assert!(DensityProfile::from_fn(g, |x| 1.5 * x).is_err());
        let d = DensityProfile::from_fn(g, |x| 0.1 + 0.8 * x).unwrap();
        assert!(d.require_interior(0.05).is_ok());
        assert!(d.require_interior(0.2).is_err());
    }

    #[test]
    fn path_validation_and_reversal() {
        let g = Grid::new(4).unwrap();
        let frames: Vec<_> = (0..3).map(|k| Profile::constant(g, k as f64)).collect();
        assert!(Path::new(vec![0.0, 0.5, 0.5], frames.clone()).is_err());
        let p = Path::new(vec![0.0, 0.5, 2.0], frames).unwrap();
        let r = p.reversed();
        assert_eq!(r.times(), &[0.0, 1.5, 2.0]);
        assert_eq!(r.first().values()[0], 2.0);
        assert_eq!(p.at(1.25).values()[2], 1.5);
        assert_eq!(p.truncated(0.7).len(), 2);
    }
}

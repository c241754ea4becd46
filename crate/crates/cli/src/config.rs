use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use mft_core::numerics::{read_profile_file, stationary_profile, DensityProfile, Grid, Params};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Flags shared by every subcommand. Each one can also be given as a flat
/// key of the `--config` JSON file, with `-` replaced by `_`.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON file with flat keys mirroring the flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for the artifacts and manifest.json
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Cap on worker threads
    #[arg(long, global = true, env = "MFT_SSEP_THREADS")]
    pub threads: Option<usize>,

    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long = "A", global = true)]
    pub a: Option<f64>,
    #[arg(long = "B", global = true)]
    pub b: Option<f64>,

    /// Intervals of the analysis grid
    #[arg(long = "grid-n", global = true)]
    pub grid_n: Option<usize>,
    /// Spectral modes
    #[arg(long = "modes-K", global = true)]
    pub modes_k: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Density profile as CSV with header `x,value`
    #[arg(long, global = true)]
    pub gamma: Option<PathBuf>,
    /// Built-in profile: stationary, bump, step, smooth-step
    #[arg(long, global = true)]
    pub preset: Option<String>,

    /// Fixed-point tolerance for the Euler-Lagrange solver
    #[arg(long = "el-tol", global = true)]
    pub el_tol: Option<f64>,
    /// Relaxation threshold ending the adjoint path
    #[arg(long = "eps-relax", global = true)]
    pub eps_relax: Option<f64>,
    /// Time horizon limit of the adjoint path
    #[arg(long = "t-max", global = true)]
    pub t_max: Option<f64>,

    /// Lattice scaling parameter
    #[arg(long = "N", global = true)]
    pub n: Option<usize>,
    /// Simulated time
    #[arg(long = "T", global = true)]
    pub t: Option<f64>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    #[arg(long = "sample-dt", global = true)]
    pub sample_dt: Option<f64>,
    #[arg(long, global = true)]
    pub bins: Option<usize>,
    /// Comma-separated sampling times for hydro-check
    #[arg(long, global = true, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    out: Option<PathBuf>,
    threads: Option<usize>,
    alpha: Option<f64>,
    beta: Option<f64>,
    #[serde(rename = "A")]
    a: Option<f64>,
    #[serde(rename = "B")]
    b: Option<f64>,
    grid_n: Option<usize>,
    #[serde(rename = "modes_K")]
    modes_k: Option<usize>,
    seed: Option<u64>,
    gamma: Option<PathBuf>,
    preset: Option<String>,
    el_tol: Option<f64>,
    eps_relax: Option<f64>,
    t_max: Option<f64>,
    #[serde(rename = "N")]
    n: Option<usize>,
    #[serde(rename = "T")]
    t: Option<f64>,
    replicas: Option<usize>,
    sample_dt: Option<f64>,
    bins: Option<usize>,
    times: Option<Vec<f64>>,
}

/// Fully resolved and validated configuration. This is what gets embedded in
/// every artifact; the output directory and thread count are left out since
/// they do not affect any number.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub params: Params,
    pub grid_n: usize,
    #[serde(rename = "modes_K")]
    pub modes_k: usize,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub gamma: GammaSource,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub replicas: usize,
    pub sample_dt: f64,
    pub bins: usize,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaSource {
    File(PathBuf),
    Preset(String),
}

pub const PRESETS: [&str; 4] = ["stationary", "bump", "step", "smooth-step"];

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn load_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(command: &str, flags: &Overrides) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(p) => load_file(p)?,
            None => FileConfig::default(),
        };
        macro_rules! pick {
            ($field:ident, $default:expr) => {
                flags.$field.clone().or(file.$field.clone()).unwrap_or($default)
            };
        }
        let params = Params::new(pick!(alpha, 0.2), pick!(beta, 0.8), pick!(a, 1.0), pick!(b, 1.0))
            .map_err(|e| invalid(e.to_string()))?;

        let gamma_file = flags.gamma.clone().or(file.gamma.clone());
        let preset = flags.preset.clone().or(file.preset.clone());
        let gamma = match (gamma_file, preset) {
            (Some(_), Some(_)) => return Err(invalid("give either gamma or preset, not both")),
            (Some(p), None) => GammaSource::File(p),
            (None, Some(name)) => {
                if !PRESETS.contains(&name.as_str()) {
                    return Err(invalid(format!(
                        "unknown preset '{name}', expected one of {}",
                        PRESETS.join(", ")
                    )));
                }
                GammaSource::Preset(name)
            }
            (None, None) => GammaSource::Preset("stationary".into()),
        };

        let mut tolerances = BTreeMap::new();
        tolerances.insert("el_tol".to_string(), pick!(el_tol, mft_core::quasipotential::EL_TOL));
        tolerances.insert("eps_relax".to_string(), pick!(eps_relax, 1e-3));
        tolerances.insert("t_max".to_string(), pick!(t_max, 50.0));

        let cfg = RunConfig {
            command: command.to_string(),
            params,
            grid_n: pick!(grid_n, 400),
            modes_k: pick!(modes_k, 60),
            seed: pick!(seed, 42),
            tolerances,
            gamma,
            n: pick!(n, 200),
            t: pick!(t, 1.0),
            replicas: pick!(replicas, 32),
            sample_dt: pick!(sample_dt, 0.1),
            bins: pick!(bins, 10),
            times: pick!(times, vec![0.0, 0.01, 0.05, 0.1]),
            out: pick!(out, PathBuf::from("out")),
            threads: flags.threads.or(file.threads),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.grid_n < 8 {
            return Err(invalid(format!("grid_n must be at least 8, got {}", self.grid_n)));
        }
        if self.modes_k == 0 {
            return Err(invalid("modes_K must be positive"));
        }
        for (name, v) in &self.tolerances {
            if !(v.is_finite() && *v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n < 3 {
            return Err(invalid(format!("N must be at least 3, got {}", self.n)));
        }
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(invalid(format!("T must be positive, got {}", self.t)));
        }
        if !(self.sample_dt.is_finite() && self.sample_dt > 0.0) {
            return Err(invalid(format!("sample_dt must be positive, got {}", self.sample_dt)));
        }
        if self.replicas == 0 {
            return Err(invalid("replicas must be positive"));
        }
        if self.bins == 0 || self.bins > self.n - 1 {
            return Err(invalid(format!("bins must lie in [1, {}], got {}", self.n - 1, self.bins)));
        }
        let t = &self.times;
        if t.is_empty() || t[0] != 0.0 || t.windows(2).any(|w| !(w[1] > w[0])) || !t.iter().all(|v| v.is_finite()) {
            return Err(invalid("times must start at 0 and increase strictly"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads must be positive"));
        }
        Ok(())
    }

    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances[name]
    }

    /// The input profile on the configured grid. A CSV file brings its own
    /// grid, which must then agree with `grid_n`.
    pub fn load_gamma(&self) -> Result<DensityProfile, CliError> {
        let grid = Grid::new(self.grid_n).map_err(|e| invalid(e.to_string()))?;
        match &self.gamma {
            GammaSource::File(path) => {
                let profile = read_profile_file(path).map_err(|e| match e {
                    mft_core::MftError::Io(io) => invalid(format!("{}: {io}", path.display())),
                    other => invalid(format!("{}: {other}", path.display())),
                })?;
                if profile.grid().n() != self.grid_n {
                    return Err(invalid(format!(
                        "{} has {} intervals but grid_n is {}",
                        path.display(),
                        profile.grid().n(),
                        self.grid_n
                    )));
                }
                DensityProfile::new(profile).map_err(|e| invalid(format!("{}: {e}", path.display())))
            }
            GammaSource::Preset(name) => {
                let f: Box<dyn Fn(f64) -> f64> = match name.as_str() {
                    "stationary" => return Ok(stationary_profile(&self.params, grid)),
                    "bump" => Box::new(|x| 0.5 + 0.2 * (std::f64::consts::PI * x).sin()),
                    "step" => Box::new(|x| if x < 0.5 { 0.8 } else { 0.2 }),
                    _ => Box::new(|x| 0.5 + 0.2 * ((x - 0.5) / 0.05).tanh()),
                };
                DensityProfile::from_fn(grid, f).map_err(|e| invalid(e.to_string()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_resolved() {
        let cfg = RunConfig::resolve("spectrum", &Overrides::default()).unwrap();
        assert_eq!((cfg.grid_n, cfg.modes_k, cfg.seed), (400, 60, 42));
        assert_eq!(cfg.tol("eps_relax"), 1e-3);
        assert!(matches!(cfg.gamma, GammaSource::Preset(ref p) if p == "stationary"));
    }

    #[test]
    fn flags_win_over_the_file() {
        let dir = std::env::temp_dir().join(format!("mft-ssep-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let file = dir.join("c.json");
        std::fs::write(&file, r#"{"seed": 5, "N": 50, "bins": 5}"#).unwrap();
        let flags = Overrides {
            config: Some(file),
            seed: Some(9),
            ..Default::default()
        };
        let cfg = RunConfig::resolve("simulate", &flags).unwrap();
        assert_eq!((cfg.seed, cfg.n, cfg.bins), (9, 50, 5));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn presets_are_densities() {
        for name in PRESETS {
            let flags = Overrides {
                preset: Some(name.to_string()),
                grid_n: Some(64),
                ..Default::default()
            };
            let g = RunConfig::resolve("solve-el", &flags).unwrap().load_gamma().unwrap();
            assert_eq!(g.grid().n(), 64);
        }
        let both = Overrides {
            preset: Some("bump".into()),
            gamma: Some("x.csv".into()),
            ..Default::default()
        };
        assert!(RunConfig::resolve("solve-el", &both).is_err());
    }

    #[test]
    fn bins_must_fit_the_lattice() {
        let flags = Overrides {
            n: Some(5),
            bins: Some(5),
            ..Default::default()
        };
        assert!(RunConfig::resolve("simulate", &flags).is_err());
    }
}

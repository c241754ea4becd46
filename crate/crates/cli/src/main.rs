mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};
use error::CliError;
use output::{write_diagnostic, Artifacts};

/// Quasi-potential and hydrodynamics of the boundary-driven exclusion process
/// with weak reservoir contact.
#[derive(Parser)]
#[command(name = "mft-ssep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Overrides,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Eigenvalues of the Robin Laplacian
    Spectrum,
    /// Solve the Euler-Lagrange problem for a profile
    SolveEl,
    /// Quasi-potential S of a profile
    Quasipotential,
    /// Optimal fluctuation path ending at a profile
    OptimalPath,
    /// Upper bound on the dynamical cost compared with S
    VerifyVs,
    /// Kinetic Monte Carlo of the lattice model
    Simulate,
    /// Replica-averaged lattice density against the heat flow
    HydroCheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::SolveEl => "solve-el",
            Command::Quasipotential => "quasipotential",
            Command::OptimalPath => "optimal-path",
            Command::VerifyVs => "verify-vs",
            Command::Simulate => "simulate",
            Command::HydroCheck => "hydro-check",
        }
    }
}

fn run(command: Command, cfg: &RunConfig) -> Result<String, CliError> {
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    let mut out = Artifacts::create(&cfg.out)?;
    let line = match command {
        Command::Spectrum => commands::spectrum(cfg, &mut out),
        Command::SolveEl => commands::solve_el_cmd(cfg, &mut out),
        Command::Quasipotential => commands::quasipotential(cfg, &mut out),
        Command::OptimalPath => commands::optimal_path(cfg, &mut out),
        Command::VerifyVs => commands::verify_vs(cfg, &mut out),
        Command::Simulate => commands::simulate(cfg, &mut out),
        Command::HydroCheck => commands::hydro_check(cfg, &mut out),
    }?;
    out.finish(cfg)?;
    Ok(line)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match RunConfig::resolve(cli.command.name(), &cli.flags) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli.command, &cfg) {
        Ok(line) => {
            println!("{}: {line}", cfg.command);
            println!("artifacts in {}", cfg.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            if let CliError::Numerical { message, diagnostic } = &e {
                write_diagnostic(&cfg.out, &cfg, message, diagnostic);
                eprintln!("error: {e} (details in {})", cfg.out.join("diagnostic.json").display());
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

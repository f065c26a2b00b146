//! `bohmflow` command line.
//!
//! Exit codes: 0 success, 1 usage/config/input error, 2 verification failure.
//! Reports are JSON on stdout; CSV data goes to `--out`.

pub mod commands;
pub mod config;
pub mod csvio;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::model::{AmplitudeConvention, WaveguideKind};
use crate::trajectory::BoundaryPolicy;
use crate::Result;

pub use commands::Outcome;
pub use config::{RunConfig, Tolerances};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "bohmflow",
    version,
    about = "Bohmian velocities and trajectories in coupled waveguides"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GuideArg {
    Main,
    Aux,
}

impl From<GuideArg> for WaveguideKind {
    fn from(g: GuideArg) -> Self {
        match g {
            GuideArg::Main => WaveguideKind::Main,
            GuideArg::Aux => WaveguideKind::Auxiliary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum FieldArg {
    Phase,
    #[default]
    Continuity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Uniform,
    QuadraturePhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    Absorb,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum MethodArg {
    #[default]
    Analytic,
    Ode,
}

/// Flags shared by every subcommand; each overrides the matching config key.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON configuration document
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output CSV path
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub guide: Option<GuideArg>,
    #[arg(long, global = true, value_enum, default_value_t = FieldArg::Continuity)]
    pub field: FieldArg,
    #[arg(long, global = true, value_enum)]
    pub convention: Option<ConventionArg>,
    #[arg(long, global = true, value_enum)]
    pub boundary: Option<BoundaryArg>,
    #[arg(long, global = true)]
    pub hbar: Option<f64>,
    #[arg(long, global = true)]
    pub mass: Option<f64>,
    #[arg(long, global = true)]
    pub length: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub k1: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub k2: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub v0: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub energy: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for (J0, E) and check the coupled-equation residual
    Dispersion,
    /// Tabulate density and both velocity fields
    Velocity {
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
    /// Integrate one trajectory
    Trajectory {
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
        #[arg(long)]
        t_final: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Analytic)]
        method: MethodArg,
        /// Output intervals for the analytic method
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Sample, propagate and test an ensemble against the density
    Ensemble {
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        #[arg(long, default_value_t = 50)]
        bins: usize,
    },
    /// Run every consistency check
    Verify,
}

impl CommonArgs {
    /// Applies flag overrides on top of the file/default configuration.
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(g) = self.guide {
            cfg.guide = g.into();
        }
        if let Some(c) = self.convention {
            cfg.amplitude_convention = match c {
                ConventionArg::Uniform => AmplitudeConvention::Uniform,
                ConventionArg::QuadraturePhase => AmplitudeConvention::QuadraturePhase,
            };
        }
        if let Some(b) = self.boundary {
            cfg.boundary = match b {
                BoundaryArg::Absorb => BoundaryPolicy::Absorb,
                BoundaryArg::Periodic => BoundaryPolicy::Periodic,
            };
        }
        let set = |dst: &mut f64, src: Option<f64>| {
            if let Some(v) = src {
                *dst = v;
            }
        };
        set(&mut cfg.hbar, self.hbar);
        set(&mut cfg.mass, self.mass);
        set(&mut cfg.length, self.length);
        set(&mut cfg.k1, self.k1);
        set(&mut cfg.k2, self.k2);
        set(&mut cfg.v0, self.v0);
        set(&mut cfg.alpha, self.alpha);
        if let Some(e) = self.energy {
            cfg.energy = Some(e);
        }
    }
}

/// Resolves the configuration (flag > file > default) and runs the subcommand.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let mut cfg = RunConfig::load(cli.common.config.as_deref())?;
    cli.common.apply(&mut cfg);
    cfg.validate()?;
    let out = cli.common.out.as_deref();
    let field = cli.common.field;
    match &cli.command {
        Command::Dispersion => commands::cmd_dispersion(&cfg),
        Command::Velocity { samples } => {
            commands::cmd_velocity(&cfg, field, *samples, commands::require_out(out)?)
        }
        Command::Trajectory {
            x0,
            t_final,
            method,
            samples,
        } => commands::cmd_trajectory(
            &cfg,
            field,
            *x0,
            *t_final,
            *method,
            *samples,
            commands::require_out(out)?,
        ),
        Command::Ensemble { n, dt, bins } => {
            commands::cmd_ensemble(&cfg, field, *n, *dt, *bins, commands::require_out(out)?)
        }
        Command::Verify => commands::cmd_verify(&cfg),
    }
}

/// Parses `args`, runs, prints the report and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            let text = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
            // A closed stdout (e.g. piped into `head`) does not change the outcome.
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            outcome.exit
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

//! `movm`: stability charts, simulations, normal forms and bifurcation
//! sweeps for the modified optimal velocity model.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 numerical failure,
//! 4 normal-form assumption violated, 1 I/O failure.

mod commands;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use movm::MovmError;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "movm",
    version,
    about = "Delay analysis of the modified optimal velocity model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Platoon configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output prefix; files are written as `<out>.csv`, `<out>.json` and
    /// `<out>.manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Convention {
    /// Taylor coefficients carry 1/2! and 1/3!.
    Factorial,
    /// Second and third coefficients without factorials.
    AsPrinted,
}

#[derive(Subcommand)]
enum Command {
    /// τ_cr, τ_noc, the small-delay bound and σ at the configured delay over a range of `a`.
    StabilityChart {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_range, default_value = "1,5")]
        a_range: (f64, f64),
        #[arg(long, default_value_t = 20)]
        grid: usize,
    },
    /// Fixed-step simulation of the nonlinear platoon.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50.0)]
        horizon: f64,
        #[arg(long, default_value_t = movm::simulator::DEFAULT_TS)]
        ts: f64,
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Hopf normal form of the bifurcating pair.
    Hopf {
        #[command(flatten)]
        common: Common,
        /// 1-based pair; defaults to the pair with the largest delay.
        #[arg(long)]
        vehicle: Option<usize>,
        /// Move the designated pair's delay onto τ_cr so that κ_cr = 1.
        #[arg(long)]
        at_boundary: bool,
        #[arg(long, value_enum, default_value_t = Convention::Factorial)]
        convention: Convention,
    },
    /// Simulated limit-cycle amplitude against κ.
    Bifurcation {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        kappa_list: Vec<f64>,
        #[arg(long)]
        vehicle: Option<usize>,
        /// Fixed horizon (s); chosen per κ from the growth rate otherwise.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value_t = movm::simulator::DEFAULT_TS)]
        ts: f64,
        #[arg(long, default_value_t = 10)]
        stride: usize,
        /// Initial headway offset (m) of the recorded pair.
        #[arg(long, default_value_t = 1e-4)]
        perturbation: f64,
    },
    /// Rate of convergence over `a` and τ ∈ [0, τ_cr(a)].
    RocContour {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_range, default_value = "1,5")]
        a_range: (f64, f64),
        /// Points along each axis.
        #[arg(long, default_value_t = 20)]
        grid: usize,
    },
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(format!("need 0 < LO <= HI, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

/// A failed command: exit code plus a JSON diagnostic for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
    pub detail: Value,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            kind: "config",
            message: message.into(),
            detail: Value::Null,
        }
    }

    pub fn numeric(message: impl Into<String>, detail: Value) -> Self {
        Failure {
            code: 3,
            kind: "numeric",
            message: message.into(),
            detail,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure {
            code: 1,
            kind: "io",
            message: format!("{}: {e}", path.display()),
            detail: Value::Null,
        }
    }

    fn to_json(&self) -> Value {
        let mut v = json!({ "error": self.kind, "exit_code": self.code, "message": self.message });
        if !self.detail.is_null() {
            v["detail"] = self.detail.clone();
        }
        v
    }
}

impl From<MovmError> for Failure {
    fn from(e: MovmError) -> Self {
        match e {
            MovmError::AssumptionViolation(report) => Failure {
                code: 4,
                kind: "assumption",
                message: format!("normal-form assumptions violated: {report}"),
                detail: serde_json::to_value(&*report).unwrap_or(Value::Null),
            },
            MovmError::InvalidConfig(_)
            | MovmError::InvalidParameter(_)
            | MovmError::OvfDomain { .. }
            | MovmError::OvfRange { .. }
            | MovmError::Json(_) => Failure::config(e.to_string()),
            MovmError::Io(io) => Failure {
                code: 1,
                kind: "io",
                message: io.to_string(),
                detail: Value::Null,
            },
            other => Failure::numeric(other.to_string(), Value::Null),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::StabilityChart {
            common,
            a_range,
            grid,
        } => commands::stability_chart(&common, a_range, grid),
        Command::Simulate {
            common,
            horizon,
            ts,
            stride,
        } => commands::simulate(&common, horizon, ts, stride),
        Command::Hopf {
            common,
            vehicle,
            at_boundary,
            convention,
        } => commands::hopf(&common, vehicle, at_boundary, convention),
        Command::Bifurcation {
            common,
            kappa_list,
            vehicle,
            horizon,
            ts,
            stride,
            perturbation,
        } => {
            let opts = movm::simulator::BifurcationOptions {
                vehicle,
                ts,
                horizon,
                stride,
                perturbation,
                ..Default::default()
            };
            commands::bifurcation(&common, &kappa_list, opts)
        }
        Command::RocContour {
            common,
            a_range,
            grid,
        } => commands::roc_contour(&common, a_range, grid),
    };
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.code)
        }
    }
}

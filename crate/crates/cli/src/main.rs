//! `oppenheim-lab`: self-tests and desk-scale experiments, CSV/JSON out.
//!
//! Every run prints `# oppenheim-lab v<version> config=<json>` first. The
//! config holds every flag except `--threads`, so replaying it reproduces
//! the output byte for byte on any number of threads.
//!
//! Exit codes: 0 pass, 1 invariant failure, 2 numerical failure, 64 usage.

mod commands;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use oppenheim_lab::Error;

pub const EXIT_INVARIANT: u8 = 1;
pub const EXIT_NUMERIC: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Parser, Serialize)]
#[command(name = "oppenheim-lab", version, about = "Desk-scale quantitative Oppenheim experiments")]
pub struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Write to this file instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Standard,
    Printed,
    Typo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormArg {
    /// `x² + y² − z²`.
    Q0,
    /// `Q₀^g` for a random `g` drawn from the seed.
    Random,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Check homomorphism, orthogonality, kernel and growth of the spin cover.
    SpinSelftest {
        /// Shorthand for `--format json`.
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, value_enum, default_value_t = VariantArg::Standard, hide = true)]
        variant: VariantArg,
    },
    /// Orbit estimate of the second moment of a Siegel transform against
    /// the coprime-pair sum under each index convention.
    Rogers {
        /// Volume of the cube `[0, s]³`.
        #[arg(long, value_parser = positive)]
        vol: f64,
        #[arg(long, default_value_t = 1000.0)]
        t: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 8)]
        base_points: usize,
    },
    /// Fraction of random forms with no value within δ of ξ, per k.
    Badset {
        #[arg(long)]
        delta: f64,
        #[arg(long, allow_hyphen_values = true)]
        xi: f64,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128")]
        k: Vec<f64>,
        #[arg(long, default_value_t = 400)]
        trials: usize,
    },
    /// Fraction of base points whose sampled orbit ball misses the target.
    TargetMiss {
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        xi: f64,
        #[arg(long, default_value_t = 0.3)]
        delta: f64,
        #[arg(long, value_delimiter = ',', default_value = "100,1000")]
        t: Vec<f64>,
        #[arg(long, default_value_t = 400)]
        trials: usize,
        #[arg(long, default_value_t = oppenheim_lab::experiments::DEFAULT_ORBIT_BUDGET)]
        budget: usize,
    },
    /// Verify an approximation schedule on random forms.
    Oppenheim {
        /// Named schedule: pow14 or logk.
        #[arg(long, conflicts_with_all = ["n_exp", "delta_exp"])]
        schedule: Option<String>,
        /// Custom schedule `N = k^a`.
        #[arg(long, requires = "delta_exp")]
        n_exp: Option<f64>,
        /// Custom schedule `δ = k^b`.
        #[arg(long, allow_hyphen_values = true, requires = "n_exp")]
        delta_exp: Option<f64>,
        #[arg(long, default_value_t = 0.9)]
        eta: f64,
        #[arg(long, value_delimiter = ',', default_value = "64,128,256,512")]
        k: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        forms: usize,
        /// Fixed search scale instead of `‖g‖₂`.
        #[arg(long)]
        c: Option<f64>,
        /// Append the rational form `Q₀` as a negative control.
        #[arg(long)]
        control: bool,
    },
    /// Table of `min |Q(n) − ξ|` across a ξ-grid at one k.
    Profile {
        #[arg(long, value_enum, default_value_t = FormArg::Q0)]
        form: FormArg,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        n: f64,
        #[arg(long)]
        step: f64,
    },
    /// Orbit estimate of the measure of lattices meeting a target against
    /// `min(1/5, vol/5)`.
    MeasureBound {
        #[arg(long, allow_hyphen_values = true)]
        xi: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1000.0)]
        t: f64,
        #[arg(long, default_value_t = 5000)]
        samples: usize,
        #[arg(long, default_value_t = 8)]
        base_points: usize,
    },
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("{v} is not a positive number")),
        Err(e) => Err(e.to_string()),
    }
}

/// A finished run: text to emit and the exit status it implies.
pub struct Run {
    pub body: String,
    pub status: u8,
}

fn exit_for(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) | Error::BadDelta(_) | Error::BadBox(_) | Error::NotAdmissible(_) => EXIT_USAGE,
        _ => EXIT_NUMERIC,
    }
}

fn header(cli: &Cli) -> String {
    let config = serde_json::to_string(cli).expect("config serializes");
    format!("# oppenheim-lab v{} config={config}\n", env!("CARGO_PKG_VERSION"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let run = match pool.install(|| commands::run(&cli)) {
        Ok(run) => run,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_for(&e));
        }
    };
    let text = header(&cli) + &run.body;
    let written = match &cli.output {
        Some(path) => std::fs::write(path, text.as_bytes()),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_NUMERIC);
    }
    ExitCode::from(run.status)
}

//! `stoch-heights`: command-line front end. Every command prints one JSON
//! report per point on stdout (one line each); errors go to stderr as JSON.
//!
//! Exit codes: 0 success, 2 validation error, 3 budget or iteration cap.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use stoch_heights::{Error, Place};

#[derive(Parser, Debug)]
#[command(name = "stoch-heights", version, about = "Canonical heights for random iteration of rational maps")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// System description (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Point `a/b`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub point: Option<String>,
    /// File with one point per line; prints one report line per point.
    #[arg(long, global = true)]
    pub batch: Option<PathBuf>,
    /// Target accuracy (also the per-path accuracy inside Monte Carlo).
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub eps: f64,
    /// Monte Carlo sample count.
    #[arg(long, global = true, default_value_t = 1000)]
    pub samples: usize,
    /// Seed for Monte Carlo runs and for sampled words.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Confidence level of Monte Carlo intervals.
    #[arg(long, global = true, default_value_t = 0.95)]
    pub confidence: f64,
    /// Orbit length for Zsigmondy sets and good-pair checks.
    #[arg(long, global = true, default_value_t = 12)]
    pub horizon: usize,
    /// Enumeration depth of exact expectations.
    #[arg(long, global = true, default_value_t = 12)]
    pub depth: usize,
    /// Largest allowed size (in bits) of orbit coordinates.
    #[arg(long, global = true, default_value_t = stoch_heights::heights::DEFAULT_BIT_BUDGET)]
    pub bit_budget: u64,
    /// Largest number of enumerated words or searched points.
    #[arg(long, global = true, default_value_t = 2_000_000)]
    pub enum_budget: u64,
    /// Worker threads for Monte Carlo (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Word: `0,1,1` (finite), `periodic:0,1`, `seed:7`, or the JSON forms
    /// `[0,1]`, `{"periodic":[0,1]}`, `{"seed":7}`. Default: `seed:<--seed>`.
    #[arg(long, global = true)]
    pub word: Option<String>,
    /// Shorthand for `--word seed:N`.
    #[arg(long, global = true)]
    pub word_seed: Option<u64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Mc,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Canonical height along a word.
    Height,
    /// Expected canonical height.
    ExpectedHeight {
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
    },
    /// Decide whether the point lies in a finite stable set.
    StableSet,
    /// Points of a box whose forward closure is finite.
    KernelProbe {
        #[arg(long, default_value_t = 2.0)]
        height_bound: f64,
        #[arg(long, default_value_t = 1)]
        denominator_bound: u64,
    },
    /// Green function at one place.
    Green {
        #[arg(long, default_value = "inf")]
        place: Place,
    },
    /// Local canonical height at one place.
    LocalHeight {
        #[arg(long, default_value = "inf")]
        place: Place,
        /// `x`, `y`, or ascending coefficients (`i` multiplies `x^i y^(e-i)`).
        #[arg(long, default_value = "y", allow_hyphen_values = true)]
        divisor: String,
    },
    /// Local heights at every contributing place.
    Decompose {
        #[arg(long, default_value = "y", allow_hyphen_values = true)]
        divisor: String,
    },
    /// Expected local canonical height at one place.
    ExpectedLocal {
        #[arg(long, default_value = "inf")]
        place: Place,
        #[arg(long, default_value = "y", allow_hyphen_values = true)]
        divisor: String,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
    },
    /// Sample correlation of local heights at two places.
    DependenceProbe {
        #[arg(long, default_value = "inf")]
        place: Place,
        #[arg(long)]
        other: Place,
        #[arg(long, default_value = "y", allow_hyphen_values = true)]
        divisor: String,
    },
    /// Zsigmondy set of an orbit up to the horizon.
    Zsigmondy {
        /// Keep iterating through 0 and infinity.
        #[arg(long)]
        relaxed: bool,
    },
    /// Horizon-bounded good-pair check.
    GoodPair,
    /// Degree and squarefreeness hypotheses of every map.
    PrimdivHypotheses,
    /// Riccati invariants over `F_p(t)`.
    Riccati {
        #[command(subcommand)]
        what: RiccatiCommand,
    },
}

#[derive(Subcommand, Debug, Clone, Copy)]
pub enum RiccatiCommand {
    Delta,
    Coeffs,
    Check,
}

fn error_report(e: &Error) -> (Value, u8) {
    let (kind, code) = if e.is_budget() { ("budget", 3) } else { ("validation", 2) };
    (json!({"error": kind, "message": e.to_string()}), code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", json!({"error": "usage", "message": msg.trim()}));
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", json!({"error": "validation", "message": e.to_string()}));
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(reports) => {
            for r in reports {
                println!("{r}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let (report, code) = error_report(&e);
            eprintln!("{report}");
            ExitCode::from(code)
        }
    }
}

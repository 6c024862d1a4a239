//! `hofa`: command-line front end for the hofa-core experiments.
//!
//! Every run writes line-delimited JSON records (first a provenance record,
//! then results) and a short human-readable summary.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "hofa",
    version,
    about = "Higher-order Fourier analysis experiments over F_p^n",
    after_help = "Exit codes: 0 ok, 1 I/O, 2 usage, 3 parse, 4 budget, 5 dimension, 6 invalid argument."
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

/// Knobs shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Field size for generated inputs; checked against input files.
    #[arg(long, global = true)]
    pub p: Option<u32>,
    /// Dimension for generated inputs; checked against input files.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Gowers / υ order, or polynomial degree bound.
    #[arg(long, global = true)]
    pub d: Option<usize>,
    /// Restriction dimension.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Accuracy parameter (η for `decompose`, ε for `test-property`).
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Monte-Carlo sample count; selects sampling where exact is the default.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Seed, required by every randomized run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Work budget for exhaustive computations.
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Machine-readable output file (line-delimited JSON); stdout if absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

/// Where a function comes from: a file, or a seeded random `{0,1}` function
/// on `F_p^n`.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Function file.
    #[arg(long, conflicts_with = "random")]
    pub input: Option<PathBuf>,
    /// Draw a uniform random {0,1} function from `--p`, `--n`, `--seed`.
    #[arg(long)]
    pub random: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Gowers U^d norm (exact, or Monte-Carlo with --samples).
    Gowers {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Linear-form average t_L(f) (exact, or Monte-Carlo with --samples).
    Tnorm {
        #[command(flatten)]
        input: InputArgs,
        /// Linear-form system file.
        #[arg(long, conflicts_with = "cube")]
        forms: Option<PathBuf>,
        /// Use the Gowers cube system of order --d.
        #[arg(long)]
        cube: bool,
    },
    /// υ^d distance and witness bijection between two functions.
    Upsilon {
        #[command(flatten)]
        input: InputArgs,
        /// Second function file.
        #[arg(long)]
        other: PathBuf,
        /// Use the restart heuristic instead of exhaustive search.
        #[arg(long)]
        restarts: Option<usize>,
        /// Common domain dimension for functions on different domains.
        #[arg(long)]
        ambient: Option<usize>,
        /// File receiving the witness map.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Restriction law π_k(f), optionally compared with another function or a blow-up.
    Restrict {
        #[command(flatten)]
        input: InputArgs,
        /// Compare with π_k of this function.
        #[arg(long, conflicts_with = "blow_up_to")]
        other: Option<PathBuf>,
        /// Compare with π_k of a random blow-up to this dimension (coupled sampling).
        #[arg(long)]
        blow_up_to: Option<usize>,
    },
    /// Energy-increment decomposition f = f1 + f2 + f3.
    Decompose {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 64)]
        max_complexity: usize,
    },
    /// Rank of a polynomial, or of a sequence when several are given.
    Rank {
        /// Polynomial file; repeat for a sequence.
        #[arg(long, required = true)]
        poly: Vec<PathBuf>,
        #[arg(long, default_value_t = 3)]
        max_r: usize,
    },
    /// Oblivious estimate of a parameter from random k-dimensional restrictions.
    Estimate {
        #[command(flatten)]
        input: InputArgs,
        /// `mean`, or a property spec for the distance-to-property parameter.
        #[arg(long, default_value = "mean")]
        oracle: String,
    },
    /// Distance-estimation tester for a property.
    TestProperty {
        #[command(flatten)]
        input: InputArgs,
        /// `constant`, `spectral:<s>` or `structured:<d1,..>:<r>:<gamma>`.
        #[arg(long)]
        property: String,
    },
    /// t-profiles, υ distances and property distances along a blow-up sequence.
    Converge {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        property: String,
        /// Blow-up dimensions, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        vars: usize,
        #[arg(long, default_value_t = 3)]
        max_forms: usize,
        #[arg(long, default_value_t = 4)]
        restarts: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hofa: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

impl From<rayon::ThreadPoolBuildError> for CliError {
    fn from(e: rayon::ThreadPoolBuildError) -> Self {
        CliError::Usage(format!("cannot start thread pool: {e}"))
    }
}

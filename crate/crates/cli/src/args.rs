use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use selfish_routing::braess::Method;
use selfish_routing::engine::{DEFAULT_EPSILON, DEFAULT_MAX_MOVES};
use selfish_routing::oracle::DEFAULT_PROFILE_CAP;

#[derive(Debug, Parser)]
#[command(
    name = "selfish-routing",
    version,
    about = "Atomic selfish routing with volume-discount edge pricing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub run: RunConfig,
}

/// Flags shared by every command.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,

    /// Minimum cost improvement that counts as strictly better.
    #[arg(long, global = true, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,

    /// Move budget for best-response dynamics.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_MOVES)]
    pub max_moves: usize,

    /// Largest number of strategy profiles the exhaustive search will visit.
    #[arg(long, global = true, default_value_t = DEFAULT_PROFILE_CAP)]
    pub cap: u64,

    /// Seed for random initial profiles.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Threads for the exhaustive search; output does not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,

    /// Write the generated instances to `<PREFIX>.before.json` and `<PREFIX>.after.json`.
    #[arg(long, global = true, value_name = "PREFIX")]
    pub emit_scenario: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario file and list every violated invariant.
    Validate { scenario: PathBuf },
    /// Run best-response dynamics to an equilibrium.
    Equilibrate {
        scenario: PathBuf,
        /// Starting profile: `greedy`, `first`, `random` or comma-separated path indices.
        #[arg(long, default_value = "greedy")]
        init: String,
    },
    /// List every pure equilibrium and the price of anarchy.
    Enumerate { scenario: PathBuf },
    /// Price of anarchy from exhaustive search.
    Poa { scenario: PathBuf },
    /// Edge-addition experiments on the Braess network.
    Braess {
        #[command(subcommand)]
        experiment: BraessCommand,
    },
    /// Emit F and u = F/x for catalog price functions as CSV.
    PriceCurves {
        /// Comma-separated families (zero, identity, sin, log1p, saturating).
        #[arg(long, value_delimiter = ',', default_value = "sin,log1p")]
        functions: Vec<String>,
        #[arg(long, default_value_t = 101)]
        samples: usize,
        #[arg(long, default_value_t = 1.0)]
        x_max: f64,
        /// Saturating-family discount depth.
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Oracle,
    Dynamics,
}

impl From<MethodArg> for Method {
    fn from(arg: MethodArg) -> Self {
        match arg {
            MethodArg::Oracle => Method::Oracle,
            MethodArg::Dynamics => Method::Dynamics,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum BraessCommand {
    /// Pure congestion network.
    Classic {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Oracle)]
        method: MethodArg,
    },
    /// Network whose congestible edges also charge a volume-discount price.
    Priced {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "identity")]
        price: String,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 0.5)]
        c1: f64,
        #[arg(long, default_value_t = 0.5)]
        c2: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Oracle)]
        method: MethodArg,
    },
    /// Compare two scenario files sharing the same commodities.
    Pair {
        before: PathBuf,
        after: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Oracle)]
        method: MethodArg,
    },
}

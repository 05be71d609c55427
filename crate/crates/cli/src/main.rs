//! `ghzkit` command-line front end.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "ghzkit", version, about = "Qutrit GHZ witnesses, Bell bounds and finite-count statistics")]
struct Cli {
    /// Write the JSON report to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Directory for `<command>.json` reports when `--out` is not given.
    #[arg(long, global = true, env = "GHZKIT_OUT_DIR")]
    out_dir: Option<PathBuf>,

    /// Also write the command's flat table (per-setting probabilities or
    /// counts, or per-restart see-saw values) as CSV.
    #[arg(long, global = true, value_name = "PATH")]
    csv: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Two-basis GME witness on an ideal, noisy or simulated GHZ state.
    Witness(WitnessArgs),
    /// Bell value of a state under phased Fourier settings, classified
    /// against the bound chain.
    Bell(BellArgs),
    /// See-saw lower bound for a dimension profile.
    Seesaw(SeesawArgs),
    /// Exact local bound by deterministic-strategy enumeration.
    Lhv(LhvArgs),
    /// Chernoff-type p-value for an observed violation.
    Pvalue(PvalueArgs),
    /// Post-selected path-identity circuit.
    Optics(OpticsArgs),
    /// Write a Bell functional in the text format.
    Functional(FunctionalArgs),
}

/// State preparation shared by `witness` and `bell`.
#[derive(Args, Debug, Serialize, Clone)]
pub struct StateArgs {
    /// Weight of the prepared state against white noise.
    #[arg(long, default_value_t = 1.0)]
    pub visibility: f64,

    /// Branch coherence factors λ01,λ02,λ12,… (upper triangle).
    #[arg(long, value_delimiter = ',', conflicts_with = "overlaps")]
    pub damping: Option<Vec<f64>>,

    /// Photon overlaps s_bc,s_bd,s_cd; the state comes from the optics
    /// simulation (triggered for three parties).
    #[arg(long, value_delimiter = ',')]
    pub overlaps: Option<Vec<f64>>,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct WitnessArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub state: StateArgs,
    /// Total shots split over the two witness settings.
    #[arg(long)]
    pub shots_total: Option<u64>,
    /// Seed for sampling (required with --shots-total).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exact probabilities only (no sampling).
    #[arg(long, conflicts_with = "shots_total")]
    pub exact: bool,
    /// Only report the visibility at which the isotropic mixture reaches the threshold.
    #[arg(long)]
    pub critical_visibility: bool,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct BellArgs {
    /// `default` or a path to a functional file.
    #[arg(long, default_value = "default")]
    pub functional: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub state: StateArgs,
    /// Total shots split over the functional's settings.
    #[arg(long)]
    pub shots_total: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, conflicts_with = "shots_total")]
    pub exact: bool,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct SeesawArgs {
    /// Local dimensions, e.g. 2,2,3.
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    #[arg(long, default_value = "default")]
    pub functional: String,
    #[arg(long, default_value_t = 200)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 400)]
    pub max_sweeps: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
    /// Restrict to projective measurements.
    #[arg(long)]
    pub projective_only: bool,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct LhvArgs {
    #[arg(long, default_value = "default")]
    pub functional: String,
    /// Refuse scenarios with more joint strategies than this.
    #[arg(long, default_value_t = ghzkit::bell::DEFAULT_LHV_CAP)]
    pub cap: u128,
    /// Enumerate on one thread.
    #[arg(long)]
    pub serial: bool,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct PvalueArgs {
    #[arg(long)]
    pub observed: f64,
    #[arg(long)]
    pub bound: f64,
    /// Algebraic maximum used to map values to success probabilities.
    #[arg(long)]
    pub scale: f64,
    #[arg(long)]
    pub counts: u64,
    /// Also report the counts needed to reach this p-value.
    #[arg(long)]
    pub target: Option<f64>,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct OpticsArgs {
    /// JSON circuit description; defaults to the two-source, two-exchange circuit.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override photon overlaps s_bc,s_bd,s_cd.
    #[arg(long, value_delimiter = ',')]
    pub overlaps: Option<Vec<f64>>,
    /// Project the first photon onto the uniform superposition.
    #[arg(long)]
    pub trigger: bool,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct FunctionalArgs {
    #[arg(long, default_value = "default")]
    pub functional: String,
    /// Destination of the functional text.
    #[arg(long)]
    pub write: PathBuf,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Witness(_) => "witness",
            Self::Bell(_) => "bell",
            Self::Seesaw(_) => "seesaw",
            Self::Lhv(_) => "lhv",
            Self::Pvalue(_) => "pvalue",
            Self::Optics(_) => "optics",
            Self::Functional(_) => "functional",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ghzkit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

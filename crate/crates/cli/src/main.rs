mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lowrank_dmd::DEFAULT_SVD_TOL;

#[derive(Parser, Debug)]
#[command(name = "lrdmd", version, about = "Low-rank dynamic mode decomposition")]
struct Cli {
    /// Seed for the toy generator and benchmark.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Fail instead of warning when X is numerically rank deficient.
    #[arg(long, global = true)]
    strict_rank: bool,

    /// Relative singular-value threshold for numerical rank.
    #[arg(long, global = true, default_value_t = DEFAULT_SVD_TOL)]
    svd_tol: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a low-rank operator and write its factors.
    Fit(FitArgs),
    /// Eigenvalues, modes and amplitudes of the optimal low-rank operator.
    Modes(ModesArgs),
    /// Simulate the reduced-order model.
    Simulate(SimulateArgs),
    /// Run the synthetic rank sweep.
    Bench(BenchArgs),
    /// Write toy snapshot data.
    Generate(GenerateArgs),
    /// Print rank diagnostics for a snapshot file.
    Validate(ValidateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum MethodArg {
    Optimal,
    Truncated,
    Projected,
    Exact,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum VariantArg {
    AsStated,
    Exact,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum PathArg {
    Reduced,
    Modal,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum SettingArg {
    I,
    Ii,
    Iii,
}

fn parse_rank(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("rank must be ≥ 1".into()),
        Ok(k) => Ok(k),
        Err(_) => Err(format!("'{s}' is not a non-negative integer")),
    }
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be ≥ 1".into()),
        Ok(v) => Ok(v),
        Err(_) => Err(format!("'{s}' is not a non-negative integer")),
    }
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Snapshot CSV (traj_id,t,x0,...).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "optimal")]
    method: MethodArg,
    /// Target rank (ignored by `exact`).
    #[arg(long, value_parser = parse_rank)]
    rank: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ModesArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_rank)]
    rank: usize,
    #[arg(long, value_enum, default_value = "exact")]
    variant: VariantArg,
    /// `first` (first snapshot of trajectory 1) or a CSV with header x0,x1,...
    #[arg(long, default_value = "first")]
    theta: String,
    #[arg(long, value_parser = parse_positive, default_value = "10")]
    horizon: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_rank)]
    rank: usize,
    #[arg(long, value_parser = parse_positive)]
    horizon: usize,
    #[arg(long, value_enum, default_value = "reduced")]
    path: PathArg,
    /// Mode variant used by the modal path.
    #[arg(long, value_enum, default_value = "exact")]
    variant: VariantArg,
    #[arg(long, default_value = "first")]
    theta: String,
    /// Keep every `stride`-th state (the first is always kept).
    #[arg(long, value_parser = parse_positive, default_value = "1")]
    stride: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Key-value config file; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Comma-separated subset of i,ii,iii.
    #[arg(long)]
    settings: Option<String>,
    /// Comma-separated subset of a,b,c.
    #[arg(long)]
    methods: Option<String>,
    /// Ranks, e.g. `1..40` or `5,10,30`.
    #[arg(long)]
    k_values: Option<String>,
    /// Record wall-clock time per fit (breaks byte-identical output).
    #[arg(long)]
    timing: bool,
    /// Result CSV path; defaults to the config's `output` or `bench.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    setting: SettingArg,
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 30)]
    r: usize,
    #[arg(long, default_value_t = 40)]
    m: usize,
    /// Snapshot CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long)]
    input: PathBuf,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Copy)]
pub struct Global {
    pub seed: Option<u64>,
    pub strict_rank: bool,
    pub svd_tol: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    let default_level = if matches!(cli.command, Command::Bench(_)) {
        "error"
    } else {
        "warn"
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level)).init();

    let global = Global {
        seed: cli.seed,
        strict_rank: cli.strict_rank,
        svd_tol: cli.svd_tol,
    };
    let result = match cli.command {
        Command::Fit(a) => commands::fit(&global, &a),
        Command::Modes(a) => commands::modes(&global, &a),
        Command::Simulate(a) => commands::simulate(&global, &a),
        Command::Bench(a) => commands::bench(&global, &a),
        Command::Generate(a) => commands::generate(&global, &a),
        Command::Validate(a) => commands::validate(&global, &a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

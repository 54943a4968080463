use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use penny_core::GroupAction;

mod commands;
mod settings;

/// Generate rolling penny trajectories, learn the horizontal symmetry
/// direction and evaluate the recovered Lie algebra.
#[derive(Parser, Debug)]
#[command(name = "penny", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write closed-form trajectories and a manifest to --out.
    Generate(GenerateArgs),
    /// Fit the vector field to a dataset; writes weights, loss history and metrics.
    Train(TrainArgs),
    /// Export the field, recovered Lie algebra and momentum residuals of trained weights.
    Eval(EvalArgs),
}

#[derive(Args, Debug, Default)]
pub struct Shared {
    /// Run file with `key = value` lines; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct PennyArgs {
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub spin_inertia: Option<f64>,
    #[arg(long)]
    pub yaw_inertia: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct SamplingArgs {
    /// Trajectory duration (s).
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Sampling step (s).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Half-width of the box the turning-circle centres are drawn from (m).
    #[arg(long)]
    pub center_spread: Option<f64>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// Master seed of the dataset RNG (required, here or in the run file).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_traj: Option<usize>,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[command(flatten)]
    pub penny: PennyArgs,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// Weight-initialization and shuffling seed (required, here or in the run file).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset directory written by `generate`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub group: Option<GroupAction>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Mini-batch size; full batch when absent.
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// Weights file written by `train`.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub group: Option<GroupAction>,
    /// Dataset whose penny and first trajectory are used; otherwise the
    /// penny and sampling flags describe them.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Seed for the evaluation trajectory when no dataset is given.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[command(flatten)]
    pub penny: PennyArgs,
    /// Number of phi samples (S1 x R2).
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Points per side of the (x, y) square (SE(2)).
    #[arg(long)]
    pub grid_side: Option<usize>,
    /// Half-width of the (x, y) square (SE(2)).
    #[arg(long)]
    pub grid_half_width: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(args) => commands::generate(args),
        Command::Train(args) => commands::train(args),
        Command::Eval(args) => commands::eval(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

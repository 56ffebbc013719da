use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Synthetic part-labeled point clouds, part-aware latent diffusion and
/// generation metrics.
#[derive(Debug, Parser)]
#[command(name = "pcgen", version)]
pub struct Cli {
    /// Seed for every random choice of the run; a config file's seed is used
    /// when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for distance matrices and generation. Results do not
    /// depend on it.
    #[arg(long, global = true, env = "PCGEN_THREADS", default_value_t = 1)]
    pub threads: usize,

    /// Output file or directory, depending on the command.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic set from a shape family.
    Synth(SynthArgs),
    /// Recombine parts of donor clouds into an attack set.
    Attack(AttackArgs),
    /// Split a set into train and test subsets.
    Split(SplitArgs),
    /// Train the stage-one VAE.
    TrainVae(TrainVaeArgs),
    /// Train the stage-two denoisers on a stage-one checkpoint.
    TrainDiffusion(TrainDiffusionArgs),
    /// Sample labeled clouds from a trained model.
    Generate(GenerateArgs),
    /// Re-generate every part of a cloud except one.
    Edit(EditArgs),
    /// Encode and decode a cloud with the VAE.
    Reconstruct(ReconstructArgs),
    /// Compare a generated set with a real set.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    StickBall,
    WingedBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignmentArg {
    None,
    CentroidSnap,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "stick-ball")]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Points per cloud, spread evenly over the parts.
    #[arg(long, default_value_t = 256)]
    pub points: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Style correlation between parts.
    #[arg(long)]
    pub correlation: Option<f64>,
    /// Family config JSON; flags other than --count are then ignored.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write one binary `.lpcs` file instead of one `.lpc` per cloud.
    #[arg(long)]
    pub binary: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AttackArgs {
    #[arg(long)]
    pub donors: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "centroid-snap")]
    pub mode: AlignmentArg,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Never reuse a donor part across outputs.
    #[arg(long)]
    pub unique_per_part: bool,
    /// Draw a different donor for every part of an output.
    #[arg(long)]
    pub distinct_donors: bool,
    #[arg(long)]
    pub contact_fraction: Option<f64>,
    /// Attack config JSON; its fields are the defaults for the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub binary: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Fraction of clouds in the train subset.
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub fraction: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SemiArgs {
    /// Drop the labels of all but a random fraction of the training clouds.
    #[arg(long)]
    pub semi_supervised: bool,
    #[arg(long, requires = "semi_supervised")]
    pub labeled_fraction: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainVaeArgs {
    /// Training set directory, manifest or file.
    #[arg(long)]
    pub data: PathBuf,
    /// Stage config JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub d_z: Option<usize>,
    #[arg(long)]
    pub d_h: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[command(flatten)]
    pub semi: SemiArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainDiffusionArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Stage-one checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Diffusion steps; the noise range is scaled to match.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub lambda_seg: Option<f64>,
    #[command(flatten)]
    pub semi: SemiArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Points per generated cloud.
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = pcgen_model::DEFAULT_EMA_ALPHA)]
    pub ema_alpha: f64,
    /// Condition the decoder on smoothed label probabilities.
    #[arg(long)]
    pub soft_labels: bool,
    #[arg(long)]
    pub binary: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EditArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Input `.lpc` cloud.
    #[arg(long)]
    pub input: PathBuf,
    /// Part to keep, by index or name.
    #[arg(long)]
    pub freeze_part: String,
    #[arg(long)]
    pub tau: usize,
    #[arg(long, default_value_t = pcgen_model::DEFAULT_EMA_ALPHA)]
    pub ema_alpha: f64,
    /// Provenance JSON; defaults to the output path with `.json`.
    #[arg(long)]
    pub provenance: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long, required_unless_present = "from_matrices")]
    pub real: Option<PathBuf>,
    #[arg(long = "gen", required_unless_present = "from_matrices")]
    pub generated: Option<PathBuf>,
    /// Distance for 1nna, cov and mmd: cd, emd or pcd.
    #[arg(long, default_value = "pcd")]
    pub distance: String,
    /// Comma-separated list of 1nna, cov, mmd, 1nna-p, cov-p, mmd-p, snap, miou.
    #[arg(long, value_delimiter = ',', default_value = "1nna,cov,mmd")]
    pub metrics: Vec<String>,
    /// Largest cloud accepted by exact EMD.
    #[arg(long)]
    pub emd_cap: Option<usize>,
    /// Directory receiving the distance blocks behind 1nna, cov and mmd.
    #[arg(long)]
    pub save_matrices: Option<PathBuf>,
    /// Recompute 1nna, cov and mmd from blocks saved by --save-matrices.
    #[arg(long, conflicts_with_all = ["real", "generated", "save_matrices"])]
    pub from_matrices: Option<PathBuf>,
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "hkt", version, about = "Trace the knowledge of students and their groups")]
pub struct Cli {
    /// `key = value` config file; later files override earlier ones.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Vec<PathBuf>,
    /// Override one config key.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bin raw logs into frames and write a dataset archive.
    Ingest(IngestArgs),
    /// Generate a synthetic dataset with known abilities.
    Synth,
    /// Train a model, optionally with k-fold cross validation.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Export per-frame concept mastery of a student and their group.
    Trace(TraceArgs),
    /// Export the per-frame relation graph of a group.
    Graph(GraphArgs),
    /// Compare analytic and numeric gradients of the full objective.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long, value_name = "PATH")]
    pub logs: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub qmatrix: PathBuf,
    /// Frame length in seconds.
    #[arg(long, value_name = "SECS")]
    pub span: Option<i64>,
    /// Share of members that must answer an exercise for a group interaction.
    #[arg(long, value_name = "FRACTION")]
    pub coverage: Option<f64>,
    /// Keep small groups and sparse students.
    #[arg(long)]
    pub no_filter: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset archive; defaults to the one named by `--replay`.
    #[arg(long, value_name = "PATH", required_unless_present = "replay")]
    pub dataset: Option<PathBuf>,
    /// Run k-fold cross validation instead of a single split.
    #[arg(long, value_name = "K")]
    pub folds: Option<usize>,
    #[arg(long, value_name = "N")]
    pub epochs: Option<usize>,
    /// Rerun the configuration recorded in a manifest.
    #[arg(
        long,
        value_name = "MANIFEST",
        conflicts_with_all = ["folds", "epochs", "no_reciprocal", "no_dyngraph", "no_attention_agg", "no_contrastive"]
    )]
    pub replay: Option<PathBuf>,
    #[arg(long)]
    pub no_reciprocal: bool,
    #[arg(long)]
    pub no_dyngraph: bool,
    #[arg(long)]
    pub no_attention_agg: bool,
    #[arg(long)]
    pub no_contrastive: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub dataset: PathBuf,
    /// Restrict scoring to these group ids.
    #[arg(long, value_name = "ID", value_delimiter = ',')]
    pub groups: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub dataset: PathBuf,
    #[arg(long, value_name = "ID")]
    pub student: String,
    /// Concept ids; defaults to every concept with tagged exercises.
    #[arg(long, value_name = "ID", value_delimiter = ',')]
    pub concepts: Vec<String>,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub dataset: PathBuf,
    #[arg(long, value_name = "ID")]
    pub group: String,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    #[arg(long, default_value_t = 3)]
    pub members: usize,
    #[arg(long, default_value_t = 3)]
    pub frames: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    /// Gradient magnitude below which errors are measured absolutely;
    /// finite-difference round-off is about 1e-10 at the default step.
    #[arg(long, default_value_t = 1e-5)]
    pub floor: f64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

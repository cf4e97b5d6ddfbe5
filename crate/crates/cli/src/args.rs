use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use emocluster_core::corpus::Format;
use emocluster_core::metrics::NmiNormalizer;
use emocluster_core::nn::Stencil;
use emocluster_core::trainer::gradcheck::CheckTarget;
use emocluster_core::trainer::Mode;
use serde::Serialize;

/// Parse a snake_case enum through its serde representation.
fn serde_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_normalizer(s: &str) -> Result<NmiNormalizer, String> {
    serde_enum(s)
}

fn parse_stencil(s: &str) -> Result<Stencil, String> {
    serde_enum(s)
}

#[derive(Debug, Parser)]
#[command(
    name = "emocluster",
    version,
    about = "Intra-speaker clustering of speaker embeddings and cluster-driven contrastive pretraining",
    args_override_self = true
)]
pub struct Cli {
    /// Log progress to standard error (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(untagged)]
pub enum Command {
    /// Generate a synthetic labelled embedding corpus.
    GenSynth(GenSynthArgs),
    /// Length-normalize, cap and cluster every speaker with k-means.
    Cluster(ClusterArgs),
    /// Score a clustering run against emotion labels (NMI, ARI, purity, silhouette).
    EvalClusters(EvalClustersArgs),
    /// Mine anchor/positive/negative tuples from a clustering run.
    MinePairs(MinePairsArgs),
    /// Pretrain a trunk on emotion-unlabelled embeddings.
    Pretrain(PretrainArgs),
    /// Fine-tune an emotion classifier on a speaker split and report test UAR.
    Probe(ProbeArgs),
    /// Compare all pretraining modes over several fine-tuning seeds.
    Protocol(ProtocolArgs),
    /// Finite-difference check of the analytic gradients.
    GradCheck(GradCheckArgs),
    /// Project a corpus to 2D with PCA and export csv (and optionally svg).
    Project(ProjectArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenSynth(_) => "gen-synth",
            Command::Cluster(_) => "cluster",
            Command::EvalClusters(_) => "eval-clusters",
            Command::MinePairs(_) => "mine-pairs",
            Command::Pretrain(_) => "pretrain",
            Command::Probe(_) => "probe",
            Command::Protocol(_) => "protocol",
            Command::GradCheck(_) => "grad-check",
            Command::Project(_) => "project",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct CorpusArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Corpus encoding; guessed from the extension when omitted.
    #[arg(long, value_parser = clap::value_parser!(Format))]
    pub format: Option<Format>,
}

impl CorpusArgs {
    pub fn resolved_format(&self) -> Format {
        self.format.unwrap_or_else(|| Format::from_path(&self.corpus))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenSynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(Format))]
    pub format: Option<Format>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub n_speakers: usize,
    #[arg(long, default_value_t = 4)]
    pub n_emotions: usize,
    #[arg(long, default_value_t = 80)]
    pub utts_per_cell: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub speaker_spread: f64,
    /// Norm of each emotion offset (delta).
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Within-cell noise std (sigma_w).
    #[arg(long, default_value_t = 0.25)]
    pub sigma: f64,
    /// Weight of the speaker-independent component of emotion offsets.
    #[arg(long, default_value_t = 0.0)]
    pub emotion_shared: f64,
    #[arg(long)]
    pub signal_dim: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub nuisance_noise: f64,
    #[arg(long, default_value_t = 1)]
    pub speaker_groups: usize,
    #[arg(long, default_value_t = 0.0)]
    pub group_spread: f64,
    #[arg(long)]
    pub groups_share_emotions: bool,
    #[arg(long, default_value = "spk")]
    pub speaker_prefix: String,
    /// Length-normalize the generated vectors.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 300)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub kmeans_tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Utterances kept per speaker (seeded sample).
    #[arg(long, default_value_t = 320)]
    pub max_utts: usize,
    /// Cluster raw vectors instead of length-normalized ones.
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalClustersArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "arithmetic", value_parser = parse_normalizer)]
    pub normalizer: NmiNormalizer,
    /// Compute silhouettes on raw vectors instead of length-normalized ones.
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct MinePairsArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Clusters per speaker N; defaults to the k of the run.
    #[arg(long)]
    pub n_clusters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Skip anchors with fewer than N/2 negative clusters instead of using what is available.
    #[arg(long)]
    pub strict_negatives: bool,
}

/// Hyperparameters shared by every command that trains.
#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 5000)]
    pub steps: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    /// Emotion fine-tuning learning rate.
    #[arg(long, default_value_t = 1e-5)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub pretrain_lr: f64,
    #[arg(long, default_value_t = 0.01)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    /// Intra-speaker clusters used for pair mining during pretraining.
    #[arg(long, default_value_t = 20)]
    pub n_clusters: usize,
    #[arg(long, default_value_t = 10)]
    pub kmeans_restarts: usize,
    #[arg(long, default_value_t = 1.0)]
    pub mtl_w_con: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mtl_w_spk: f64,
    #[arg(long, default_value_t = 1.0)]
    pub grl_lambda: f64,
    #[arg(long)]
    pub include_positive_denominator: bool,
    #[arg(long)]
    pub resample_pairs: bool,
    #[arg(long, default_value_t = 64)]
    pub trunk_hidden: usize,
    #[arg(long)]
    pub projection_dim: Option<usize>,
    #[arg(long, default_value_t = 128)]
    pub projection_out: usize,
    #[arg(long, default_value_t = 64)]
    pub head_hidden: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct PretrainArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    /// Checkpoint manifest path; parameters go next to it as `.params.bin`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "contrastive", value_parser = clap::value_parser!(Mode))]
    pub mode: Mode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the per-step loss curve as json.
    #[arg(long)]
    pub losses: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    /// Fraction of training utterances that keep their emotion label.
    #[arg(long, default_value_t = 0.05)]
    pub label_fraction: f64,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// Seed of the speaker split and the label subsample.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    /// Pretrained checkpoint; a fresh trunk is used when omitted.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Fine-tuning seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ProtocolArgs {
    /// Emotion corpus used for fine-tuning and evaluation.
    #[command(flatten)]
    pub input: CorpusArgs,
    /// Separate corpus for pretraining (labels ignored).
    #[arg(long, conflicts_with = "pretrain_speakers")]
    pub pretrain_corpus: Option<PathBuf>,
    /// Use the first N speakers (sorted ids) of --corpus for pretraining and
    /// the rest for fine-tuning. Without this or --pretrain-corpus the whole
    /// corpus is pretrained on without labels.
    #[arg(long)]
    pub pretrain_speakers: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = Mode::ALL.to_vec(), value_parser = clap::value_parser!(Mode))]
    pub modes: Vec<Mode>,
    /// Fine-tuning seeds.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1u64, 2, 3, 4, 5])]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 0)]
    pub pretrain_seed: u64,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct GradCheckArgs {
    #[arg(long, default_value = "all", value_parser = clap::value_parser!(CheckTarget))]
    pub head: CheckTarget,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, default_value = "central", value_parser = parse_stencil)]
    pub stencil: Stencil,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the full report as json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ProjectArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    /// Clustering run whose cluster ids are added to the csv.
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// csv with columns x,y,spk_id,emotion,cluster.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Project raw vectors instead of length-normalized ones.
    #[arg(long)]
    pub no_normalize: bool,
}

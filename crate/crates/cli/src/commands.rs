use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use emocluster_core::clustering::{cluster_speakers, ClusteringRun, KMeansConfig};
use emocluster_core::corpus::{self, Corpus, SynthSpec};
use emocluster_core::metrics::evaluate_run;
use emocluster_core::nn::{load_checkpoint, save_checkpoint};
use emocluster_core::objectives::MtlWeights;
use emocluster_core::pair_miner::{mine_tuples, save_tuples, MiningConfig};
use emocluster_core::projection::{pca_2d, to_svg, write_csv};
use emocluster_core::trainer::gradcheck::{run_grad_checks, FiniteDifference};
use emocluster_core::trainer::{
    evaluate_uar, pretrain, run_protocol, train_ser, ArchConfig, Mode, ProtocolConfig, SerSplits, SplitFractions,
    TrainConfig,
};
use emocluster_core::{canonical, seed, Error};
use serde::Serialize;
use tracing::{info, warn};

use crate::args::*;

/// What a successful command produced, for the run manifest.
pub struct Outcome {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    /// Output the manifest is attached to; `None` skips the manifest.
    pub primary: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("gradient check failed: max relative error {max_rel_error:.3e} > tol {tol:.1e}")]
    GradCheckFailed { max_rel_error: f64, tol: f64 },
}

type Result<T> = std::result::Result<T, CommandError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn load(input: &CorpusArgs) -> Result<Corpus> {
    let c = corpus::load_corpus(&input.corpus, input.resolved_format())?;
    info!(records = c.len(), speakers = c.n_speakers(), dim = c.dim(), "loaded {}", input.corpus.display());
    Ok(c)
}

fn load_run(path: &Path) -> Result<ClusteringRun> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text).map_err(Error::from)?)
}

fn normalized(c: Corpus, skip: bool) -> Result<Corpus> {
    Ok(if skip { c } else { corpus::length_normalize(&c)? })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    Ok(canonical::write_file(path, value)?)
}

impl TrainArgs {
    pub fn to_config(&self, mode: Mode, seeds: Vec<u64>) -> TrainConfig {
        TrainConfig {
            mode,
            steps: self.steps,
            batch_size: self.batch_size,
            lr: self.lr,
            pretrain_lr: self.pretrain_lr,
            weight_decay: self.weight_decay,
            epochs_ser: self.epochs,
            patience: self.patience,
            tau: self.tau,
            n_clusters: self.n_clusters,
            kmeans_restarts: self.kmeans_restarts,
            seeds,
            mtl_weights: MtlWeights {
                w_contrastive: self.mtl_w_con,
                w_speaker: self.mtl_w_spk,
                adversarial: false,
                grl_lambda: self.grl_lambda,
            },
            resample_pairs_each_epoch: self.resample_pairs,
            include_positive_in_denominator: self.include_positive_denominator,
            arch: ArchConfig {
                trunk_hidden: self.trunk_hidden,
                projection_dim: self.projection_dim,
                projection_out: self.projection_out,
                head_hidden: self.head_hidden,
            },
        }
    }
}

impl SplitArgs {
    fn fractions(&self) -> SplitFractions {
        SplitFractions {
            train: self.train_fraction,
            val: self.val_fraction,
            test: self.test_fraction,
        }
    }
}

pub fn gen_synth(a: &GenSynthArgs) -> Result<Outcome> {
    let spec = SynthSpec {
        n_speakers: a.n_speakers,
        n_emotions: a.n_emotions,
        utts_per_cell: a.utts_per_cell,
        dim: a.dim,
        speaker_spread: a.speaker_spread,
        emotion_offset_norm: a.delta,
        within_noise: a.sigma,
        seed: a.seed,
        emotion_shared: a.emotion_shared,
        signal_dim: a.signal_dim,
        nuisance_noise: a.nuisance_noise,
        speaker_groups: a.speaker_groups,
        group_spread: a.group_spread,
        groups_share_emotions: a.groups_share_emotions,
        speaker_prefix: a.speaker_prefix.clone(),
    };
    let c = normalized(corpus::generate_synthetic(&spec)?, !a.normalize)?;
    let format = a.format.unwrap_or_else(|| corpus::Format::from_path(&a.out));
    corpus::save_corpus(&c, &a.out, format)?;
    info!(records = c.len(), "wrote {}", a.out.display());
    Ok(Outcome {
        inputs: vec![],
        outputs: vec![a.out.clone()],
        seed: Some(a.seed),
        primary: Some(a.out.clone()),
    })
}

pub fn cluster(a: &ClusterArgs) -> Result<Outcome> {
    let c = normalized(load(&a.input)?, a.no_normalize)?;
    let c = corpus::cap_per_speaker(&c, a.max_utts, seed::derive(a.seed, "cap"))?;
    let run = cluster_speakers(
        &c,
        &KMeansConfig {
            k: a.k,
            max_iters: a.max_iters,
            tol: a.kmeans_tol,
            n_restarts: a.restarts,
            seed: a.seed,
        },
    )?;
    for w in &run.warnings {
        warn!("{w}");
    }
    write_json(&a.out, &run)?;
    Ok(Outcome {
        inputs: vec![a.input.corpus.clone()],
        outputs: vec![a.out.clone()],
        seed: Some(a.seed),
        primary: Some(a.out.clone()),
    })
}

pub fn eval_clusters(a: &EvalClustersArgs) -> Result<Outcome> {
    let c = normalized(load(&a.input)?, a.no_normalize)?;
    let run = load_run(&a.run)?;
    let report = evaluate_run(&run, &c, a.normalizer)?;
    for w in &report.warnings {
        warn!("{w}");
    }
    write_json(&a.out, &report)?;
    print!("{}", report.to_table());
    Ok(Outcome {
        inputs: vec![a.input.corpus.clone(), a.run.clone()],
        outputs: vec![a.out.clone()],
        seed: None,
        primary: Some(a.out.clone()),
    })
}

pub fn mine_pairs(a: &MinePairsArgs) -> Result<Outcome> {
    let c = load(&a.input)?;
    let run = load_run(&a.run)?;
    let mined = mine_tuples(
        &run,
        &c,
        &MiningConfig {
            n_clusters: a.n_clusters.unwrap_or(run.config.k),
            seed: a.seed,
            allow_fewer_negatives: !a.strict_negatives,
        },
    )?;
    for w in &mined.warnings {
        warn!("{w}");
    }
    info!(tuples = mined.tuples.len(), skipped = mined.skipped.total(), "mined pairs");
    save_tuples(&mined.tuples, &a.out)?;
    Ok(Outcome {
        inputs: vec![a.input.corpus.clone(), a.run.clone()],
        outputs: vec![a.out.clone()],
        seed: Some(a.seed),
        primary: Some(a.out.clone()),
    })
}

pub fn pretrain_cmd(a: &PretrainArgs) -> Result<Outcome> {
    let c = load(&a.input)?.without_labels();
    let config = a.train.to_config(a.mode, vec![a.seed]);
    let outcome = pretrain(&c, &config, a.seed)?;
    let s = &outcome.summary;
    info!(
        first = ?s.first_loss_mean,
        last = ?s.final_loss_mean,
        speaker_accuracy = ?s.speaker_accuracy,
        "pretrained {} for {} steps",
        a.mode,
        s.steps
    );
    save_checkpoint(&outcome.checkpoint, &a.out)?;
    let mut outputs = vec![a.out.clone(), a.out.with_extension("params.bin")];
    if let Some(path) = &a.losses {
        write_json(path, &outcome.losses)?;
        outputs.push(path.clone());
    }
    Ok(Outcome {
        inputs: vec![a.input.corpus.clone()],
        outputs,
        seed: Some(a.seed),
        primary: Some(a.out.clone()),
    })
}

#[derive(Serialize)]
struct ProbeReport {
    test: emocluster_core::trainer::EvalResult,
    validation: emocluster_core::trainer::EvalResult,
    best_epoch: usize,
    /// Validation accuracy after every epoch.
    val_accuracy: Vec<f64>,
    n_train_labelled: usize,
    n_test: usize,
}

pub fn probe(a: &ProbeArgs) -> Result<Outcome> {
    let c = load(&a.input)?;
    let splits = SerSplits::with_label_fraction(&c, a.split.fractions(), a.split.label_fraction, a.split.data_seed)?;
    let ckpt = a.checkpoint.as_deref().map(load_checkpoint).transpose()?;
    let config = a.train.to_config(Mode::None, vec![a.seed]);
    let out = train_ser(ckpt.as_ref(), &splits, &config, a.seed)?;
    let test = evaluate_uar(&out.model, &splits.test, a.seed)?;
    println!("test UAR {:.2}  (best epoch {})", 100.0 * test.uar, out.best_epoch);
    let report = ProbeReport {
        test,
        validation: out.validation,
        best_epoch: out.best_epoch,
        val_accuracy: out.val_accuracy,
        n_train_labelled: splits.train.len(),
        n_test: splits.test.len(),
    };
    write_json(&a.out, &report)?;
    let mut inputs = vec![a.input.corpus.clone()];
    inputs.extend(a.checkpoint.clone());
    Ok(Outcome {
        inputs,
        outputs: vec![a.out.clone()],
        seed: Some(a.seed),
        primary: Some(a.out.clone()),
    })
}

pub fn protocol(a: &ProtocolArgs) -> Result<Outcome> {
    let c = load(&a.input)?;
    let mut inputs = vec![a.input.corpus.clone()];
    let (pre, ser) = match (&a.pretrain_corpus, a.pretrain_speakers) {
        (Some(path), _) => {
            inputs.push(path.clone());
            let format = a.input.format.unwrap_or_else(|| corpus::Format::from_path(path));
            (corpus::load_corpus(path, format)?, c)
        }
        (None, Some(n)) => {
            let ids = c.speaker_ids();
            if n == 0 || n >= ids.len() {
                return Err(Error::InvalidArgument(format!(
                    "--pretrain-speakers must lie in [1, {}), got {n}",
                    ids.len()
                ))
                .into());
            }
            let held: std::collections::BTreeSet<&String> = ids[..n].iter().collect();
            (c.filter(|r| held.contains(&r.spk_id)), c.filter(|r| !held.contains(&r.spk_id)))
        }
        (None, None) => (c.clone(), c),
    };
    let config = ProtocolConfig {
        train: a.train.to_config(Mode::None, a.seeds.clone()),
        modes: a.modes.clone(),
        label_fraction: a.split.label_fraction,
        split: a.split.fractions(),
        data_seed: a.split.data_seed,
        pretrain_seed: a.pretrain_seed,
    };
    let report = run_protocol(&pre, &ser, &config)?;
    print!("{}", report.to_table());
    write_json(&a.out, &report)?;
    Ok(Outcome {
        inputs,
        outputs: vec![a.out.clone()],
        seed: Some(a.pretrain_seed),
        primary: Some(a.out.clone()),
    })
}

pub fn grad_check(a: &GradCheckArgs) -> Result<Outcome> {
    let fd = FiniteDifference {
        eps: a.eps,
        stencil: a.stencil,
    };
    let summary = run_grad_checks(a.head, a.tol, fd, a.seed)?;
    for c in &summary.checks {
        println!("{:<48} {:.3e}", c.name, c.report.max_rel_error);
    }
    println!(
        "max relative error {:.3e} (tol {:.1e}): {}",
        summary.max_rel_error,
        summary.tol,
        if summary.passed { "ok" } else { "FAILED" }
    );
    if let Some(out) = &a.out {
        write_json(out, &summary)?;
    }
    if !summary.passed {
        return Err(CommandError::GradCheckFailed {
            max_rel_error: summary.max_rel_error,
            tol: summary.tol,
        });
    }
    Ok(Outcome {
        inputs: vec![],
        outputs: a.out.iter().cloned().collect(),
        seed: Some(a.seed),
        primary: a.out.clone(),
    })
}

pub fn project(a: &ProjectArgs) -> Result<Outcome> {
    let c = normalized(load(&a.input)?, a.no_normalize)?;
    let run = a.run.as_deref().map(load_run).transpose()?;
    let projection = pca_2d(&c, run.as_ref())?;
    let file = File::create(&a.out).map_err(io_err(&a.out))?;
    write_csv(&projection, BufWriter::new(file))?;
    let mut outputs = vec![a.out.clone()];
    if let Some(svg) = &a.svg {
        std::fs::write(svg, to_svg(&projection)).map_err(io_err(svg))?;
        outputs.push(svg.clone());
    }
    let mut inputs = vec![a.input.corpus.clone()];
    inputs.extend(a.run.clone());
    Ok(Outcome {
        inputs,
        outputs,
        seed: None,
        primary: Some(a.out.clone()),
    })
}

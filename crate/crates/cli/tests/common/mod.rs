#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_emocluster")
}

/// Run the binary inside `dir` with a fixed thread count and quiet logging.
pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env("EMOCLUSTER_THREADS", "1")
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn emocluster")
}

/// Like `run_in` but panics with the captured stderr on a nonzero exit.
pub fn ok_in(dir: &Path, args: &[&str]) -> Output {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "emocluster {args:?} exited with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn sha256(path: &Path) -> String {
    let bytes = std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// Manifest contents without the wall-clock field.
pub fn manifest_without_duration(output: &Path) -> serde_json::Value {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    let mut v = json(&PathBuf::from(name));
    v.as_object_mut().unwrap().remove("duration_secs");
    v
}

/// One small end-to-end pipeline. Returns the primary output file names.
pub fn pipeline(dir: &Path) -> Vec<&'static str> {
    let steps: &[&[&str]] = &[
        &["gen-synth", "--out", "c.jsonl", "--n-speakers", "6", "--utts-per-cell", "10", "--seed", "1",
          "--emotion-shared", "0.8", "--speaker-spread", "0.3"],
        &["gen-synth", "--out", "c.bin", "--n-speakers", "3", "--utts-per-cell", "5", "--normalize"],
        &["cluster", "--corpus", "c.jsonl", "--out", "run.json", "--k", "4", "--restarts", "3"],
        &["eval-clusters", "--corpus", "c.jsonl", "--run", "run.json", "--out", "eval.json"],
        &["mine-pairs", "--corpus", "c.jsonl", "--run", "run.json", "--out", "tuples.jsonl", "--seed", "2"],
        &["pretrain", "--corpus", "c.jsonl", "--out", "ckpt.json", "--mode", "mtl", "--steps", "40",
          "--n-clusters", "4", "--kmeans-restarts", "2", "--losses", "losses.csv"],
        &["probe", "--corpus", "c.jsonl", "--checkpoint", "ckpt.json", "--out", "probe.json", "--epochs", "3",
          "--label-fraction", "0.5"],
        &["protocol", "--corpus", "c.jsonl", "--pretrain-speakers", "3", "--out", "protocol.json", "--steps", "30",
          "--n-clusters", "4", "--kmeans-restarts", "1", "--epochs", "2", "--seeds", "1,2", "--label-fraction", "0.5"],
        &["grad-check", "--head", "contrastive", "--out", "grad.json"],
        &["project", "--corpus", "c.jsonl", "--run", "run.json", "--out", "proj.csv", "--svg", "proj.svg"],
    ];
    for args in steps {
        ok_in(dir, args);
    }
    vec![
        "c.jsonl", "c.bin", "run.json", "eval.json", "tuples.jsonl", "ckpt.json", "ckpt.params.bin", "losses.csv",
        "probe.json", "protocol.json", "grad.json", "proj.csv", "proj.svg",
    ]
}

/// Files that carry a run manifest.
pub const WITH_MANIFEST: [&str; 10] = [
    "c.jsonl", "c.bin", "run.json", "eval.json", "tuples.jsonl", "ckpt.json", "probe.json", "protocol.json",
    "grad.json", "proj.csv",
];

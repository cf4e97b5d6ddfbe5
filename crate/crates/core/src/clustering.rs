//! Per-speaker k-means over length-normalised embeddings.
//!
//! k-means++ seeding, Lloyd iterations, best-of-restarts by inertia. Every
//! random choice is drawn from a stream derived from the configured seed, so
//! results are reproducible and independent of speaker order.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::corpus::{self, Corpus};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Relative center-shift threshold for convergence.
    pub tol: f64,
    pub n_restarts: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 4,
            max_iters: 300,
            tol: 1e-6,
            n_restarts: 10,
            seed: 0,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if self.n_restarts == 0 {
            return Err(Error::InvalidArgument("n_restarts must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidArgument("tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub inertia: f64,
    pub effective_k: usize,
    /// Final inertia of every restart, in restart order.
    pub restart_inertias: Vec<f64>,
}

/// Outcome of a single Lloyd run from fixed initial centers.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub assignments: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after every assignment step, ending with the returned one.
    pub history: Vec<f64>,
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(points: &[Vec<f64>], centers: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    points.iter().map(|p| nearest(p, centers)).unzip()
}

fn distinct_count(points: &[Vec<f64>]) -> usize {
    points
        .iter()
        .map(|p| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
        .collect::<BTreeSet<_>>()
        .len()
}

/// k-means++ seeding: first center uniform, the rest proportional to the
/// squared distance to the nearest already-chosen center.
pub fn kmeans_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = d2.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            // guard against landing on a zero-weight tail after roundoff
            while d2[chosen] == 0.0 {
                chosen -= 1;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &c));
        }
        centers.push(c);
    }
    centers
}

/// Recompute centers as member means. Empty clusters take the point farthest
/// from its current center (among clusters with more than one member).
fn update_centers(
    points: &[Vec<f64>],
    assignments: &mut [usize],
    dists: &mut [f64],
    k: usize,
) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    let mut counts = vec![0usize; k];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let donor = (0..points.len())
            .filter(|&i| counts[assignments[i]] > 1)
            .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
        if let Some(i) = donor {
            counts[assignments[i]] -= 1;
            assignments[i] = j;
            dists[i] = 0.0;
            counts[j] = 1;
        }
    }
    let mut sums = vec![vec![0.0; dim]; k];
    for (p, &a) in points.iter().zip(assignments.iter()) {
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(&counts)
        .map(|(s, &n)| {
            if n == 0 {
                s
            } else {
                s.into_iter().map(|v| v / n as f64).collect()
            }
        })
        .collect()
}

/// Lloyd iterations from `init` until the largest center movement falls
/// below `tol * (1 + |center|)` or `max_iters` is reached.
pub fn lloyd(points: &[Vec<f64>], init: Vec<Vec<f64>>, max_iters: usize, tol: f64) -> LloydRun {
    let k = init.len();
    let mut centers = init;
    let mut history = Vec::new();
    for _ in 0..max_iters {
        let (mut assignments, mut dists) = assign(points, &centers);
        history.push(dists.iter().sum());
        let updated = update_centers(points, &mut assignments, &mut dists, k);
        let converged = centers.iter().zip(&updated).all(|(old, new)| {
            let shift = squared_distance(old, new).sqrt();
            let scale = new.iter().map(|v| v * v).sum::<f64>().sqrt();
            shift < tol * (1.0 + scale)
        });
        centers = updated;
        if converged {
            break;
        }
    }
    let (assignments, dists) = assign(points, &centers);
    let inertia = dists.iter().sum();
    history.push(inertia);
    LloydRun {
        assignments,
        centers,
        inertia,
        history,
    }
}

/// k-means with k-means++ seeding and `n_restarts` restarts; the restart with
/// minimal inertia wins (earliest on ties).
///
/// When `k` exceeds the number of distinct points the run uses that number
/// instead; `effective_k` reports the count of nonempty clusters.
pub fn kmeans(points: &[Vec<f64>], config: &KMeansConfig) -> Result<KMeansResult> {
    config.validate()?;
    let first = points
        .first()
        .ok_or_else(|| Error::InvalidArgument("kmeans needs at least one point".into()))?;
    if let Some(p) = points.iter().find(|p| p.len() != first.len()) {
        return Err(Error::DimensionMismatch {
            expected: first.len(),
            found: p.len(),
            context: "kmeans input".into(),
        });
    }
    let k = config.k.min(distinct_count(points));

    let mut best: Option<LloydRun> = None;
    let mut restart_inertias = Vec::with_capacity(config.n_restarts);
    for r in 0..config.n_restarts {
        let mut rng = seed::rng(seed::derive_index(config.seed, r as u64));
        let init = kmeans_plus_plus(points, k, &mut rng);
        let run = lloyd(points, init, config.max_iters, config.tol);
        restart_inertias.push(run.inertia);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    let effective_k = best.assignments.iter().collect::<BTreeSet<_>>().len();
    Ok(KMeansResult {
        assignments: best.assignments,
        centers: best.centers,
        inertia: best.inertia,
        effective_k,
        restart_inertias,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerClustering {
    pub spk_id: String,
    pub assignments: BTreeMap<String, usize>,
    pub centers: Vec<Vec<f64>>,
    pub inertia: f64,
    pub effective_k: usize,
    pub seed_used: u64,
}

impl SpeakerClustering {
    pub fn n_clusters(&self) -> usize {
        self.centers.len()
    }

    /// Members of every cluster, utterance ids in sorted order.
    pub fn members(&self) -> Vec<Vec<&str>> {
        let mut out = vec![Vec::new(); self.centers.len()];
        for (utt, &c) in &self.assignments {
            out[c].push(utt.as_str());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringRun {
    pub config: KMeansConfig,
    pub per_speaker: BTreeMap<String, SpeakerClustering>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ClusteringRun {
    /// Cluster id of an utterance, if it was clustered.
    pub fn cluster_of(&self, spk_id: &str, utt_id: &str) -> Option<usize> {
        self.per_speaker.get(spk_id)?.assignments.get(utt_id).copied()
    }
}

/// Cluster each speaker's embeddings independently.
///
/// Per-speaker seeds come from `(config.seed, spk_id)` and points are taken in
/// utterance-id order, so record order does not matter. Speakers are processed
/// in parallel and merged by key.
pub fn cluster_speakers(corpus: &Corpus, config: &KMeansConfig) -> Result<ClusteringRun> {
    config.validate()?;
    let mut warnings = Vec::new();
    if !corpus::is_normalized(corpus, 1e-6) {
        let msg = "corpus is not length-normalized; clustering raw vectors".to_string();
        warn!("{msg}");
        warnings.push(msg);
    }
    let speakers: Vec<(&str, &[usize])> = corpus.speakers().collect();
    let results: Vec<(SpeakerClustering, Option<String>)> = speakers
        .par_iter()
        .map(|(spk, indices)| {
            // utterance-id order makes the result independent of record order
            let mut indices = indices.to_vec();
            indices.sort_by(|&a, &b| corpus.records()[a].utt_id.cmp(&corpus.records()[b].utt_id));
            let points: Vec<Vec<f64>> =
                indices.iter().map(|&i| corpus.records()[i].to_f64()).collect();
            let seed_used = seed::derive(config.seed, spk);
            let cfg = KMeansConfig {
                seed: seed_used,
                ..config.clone()
            };
            let res = kmeans(&points, &cfg)?;
            let note = (res.effective_k < config.k).then(|| {
                format!(
                    "speaker {spk}: {} points support only {} of {} clusters",
                    points.len(),
                    res.effective_k,
                    config.k
                )
            });
            let assignments = indices
                .iter()
                .zip(&res.assignments)
                .map(|(&i, &c)| (corpus.records()[i].utt_id.clone(), c))
                .collect();
            Ok((
                SpeakerClustering {
                    spk_id: spk.to_string(),
                    assignments,
                    centers: res.centers,
                    inertia: res.inertia,
                    effective_k: res.effective_k,
                    seed_used,
                },
                note,
            ))
        })
        .collect::<Result<_>>()?;

    let mut per_speaker = BTreeMap::new();
    for (sc, note) in results {
        if let Some(n) = note {
            warn!("{n}");
            warnings.push(n);
        }
        per_speaker.insert(sc.spk_id.clone(), sc);
    }
    Ok(ClusteringRun {
        config: config.clone(),
        per_speaker,
        warnings,
    })
}

/// Euclidean distances between all pairs of cluster centers.
pub fn center_distances(clustering: &SpeakerClustering) -> Vec<Vec<f64>> {
    let c = &clustering.centers;
    (0..c.len())
        .map(|i| {
            (0..c.len())
                .map(|j| if i == j { 0.0 } else { squared_distance(&c[i], &c[j]).sqrt() })
                .collect()
        })
        .collect()
}

//! Agreement between intra-speaker clusters and emotion labels.
//!
//! NMI, ARI and purity compare two partitions through their contingency
//! table; silhouette measures cluster cohesion in embedding space. Reports
//! average each metric uniformly over speakers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::clustering::ClusteringRun;
use crate::corpus::Corpus;
use crate::{Error, Result};

/// Normaliser applied to mutual information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NmiNormalizer {
    #[default]
    Arithmetic,
    Geometric,
    Min,
    Max,
}

/// Contingency table of two labelings. Rows follow the sorted first labeling,
/// columns the sorted second one.
#[derive(Debug, Clone, PartialEq)]
pub struct Contingency {
    pub counts: Vec<Vec<usize>>,
    pub row_sums: Vec<usize>,
    pub col_sums: Vec<usize>,
    pub n: usize,
}

fn compact<T: Ord>(labels: &[T]) -> (Vec<usize>, usize) {
    let mut uniq: Vec<&T> = labels.iter().collect();
    uniq.sort();
    uniq.dedup();
    let ids = labels
        .iter()
        .map(|l| uniq.binary_search(&l).expect("label present"))
        .collect();
    (ids, uniq.len())
}

impl Contingency {
    pub fn new<A: Ord, B: Ord>(clusters: &[A], labels: &[B]) -> Result<Self> {
        if clusters.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: clusters.len(),
                right: labels.len(),
            });
        }
        let (ci, nc) = compact(clusters);
        let (li, nl) = compact(labels);
        let mut counts = vec![vec![0usize; nl]; nc];
        for (&c, &l) in ci.iter().zip(&li) {
            counts[c][l] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..nl).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        Ok(Self {
            counts,
            row_sums,
            col_sums,
            n: clusters.len(),
        })
    }
}

fn entropy(sums: &[usize], n: usize) -> f64 {
    let n = n as f64;
    sums.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn mutual_information(t: &Contingency) -> f64 {
    let n = t.n as f64;
    let mut mi = 0.0;
    for (i, row) in t.counts.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij == 0 {
                continue;
            }
            let nij = nij as f64;
            mi += nij / n * (n * nij / (t.row_sums[i] as f64 * t.col_sums[j] as f64)).ln();
        }
    }
    mi.max(0.0)
}

/// Normalized mutual information with the default arithmetic-mean normaliser.
pub fn nmi<A: Ord, B: Ord>(clusters: &[A], labels: &[B]) -> Result<f64> {
    nmi_with(clusters, labels, NmiNormalizer::Arithmetic)
}

/// Normalized mutual information.
///
/// If either partition has a single class the score is 1 when both do
/// (identical partitions) and 0 otherwise.
pub fn nmi_with<A: Ord, B: Ord>(clusters: &[A], labels: &[B], norm: NmiNormalizer) -> Result<f64> {
    let t = Contingency::new(clusters, labels)?;
    if t.n == 0 {
        return Err(Error::InvalidArgument("nmi needs at least one item".into()));
    }
    let single_rows = t.row_sums.len() == 1;
    let single_cols = t.col_sums.len() == 1;
    if single_rows || single_cols {
        return Ok(if single_rows && single_cols { 1.0 } else { 0.0 });
    }
    let hc = entropy(&t.row_sums, t.n);
    let hl = entropy(&t.col_sums, t.n);
    let denom = match norm {
        NmiNormalizer::Arithmetic => 0.5 * (hc + hl),
        NmiNormalizer::Geometric => (hc * hl).sqrt(),
        NmiNormalizer::Min => hc.min(hl),
        NmiNormalizer::Max => hc.max(hl),
    };
    Ok((mutual_information(&t) / denom).clamp(0.0, 1.0))
}

fn comb2(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Adjusted Rand index (Hubert–Arabie). Degenerate tables where the expected
/// and maximal index coincide only arise for identical partitions and score 1.
pub fn ari<A: Ord, B: Ord>(clusters: &[A], labels: &[B]) -> Result<f64> {
    let t = Contingency::new(clusters, labels)?;
    if t.n < 2 {
        return Err(Error::InvalidArgument("ari needs at least two items".into()));
    }
    let index: f64 = t.counts.iter().flatten().map(|&c| comb2(c)).sum();
    let a: f64 = t.row_sums.iter().map(|&c| comb2(c)).sum();
    let b: f64 = t.col_sums.iter().map(|&c| comb2(c)).sum();
    let expected = a * b / comb2(t.n);
    let max = 0.5 * (a + b);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Fraction of items that belong to the majority label of their cluster.
pub fn purity<A: Ord, B: Ord>(clusters: &[A], labels: &[B]) -> Result<f64> {
    let t = Contingency::new(clusters, labels)?;
    if t.n == 0 {
        return Err(Error::InvalidArgument("purity needs at least one item".into()));
    }
    let hits: usize = t
        .counts
        .iter()
        .map(|row| row.iter().copied().max().unwrap_or(0))
        .sum();
    Ok(hits as f64 / t.n as f64)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Mean silhouette coefficient with Euclidean distance. Points in singleton
/// clusters score 0, as does a point with `a = b = 0`.
pub fn silhouette<L: Ord>(points: &[Vec<f64>], labels: &[L]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: points.len(),
            right: labels.len(),
        });
    }
    let (ids, k) = compact(labels);
    if k < 2 {
        return Err(Error::SilhouetteUndefined(format!(
            "need at least two clusters, found {k}"
        )));
    }
    let mut sizes = vec![0usize; k];
    for &c in &ids {
        sizes[c] += 1;
    }
    let n = points.len();
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        if sizes[ids[i]] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                sums[ids[j]] += euclid(&points[i], &points[j]);
            }
        }
        let a = sums[ids[i]] / (sizes[ids[i]] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != ids[i])
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeakerMetrics {
    pub nmi: f64,
    pub ari: f64,
    pub purity: f64,
    /// `None` when all labelled points of the speaker fall in one cluster.
    pub silhouette: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricAverages {
    pub nmi: f64,
    pub ari: f64,
    pub purity: f64,
    pub silhouette: Option<f64>,
    pub n_speakers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMetricsReport {
    pub per_speaker: BTreeMap<String, SpeakerMetrics>,
    pub averages: MetricAverages,
    pub normalizer: NmiNormalizer,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Score every speaker's clustering against the corpus emotion labels and
/// average uniformly over speakers.
///
/// Utterances without an emotion label are excluded; speakers left with
/// fewer than two labelled utterances are dropped. Both emit warnings.
pub fn evaluate_run(
    run: &ClusteringRun,
    corpus: &Corpus,
    normalizer: NmiNormalizer,
) -> Result<ClusterMetricsReport> {
    let speakers: Vec<_> = run.per_speaker.iter().collect();
    let results: Vec<(String, Option<SpeakerMetrics>, Vec<String>)> = speakers
        .par_iter()
        .map(|(spk, sc)| {
            let mut notes = Vec::new();
            let mut clusters = Vec::new();
            let mut labels = Vec::new();
            let mut points = Vec::new();
            let mut unlabeled = 0usize;
            for (utt, &c) in &sc.assignments {
                let rec = corpus.get(utt).ok_or_else(|| {
                    Error::InvalidArgument(format!("clustered utterance {utt:?} not in corpus"))
                })?;
                match &rec.emotion {
                    Some(e) => {
                        clusters.push(c);
                        labels.push(e.as_str());
                        points.push(rec.to_f64());
                    }
                    None => unlabeled += 1,
                }
            }
            if unlabeled > 0 {
                notes.push(format!(
                    "speaker {spk}: {unlabeled} utterances without emotion label excluded"
                ));
            }
            if clusters.len() < 2 {
                notes.push(format!(
                    "speaker {spk}: fewer than 2 labelled utterances, dropped from averages"
                ));
                return Ok(((*spk).clone(), None, notes));
            }
            let silhouette = match silhouette(&points, &clusters) {
                Ok(s) => Some(s),
                Err(Error::SilhouetteUndefined(_)) => None,
                Err(e) => return Err(e),
            };
            let m = SpeakerMetrics {
                nmi: nmi_with(&clusters, &labels, normalizer)?,
                ari: ari(&clusters, &labels)?,
                purity: purity(&clusters, &labels)?,
                silhouette,
                n: clusters.len(),
            };
            Ok(((*spk).clone(), Some(m), notes))
        })
        .collect::<Result<_>>()?;

    let mut per_speaker = BTreeMap::new();
    let mut warnings = Vec::new();
    for (spk, m, notes) in results {
        for n in notes {
            warn!("{n}");
            warnings.push(n);
        }
        if let Some(m) = m {
            per_speaker.insert(spk, m);
        }
    }
    let count = per_speaker.len();
    let mean = |f: fn(&SpeakerMetrics) -> f64| {
        if count == 0 {
            0.0
        } else {
            per_speaker.values().map(f).sum::<f64>() / count as f64
        }
    };
    let sil: Vec<f64> = per_speaker.values().filter_map(|m| m.silhouette).collect();
    let averages = MetricAverages {
        nmi: mean(|m| m.nmi),
        ari: mean(|m| m.ari),
        purity: mean(|m| m.purity),
        silhouette: (!sil.is_empty()).then(|| sil.iter().sum::<f64>() / sil.len() as f64),
        n_speakers: count,
    };
    Ok(ClusterMetricsReport {
        per_speaker,
        averages,
        normalizer,
        warnings,
    })
}

impl ClusterMetricsReport {
    /// Aligned plain-text table: NMI, ARI, Purity, Silhouette per speaker,
    /// then the speaker average.
    pub fn to_table(&self) -> String {
        let width = self
            .per_speaker
            .keys()
            .map(String::len)
            .chain(["speaker".len(), "average".len()])
            .max()
            .unwrap_or(7);
        let sil = |s: Option<f64>| s.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>8}  {:>8}  {:>8}  {:>10}",
            "speaker", "NMI", "ARI", "Purity", "Silhouette"
        );
        for (spk, m) in &self.per_speaker {
            let _ = writeln!(
                out,
                "{spk:<width$}  {:>8.4}  {:>8.4}  {:>8.4}  {:>10}",
                m.nmi,
                m.ari,
                m.purity,
                sil(m.silhouette)
            );
        }
        let a = &self.averages;
        let _ = writeln!(
            out,
            "{:<width$}  {:>8.4}  {:>8.4}  {:>8.4}  {:>10}",
            "average",
            a.nmi,
            a.ari,
            a.purity,
            sil(a.silhouette)
        );
        out
    }
}

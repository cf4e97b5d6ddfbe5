//! Contrastive tuple mining from intra-speaker clusters.
//!
//! For every anchor utterance the positive comes from the anchor's own
//! cluster and one negative comes from each of the `N/2` clusters whose
//! centers lie farthest from the anchor's cluster center. All samples stay
//! within the anchor's speaker.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::clustering::{center_distances, ClusteringRun, SpeakerClustering};
use crate::corpus::Corpus;
use crate::{canonical, seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NegativeSample {
    pub utt_id: String,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContrastiveTuple {
    pub anchor: String,
    pub positive: String,
    /// Farthest cluster first.
    pub negatives: Vec<NegativeSample>,
    #[serde(rename = "spk")]
    pub spk_id: String,
}

impl ContrastiveTuple {
    /// Checks that need no clustering: distinct anchor/positive, anchor not
    /// among the negatives, pairwise distinct negative clusters.
    pub fn check_internal(&self) -> std::result::Result<(), String> {
        if self.anchor == self.positive {
            return Err("anchor equals positive".into());
        }
        if self.negatives.is_empty() {
            return Err("no negatives".into());
        }
        if self.negatives.iter().any(|n| n.utt_id == self.anchor || n.utt_id == self.positive) {
            return Err("anchor or positive listed as negative".into());
        }
        let mut clusters: Vec<usize> = self.negatives.iter().map(|n| n.cluster).collect();
        clusters.sort_unstable();
        if clusters.windows(2).any(|w| w[0] == w[1]) {
            return Err("negatives share a source cluster".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningConfig {
    /// Number of intra-speaker clusters N; N/2 (floor) negatives per anchor.
    pub n_clusters: usize,
    pub seed: u64,
    pub allow_fewer_negatives: bool,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            n_clusters: 20,
            seed: 0,
            allow_fewer_negatives: true,
        }
    }
}

impl MiningConfig {
    pub fn negatives_per_anchor(&self) -> usize {
        self.n_clusters / 2
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipReport {
    /// Anchors alone in their cluster (no positive available).
    pub singleton_cluster: usize,
    /// Anchors of speakers with fewer than two nonempty clusters.
    pub too_few_clusters: usize,
    /// Anchors dropped because fewer than N/2 negatives were available and
    /// `allow_fewer_negatives` is off.
    pub insufficient_negatives: usize,
}

impl SkipReport {
    pub fn total(&self) -> usize {
        self.singleton_cluster + self.too_few_clusters + self.insufficient_negatives
    }

    fn add(&mut self, other: &SkipReport) {
        self.singleton_cluster += other.singleton_cluster;
        self.too_few_clusters += other.too_few_clusters;
        self.insufficient_negatives += other.insufficient_negatives;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiningOutput {
    /// Ordered by (speaker, anchor).
    pub tuples: Vec<ContrastiveTuple>,
    pub skipped: SkipReport,
    pub warnings: Vec<String>,
}

/// Other clusters ordered by decreasing center distance from `cluster`,
/// ties broken by ascending index. Empty clusters are left out.
pub fn farthest_clusters(sc: &SpeakerClustering, members: &[Vec<&str>], cluster: usize) -> Vec<usize> {
    let dist = center_distances(sc);
    let mut others: Vec<usize> = (0..sc.n_clusters())
        .filter(|&c| c != cluster && !members[c].is_empty())
        .collect();
    others.sort_by(|&a, &b| dist[cluster][b].total_cmp(&dist[cluster][a]).then(a.cmp(&b)));
    others
}

fn mine_speaker(
    spk: &str,
    sc: &SpeakerClustering,
    config: &MiningConfig,
) -> (Vec<ContrastiveTuple>, SkipReport) {
    let members = sc.members();
    let mut skipped = SkipReport::default();
    let nonempty = members.iter().filter(|m| !m.is_empty()).count();
    if nonempty < 2 {
        skipped.too_few_clusters = sc.assignments.len();
        return (Vec::new(), skipped);
    }
    let want = config.negatives_per_anchor();
    let rankings: Vec<Vec<usize>> = (0..sc.n_clusters())
        .map(|c| {
            let mut r = farthest_clusters(sc, &members, c);
            r.truncate(want);
            r
        })
        .collect();

    let mut tuples = Vec::new();
    for (anchor, &cluster) in &sc.assignments {
        let own = &members[cluster];
        if own.len() < 2 {
            skipped.singleton_cluster += 1;
            continue;
        }
        let selected = &rankings[cluster];
        if selected.len() < want && !config.allow_fewer_negatives {
            skipped.insufficient_negatives += 1;
            continue;
        }
        let mut rng = seed::rng(seed::derive(config.seed, anchor));
        // uniform over the cluster minus the anchor
        let anchor_pos = own.binary_search(&anchor.as_str()).expect("anchor in its cluster");
        let mut pick = rng.random_range(0..own.len() - 1);
        if pick >= anchor_pos {
            pick += 1;
        }
        let negatives = selected
            .iter()
            .map(|&c| NegativeSample {
                utt_id: members[c][rng.random_range(0..members[c].len())].to_string(),
                cluster: c,
            })
            .collect();
        tuples.push(ContrastiveTuple {
            anchor: anchor.clone(),
            positive: own[pick].to_string(),
            negatives,
            spk_id: spk.to_string(),
        });
    }
    (tuples, skipped)
}

/// Mine one tuple per eligible anchor. Deterministic per `(seed, utt_id)`.
pub fn mine_tuples(run: &ClusteringRun, corpus: &Corpus, config: &MiningConfig) -> Result<MiningOutput> {
    if config.n_clusters < 2 {
        return Err(Error::InvalidArgument("n_clusters must be at least 2".into()));
    }
    let mut warnings = Vec::new();
    if config.n_clusters % 2 == 1 {
        warnings.push(format!(
            "odd cluster count {} uses {} negatives per anchor",
            config.n_clusters,
            config.negatives_per_anchor()
        ));
    }
    if run.config.k != config.n_clusters {
        warnings.push(format!(
            "clustering used k={} but mining expects N={}",
            run.config.k, config.n_clusters
        ));
    }
    for sc in run.per_speaker.values() {
        if let Some(utt) = sc.assignments.keys().find(|u| corpus.get(u).is_none()) {
            return Err(Error::InvalidArgument(format!(
                "clustered utterance {utt:?} missing from corpus"
            )));
        }
    }

    let speakers: Vec<(&String, &SpeakerClustering)> = run.per_speaker.iter().collect();
    let per: Vec<(Vec<ContrastiveTuple>, SkipReport)> = speakers
        .par_iter()
        .map(|(spk, sc)| mine_speaker(spk, sc, config))
        .collect();

    let mut tuples = Vec::new();
    let mut skipped = SkipReport::default();
    for (t, s) in per {
        tuples.extend(t);
        skipped.add(&s);
    }
    if skipped.total() > 0 {
        warnings.push(format!("{} anchors skipped: {:?}", skipped.total(), skipped));
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok(MiningOutput {
        tuples,
        skipped,
        warnings,
    })
}

pub fn write_tuples(tuples: &[ContrastiveTuple], mut out: impl Write) -> Result<()> {
    for t in tuples {
        let line = canonical::to_line(t)?;
        out.write_all(line.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Error::malformed("output", e.to_string()))?;
    }
    Ok(())
}

pub fn read_tuples(reader: impl BufRead) -> Result<Vec<ContrastiveTuple>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let location = format!("line {}", i + 1);
        let line = line.map_err(|e| Error::malformed(&location, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let t: ContrastiveTuple =
            serde_json::from_str(&line).map_err(|e| Error::malformed(&location, e.to_string()))?;
        t.check_internal().map_err(|m| Error::malformed(&location, m))?;
        out.push(t);
    }
    Ok(out)
}

pub fn save_tuples(tuples: &[ContrastiveTuple], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_tuples(tuples, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_tuples(path: &Path) -> Result<Vec<ContrastiveTuple>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_tuples(BufReader::new(file))
}

/// Per-speaker cluster count summary, handy for diagnostics.
pub fn nonempty_clusters(run: &ClusteringRun) -> BTreeMap<String, usize> {
    run.per_speaker
        .iter()
        .map(|(s, sc)| (s.clone(), sc.members().iter().filter(|m| !m.is_empty()).count()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::KMeansConfig;
    use crate::corpus::EmbeddingRecord;

    fn toy_run() -> (ClusteringRun, Corpus) {
        // one speaker, two clusters of three points each
        let mut records = Vec::new();
        let mut assignments = BTreeMap::new();
        for i in 0..6 {
            let c = i / 3;
            let id = format!("u{i}");
            records.push(EmbeddingRecord {
                utt_id: id.clone(),
                spk_id: "s".into(),
                emotion: None,
                vec: vec![c as f32, 1.0],
            });
            assignments.insert(id, c);
        }
        let sc = SpeakerClustering {
            spk_id: "s".into(),
            assignments,
            centers: vec![vec![0.0, 1.0], vec![1.0, 1.0]],
            inertia: 0.0,
            effective_k: 2,
            seed_used: 0,
        };
        let run = ClusteringRun {
            config: KMeansConfig {
                k: 20,
                ..Default::default()
            },
            per_speaker: [("s".to_string(), sc)].into_iter().collect(),
            warnings: vec![],
        };
        (run, Corpus::new(records).unwrap())
    }

    #[test]
    fn two_clusters_give_one_negative() {
        let (run, corpus) = toy_run();
        let out = mine_tuples(&run, &corpus, &MiningConfig::default()).unwrap();
        assert_eq!(out.tuples.len(), 6);
        for t in &out.tuples {
            assert_eq!(t.negatives.len(), 1);
            let ca = run.cluster_of("s", &t.anchor).unwrap();
            assert_eq!(run.cluster_of("s", &t.positive), Some(ca));
            assert_ne!(t.negatives[0].cluster, ca);
            t.check_internal().unwrap();
        }
    }

    #[test]
    fn strict_mode_skips_short_tuples() {
        let (run, corpus) = toy_run();
        let cfg = MiningConfig {
            allow_fewer_negatives: false,
            ..Default::default()
        };
        let out = mine_tuples(&run, &corpus, &cfg).unwrap();
        assert!(out.tuples.is_empty());
        assert_eq!(out.skipped.insufficient_negatives, 6);
    }

    #[test]
    fn singleton_and_single_cluster_speakers_skip() {
        let (mut run, corpus) = toy_run();
        let sc = run.per_speaker.get_mut("s").unwrap();
        sc.assignments.insert("u1".into(), 1);
        sc.assignments.insert("u2".into(), 1);
        let out = mine_tuples(&run, &corpus, &MiningConfig::default()).unwrap();
        assert_eq!(out.skipped.singleton_cluster, 1);
        assert_eq!(out.tuples.len(), 5);

        let sc = run.per_speaker.get_mut("s").unwrap();
        sc.assignments.insert("u0".into(), 1);
        let out = mine_tuples(&run, &corpus, &MiningConfig::default()).unwrap();
        assert_eq!(out.skipped.too_few_clusters, 6);
        assert!(out.tuples.is_empty());
    }

    #[test]
    fn tuple_jsonl_round_trip_and_errors() {
        let (run, corpus) = toy_run();
        let tuples = mine_tuples(&run, &corpus, &MiningConfig::default()).unwrap().tuples;
        let mut buf = Vec::new();
        write_tuples(&tuples, &mut buf).unwrap();
        let first = String::from_utf8(buf.clone()).unwrap();
        assert!(first.starts_with(r#"{"anchor":"u0","negatives":[{"cluster":1,"utt_id":"#));
        assert_eq!(read_tuples(buf.as_slice()).unwrap(), tuples);

        let mut empty = Vec::new();
        write_tuples(&[], &mut empty).unwrap();
        assert!(empty.is_empty());
        assert!(read_tuples(empty.as_slice()).unwrap().is_empty());

        let bad = "{\"anchor\":\"a\",\"positive\":\"a\",\"negatives\":[{\"utt_id\":\"b\",\"cluster\":1}],\"spk\":\"s\"}\nnot json\n";
        let err = read_tuples(bad.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let err = read_tuples(bad.lines().nth(1).unwrap().as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }
}

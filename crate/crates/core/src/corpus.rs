//! Embedding corpora: utterance-level speaker embeddings with speaker and
//! (optional) emotion metadata.
//!
//! Vectors are stored as `f32`, the on-disk precision of both formats, and
//! widened to `f64` for every computation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

/// Emotion categories used when a synthetic corpus has four or fewer emotions.
pub const DEFAULT_EMOTIONS: [&str; 4] = ["neutral", "happy", "sad", "angry"];

const BIN_MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub utt_id: String,
    pub spk_id: String,
    pub emotion: Option<String>,
    pub vec: Vec<f32>,
}

impl EmbeddingRecord {
    pub fn to_f64(&self) -> Vec<f64> {
        self.vec.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn norm(&self) -> f64 {
        self.vec
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }
}

/// An immutable, validated collection of [`EmbeddingRecord`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    records: Vec<EmbeddingRecord>,
    dim: usize,
    speakers: BTreeMap<String, Vec<usize>>,
    by_utt: HashMap<String, usize>,
}

impl Corpus {
    /// Build a corpus, inferring the dimension from the first record.
    pub fn new(records: Vec<EmbeddingRecord>) -> Result<Self> {
        let dim = records.first().map_or(0, |r| r.vec.len());
        Self::with_dim(dim, records)
    }

    pub fn with_dim(dim: usize, records: Vec<EmbeddingRecord>) -> Result<Self> {
        let mut speakers: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut by_utt = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if r.vec.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.vec.len(),
                    context: format!("utterance {:?}", r.utt_id),
                });
            }
            if r.vec.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteVector(r.utt_id.clone()));
            }
            if by_utt.insert(r.utt_id.clone(), i).is_some() {
                return Err(Error::DuplicateUtterance(r.utt_id.clone()));
            }
            speakers.entry(r.spk_id.clone()).or_default().push(i);
        }
        Ok(Self {
            records,
            dim,
            speakers,
            by_utt,
        })
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<EmbeddingRecord> {
        self.records
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Speaker ids in sorted order with the indices of their records.
    pub fn speakers(&self) -> impl Iterator<Item = (&str, &[usize])> {
        self.speakers.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn speaker_ids(&self) -> Vec<String> {
        self.speakers.keys().cloned().collect()
    }

    pub fn n_speakers(&self) -> usize {
        self.speakers.len()
    }

    pub fn speaker_indices(&self, spk_id: &str) -> Option<&[usize]> {
        self.speakers.get(spk_id).map(Vec::as_slice)
    }

    pub fn get(&self, utt_id: &str) -> Option<&EmbeddingRecord> {
        self.by_utt.get(utt_id).map(|&i| &self.records[i])
    }

    pub fn index_of(&self, utt_id: &str) -> Option<usize> {
        self.by_utt.get(utt_id).copied()
    }

    /// Sorted set of emotion labels present in the corpus.
    pub fn emotions(&self) -> Vec<String> {
        self.records
            .iter()
            .filter_map(|r| r.emotion.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Keep only the records for which `keep` returns true.
    pub fn filter(&self, mut keep: impl FnMut(&EmbeddingRecord) -> bool) -> Corpus {
        let records = self.records.iter().filter(|r| keep(r)).cloned().collect();
        Corpus::with_dim(self.dim, records).expect("subset of a valid corpus is valid")
    }

    /// Records with emotion labels removed.
    pub fn without_labels(&self) -> Corpus {
        let records = self
            .records
            .iter()
            .map(|r| EmbeddingRecord {
                emotion: None,
                ..r.clone()
            })
            .collect();
        Corpus::with_dim(self.dim, records).expect("relabelled corpus is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Jsonl,
    Bin,
}

impl Format {
    /// Guess the format from a file extension, defaulting to jsonl.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("emb") => Format::Bin,
            _ => Format::Jsonl,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "bin" => Ok(Format::Bin),
            other => Err(Error::InvalidArgument(format!(
                "unknown corpus format {other:?} (expected jsonl or bin)"
            ))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Jsonl => "jsonl",
            Format::Bin => "bin",
        })
    }
}

pub fn load_corpus(path: &Path, format: Format) -> Result<Corpus> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        Format::Jsonl => read_jsonl(BufReader::new(file)),
        Format::Bin => {
            let mut bytes = Vec::new();
            std::io::Read::read_to_end(&mut BufReader::new(file), &mut bytes)
                .map_err(|e| Error::io(path, e))?;
            decode_bin(&bytes)
        }
    }
}

pub fn save_corpus(corpus: &Corpus, path: &Path, format: Format) -> Result<()> {
    let bytes = match format {
        Format::Jsonl => {
            let mut buf = Vec::new();
            write_jsonl(corpus, &mut buf).map_err(|e| Error::io(path, e))?;
            buf
        }
        Format::Bin => encode_bin(corpus)?,
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(reader: impl BufRead) -> Result<Corpus> {
    let mut records: Vec<EmbeddingRecord> = Vec::new();
    let mut dim = None;
    for (lineno, line) in reader.lines().enumerate() {
        let location = format!("line {}", lineno + 1);
        let line = line.map_err(|e| Error::malformed(&location, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EmbeddingRecord =
            serde_json::from_str(&line).map_err(|e| Error::malformed(&location, e.to_string()))?;
        let expected = *dim.get_or_insert(record.vec.len());
        if record.vec.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: record.vec.len(),
                context: location,
            });
        }
        if record.vec.iter().any(|v| !v.is_finite()) {
            return Err(Error::malformed(location, "non-finite vector entry"));
        }
        records.push(record);
    }
    Corpus::with_dim(dim.unwrap_or(0), records)
}

pub fn write_jsonl(corpus: &Corpus, mut out: impl Write) -> std::io::Result<()> {
    for r in corpus.records() {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn encode_bin(corpus: &Corpus) -> Result<Vec<u8>> {
    fn put_str(buf: &mut Vec<u8>, s: &str, what: &str) -> Result<()> {
        let len = u16::try_from(s.len()).map_err(|_| {
            Error::InvalidArgument(format!("{what} {s:?} longer than 65535 bytes"))
        })?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(s.as_bytes());
        Ok(())
    }

    let dim = u32::try_from(corpus.dim())
        .map_err(|_| Error::InvalidArgument("dimension exceeds u32".into()))?;
    let mut buf = Vec::with_capacity(8 + corpus.len() * (16 + 4 * corpus.dim()));
    buf.extend_from_slice(BIN_MAGIC);
    buf.extend_from_slice(&dim.to_le_bytes());
    for r in corpus.records() {
        put_str(&mut buf, &r.utt_id, "utt_id")?;
        put_str(&mut buf, &r.spk_id, "spk_id")?;
        match &r.emotion {
            Some(e) => {
                buf.push(1);
                put_str(&mut buf, e, "emotion")?;
            }
            None => buf.push(0),
        }
        for v in &r.vec {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::malformed(
                format!("offset {}", self.pos),
                format!("truncated {what}"),
            )),
        }
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u16(what)? as usize;
        let start = self.pos;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| {
            Error::malformed(format!("offset {start}"), format!("{what} is not valid utf-8"))
        })
    }
}

pub fn decode_bin(bytes: &[u8]) -> Result<Corpus> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != BIN_MAGIC {
        return Err(Error::malformed("offset 0", "bad magic (expected EMB1)"));
    }
    let d = cur.take(4, "dimension")?;
    let dim = u32::from_le_bytes([d[0], d[1], d[2], d[3]]) as usize;
    let mut records = Vec::new();
    while cur.pos < bytes.len() {
        let start = cur.pos;
        let utt_id = cur.string("utt_id")?;
        let spk_id = cur.string("spk_id")?;
        let flag_at = cur.pos;
        let emotion = match cur.take(1, "emotion flag")?[0] {
            0 => None,
            1 => Some(cur.string("emotion")?),
            other => {
                return Err(Error::malformed(
                    format!("offset {flag_at}"),
                    format!("invalid emotion flag {other}"),
                ))
            }
        };
        let raw = cur.take(dim * 4, "vector")?;
        let vec: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if vec.iter().any(|v| !v.is_finite()) {
            return Err(Error::malformed(
                format!("offset {start}"),
                "non-finite vector entry",
            ));
        }
        records.push(EmbeddingRecord {
            utt_id,
            spk_id,
            emotion,
            vec,
        });
    }
    Corpus::with_dim(dim, records)
}

/// Scale every vector to unit Euclidean norm.
pub fn length_normalize(corpus: &Corpus) -> Result<Corpus> {
    let records = corpus
        .records()
        .iter()
        .map(|r| {
            let norm = r.norm();
            if norm == 0.0 {
                return Err(Error::ZeroNorm(r.utt_id.clone()));
            }
            Ok(EmbeddingRecord {
                vec: r.vec.iter().map(|&v| (f64::from(v) / norm) as f32).collect(),
                ..r.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Corpus::with_dim(corpus.dim(), records)
}

/// True when every vector has norm within `tol` of 1.
pub fn is_normalized(corpus: &Corpus, tol: f64) -> bool {
    corpus.records().iter().all(|r| (r.norm() - 1.0).abs() <= tol)
}

/// Keep at most `max_utts` records per speaker, chosen by seeded uniform
/// sampling without replacement. Each speaker's draw depends only on
/// `(seed, spk_id)`; retained records keep their corpus order.
pub fn cap_per_speaker(corpus: &Corpus, max_utts: usize, seed: u64) -> Result<Corpus> {
    if max_utts == 0 {
        return Err(Error::InvalidArgument("max_utts must be at least 1".into()));
    }
    let mut keep = vec![false; corpus.len()];
    for (spk, indices) in corpus.speakers() {
        if indices.len() <= max_utts {
            indices.iter().for_each(|&i| keep[i] = true);
        } else {
            let mut rng = seed::rng(seed::derive(seed, spk));
            for pick in index::sample(&mut rng, indices.len(), max_utts) {
                keep[indices[pick]] = true;
            }
        }
    }
    let records = corpus
        .records()
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(r, _)| r.clone())
        .collect();
    Corpus::with_dim(corpus.dim(), records)
}

/// Parameters of the additive-Gaussian synthetic corpus.
///
/// Each utterance vector is `mu_s + o_{s,e} + noise`, where `mu_s` is the
/// speaker mean, `o_{s,e}` an offset of norm `emotion_offset_norm` per
/// (speaker, emotion) and `noise` isotropic with std `within_noise`.
/// The ratio `emotion_offset_norm / within_noise` controls how separable the
/// intra-speaker emotion groups are.
///
/// The optional fields add structure used by the pretraining experiments and
/// all default to the plain model above:
///
/// - `emotion_shared` in `[0, 1]` mixes a speaker-independent direction per
///   emotion into each offset direction, so emotions generalise across speakers.
/// - `signal_dim` confines speaker means and emotion offsets to the first
///   `signal_dim` coordinates.
/// - `nuisance_noise` adds extra per-utterance noise on the remaining coordinates.
/// - `speaker_groups` > 1 splits speakers round-robin into groups, each with
///   a centre of std `group_spread` added to its speakers' means. Groups have
///   their own shared emotion directions unless `groups_share_emotions` is
///   set, in which case the group centres act as different baselines along
///   the same emotion directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_speakers: usize,
    pub n_emotions: usize,
    pub utts_per_cell: usize,
    pub dim: usize,
    pub speaker_spread: f64,
    pub emotion_offset_norm: f64,
    pub within_noise: f64,
    pub seed: u64,
    pub emotion_shared: f64,
    pub signal_dim: Option<usize>,
    pub nuisance_noise: f64,
    pub speaker_groups: usize,
    pub group_spread: f64,
    pub groups_share_emotions: bool,
    /// Prefix for generated speaker ids, so several corpora can be disjoint.
    pub speaker_prefix: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_speakers: 10,
            n_emotions: 4,
            utts_per_cell: 80,
            dim: 32,
            speaker_spread: 1.0,
            emotion_offset_norm: 1.0,
            within_noise: 0.25,
            seed: 0,
            emotion_shared: 0.0,
            signal_dim: None,
            nuisance_noise: 0.0,
            speaker_groups: 1,
            group_spread: 0.0,
            groups_share_emotions: false,
            speaker_prefix: "spk".into(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.n_speakers == 0 || self.n_emotions == 0 || self.utts_per_cell == 0 {
            return bad("n_speakers, n_emotions and utts_per_cell must be positive");
        }
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if !(self.speaker_spread >= 0.0 && self.emotion_offset_norm >= 0.0) {
            return bad("speaker_spread and emotion_offset_norm must be non-negative");
        }
        if !(self.within_noise > 0.0) {
            return bad("within_noise must be positive");
        }
        if !(0.0..=1.0).contains(&self.emotion_shared) {
            return bad("emotion_shared must lie in [0, 1]");
        }
        if !(self.nuisance_noise >= 0.0 && self.group_spread >= 0.0) {
            return bad("nuisance_noise and group_spread must be non-negative");
        }
        if self.speaker_groups == 0 {
            return bad("speaker_groups must be positive");
        }
        if let Some(s) = self.signal_dim {
            if s == 0 || s > self.dim {
                return bad("signal_dim must lie in [1, dim]");
            }
        }
        Ok(())
    }

    pub fn emotion_names(&self) -> Vec<String> {
        (0..self.n_emotions)
            .map(|e| match DEFAULT_EMOTIONS.get(e) {
                Some(name) if self.n_emotions <= DEFAULT_EMOTIONS.len() => (*name).to_string(),
                _ => format!("emo{e}"),
            })
            .collect()
    }
}

fn gaussian(rng: &mut impl rand::Rng, n: usize, std: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * std
        })
        .collect()
}

fn unit_direction(rng: &mut impl rand::Rng, n: usize) -> Vec<f64> {
    loop {
        let v = gaussian(rng, n, 1.0);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let signal = spec.signal_dim.unwrap_or(spec.dim);
    let emotions = spec.emotion_names();

    let n_direction_sets = if spec.groups_share_emotions { 1 } else { spec.speaker_groups };
    let shared: Vec<Vec<Vec<f64>>> = (0..n_direction_sets)
        .map(|_| {
            (0..spec.n_emotions)
                .map(|_| unit_direction(&mut rng, signal))
                .collect()
        })
        .collect();
    let centres: Vec<Vec<f64>> = if spec.speaker_groups > 1 {
        (0..spec.speaker_groups)
            .map(|_| gaussian(&mut rng, signal, spec.group_spread))
            .collect()
    } else {
        vec![vec![0.0; signal]]
    };

    let mut records = Vec::with_capacity(spec.n_speakers * spec.n_emotions * spec.utts_per_cell);
    for s in 0..spec.n_speakers {
        let spk_id = format!("{}{:03}", spec.speaker_prefix, s);
        let group = s % spec.speaker_groups;
        let mean: Vec<f64> = gaussian(&mut rng, signal, spec.speaker_spread)
            .iter()
            .zip(&centres[group])
            .map(|(m, c)| m + c)
            .collect();
        for (e, emotion) in emotions.iter().enumerate() {
            let own = unit_direction(&mut rng, signal);
            let mixed: Vec<f64> = own
                .iter()
                .zip(&shared[group % n_direction_sets][e])
                .map(|(o, g)| (1.0 - spec.emotion_shared) * o + spec.emotion_shared * g)
                .collect();
            let norm = mixed.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            let offset: Vec<f64> = mixed
                .iter()
                .map(|x| x / norm * spec.emotion_offset_norm)
                .collect();
            for u in 0..spec.utts_per_cell {
                let noise = gaussian(&mut rng, spec.dim, spec.within_noise);
                let nuisance = gaussian(&mut rng, spec.dim - signal, spec.nuisance_noise);
                let vec = (0..spec.dim)
                    .map(|d| {
                        let base = if d < signal {
                            mean[d] + offset[d]
                        } else {
                            nuisance[d - signal]
                        };
                        (base + noise[d]) as f32
                    })
                    .collect();
                records.push(EmbeddingRecord {
                    utt_id: format!("{spk_id}_{emotion}_{u:04}"),
                    spk_id: spk_id.clone(),
                    emotion: Some(emotion.clone()),
                    vec,
                });
            }
        }
    }
    Corpus::with_dim(spec.dim, records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(utt: &str, spk: &str, vec: Vec<f32>) -> EmbeddingRecord {
        EmbeddingRecord {
            utt_id: utt.into(),
            spk_id: spk.into(),
            emotion: Some("happy".into()),
            vec,
        }
    }

    #[test]
    fn minimal_jsonl_loads() {
        let text = r#"{"utt_id":"a","spk_id":"s","emotion":"sad","vec":[1,2,3]}
{"utt_id":"b","spk_id":"s","emotion":null,"vec":[0.5,0.25,0]}
"#;
        let c = read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.dim(), 3);
        assert_eq!(c.get("b").unwrap().emotion, None);
        assert_eq!(c.speaker_indices("s").unwrap(), &[0, 1]);
    }

    #[test]
    fn jsonl_dimension_mismatch_names_line() {
        let text = r#"{"utt_id":"a","spk_id":"s","emotion":null,"vec":[1,2,3]}
{"utt_id":"b","spk_id":"s","emotion":null,"vec":[1,2,3,4]}
"#;
        let err = read_jsonl(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, found: 4, .. }));
        assert!(err.to_string().contains("dimension mismatch"));
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn jsonl_malformed_and_duplicate() {
        let err = read_jsonl("{\"utt_id\": 3}\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let dup = r#"{"utt_id":"a","spk_id":"s","emotion":null,"vec":[1]}
{"utt_id":"a","spk_id":"t","emotion":null,"vec":[2]}
"#;
        assert!(matches!(
            read_jsonl(dup.as_bytes()),
            Err(Error::DuplicateUtterance(id)) if id == "a"
        ));
    }

    #[test]
    fn bin_rejects_bad_magic_and_truncation() {
        assert!(decode_bin(b"EMB2\x01\0\0\0").is_err());
        let c = Corpus::new(vec![rec("a", "s", vec![1.0, 2.0])]).unwrap();
        let bytes = encode_bin(&c).unwrap();
        let err = decode_bin(&bytes[..bytes.len() - 1]).unwrap_err();
        assert!(err.to_string().contains("offset"), "{err}");
    }

    #[test]
    fn normalize_three_four_five() {
        let c = Corpus::new(vec![rec("a", "s", vec![3.0, 4.0]), rec("b", "s", vec![1.0, 0.0])])
            .unwrap();
        let n = length_normalize(&c).unwrap();
        assert_eq!(n.get("a").unwrap().vec, vec![0.6, 0.8]);
        assert_eq!(n.get("b").unwrap().vec, vec![1.0, 0.0]);
    }

    #[test]
    fn normalize_zero_vector_names_utterance() {
        let c = Corpus::new(vec![rec("zero", "s", vec![0.0, 0.0])]).unwrap();
        match length_normalize(&c) {
            Err(Error::ZeroNorm(id)) => assert_eq!(id, "zero"),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn speaker_corpus(counts: &[(&str, usize)]) -> Corpus {
        let mut records = Vec::new();
        for (spk, n) in counts {
            for i in 0..*n {
                records.push(rec(&format!("{spk}_{i}"), spk, vec![i as f32, 1.0]));
            }
        }
        Corpus::new(records).unwrap()
    }

    #[test]
    fn cap_keeps_small_speakers_and_caps_large() {
        let c = speaker_corpus(&[("a", 5), ("b", 400)]);
        let capped = cap_per_speaker(&c, 320, 9).unwrap();
        assert_eq!(capped.speaker_indices("a").unwrap().len(), 5);
        assert_eq!(capped.speaker_indices("b").unwrap().len(), 320);
        let again = cap_per_speaker(&c, 320, 9).unwrap();
        assert_eq!(capped, again);
        let other = cap_per_speaker(&c, 320, 10).unwrap();
        assert_ne!(capped, other);
        assert!(cap_per_speaker(&c, 0, 1).is_err());
    }

    #[test]
    fn synthetic_counts_and_labels() {
        let spec = SynthSpec {
            n_speakers: 10,
            n_emotions: 4,
            utts_per_cell: 80,
            ..Default::default()
        };
        let c = generate_synthetic(&spec).unwrap();
        assert_eq!(c.len(), 3200);
        assert_eq!(c.n_speakers(), 10);
        assert_eq!(c.emotions(), vec!["angry", "happy", "neutral", "sad"]);
        assert_eq!(generate_synthetic(&spec).unwrap(), c);
    }

    #[test]
    fn synthetic_validation() {
        let bad = SynthSpec {
            within_noise: 0.0,
            ..Default::default()
        };
        assert!(generate_synthetic(&bad).is_err());
        let bad = SynthSpec {
            signal_dim: Some(64),
            ..Default::default()
        };
        assert!(generate_synthetic(&bad).is_err());
    }

    #[test]
    fn emotion_names_beyond_four() {
        let spec = SynthSpec {
            n_emotions: 6,
            ..Default::default()
        };
        assert_eq!(spec.emotion_names()[5], "emo5");
    }
}

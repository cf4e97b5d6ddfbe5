//! Brute-force reference implementations shared by the integration tests.
//! They are written from the textbook definitions, without reusing any of the
//! library's counting code.
#![allow(dead_code)]
// reference values are written out at full precision on purpose
#![allow(clippy::excessive_precision, clippy::approx_constant)]

use std::collections::BTreeMap;

/// All set partitions of `n` items into at most `max_blocks` blocks, as
/// restricted growth strings (first item in block 0, each new block numbered
/// one past the largest so far).
pub fn partitions(n: usize, max_blocks: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, max_blocks: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let used = prefix.iter().copied().max().map_or(0, |m| m + 1);
        for b in 0..=used.min(max_blocks - 1) {
            prefix.push(b);
            grow(prefix, n, max_blocks, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        grow(&mut Vec::new(), n, max_blocks, &mut out);
    }
    out
}

fn joint_counts(a: &[usize], b: &[usize]) -> BTreeMap<(usize, usize), f64> {
    let mut m = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *m.entry((*x, *y)).or_insert(0.0) += 1.0;
    }
    m
}

fn marginal(a: &[usize]) -> BTreeMap<usize, f64> {
    let mut m = BTreeMap::new();
    for x in a {
        *m.entry(*x).or_insert(0.0) += 1.0;
    }
    m
}

fn entropy_of(m: &BTreeMap<usize, f64>, n: f64) -> f64 {
    m.values().map(|c| -(c / n) * (c / n).ln()).sum()
}

/// NMI with the arithmetic-mean normaliser, `I / ((H(U) + H(V)) / 2)`.
/// Convention: 1 when both partitions are a single block, 0 when only one is.
pub fn nmi(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (marginal(a), marginal(b));
    match (ma.len() == 1, mb.len() == 1) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut mi = 0.0;
    for (&(x, y), &c) in &joint_counts(a, b) {
        let pxy = c / n;
        mi += pxy * (pxy / ((ma[&x] / n) * (mb[&y] / n))).ln();
    }
    mi / (0.5 * (entropy_of(&ma, n) + entropy_of(&mb, n)))
}

/// ARI from explicit enumeration of all item pairs.
pub fn ari(a: &[usize], b: &[usize]) -> f64 {
    let (mut both, mut only_a, mut only_b, mut neither) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_a += 1.0,
                (false, true) => only_b += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let denom = (both + only_a) * (only_a + neither) + (both + only_b) * (only_b + neither);
    if denom == 0.0 {
        return 1.0;
    }
    2.0 * (both * neither - only_a * only_b) / denom
}

/// Share of items carrying their cluster's most frequent label.
pub fn purity(clusters: &[usize], labels: &[usize]) -> f64 {
    let mut total = 0usize;
    for c in marginal(clusters).keys() {
        let members: Vec<usize> = clusters
            .iter()
            .zip(labels)
            .filter(|(k, _)| *k == c)
            .map(|(_, l)| *l)
            .collect();
        let best = members
            .iter()
            .map(|l| members.iter().filter(|m| *m == l).count())
            .max()
            .unwrap_or(0);
        total += best;
    }
    total as f64 / clusters.len() as f64
}

fn dist(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Mean silhouette from the full pairwise distance matrix. Singleton
/// clusters and points with `a = b = 0` contribute 0.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = points.len();
    let d: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| dist(&points[i], &points[j])).collect()).collect();
    let clusters: Vec<usize> = marginal(labels).keys().copied().collect();
    let mut sum = 0.0;
    for i in 0..n {
        let same: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
        if same.is_empty() {
            continue;
        }
        let a = same.iter().map(|&j| d[i][j]).sum::<f64>() / same.len() as f64;
        let b = clusters
            .iter()
            .filter(|&&c| c != labels[i])
            .map(|&c| {
                let other: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
                other.iter().map(|&j| d[i][j]).sum::<f64>() / other.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        if a.max(b) > 0.0 {
            sum += (b - a) / a.max(b);
        }
    }
    sum / n as f64
}

/// Indices of the `count` clusters whose centers are farthest from
/// `centers[from]`, ties broken by lower index, skipping `from` and any
/// cluster in `exclude`.
pub fn farthest(centers: &[Vec<f64>], from: usize, count: usize, exclude: &[usize]) -> Vec<usize> {
    let mut others: Vec<(f64, usize)> = (0..centers.len())
        .filter(|&c| c != from && !exclude.contains(&c))
        .map(|c| (dist(&centers[from], &centers[c]), c))
        .collect();
    others.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    others.into_iter().take(count).map(|(_, c)| c).collect()
}

/// Contrastive-loss worked examples: tau 0.5, sim(pos) 0.8, sims(neg) {0.2, 0.4},
/// evaluated at 40 digits with mpmath.
pub const EXAMPLE_LOSS_WITHOUT_POSITIVE: f64 = -0.286_984_747_600_047_376_331_628_049_154_087_506_731_4;
pub const EXAMPLE_LOSS_WITH_POSITIVE: f64 = 0.559_914_700_987_563_969_384_972_009_528_903_778_007_2;
/// One negative with the same similarity as the positive: 0 without the
/// positive in the denominator, ln 2 with it.
pub const EQUAL_SIMS_WITH_POSITIVE: f64 = 0.693_147_180_559_945_309_417_232_121_458_176_568_075_5;

/// Unit vectors in R^3 whose cosine with `e1` is `c`.
pub fn with_cosine(c: f64) -> Vec<f64> {
    vec![c, (1.0 - c * c).sqrt(), 0.0]
}

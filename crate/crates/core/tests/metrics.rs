mod support;

use emocluster_core::clustering::{cluster_speakers, KMeansConfig};
use emocluster_core::corpus::{generate_synthetic, length_normalize, SynthSpec};
use emocluster_core::metrics::{ari, evaluate_run, nmi, purity, silhouette, NmiNormalizer};
use proptest::prelude::*;

#[test]
fn small_partition_pairs_match_brute_force() {
    for n in 1..=6 {
        let parts = support::partitions(n, 3);
        for c in &parts {
            for l in &parts {
                assert!((nmi(c, l).unwrap() - support::nmi(c, l)).abs() <= 1e-12, "nmi {c:?} {l:?}");
                assert!((purity(c, l).unwrap() - support::purity(c, l)).abs() <= 1e-12, "purity {c:?} {l:?}");
                if n >= 2 {
                    assert!((ari(c, l).unwrap() - support::ari(c, l)).abs() <= 1e-12, "ari {c:?} {l:?}");
                }
            }
        }
    }
}

#[test]
fn partition_enumeration_counts_are_stirling_sums() {
    // S(n,1) + S(n,2) + S(n,3)
    let expected = [1, 2, 5, 14, 41, 122, 365, 1094];
    for (n, &e) in (1..=8).zip(&expected) {
        assert_eq!(support::partitions(n, 3).len(), e, "n = {n}");
    }
}

#[test]
fn worked_contingency_examples() {
    let (c, l) = ([0, 0, 1, 1], ["a", "a", "a", "b"]);
    let li = [0, 0, 0, 1];
    assert!((nmi(&c, &l).unwrap() - support::nmi(&c, &li)).abs() < 1e-15);
    // pairs: (0,1) both; (2,3) clusters only; (0,2),(0,3),(1,2),(1,3) split in
    // clusters, and (0,2),(1,2) share a label
    let ari_hand = 2.0 * (1.0 * 2.0 - 1.0 * 2.0) / ((1.0 + 1.0) * (1.0 + 2.0) + (1.0 + 2.0) * (2.0 + 2.0));
    assert!((ari(&c, &l).unwrap() - ari_hand).abs() < 1e-15);
    assert_eq!(purity(&c, &l).unwrap(), 0.75);
}

fn relabel(xs: &[usize], perm: &[usize]) -> Vec<usize> {
    xs.iter().map(|&x| perm[x]).collect()
}

proptest! {
    #[test]
    fn metrics_invariant_under_relabeling(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 2..40),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        let (c, l): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let (c2, l2) = (relabel(&c, &perm), relabel(&l, &perm));
        prop_assert!((nmi(&c, &l).unwrap() - nmi(&c2, &l2).unwrap()).abs() < 1e-12);
        prop_assert!((ari(&c, &l).unwrap() - ari(&c2, &l).unwrap()).abs() < 1e-12);
        prop_assert!((purity(&c, &l).unwrap() - purity(&c, &l2).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn metric_ranges(pairs in prop::collection::vec((0usize..5, 0usize..5), 2..50)) {
        let (c, l): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let v = nmi(&c, &l).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        let a = ari(&c, &l).unwrap();
        prop_assert!((-1.0..=1.0 + 1e-12).contains(&a));
        let p = purity(&c, &l).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn silhouette_matches_pairwise_recomputation(
        raw in prop::collection::vec((prop::collection::vec(-3.0f64..3.0, 2), 0usize..3), 3..20),
    ) {
        let (points, labels): (Vec<Vec<f64>>, Vec<usize>) = raw.into_iter().unzip();
        let distinct = labels.iter().collect::<std::collections::BTreeSet<_>>().len();
        prop_assume!(distinct >= 2);
        let got = silhouette(&points, &labels).unwrap();
        let want = support::silhouette(&points, &labels);
        prop_assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
        prop_assert!((-1.0..=1.0).contains(&got));
    }
}

fn averages(delta: f64, sigma: f64) -> (f64, f64) {
    let corpus = generate_synthetic(&SynthSpec {
        emotion_offset_norm: delta,
        within_noise: sigma,
        seed: 11,
        ..Default::default()
    })
    .unwrap();
    let corpus = length_normalize(&corpus).unwrap();
    let run = cluster_speakers(&corpus, &KMeansConfig { k: 4, seed: 3, ..Default::default() }).unwrap();
    let report = evaluate_run(&run, &corpus, NmiNormalizer::Arithmetic).unwrap();
    assert_eq!(report.per_speaker.len(), 10);
    (report.averages.nmi, report.averages.purity)
}

#[test]
fn separable_corpus_scores_high() {
    let (nmi, purity) = averages(1.0, 0.25);
    assert!(nmi >= 0.9, "nmi {nmi}");
    assert!(purity >= 0.95, "purity {purity}");
}

#[test]
fn signal_free_corpus_scores_near_zero() {
    let (nmi, _) = averages(0.0, 1.0);
    assert!(nmi.abs() <= 0.1, "nmi {nmi}");
}

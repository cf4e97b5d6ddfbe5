use emocluster_core::corpus::{generate_synthetic, length_normalize, Corpus, SynthSpec};
use emocluster_core::objectives::MtlWeights;
use emocluster_core::trainer::{
    evaluate_uar, pretrain, train_ser, uar_from_confusion, Mode, Pretrainer, SerSplits, SplitFractions,
    TrainConfig,
};
use proptest::prelude::*;

fn separable(n_speakers: usize, utts_per_cell: usize, seed: u64) -> Corpus {
    length_normalize(
        &generate_synthetic(&SynthSpec {
            n_speakers,
            utts_per_cell,
            emotion_offset_norm: 1.0,
            within_noise: 0.25,
            seed,
            ..Default::default()
        })
        .unwrap(),
    )
    .unwrap()
}

fn unlabelled(c: &Corpus) -> Corpus {
    c.without_labels()
}

fn small_config(mode: Mode, steps: usize) -> TrainConfig {
    TrainConfig {
        mode,
        steps,
        pretrain_lr: 1e-3,
        lr: 1e-3,
        n_clusters: 4,
        kmeans_restarts: 2,
        ..Default::default()
    }
}

#[test]
fn contrastive_loss_halves() {
    let c = unlabelled(&separable(4, 30, 1));
    let out = pretrain(&c, &small_config(Mode::Contrastive, 800), 3).unwrap();
    let s = &out.summary;
    let (first, last) = (s.first_loss_mean.unwrap(), s.final_loss_mean.unwrap());
    assert!(last <= 0.5 * first, "first {first} final {last}");
    assert_eq!(out.losses.len(), 800);
}

#[test]
fn speaker_classification_fits_separable_speakers() {
    let c = unlabelled(&separable(6, 20, 2));
    let out = pretrain(&c, &small_config(Mode::SpkCls, 600), 4).unwrap();
    let acc = out.summary.speaker_accuracy.unwrap();
    assert!(acc >= 0.9, "speaker accuracy {acc}");
}

#[test]
fn zero_steps_keep_initialization() {
    let c = unlabelled(&separable(3, 10, 5));
    for mode in [Mode::Contrastive, Mode::SpkCls, Mode::Mtl, Mode::MtlAdversarial] {
        let cfg = small_config(mode, 0);
        let out = pretrain(&c, &cfg, 9).unwrap();
        let init = Pretrainer::new(&c, &cfg, 9).unwrap().network;
        assert_eq!(out.network, init, "{mode}");
        assert_eq!(out.checkpoint.models, init.models());
        assert!(out.losses.is_empty());
    }
}

#[test]
fn pretraining_is_deterministic() {
    let c = unlabelled(&separable(3, 10, 6));
    let cfg = small_config(Mode::Mtl, 40);
    let a = pretrain(&c, &cfg, 1).unwrap();
    let b = pretrain(&c, &cfg, 1).unwrap();
    assert_eq!(a.network, b.network);
    assert_eq!(a.losses, b.losses);
    assert_ne!(a.losses, pretrain(&c, &cfg, 2).unwrap().losses);
}

/// One optimizer step on the same tuples from the same initialization.
fn one_step(c: &Corpus, mode: Mode, weights: MtlWeights) -> Pretrainer<'_> {
    let cfg = TrainConfig { mtl_weights: weights, ..small_config(mode, 1) };
    let run = emocluster_core::trainer::pretraining_clusters(c, &cfg, 0).unwrap();
    let mined = emocluster_core::pair_miner::mine_tuples(
        &run,
        c,
        &emocluster_core::pair_miner::MiningConfig { n_clusters: 4, seed: 0, allow_fewer_negatives: true },
    )
    .unwrap();
    let batch: Vec<_> = mined.tuples.iter().take(8).collect();
    let mut t = Pretrainer::new(c, &cfg, 7).unwrap();
    t.tuple_step(&batch).unwrap();
    t
}

#[test]
fn adversarial_with_zero_lambda_blocks_the_speaker_branch_from_the_trunk() {
    let c = unlabelled(&separable(3, 10, 8));
    let adv = one_step(&c, Mode::MtlAdversarial, MtlWeights { grl_lambda: 0.0, ..Default::default() });
    // the trunk sees only the contrastive loss
    let silent = one_step(&c, Mode::Mtl, MtlWeights { w_speaker: 0.0, ..Default::default() });
    assert_eq!(adv.network.trunk, silent.network.trunk);
    assert_eq!(adv.network.contrastive, silent.network.contrastive);
    // while the speaker head still follows its own loss, exactly as in MTL
    let mtl = one_step(&c, Mode::Mtl, MtlWeights::default());
    assert_eq!(adv.network.speaker, mtl.network.speaker);
    assert_ne!(adv.network.trunk, mtl.network.trunk);
}

fn split_corpus(n_speakers: usize, seed: u64) -> Corpus {
    separable(n_speakers, 6, seed)
}

/// Emotion directions shared across speakers, so held-out speakers are learnable.
fn shared_emotions(n_speakers: usize, seed: u64) -> Corpus {
    length_normalize(
        &generate_synthetic(&SynthSpec {
            n_speakers,
            utts_per_cell: 10,
            speaker_spread: 0.3,
            emotion_shared: 0.8,
            seed,
            ..Default::default()
        })
        .unwrap(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn splits_are_speaker_disjoint_and_complete(
        n_speakers in 3usize..14,
        seed in any::<u64>(),
        train in 0.2f64..0.9,
        val in 0.05f64..0.3,
        test in 0.05f64..0.3,
        label_fraction in 0.01f64..1.0,
    ) {
        let c = split_corpus(n_speakers, seed % 3);
        let fractions = SplitFractions { train, val, test };
        let s = SerSplits::with_label_fraction(&c, fractions, label_fraction, seed).unwrap();
        s.check_disjoint().unwrap();
        let spk = |c: &Corpus| c.speaker_ids().into_iter().collect::<std::collections::BTreeSet<_>>();
        let (a, b, d) = (spk(&s.train), spk(&s.val), spk(&s.test));
        prop_assert!(a.is_disjoint(&b) && a.is_disjoint(&d) && b.is_disjoint(&d));
        prop_assert!(!b.is_empty() && !d.is_empty() && !a.is_empty());
        // subsampling only thins the training split of the plain speaker split
        let full = SerSplits::by_speaker(&c, fractions, seed).unwrap();
        prop_assert_eq!(&s.val, &full.val);
        prop_assert_eq!(&s.test, &full.test);
        prop_assert!(s.train.records().iter().all(|r| full.train.get(&r.utt_id) == Some(r)));
        prop_assert_eq!(spk(&full.train).len() + b.len() + d.len(), c.n_speakers());
        prop_assert!(s.val.records().iter().chain(s.test.records()).all(|r| r.emotion.is_some()));
    }
}

fn ser_splits() -> SerSplits {
    SerSplits::by_speaker(&shared_emotions(8, 12), SplitFractions { train: 0.6, val: 0.2, test: 0.2 }, 3).unwrap()
}

#[test]
fn reported_uar_matches_its_confusion_matrix() {
    let splits = ser_splits();
    let cfg = TrainConfig { epochs_ser: 5, ..small_config(Mode::None, 0) };
    let out = train_ser(None, &splits, &cfg, 1).unwrap();
    let eval = evaluate_uar(&out.model, &splits.test, 1).unwrap();
    let recomputed = uar_from_confusion(&eval.confusion).unwrap();
    assert!((eval.uar - recomputed).abs() <= 1e-12);
    let mean: f64 = eval.per_class_recall.values().sum::<f64>() / eval.per_class_recall.len() as f64;
    assert!((eval.uar - mean).abs() <= 1e-12);
    let total: u64 = eval.confusion.iter().flatten().sum();
    assert_eq!(total as usize, splits.test.len());
    assert!(eval.uar > 0.5, "separable data should be learnable: {}", eval.uar);
}

#[test]
fn same_seed_same_evaluation() {
    let splits = ser_splits();
    let cfg = TrainConfig { epochs_ser: 3, ..small_config(Mode::None, 0) };
    let run = |seed| {
        let out = train_ser(None, &splits, &cfg, seed).unwrap();
        evaluate_uar(&out.model, &splits.test, seed).unwrap()
    };
    assert_eq!(run(4), run(4));
}

#[test]
fn one_emotion_class_is_rejected() {
    let c = generate_synthetic(&SynthSpec { n_speakers: 5, n_emotions: 1, utts_per_cell: 4, ..Default::default() }).unwrap();
    let splits = SerSplits::by_speaker(&c, SplitFractions::default(), 0).unwrap();
    assert!(train_ser(None, &splits, &small_config(Mode::None, 0), 0).is_err());
}

#[test]
fn leaking_splits_are_rejected() {
    let mut splits = ser_splits();
    splits.val = splits.train.clone();
    assert!(train_ser(None, &splits, &small_config(Mode::None, 0), 0).is_err());
}

#[test]
fn gradient_reversal_negates_the_speaker_branch_in_the_trunk() {
    use emocluster_core::trainer::{tuple_batch_gradients, ContrastiveSettings};
    let c = unlabelled(&separable(3, 10, 8));
    let cfg = small_config(Mode::Mtl, 1);
    let run = emocluster_core::trainer::pretraining_clusters(&c, &cfg, 0).unwrap();
    let mined = emocluster_core::pair_miner::mine_tuples(
        &run,
        &c,
        &emocluster_core::pair_miner::MiningConfig { n_clusters: 4, seed: 0, allow_fewer_negatives: true },
    )
    .unwrap();
    let trainer = Pretrainer::new(&c, &cfg, 7).unwrap();
    let tuples: Vec<_> = mined.tuples.iter().take(8).collect();
    let batch = trainer.tuple_batch(&tuples).unwrap();
    let settings = ContrastiveSettings { tau: 0.1, include_positive_in_denominator: false };
    let trunk = |w: Option<MtlWeights>| {
        tuple_batch_gradients(&trainer.network, &batch, settings, w.as_ref()).unwrap().1.trunk.flatten()
    };
    let base = trunk(None);
    let forward = trunk(Some(MtlWeights::default()));
    for lambda in [0.5, 1.0] {
        let reversed = trunk(Some(MtlWeights { adversarial: true, grl_lambda: lambda, ..Default::default() }));
        let mut moved = 0.0f64;
        for ((r, f), b) in reversed.iter().zip(&forward).zip(&base) {
            assert!(((r - b) + lambda * (f - b)).abs() <= 1e-12, "lambda {lambda}");
            moved = moved.max((f - b).abs());
        }
        assert!(moved > 1e-6, "speaker branch must reach the trunk");
    }
}

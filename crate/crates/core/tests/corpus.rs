use emocluster_core::corpus::{
    cap_per_speaker, decode_bin, encode_bin, generate_synthetic, length_normalize, load_corpus, read_jsonl,
    save_corpus, write_jsonl, Corpus, EmbeddingRecord, Format, SynthSpec,
};
use proptest::prelude::*;

fn thousand() -> Corpus {
    generate_synthetic(&SynthSpec {
        n_speakers: 5,
        n_emotions: 4,
        utts_per_cell: 50,
        dim: 16,
        seed: 21,
        ..Default::default()
    })
    .unwrap()
}

fn bits(c: &Corpus) -> Vec<Vec<u32>> {
    c.records().iter().map(|r| r.vec.iter().map(|v| v.to_bits()).collect()).collect()
}

#[test]
fn thousand_records_round_trip_bit_identically() {
    let c = thousand();
    assert_eq!(c.len(), 1000);
    let dir = tempfile::tempdir().unwrap();
    for format in [Format::Jsonl, Format::Bin] {
        let path = dir.path().join(format!("c.{format}"));
        save_corpus(&c, &path, format).unwrap();
        let back = load_corpus(&path, format).unwrap();
        assert_eq!(bits(&back), bits(&c));
        assert_eq!(back, c);
        // and once more through the saved copy
        save_corpus(&back, &path, format).unwrap();
        assert_eq!(load_corpus(&path, format).unwrap(), c);
    }
}

fn record_strategy() -> impl Strategy<Value = Vec<EmbeddingRecord>> {
    prop::collection::vec(
        (
            0usize..4,
            prop::option::of(prop::sample::select(vec!["happy", "sad", "angry"])),
            prop::collection::vec(-1e6f32..1e6, 3),
        ),
        1..30,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (s, e, vec))| EmbeddingRecord {
                utt_id: format!("u{i}"),
                spk_id: format!("s{s}"),
                emotion: e.map(String::from),
                vec,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn jsonl_and_bin_round_trip(records in record_strategy()) {
        let c = Corpus::new(records).unwrap();
        let mut text = Vec::new();
        write_jsonl(&c, &mut text).unwrap();
        let from_text = read_jsonl(text.as_slice()).unwrap();
        prop_assert_eq!(bits(&from_text), bits(&c));
        prop_assert_eq!(&from_text, &c);
        prop_assert_eq!(decode_bin(&encode_bin(&c).unwrap()).unwrap(), c);
    }

    #[test]
    fn normalized_norms_are_unit(records in record_strategy()) {
        let c = Corpus::new(records).unwrap();
        prop_assume!(c.records().iter().all(|r| r.norm() > 1e-12));
        let n = length_normalize(&c).unwrap();
        for r in n.records() {
            prop_assert!((r.norm() - 1.0).abs() <= 1e-6, "{}", r.norm());
        }
    }

    #[test]
    fn cap_is_a_deterministic_subset(cap in 1usize..40, s in any::<u64>()) {
        let c = generate_synthetic(&SynthSpec { n_speakers: 3, utts_per_cell: 8, dim: 4, ..Default::default() }).unwrap();
        let a = cap_per_speaker(&c, cap, s).unwrap();
        prop_assert_eq!(&a, &cap_per_speaker(&c, cap, s).unwrap());
        for (spk, idx) in c.speakers() {
            prop_assert_eq!(a.speaker_indices(spk).map_or(0, |i| i.len()), idx.len().min(cap));
        }
        prop_assert!(a.records().iter().all(|r| c.get(&r.utt_id) == Some(r)));
    }
}

#[test]
fn cap_of_four_hundred_keeps_exactly_three_twenty() {
    let c = generate_synthetic(&SynthSpec { n_speakers: 2, utts_per_cell: 100, dim: 4, ..Default::default() }).unwrap();
    let capped = cap_per_speaker(&c, 320, 0).unwrap();
    for (_, idx) in capped.speakers() {
        assert_eq!(idx.len(), 320);
    }
}

#[test]
fn speaker_groups_share_directions_when_asked() {
    let spec = SynthSpec {
        n_speakers: 4,
        utts_per_cell: 2,
        speaker_groups: 2,
        group_spread: 0.5,
        groups_share_emotions: true,
        ..Default::default()
    };
    let c = generate_synthetic(&spec).unwrap();
    assert_eq!(c.len(), 4 * 4 * 2);
    assert!(generate_synthetic(&SynthSpec { speaker_groups: 0, ..spec.clone() }).is_err());
    assert!(generate_synthetic(&SynthSpec { group_spread: -1.0, ..spec }).is_err());
}

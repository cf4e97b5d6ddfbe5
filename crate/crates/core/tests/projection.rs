use std::collections::BTreeMap;

use emocluster_core::corpus::{generate_synthetic, length_normalize, Corpus, EmbeddingRecord, SynthSpec};
use emocluster_core::projection::{pca_2d, to_svg, write_csv};

fn pairwise_sq(points: &[(f64, f64)]) -> Vec<f64> {
    let mut out = Vec::new();
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            out.push((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2));
        }
    }
    out
}

#[test]
fn two_dimensional_input_is_only_rotated() {
    let raw = [(1.0f32, 2.0f32), (3.0, -1.0), (-2.0, 0.5), (0.0, 4.0), (2.5, 2.5)];
    let records = raw
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| EmbeddingRecord {
            utt_id: format!("u{i}"),
            spk_id: "s".into(),
            emotion: None,
            vec: vec![x, y],
        })
        .collect();
    let p = pca_2d(&Corpus::new(records).unwrap(), None).unwrap();
    let input: Vec<(f64, f64)> = raw.iter().map(|&(x, y)| (f64::from(x), f64::from(y))).collect();
    let output: Vec<(f64, f64)> = p.points.iter().map(|q| (q.x, q.y)).collect();
    for (a, b) in pairwise_sq(&input).iter().zip(pairwise_sq(&output)) {
        assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{a} vs {b}");
    }
    let mean_x = output.iter().map(|q| q.0).sum::<f64>() / output.len() as f64;
    assert!(mean_x.abs() < 1e-12);
    assert!(p.explained_variance[0] >= p.explained_variance[1]);
}

#[test]
fn separable_groups_stay_visible_in_two_dimensions() {
    let c = length_normalize(
        &generate_synthetic(&SynthSpec { n_speakers: 3, utts_per_cell: 30, seed: 2, ..Default::default() }).unwrap(),
    )
    .unwrap();
    let p = pca_2d(&c, None).unwrap();
    let mut groups: BTreeMap<(String, String), Vec<(f64, f64)>> = BTreeMap::new();
    for q in &p.points {
        groups.entry((q.spk_id.clone(), q.emotion.clone())).or_default().push((q.x, q.y));
    }
    let mean = |v: &[(f64, f64)]| {
        let n = v.len() as f64;
        (v.iter().map(|q| q.0).sum::<f64>() / n, v.iter().map(|q| q.1).sum::<f64>() / n)
    };
    let all: Vec<(f64, f64)> = p.points.iter().map(|q| (q.x, q.y)).collect();
    let grand = mean(&all);
    let (mut within, mut between) = (0.0, 0.0);
    for members in groups.values() {
        let m = mean(members);
        within += members.iter().map(|q| (q.0 - m.0).powi(2) + (q.1 - m.1).powi(2)).sum::<f64>();
        between += members.len() as f64 * ((m.0 - grand.0).powi(2) + (m.1 - grand.1).powi(2));
    }
    assert!(within < between, "within {within} between {between}");
}

#[test]
fn csv_and_svg_exports() {
    let c = generate_synthetic(&SynthSpec { n_speakers: 2, utts_per_cell: 3, dim: 4, ..Default::default() }).unwrap();
    let p = pca_2d(&c, None).unwrap();
    let mut buf = Vec::new();
    write_csv(&p, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("x,y,spk_id,emotion,cluster"));
    assert_eq!(text.lines().count(), c.len() + 1);
    let svg = to_svg(&p);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<circle").count(), c.len());
}

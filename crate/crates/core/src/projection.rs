//! Two-dimensional PCA projection of a corpus, exported as csv or svg.

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::clustering::ClusteringRun;
use crate::corpus::Corpus;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectedPoint {
    pub x: f64,
    pub y: f64,
    pub spk_id: String,
    pub emotion: String,
    /// Empty when no clustering was supplied or the utterance was not clustered.
    pub cluster: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub points: Vec<ProjectedPoint>,
    /// Variance along each of the two components.
    pub explained_variance: [f64; 2],
}

/// Project the centred data onto the two leading eigenvectors of its
/// covariance. Each component's sign is fixed so that its largest-magnitude
/// coordinate is positive.
pub fn pca_2d(corpus: &Corpus, clusters: Option<&ClusteringRun>) -> Result<Projection> {
    let (n, d) = (corpus.len(), corpus.dim());
    if d < 2 {
        return Err(Error::InvalidArgument(format!("projection needs dimension >= 2, got {d}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("cannot project an empty corpus".into()));
    }
    let mut data = DMatrix::from_fn(n, d, |i, j| f64::from(corpus.records()[i].vec[j]));
    let mean = data.row_mean();
    for mut row in data.row_iter_mut() {
        row -= &mean;
    }
    let cov = data.transpose() * &data / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut components = Vec::with_capacity(2);
    for &c in &order[..2] {
        let mut v = eig.eigenvectors.column(c).into_owned();
        let pivot = v.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            v = -v;
        }
        components.push(v);
    }
    let proj_x = &data * &components[0];
    let proj_y = &data * &components[1];

    let points = corpus
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| ProjectedPoint {
            x: proj_x[i],
            y: proj_y[i],
            spk_id: r.spk_id.clone(),
            emotion: r.emotion.clone().unwrap_or_default(),
            cluster: clusters
                .and_then(|run| run.cluster_of(&r.spk_id, &r.utt_id))
                .map(|c| c.to_string())
                .unwrap_or_default(),
        })
        .collect();
    let var = |i: usize| eig.eigenvalues[order[i]].max(0.0);
    Ok(Projection {
        points,
        explained_variance: [var(0), var(1)],
    })
}

pub fn write_csv(projection: &Projection, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in &projection.points {
        w.serialize(p).map_err(|e| Error::malformed("csv", e.to_string()))?;
    }
    w.flush().map_err(|e| Error::malformed("csv", e.to_string()))?;
    Ok(())
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Self-contained svg scatter, one colour per `{spk_id}_{emotion}` group.
pub fn to_svg(projection: &Projection) -> String {
    const SIZE: f64 = 600.0;
    const MARGIN: f64 = 20.0;
    let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &projection.points {
        lo_x = lo_x.min(p.x);
        hi_x = hi_x.max(p.x);
        lo_y = lo_y.min(p.y);
        hi_y = hi_y.max(p.y);
    }
    let span = (hi_x - lo_x).max(hi_y - lo_y).max(1e-12);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let mut groups: Vec<String> = projection
        .points
        .iter()
        .map(|p| format!("{}_{}", p.spk_id, p.emotion))
        .collect();
    groups.sort();
    groups.dedup();

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for p in &projection.points {
        let group = format!("{}_{}", p.spk_id, p.emotion);
        let g = groups.binary_search(&group).unwrap_or(0);
        let colour = PALETTE[g % PALETTE.len()];
        let cx = MARGIN + (p.x - lo_x) * scale;
        let cy = SIZE - MARGIN - (p.y - lo_y) * scale;
        let _ = writeln!(
            svg,
            "<circle cx=\"{cx:.3}\" cy=\"{cy:.3}\" r=\"2.5\" fill=\"{colour}\" fill-opacity=\"0.7\"><title>{group}</title></circle>"
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EmbeddingRecord;

    fn corpus(vecs: &[[f32; 2]]) -> Corpus {
        Corpus::new(
            vecs.iter()
                .enumerate()
                .map(|(i, v)| EmbeddingRecord {
                    utt_id: format!("u{i}"),
                    spk_id: "s".into(),
                    emotion: None,
                    vec: v.to_vec(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_points_land_on_origin() {
        let p = pca_2d(&corpus(&[[1.0, 2.0]; 5]), None).unwrap();
        assert!(p.points.iter().all(|q| q.x == 0.0 && q.y == 0.0));
    }

    #[test]
    fn rejects_one_dimensional_input() {
        let c = Corpus::new(vec![EmbeddingRecord {
            utt_id: "a".into(),
            spk_id: "s".into(),
            emotion: None,
            vec: vec![1.0],
        }])
        .unwrap();
        assert!(pca_2d(&c, None).is_err());
    }
}

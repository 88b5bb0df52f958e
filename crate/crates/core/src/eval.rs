//! Held-out comparison error, Procrustes alignment and retrieval metrics.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::types::{sq_dist, ComparisonSet, Embedding};

/// Fraction of comparisons whose oriented margin `d_near - d_far` is not
/// negative. A margin of exactly zero, or an undefined one, counts as an error.
pub fn generalization_error(x: &Embedding, test: &ComparisonSet) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::arg("test set is empty"));
    }
    if test.n() > x.len() {
        return Err(Error::Range {
            index: test.n() - 1,
            n: x.len(),
        });
    }
    Ok(generalization_error_flat(x.as_slice(), x.dim(), test))
}

/// As [`generalization_error`] on flat column-major storage; no validation.
pub fn generalization_error_flat(x: &[f64], p: usize, test: &ComparisonSet) -> f64 {
    let col = |i: usize| &x[i * p..(i + 1) * p];
    let wrong = test
        .iter()
        .filter(|q| {
            let ((a, b), (c, d)) = q.oriented();
            !(sq_dist(col(a), col(b)) < sq_dist(col(c), col(d)))
        })
        .count();
    wrong as f64 / test.len() as f64
}

/// Result of orthogonal Procrustes alignment.
#[derive(Debug, Clone)]
pub struct ProcrustesFit {
    /// `scale * rotation * X`.
    pub aligned: Embedding,
    /// Orthogonal `p x p` matrix (reflections allowed).
    pub rotation: DMatrix<f64>,
    pub scale: f64,
    /// `||aligned - Y||_F`.
    pub residual: f64,
}

/// Orthogonal `R` (and optionally a positive scale) minimizing `||s R X - Y||_F`.
///
/// Both inputs are expected to be centered.
pub fn procrustes_align(x: &Embedding, reference: &Embedding, with_scaling: bool) -> Result<ProcrustesFit> {
    if x.dim() != reference.dim() || x.len() != reference.len() {
        return Err(Error::arg(format!(
            "cannot align a {}x{} embedding to a {}x{} reference",
            x.dim(),
            x.len(),
            reference.dim(),
            reference.len()
        )));
    }
    let xm = x.matrix();
    let ym = reference.matrix();
    let cross = ym * xm.transpose();
    let svd = cross.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::Eigen("SVD did not produce U".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::Eigen("SVD did not produce V".into()))?;
    let rotation = &u * &v_t;
    let scale = if with_scaling {
        let denom = xm.norm_squared();
        if denom > 0.0 {
            svd.singular_values.sum() / denom
        } else {
            1.0
        }
    } else {
        1.0
    };
    let aligned = (&rotation * xm) * scale;
    let residual = (&aligned - ym).norm();
    Ok(ProcrustesFit {
        aligned: Embedding::new(aligned)?,
        rotation,
        scale,
        residual,
    })
}

/// Retrieval scores plus, when available, the held-out comparison error.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub generalization_error: Option<f64>,
    pub precision_at_k: BTreeMap<usize, f64>,
    pub recall_at_k: BTreeMap<usize, f64>,
    pub map_score: Option<f64>,
}

/// Gallery indices sorted by ascending distance to `query`, ties by index.
fn ranking(query: &[f64], gallery: &Embedding) -> Vec<usize> {
    let dist: Vec<f64> = (0..gallery.len()).map(|g| sq_dist(query, gallery.column(g))).collect();
    let mut order: Vec<usize> = (0..gallery.len()).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    order
}

/// Precision@K, Recall@K and mean average precision of ranking the gallery
/// by Euclidean distance to each query, relevance meaning equal class labels.
pub fn retrieval_metrics(
    queries: &Embedding,
    gallery: &Embedding,
    query_labels: &[usize],
    gallery_labels: &[usize],
    ks: &[usize],
) -> Result<MetricsReport> {
    if queries.dim() != gallery.dim() {
        return Err(Error::arg("query and gallery embeddings differ in dimension"));
    }
    if query_labels.len() != queries.len() || gallery_labels.len() != gallery.len() {
        return Err(Error::arg("label count does not match embedding size"));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > gallery.len()) {
        return Err(Error::arg(format!("K = {k} must lie in 1..={}", gallery.len())));
    }
    let mut precision: BTreeMap<usize, f64> = ks.iter().map(|&k| (k, 0.0)).collect();
    let mut recall = precision.clone();
    let mut ap_total = 0.0;
    for (qi, &label) in query_labels.iter().enumerate() {
        let order = ranking(queries.column(qi), gallery);
        let relevant: Vec<bool> = order.iter().map(|&g| gallery_labels[g] == label).collect();
        let positives = relevant.iter().filter(|&&r| r).count();
        let mut hits = 0usize;
        let mut hits_at = Vec::with_capacity(order.len());
        let mut ap = 0.0;
        for (s, &rel) in relevant.iter().enumerate() {
            if rel {
                hits += 1;
                // precision at s times the recall increment 1 / positives
                ap += hits as f64 / (s + 1) as f64;
            }
            hits_at.push(hits);
        }
        if positives > 0 {
            ap_total += ap / positives as f64;
        }
        for &k in ks {
            let tp = hits_at[k - 1] as f64;
            *precision.get_mut(&k).unwrap() += tp / k as f64;
            if positives > 0 {
                *recall.get_mut(&k).unwrap() += tp / positives as f64;
            }
        }
    }
    let nq = queries.len() as f64;
    for v in precision.values_mut().chain(recall.values_mut()) {
        *v /= nq;
    }
    Ok(MetricsReport {
        generalization_error: None,
        precision_at_k: precision,
        recall_at_k: recall,
        map_score: Some(ap_total / nq),
    })
}

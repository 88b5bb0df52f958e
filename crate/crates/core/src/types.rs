//! Shared domain types: embeddings, comparisons and seeded randomness.

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A `p x n` embedding; column `i` holds the coordinates of object `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    data: DMatrix<f64>,
}

impl Embedding {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() < 1 {
            return Err(Error::arg("embedding dimension must be at least 1"));
        }
        if data.ncols() < 2 {
            return Err(Error::arg("an embedding needs at least 2 objects"));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericInput(format!(
                "embedding entry {pos} is not finite"
            )));
        }
        Ok(Self { data })
    }

    /// Builds an embedding from column-major storage (`p` values per object).
    pub fn from_column_slice(p: usize, n: usize, values: &[f64]) -> Result<Self> {
        if values.len() != p * n {
            return Err(Error::arg(format!(
                "expected {} values for a {p}x{n} embedding, got {}",
                p * n,
                values.len()
            )));
        }
        Self::new(DMatrix::from_column_slice(p, n, values))
    }

    pub fn zeros(p: usize, n: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(p, n))
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Column-major view: object `i` occupies `[i*p, (i+1)*p)`.
    pub fn as_slice(&self) -> &[f64] {
        self.data.as_slice()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        let p = self.dim();
        &self.data.as_slice()[i * p..(i + 1) * p]
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            Err(Error::Range {
                index: i,
                n: self.len(),
            })
        } else {
            Ok(())
        }
    }

    /// True when each coordinate sums to zero across objects within `1e-9 * n`.
    pub fn is_centered(&self) -> bool {
        let tol = 1e-9 * self.len() as f64;
        self.data.row_iter().all(|row| row.sum().abs() <= tol)
    }

    pub fn gram(&self) -> DMatrix<f64> {
        self.data.transpose() * &self.data
    }

    /// Full `n x n` matrix of squared distances.
    pub fn squared_distance_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |a, b| sq_dist(self.column(a), self.column(b)))
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `||x_a - x_b||^2`.
pub fn squared_distance(x: &Embedding, a: usize, b: usize) -> Result<f64> {
    x.check_index(a)?;
    x.check_index(b)?;
    Ok(sq_dist(x.column(a), x.column(b)))
}

/// `d^2_ij - d^2_lk`; negative when the `+1` reading of `q` holds.
pub fn comparison_margin(x: &Embedding, q: &Comparison) -> Result<f64> {
    for idx in q.indices() {
        x.check_index(idx)?;
    }
    Ok(sq_dist(x.column(q.i), x.column(q.j)) - sq_dist(x.column(q.l), x.column(q.k)))
}

/// Subtracts the row means so the configuration is centered at the origin.
pub fn center(x: &Embedding) -> Embedding {
    let mut data = x.data.clone();
    let n = data.ncols() as f64;
    for mut row in data.row_iter_mut() {
        let mean = row.sum() / n;
        row.add_scalar_mut(-mean);
    }
    Embedding { data }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    /// `d_ij < d_lk`
    Closer,
    /// `d_ij > d_lk`
    Farther,
}

impl Label {
    pub fn from_sign(y: i64) -> Option<Self> {
        match y {
            1 => Some(Label::Closer),
            -1 => Some(Label::Farther),
            _ => None,
        }
    }

    pub fn sign(self) -> i64 {
        match self {
            Label::Closer => 1,
            Label::Farther => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Closer => Label::Farther,
            Label::Farther => Label::Closer,
        }
    }
}

/// A labelled quadruplet `(i, j, l, k)` comparing `d_ij` against `d_lk`.
///
/// Triplets `(i, j, k)` are stored with `l = i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Comparison {
    pub i: usize,
    pub j: usize,
    pub l: usize,
    pub k: usize,
    pub label: Label,
}

impl Comparison {
    pub fn new(i: usize, j: usize, l: usize, k: usize, label: Label) -> Result<Self> {
        if i == j || l == k {
            return Err(Error::arg(format!(
                "comparison ({i},{j},{l},{k}) compares an object with itself"
            )));
        }
        if (i.min(j), i.max(j)) == (l.min(k), l.max(k)) {
            return Err(Error::arg(format!(
                "comparison ({i},{j},{l},{k}) compares a pair with itself"
            )));
        }
        Ok(Self { i, j, l, k, label })
    }

    /// Triplet "`i` is closer to `j` than to `k`".
    pub fn triplet(i: usize, j: usize, k: usize) -> Result<Self> {
        if j == k {
            return Err(Error::arg(format!("triplet ({i},{j},{k}) repeats j=k")));
        }
        Self::new(i, j, i, k, Label::Closer)
    }

    pub fn indices(&self) -> [usize; 4] {
        [self.i, self.j, self.l, self.k]
    }

    pub fn is_triplet(&self) -> bool {
        self.l == self.i
    }

    pub fn with_label(self, label: Label) -> Self {
        Self { label, ..self }
    }

    pub fn flipped(self) -> Self {
        self.with_label(self.label.flipped())
    }

    /// The two pairs ordered so that the assertion reads `d(near) < d(far)`.
    pub fn oriented(&self) -> ((usize, usize), (usize, usize)) {
        match self.label {
            Label::Closer => ((self.i, self.j), (self.l, self.k)),
            Label::Farther => ((self.l, self.k), (self.i, self.j)),
        }
    }

    /// Key that identifies the comparison regardless of pair order and label.
    fn canonical_key(&self) -> ((usize, usize), (usize, usize)) {
        let a = (self.i.min(self.j), self.i.max(self.j));
        let b = (self.l.min(self.k), self.l.max(self.k));
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

/// An ordered collection of comparisons over `n` objects.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSet {
    n: usize,
    comparisons: Vec<Comparison>,
    triplet_mode: bool,
}

impl ComparisonSet {
    /// Validates indices and drops duplicates, keeping the first occurrence.
    ///
    /// Two comparisons are duplicates when they compare the same two unordered
    /// pairs, whatever their labels; a contradicting later entry is discarded.
    pub fn new(n: usize, comparisons: Vec<Comparison>) -> Result<Self> {
        let (set, dropped) = Self::with_dedup_count(n, comparisons)?;
        if dropped > 0 {
            log::warn!("dropped {dropped} duplicate or contradictory comparisons");
        }
        Ok(set)
    }

    /// Like [`ComparisonSet::new`] but also reports the number of dropped entries.
    pub fn with_dedup_count(n: usize, comparisons: Vec<Comparison>) -> Result<(Self, usize)> {
        let total = comparisons.len();
        let mut seen = HashSet::with_capacity(total);
        let mut kept = Vec::with_capacity(total);
        for q in comparisons {
            for idx in q.indices() {
                if idx >= n {
                    return Err(Error::Range { index: idx, n });
                }
            }
            if seen.insert(q.canonical_key()) {
                kept.push(q);
            }
        }
        let dropped = total - kept.len();
        let triplet_mode = kept.iter().all(Comparison::is_triplet);
        Ok((
            Self {
                n,
                comparisons: kept,
                triplet_mode,
            },
            dropped,
        ))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.comparisons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comparisons.is_empty()
    }

    pub fn triplet_mode(&self) -> bool {
        self.triplet_mode
    }

    pub fn comparisons(&self) -> &[Comparison] {
        &self.comparisons
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Comparison> {
        self.comparisons.iter()
    }

    /// Subset selected by position, keeping the given order.
    pub fn select(&self, positions: &[usize]) -> Self {
        let comparisons: Vec<_> = positions.iter().map(|&p| self.comparisons[p]).collect();
        let triplet_mode = comparisons.iter().all(Comparison::is_triplet);
        Self {
            n: self.n,
            comparisons,
            triplet_mode,
        }
    }

    /// Replaces entries in place; only callers that preserve the invariants use this.
    pub(crate) fn map_labels(&self, mut f: impl FnMut(usize, Comparison) -> Comparison) -> Self {
        let comparisons = self
            .comparisons
            .iter()
            .enumerate()
            .map(|(pos, &q)| f(pos, q))
            .collect();
        Self {
            n: self.n,
            comparisons,
            triplet_mode: self.triplet_mode,
        }
    }
}

impl<'a> IntoIterator for &'a ComparisonSet {
    type Item = &'a Comparison;
    type IntoIter = std::slice::Iter<'a, Comparison>;

    fn into_iter(self) -> Self::IntoIter {
        self.comparisons.iter()
    }
}

/// Seed from which every random stream of a run is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Independent generator for one purpose (`stream`) of this seed.
    pub fn rng(self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream);
        rng
    }
}

impl From<u64> for RngSeed {
    fn from(v: u64) -> Self {
        RngSeed(v)
    }
}

/// Stream identifiers so that independent consumers of a seed never share draws.
pub(crate) mod streams {
    pub const SYNTHETIC: u64 = 1;
    pub const SAMPLING: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const BATCHES: u64 = 5;
    pub const RESERVOIR: u64 = 6;
    pub const INIT: u64 = 7;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(p: usize, n: usize, v: &[f64]) -> Embedding {
        Embedding::from_column_slice(p, n, v).unwrap()
    }

    #[test]
    fn distance_of_identical_columns_is_zero() {
        let x = emb(2, 2, &[1.5, -2.0, 1.5, -2.0]);
        assert_eq!(squared_distance(&x, 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn three_four_five() {
        let x = emb(2, 2, &[0.0, 0.0, 3.0, 4.0]);
        assert_eq!(squared_distance(&x, 0, 1).unwrap(), 25.0);
        assert_eq!(squared_distance(&x, 1, 0).unwrap(), 25.0);
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let x = emb(1, 2, &[0.0, 1.0]);
        assert!(matches!(
            squared_distance(&x, 0, 2),
            Err(Error::Range { index: 2, n: 2 })
        ));
    }

    #[test]
    fn margin_examples() {
        // x0=0, x1=1, x2=2 on a line: d01=1, d02=4
        let x = emb(1, 3, &[0.0, 1.0, 2.0]);
        let q = Comparison::triplet(0, 1, 2).unwrap();
        assert_eq!(comparison_margin(&x, &q).unwrap(), -3.0);
        // symmetric: d01 == d12
        let q = Comparison::new(0, 1, 1, 2, Label::Closer).unwrap();
        assert_eq!(comparison_margin(&x, &q).unwrap(), 0.0);
    }

    #[test]
    fn center_examples() {
        let ones = emb(2, 3, &[1.0; 6]);
        assert!(center(&ones).matrix().iter().all(|&v| v == 0.0));

        let c = emb(2, 2, &[1.0, -2.0, -1.0, 2.0]);
        assert!(c.is_centered());
        assert!((center(&c).matrix() - c.matrix()).norm() < 1e-12);
    }

    #[test]
    fn non_finite_embedding_rejected() {
        assert!(matches!(
            Embedding::from_column_slice(1, 2, &[0.0, f64::NAN]),
            Err(Error::NumericInput(_))
        ));
        assert!(Embedding::from_column_slice(1, 1, &[0.0]).is_err());
    }

    #[test]
    fn comparison_validation() {
        assert!(Comparison::new(0, 0, 1, 2, Label::Closer).is_err());
        assert!(Comparison::new(0, 1, 2, 2, Label::Closer).is_err());
        assert!(Comparison::new(0, 1, 0, 1, Label::Closer).is_err());
        assert!(Comparison::new(0, 1, 1, 0, Label::Closer).is_err());
        assert!(Comparison::new(0, 1, 0, 2, Label::Farther).is_ok());
        assert!(Comparison::triplet(3, 1, 1).is_err());
    }

    #[test]
    fn duplicates_and_contradictions_keep_first() {
        let a = Comparison::triplet(0, 1, 2).unwrap();
        let same = Comparison::new(1, 0, 0, 2, Label::Closer).unwrap();
        let contra = Comparison::new(0, 2, 0, 1, Label::Closer).unwrap();
        let other = Comparison::triplet(1, 0, 2).unwrap();
        let (set, dropped) =
            ComparisonSet::with_dedup_count(3, vec![a, same, contra, other]).unwrap();
        assert_eq!(dropped, 2);
        assert_eq!(set.comparisons(), &[a, other]);
        assert!(set.triplet_mode());
    }

    #[test]
    fn set_rejects_out_of_range() {
        let q = Comparison::triplet(0, 1, 5).unwrap();
        assert!(matches!(
            ComparisonSet::new(3, vec![q]),
            Err(Error::Range { index: 5, n: 3 })
        ));
    }

    #[test]
    fn seeded_streams_are_reproducible_and_distinct() {
        use rand::Rng;
        let s = RngSeed(42);
        let a: u64 = s.rng(1).random();
        let b: u64 = s.rng(1).random();
        let c: u64 = s.rng(2).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}

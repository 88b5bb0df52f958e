//! Synthetic data, comparison generators, label noise, splits and file I/O.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::types::{center, streams, Comparison, ComparisonSet, Embedding, Label, RngSeed};

/// Gaussian point cloud `x_i ~ N(mean, variance I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub p: usize,
    pub variance: f64,
    /// Empty means the origin.
    pub mean: Vec<f64>,
    pub seed: RngSeed,
}

impl SyntheticSpec {
    pub fn new(n: usize, p: usize, variance: f64, seed: u64) -> Self {
        Self {
            n,
            p,
            variance,
            mean: Vec::new(),
            seed: RngSeed(seed),
        }
    }
}

/// Draws the point cloud; a zero mean is enforced exactly by re-centering.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Embedding> {
    if !(spec.variance > 0.0 && spec.variance.is_finite()) {
        return Err(Error::arg(format!("variance must be positive, got {}", spec.variance)));
    }
    if !spec.mean.is_empty() && spec.mean.len() != spec.p {
        return Err(Error::arg(format!(
            "mean has length {}, expected {}",
            spec.mean.len(),
            spec.p
        )));
    }
    let normal = Normal::new(0.0, spec.variance.sqrt()).map_err(|e| Error::arg(e.to_string()))?;
    let mut rng = spec.seed.rng(streams::SYNTHETIC);
    let values: Vec<f64> = (0..spec.n * spec.p).map(|_| normal.sample(&mut rng)).collect();
    let x = Embedding::from_column_slice(spec.p, spec.n, &values)?;
    let zero_mean = spec.mean.iter().all(|&m| m == 0.0);
    if zero_mean {
        return Ok(center(&x));
    }
    let shifted = DMatrix::from_fn(spec.p, spec.n, |r, c| x.matrix()[(r, c)] + spec.mean[r]);
    Embedding::new(shifted)
}

/// Centered random starting embedding with entries drawn from `N(0, scale^2)`.
pub fn random_init(p: usize, n: usize, scale: f64, seed: RngSeed) -> Result<Embedding> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::arg(format!("initial scale must be positive, got {scale}")));
    }
    let normal = Normal::new(0.0, scale).map_err(|e| Error::arg(e.to_string()))?;
    let mut rng = seed.rng(streams::INIT);
    let values: Vec<f64> = (0..n * p).map(|_| normal.sample(&mut rng)).collect();
    Ok(center(&Embedding::from_column_slice(p, n, &values)?))
}

/// Number of distinct triplets `(anchor, {j, k})` on `n` objects.
pub fn triplet_count(n: usize) -> usize {
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 2
    }
}

/// Decodes a position in `0..triplet_count(n)` into `(anchor, j, k)` with `j < k`.
fn decode_triplet(n: usize, pos: usize) -> (usize, usize, usize) {
    let per_anchor = (n - 1) * (n - 2) / 2;
    let anchor = pos / per_anchor;
    let mut rest = pos % per_anchor;
    // unordered pairs over the n - 1 other objects
    let m = n - 1;
    let mut a = 0;
    while rest >= m - 1 - a {
        rest -= m - 1 - a;
        a += 1;
    }
    let b = a + 1 + rest;
    let lift = |v: usize| if v >= anchor { v + 1 } else { v };
    (anchor, lift(a), lift(b))
}

/// Samples `count` distinct triplets and orients each by `dist` so that
/// `dist(i, j) < dist(i, k)`; tied candidates are skipped.
fn sample_oriented<F>(n: usize, count: usize, seed: RngSeed, dist: F) -> Result<ComparisonSet>
where
    F: Fn(usize, usize) -> f64,
{
    let total = triplet_count(n);
    if count > total {
        return Err(Error::arg(format!(
            "requested {count} triplets but only {total} exist on {n} objects"
        )));
    }
    let orient = |pos: usize| -> Option<Comparison> {
        let (i, a, b) = decode_triplet(n, pos);
        let (da, db) = (dist(i, a), dist(i, b));
        if da < db {
            Some(Comparison::triplet(i, a, b).expect("distinct indices"))
        } else if db < da {
            Some(Comparison::triplet(i, b, a).expect("distinct indices"))
        } else {
            None
        }
    };
    let mut rng = seed.rng(streams::SAMPLING);
    let mut out = Vec::with_capacity(count);
    if count.saturating_mul(4) <= total {
        let mut seen = HashSet::with_capacity(count * 2);
        let max_draws = 64 * count + 1024;
        let mut draws = 0;
        while out.len() < count && draws < max_draws {
            draws += 1;
            let pos = rng.random_range(0..total);
            if seen.insert(pos) {
                if let Some(q) = orient(pos) {
                    out.push(q);
                }
            }
        }
        if out.len() == count {
            return ComparisonSet::new(n, out);
        }
        out.clear();
    }
    // dense regime, or too many ties for rejection sampling
    let candidates: Vec<Comparison> = (0..total).filter_map(orient).collect();
    if count > candidates.len() {
        return Err(Error::arg(format!(
            "requested {count} triplets but only {} are untied",
            candidates.len()
        )));
    }
    for pos in index::sample(&mut rng, candidates.len(), count) {
        out.push(candidates[pos]);
    }
    ComparisonSet::new(n, out)
}

/// Uniform sample without replacement of triplets labeled by the geometry of `x`.
pub fn sample_triplets(x: &Embedding, count: usize, seed: RngSeed) -> Result<ComparisonSet> {
    let d = x.squared_distance_matrix();
    sample_oriented(x.len(), count, seed, |a, b| d[(a, b)])
}

/// Every untied triplet labeled by the geometry of `x`, in canonical order.
pub fn all_triplets(x: &Embedding) -> Result<ComparisonSet> {
    let d = x.squared_distance_matrix();
    all_oriented(x.len(), |a, b| d[(a, b)])
}

fn all_oriented<F: Fn(usize, usize) -> f64>(n: usize, dist: F) -> Result<ComparisonSet> {
    let out = (0..triplet_count(n))
        .filter_map(|pos| {
            let (i, a, b) = decode_triplet(n, pos);
            let (da, db) = (dist(i, a), dist(i, b));
            if da < db {
                Some(Comparison::triplet(i, a, b).expect("distinct indices"))
            } else if db < da {
                Some(Comparison::triplet(i, b, a).expect("distinct indices"))
            } else {
                None
            }
        })
        .collect();
    ComparisonSet::new(n, out)
}

/// Checks that `d` is a square, symmetric, zero-diagonal, non-negative matrix.
pub fn validate_distance_matrix(d: &DMatrix<f64>) -> Result<()> {
    if d.nrows() != d.ncols() {
        return Err(Error::arg(format!("distance matrix is {}x{}", d.nrows(), d.ncols())));
    }
    let n = d.nrows();
    for i in 0..n {
        if d[(i, i)] != 0.0 {
            return Err(Error::arg(format!("distance matrix has nonzero diagonal at {i}")));
        }
        for j in 0..n {
            let v = d[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(Error::arg(format!("distance ({i}, {j}) = {v} is not a non-negative number")));
            }
            if (v - d[(j, i)]).abs() > 1e-9 * v.abs().max(1.0) {
                return Err(Error::arg(format!("distance matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Triplets labeled directly from a distance matrix; `count = None` takes all.
pub fn triplets_from_distance_matrix(
    d: &DMatrix<f64>,
    count: Option<usize>,
    seed: RngSeed,
) -> Result<ComparisonSet> {
    validate_distance_matrix(d)?;
    let n = d.nrows();
    match count {
        Some(c) => sample_oriented(n, c, seed, |a, b| d[(a, b)]),
        None => all_oriented(n, |a, b| d[(a, b)]),
    }
}

/// Triplets `(i, j, k)` with `class(i) = class(j) != class(k)`.
pub fn class_triplets(labels: &[usize], count: usize, seed: RngSeed) -> Result<ComparisonSet> {
    let n = labels.len();
    let mut members: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &c) in labels.iter().enumerate() {
        members.entry(c).or_default().push(i);
    }
    if members.len() < 2 {
        return Err(Error::arg("class triplets need at least two classes"));
    }
    if let Some((c, _)) = members.iter().find(|(_, m)| m.len() < 2) {
        return Err(Error::arg(format!("class {c} has fewer than two members")));
    }
    // anchor i contributes (|c_i| - 1) * (n - |c_i|) triplets
    let per_anchor: Vec<usize> = labels
        .iter()
        .map(|c| {
            let size = members[c].len();
            (size - 1) * (n - size)
        })
        .collect();
    let total: usize = per_anchor.iter().sum();
    if count > total {
        return Err(Error::arg(format!(
            "requested {count} class triplets but only {total} exist"
        )));
    }
    let mut cumulative = Vec::with_capacity(n + 1);
    cumulative.push(0usize);
    for w in &per_anchor {
        cumulative.push(cumulative.last().unwrap() + w);
    }
    let decode = |pos: usize| -> Comparison {
        let i = cumulative.partition_point(|&c| c <= pos) - 1;
        let rest = pos - cumulative[i];
        let same = &members[&labels[i]];
        let others = n - same.len();
        let (ji, ki) = (rest / others, rest % others);
        let j = same.iter().copied().filter(|&v| v != i).nth(ji).expect("in range");
        let k = (0..n).filter(|&v| labels[v] != labels[i]).nth(ki).expect("in range");
        Comparison::triplet(i, j, k).expect("distinct indices")
    };
    let mut rng = seed.rng(streams::SAMPLING);
    let positions: Vec<usize> = if count.saturating_mul(4) <= total {
        let mut seen = HashSet::with_capacity(count * 2);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let pos = rng.random_range(0..total);
            if seen.insert(pos) {
                out.push(pos);
            }
        }
        out
    } else {
        index::sample(&mut rng, total, count).into_vec()
    };
    ComparisonSet::new(n, positions.into_iter().map(decode).collect())
}

/// Reverses one comparison: swaps `j` and `k` of a triplet, flips the label of a quadruplet.
fn reverse(q: Comparison) -> Comparison {
    if q.is_triplet() {
        Comparison { j: q.k, k: q.j, ..q }
    } else {
        q.flipped()
    }
}

/// Reverses exactly `floor(rate * |Q|)` comparisons chosen by `seed`.
pub fn inject_noise(set: &ComparisonSet, rate: f64, seed: RngSeed) -> Result<ComparisonSet> {
    Ok(inject_noise_at(set, rate, seed)?.0)
}

/// As [`inject_noise`], also returning the sorted reversed positions.
pub fn inject_noise_at(
    set: &ComparisonSet,
    rate: f64,
    seed: RngSeed,
) -> Result<(ComparisonSet, Vec<usize>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::arg(format!("noise rate must lie in [0, 1), got {rate}")));
    }
    let flips = (rate * set.len() as f64).floor() as usize;
    let mut rng = seed.rng(streams::NOISE);
    let mut positions = index::sample(&mut rng, set.len(), flips).into_vec();
    positions.sort_unstable();
    let mut mask = vec![false; set.len()];
    for &p in &positions {
        mask[p] = true;
    }
    let noisy = set.map_labels(|pos, q| if mask[pos] { reverse(q) } else { q });
    Ok((noisy, positions))
}

/// Sizes and noise of a train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub train_count: usize,
    pub test_count: usize,
    /// Fraction of training comparisons reversed; the test part stays clean.
    pub noise_rate: f64,
    pub seed: RngSeed,
}

impl SplitSpec {
    pub fn new(train_count: usize, test_count: usize, seed: u64) -> Self {
        Self {
            train_count,
            test_count,
            noise_rate: 0.0,
            seed: RngSeed(seed),
        }
    }

    /// Sizes from a training fraction of `total`; the rest becomes test data.
    pub fn from_fraction(total: usize, train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::arg(format!(
                "train fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        let train = ((total as f64) * train_fraction).round() as usize;
        Ok(Self::new(train, total - train, seed))
    }
}

/// Disjoint train and test subsets, each in the original order.
pub fn split(set: &ComparisonSet, spec: &SplitSpec) -> Result<(ComparisonSet, ComparisonSet)> {
    let need = spec.train_count + spec.test_count;
    if need > set.len() {
        return Err(Error::arg(format!(
            "split needs {need} comparisons but the set has {}",
            set.len()
        )));
    }
    if spec.train_count == 0 || spec.test_count == 0 {
        return Err(Error::arg("train and test parts must both be nonempty"));
    }
    let mut rng = spec.seed.rng(streams::SPLIT);
    let chosen = index::sample(&mut rng, set.len(), need).into_vec();
    let mut train: Vec<usize> = chosen[..spec.train_count].to_vec();
    let mut test: Vec<usize> = chosen[spec.train_count..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    let train = inject_noise(&set.select(&train), spec.noise_rate, spec.seed)?;
    Ok((train, set.select(&test)))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Number of columns a comparison file row may have.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowShape {
    Triplet,
    Quadruplet,
    Either,
}

fn load_rows(path: &Path, n: Option<usize>, shape: RowShape) -> Result<ComparisonSet> {
    let mut reader = csv_reader(path)?;
    let mut comparisons = Vec::new();
    let mut max_index = 0usize;
    let mut first = true;
    let mut skipped_ties = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<i64>, _> = record.iter().map(str::parse::<i64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if first => {
                first = false;
                continue; // header row
            }
            Err(e) => return Err(parse_error(path, line, format!("not an integer row: {e}"))),
        };
        first = false;
        let width_ok = match shape {
            RowShape::Triplet => values.len() == 3,
            RowShape::Quadruplet => values.len() == 5,
            RowShape::Either => values.len() == 3 || values.len() == 5,
        };
        if !width_ok {
            return Err(parse_error(path, line, format!("unexpected column count {}", values.len())));
        }
        let index_count = if values.len() == 3 { 3 } else { 4 };
        let mut idx = [0usize; 4];
        for (slot, &v) in values[..index_count].iter().enumerate() {
            if v < 1 {
                return Err(parse_error(path, line, format!("index {v} is not 1-based")));
            }
            idx[slot] = (v - 1) as usize;
            max_index = max_index.max(idx[slot]);
        }
        let q = if values.len() == 3 {
            Comparison::triplet(idx[0], idx[1], idx[2])
        } else {
            let label = match Label::from_sign(values[4]) {
                Some(l) => l,
                None => {
                    skipped_ties += 1;
                    continue;
                }
            };
            Comparison::new(idx[0], idx[1], idx[2], idx[3], label)
        }
        .map_err(|e| parse_error(path, line, e.to_string()))?;
        comparisons.push(q);
    }
    if skipped_ties > 0 {
        log::warn!("{}: skipped {skipped_ties} rows with label 0", path.display());
    }
    let n = match n {
        Some(n) => {
            if !comparisons.is_empty() && max_index >= n {
                return Err(Error::Range { index: max_index, n });
            }
            n
        }
        None => max_index + 1,
    };
    let (set, dropped) = ComparisonSet::with_dedup_count(n, comparisons)?;
    if dropped > 0 {
        log::info!("{}: dropped {dropped} duplicate comparisons", path.display());
    }
    Ok(set)
}

/// Reads 1-based `i,j,k` rows ("`i` is closer to `j` than to `k`").
///
/// `n = None` infers the object count from the largest index.
pub fn load_triplets(path: impl AsRef<Path>, n: Option<usize>) -> Result<ComparisonSet> {
    load_rows(path.as_ref(), n, RowShape::Triplet)
}

/// Reads 1-based `i,j,l,k,y` rows with `y` in `{1, -1}`; rows with `y = 0` are skipped.
pub fn load_quadruplets(path: impl AsRef<Path>, n: Option<usize>) -> Result<ComparisonSet> {
    load_rows(path.as_ref(), n, RowShape::Quadruplet)
}

/// Reads a file mixing both row shapes.
pub fn load_comparisons(path: impl AsRef<Path>, n: Option<usize>) -> Result<ComparisonSet> {
    load_rows(path.as_ref(), n, RowShape::Either)
}

/// Writes `set` with 1-based indices: `i,j,k` rows when every entry is a
/// triplet labeled closer, `i,j,l,k,y` rows otherwise.
pub fn save_comparisons(path: impl AsRef<Path>, set: &ComparisonSet) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_comparisons(&mut w, set).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_comparisons<W: Write>(w: &mut W, set: &ComparisonSet) -> std::io::Result<()> {
    let short = set.iter().all(|q| q.is_triplet() && q.label == Label::Closer);
    writeln!(w, "# objects: {}", set.n())?;
    for q in set {
        if short {
            writeln!(w, "{},{},{}", q.i + 1, q.j + 1, q.k + 1)?;
        } else {
            writeln!(w, "{},{},{},{},{}", q.i + 1, q.j + 1, q.l + 1, q.k + 1, q.label.sign())?;
        }
    }
    Ok(())
}

/// Reads an `n x n` matrix of comma-separated reals.
pub fn load_distance_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = row.map_err(|e| parse_error(path, line, format!("not a number: {e}")))?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_error(path, line, format!("row has {} values, expected {}", row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    parse_distance_rows(rows).map_err(|m| parse_error(path, 0, m))
}

fn parse_distance_rows(rows: Vec<Vec<f64>>) -> std::result::Result<DMatrix<f64>, String> {
    let n = rows.len();
    if n < 2 || rows.iter().any(|r| r.len() != n) {
        return Err(format!("expected a square matrix with at least 2 rows, got {n} rows"));
    }
    let d = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    validate_distance_matrix(&d).map_err(|e| e.to_string())?;
    Ok(d)
}

const EURODIST_CSV: &str = include_str!("../data/eurodist.csv");

/// Road distances in kilometres between 21 European cities, with city names.
pub fn eurodist() -> (DMatrix<f64>, Vec<String>) {
    let mut names = Vec::new();
    let mut rows = Vec::new();
    for line in EURODIST_CSV.lines() {
        if let Some(rest) = line.strip_prefix("# Row/column order:") {
            names = rest.split(',').map(|s| s.trim().to_string()).collect();
        } else if !line.starts_with('#') && !line.trim().is_empty() {
            rows.push(line.split(',').map(|v| v.trim().parse::<f64>().expect("bundled data")).collect());
        }
    }
    let d = parse_distance_rows(rows).expect("bundled distance matrix is valid");
    assert_eq!(names.len(), d.nrows(), "bundled city list matches the matrix");
    (d, names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_covers_every_triplet_once() {
        for n in 3..8 {
            let mut seen = HashSet::new();
            for pos in 0..triplet_count(n) {
                let (i, a, b) = decode_triplet(n, pos);
                assert!(i < n && a < b && b < n && a != i && b != i);
                assert!(seen.insert((i, a, b)));
            }
            assert_eq!(seen.len(), n * (n - 1) * (n - 2) / 2);
        }
    }

    #[test]
    fn collinear_points() {
        let x = Embedding::from_column_slice(1, 3, &[0.0, 1.0, 3.0]).unwrap();
        let all = all_triplets(&x).unwrap();
        let q = all.iter().find(|q| q.i == 1).unwrap();
        assert_eq!((q.i, q.j, q.k, q.label), (1, 0, 2, Label::Closer));
    }

    #[test]
    fn distance_matrix_triplet() {
        let d = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 1.0, 0.0, 1.5, 2.0, 1.5, 0.0]);
        let all = triplets_from_distance_matrix(&d, None, RngSeed(0)).unwrap();
        assert!(all.iter().any(|q| (q.i, q.j, q.k) == (0, 1, 2) && q.label == Label::Closer));
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.1, 0.0]);
        assert!(triplets_from_distance_matrix(&asym, None, RngSeed(0)).is_err());
    }

    #[test]
    fn ties_are_never_emitted() {
        // equilateral triangle plus its center: many ties
        let s = 3f64.sqrt() / 2.0;
        let x = Embedding::from_column_slice(2, 4, &[0.0, 0.0, 1.0, 0.0, 0.5, s, 0.5, s / 3.0]).unwrap();
        let all = all_triplets(&x).unwrap();
        let d = x.squared_distance_matrix();
        for q in &all {
            assert!(d[(q.i, q.j)] < d[(q.i, q.k)]);
        }
        assert!(all.len() < triplet_count(4));
        assert!(sample_triplets(&x, triplet_count(4), RngSeed(1)).is_err());
    }

    #[test]
    fn too_many_requested() {
        let x = Embedding::from_column_slice(1, 3, &[0.0, 1.0, 3.0]).unwrap();
        assert!(sample_triplets(&x, 4, RngSeed(0)).is_err());
    }

    #[test]
    fn noise_rate_bounds() {
        let x = Embedding::from_column_slice(1, 4, &[0.0, 1.0, 3.0, 7.0]).unwrap();
        let q = all_triplets(&x).unwrap();
        assert!(inject_noise(&q, 1.0, RngSeed(0)).is_err());
        assert!(inject_noise(&q, -0.1, RngSeed(0)).is_err());
        assert_eq!(inject_noise(&q, 0.0, RngSeed(0)).unwrap(), q);
    }

    #[test]
    fn class_structure_validation() {
        assert!(class_triplets(&[0, 0, 0], 1, RngSeed(0)).is_err());
        assert!(class_triplets(&[0, 0, 1], 1, RngSeed(0)).is_err());
        assert!(class_triplets(&[0, 0, 1, 1], 9, RngSeed(0)).is_err());
    }

    #[test]
    fn bundled_eurodist() {
        let (d, names) = eurodist();
        assert_eq!(d.nrows(), 21);
        let athens = names.iter().position(|c| c == "Athens").unwrap();
        let rome = names.iter().position(|c| c == "Rome").unwrap();
        assert_eq!(d[(athens, rome)], 817.0);
    }
}

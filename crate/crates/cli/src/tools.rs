//! `check-gradients` and `triplets gen|noise|split`.

use std::path::{Path, PathBuf};

use ordembed::data::{
    all_triplets, class_triplets, eurodist, gen_synthetic, inject_noise_at, load_comparisons,
    load_distance_matrix, sample_triplets, save_comparisons, split, triplets_from_distance_matrix,
    SplitSpec, SyntheticSpec,
};
use ordembed::gradcheck::{check_gradients, GradCheckConfig, GradCheckReport};
use ordembed::{ComparisonSet, LossKind, LossModel, RngSeed};

use crate::error::CliError;
use crate::experiment::load_labels;
use crate::output::{embedding_csv, write_atomic};

/// Runs the finite-difference suite for each of `kinds`.
pub fn gradient_reports(kinds: &[LossKind], cfg: &GradCheckConfig) -> Result<Vec<GradCheckReport>, CliError> {
    kinds
        .iter()
        .map(|&kind| Ok(check_gradients(&LossModel::for_dim(kind, cfg.p), cfg)?))
        .collect()
}

pub fn parse_kinds(spec: &str) -> Result<Vec<LossKind>, CliError> {
    if spec == "all" {
        return Ok(LossKind::ALL.to_vec());
    }
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<LossKind>()
                .map_err(|_| CliError::Config(vec![format!("--loss: unknown loss {s:?}")]))
        })
        .collect()
}

/// Where generated comparisons come from.
#[derive(Debug, Clone, PartialEq)]
pub enum GenSource {
    Synthetic { n: usize, p: usize, variance: f64 },
    Distances(PathBuf),
    Eurodist,
    Labels(PathBuf),
}

/// Generates comparisons; `count = None` means every distinct triplet.
/// For synthetic data the ground-truth points are returned as well.
pub fn generate(
    source: &GenSource,
    count: Option<usize>,
    seed: u64,
) -> Result<(ComparisonSet, Option<ordembed::Embedding>), CliError> {
    let rng = RngSeed(seed);
    Ok(match source {
        GenSource::Synthetic { n, p, variance } => {
            let truth = gen_synthetic(&SyntheticSpec::new(*n, *p, *variance, seed))?;
            let set = match count {
                Some(c) => sample_triplets(&truth, c, rng)?,
                None => all_triplets(&truth)?,
            };
            (set, Some(truth))
        }
        GenSource::Distances(path) => (triplets_from_distance_matrix(&load_distance_matrix(path)?, count, rng)?, None),
        GenSource::Eurodist => (triplets_from_distance_matrix(&eurodist().0, count, rng)?, None),
        GenSource::Labels(path) => {
            let count = count.ok_or_else(|| CliError::Config(vec!["--count is required for class labels".into()]))?;
            (class_triplets(&load_labels(path)?, count, rng)?, None)
        }
    })
}

pub fn write_set(path: &Path, set: &ComparisonSet) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    Ok(save_comparisons(path, set)?)
}

pub fn gen_command(
    source: &GenSource,
    count: Option<usize>,
    seed: u64,
    out: &Path,
    truth_out: Option<&Path>,
) -> Result<usize, CliError> {
    let (set, truth) = generate(source, count, seed)?;
    write_set(out, &set)?;
    if let (Some(path), Some(truth)) = (truth_out, truth) {
        let comments = vec![format!("ground truth, seed = {seed}")];
        write_atomic(path, &embedding_csv(&truth, &comments)?)?;
    }
    Ok(set.len())
}

/// Reverses a fraction of the comparisons in a file; returns the number reversed.
pub fn noise_command(input: &Path, n: Option<usize>, rate: f64, seed: u64, out: &Path) -> Result<usize, CliError> {
    let set = load_comparisons(input, n)?;
    let (noisy, flipped) = inject_noise_at(&set, rate, RngSeed(seed))?;
    write_set(out, &noisy)?;
    Ok(flipped.len())
}

/// Sizes of a file split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitSizes {
    Counts { train: usize, test: usize },
    Fraction(f64),
}

pub fn split_command(
    input: &Path,
    n: Option<usize>,
    sizes: SplitSizes,
    noise: f64,
    seed: u64,
    outputs: (&Path, &Path),
) -> Result<(usize, usize), CliError> {
    let set = load_comparisons(input, n)?;
    let mut spec = match sizes {
        SplitSizes::Counts { train, test } => SplitSpec::new(train, test, seed),
        SplitSizes::Fraction(f) => SplitSpec::from_fraction(set.len(), f, seed)?,
    };
    spec.noise_rate = noise;
    let (train, test) = split(&set, &spec)?;
    write_set(outputs.0, &train)?;
    write_set(outputs.1, &test)?;
    Ok((train.len(), test.len()))
}

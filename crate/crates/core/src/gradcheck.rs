//! Finite-difference verification of the analytic comparison gradients.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::losses::{LossKind, LossModel};
use crate::types::{comparison_margin, Comparison, Embedding, Label, RngSeed};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckConfig {
    pub trials: usize,
    pub tolerance: f64,
    /// Embedding dimension of each random trial.
    pub p: usize,
    /// Number of objects of each random trial.
    pub n: usize,
    /// Central-difference step.
    pub step: f64,
    /// Hinge trials whose `|1 + margin|` falls below this are redrawn.
    pub kink_margin: f64,
    pub seed: RngSeed,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            trials: 1000,
            tolerance: 1e-6,
            p: 10,
            n: 6,
            step: 1e-5,
            kink_margin: 1e-3,
            seed: RngSeed(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub kind: LossKind,
    pub trials: usize,
    pub max_rel_error: f64,
    /// Trial index where `max_rel_error` occurred.
    pub worst_trial: usize,
    /// Hinge draws rejected for lying too close to the kink.
    pub redrawn: usize,
    pub passed: bool,
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central differences of the per-comparison loss over every entry of `x`.
pub fn numeric_gradient(model: &LossModel, x: &Embedding, q: &Comparison, h: f64) -> Vec<f64> {
    let p = x.dim();
    let mut point = x.as_slice().to_vec();
    let mut out = vec![0.0; point.len()];
    for e in 0..point.len() {
        let orig = point[e];
        point[e] = orig + h;
        let up = model.loss_flat(&point, p, q);
        point[e] = orig - h;
        let down = model.loss_flat(&point, p, q);
        point[e] = orig;
        out[e] = (up - down) / (2.0 * h);
    }
    out
}

/// Analytic per-comparison gradient scattered into a flat `p x n` vector.
pub fn analytic_gradient(model: &LossModel, x: &Embedding, q: &Comparison) -> Vec<f64> {
    let mut out = vec![0.0; x.as_slice().len()];
    model.add_grad(x.as_slice(), x.dim(), q, 1.0, &mut out);
    out
}

fn random_comparison<R: Rng>(rng: &mut R, n: usize) -> Comparison {
    loop {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let triplet = rng.random_bool(0.5);
        let l = if triplet { i } else { rng.random_range(0..n) };
        let k = rng.random_range(0..n);
        let label = if rng.random_bool(0.5) { Label::Closer } else { Label::Farther };
        if let Ok(q) = Comparison::new(i, j, l, k, label) {
            return q;
        }
    }
}

/// Compares `model` against `gradient` on random trials.
pub fn check_with<G>(model: &LossModel, cfg: &GradCheckConfig, gradient: G) -> Result<GradCheckReport>
where
    G: Fn(&LossModel, &Embedding, &Comparison) -> Vec<f64>,
{
    if cfg.trials == 0 || cfg.n < 3 || cfg.p == 0 {
        return Err(Error::arg("gradient check needs trials >= 1, n >= 3 and p >= 1"));
    }
    if !(cfg.step > 0.0 && cfg.tolerance > 0.0) {
        return Err(Error::arg("step and tolerance must be positive"));
    }
    let mut rng = cfg.seed.rng(0);
    let mut max_rel = 0.0f64;
    let mut worst = 0;
    let mut redrawn = 0;
    let mut trial = 0;
    while trial < cfg.trials {
        let values: Vec<f64> = (0..cfg.p * cfg.n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                0.5 * z
            })
            .collect();
        let x = Embedding::from_column_slice(cfg.p, cfg.n, &values)?;
        let q = random_comparison(&mut rng, cfg.n);
        if model.kind() == LossKind::Gnmds {
            let ((a, b), (c, d)) = q.oriented();
            let near = Comparison::new(a, b, c, d, Label::Closer)?;
            if (1.0 + comparison_margin(&x, &near)?).abs() <= cfg.kink_margin {
                redrawn += 1;
                continue;
            }
        }
        let numeric = numeric_gradient(model, &x, &q, cfg.step);
        let rel = relative_error(&gradient(model, &x, &q), &numeric);
        if !(rel <= max_rel) {
            max_rel = rel;
            worst = trial;
        }
        trial += 1;
    }
    Ok(GradCheckReport {
        kind: model.kind(),
        trials: cfg.trials,
        max_rel_error: max_rel,
        worst_trial: worst,
        redrawn,
        passed: max_rel < cfg.tolerance,
    })
}

/// Checks the analytic gradient of `model`.
pub fn check_gradients(model: &LossModel, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    check_with(model, cfg, analytic_gradient)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_basics() {
        assert_eq!(relative_error(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(relative_error(&[1.0, 0.0], &[1.0, 0.0]), 0.0);
        assert!((relative_error(&[2.0], &[1.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn corrupted_gradient_fails() {
        let model = LossModel::for_dim(LossKind::Ste, 4);
        let cfg = GradCheckConfig {
            trials: 20,
            p: 4,
            ..Default::default()
        };
        let report = check_with(&model, &cfg, |m, x, q| {
            analytic_gradient(m, x, q).into_iter().map(|g| g * 1.01).collect()
        })
        .unwrap();
        assert!(!report.passed);
        assert!(report.max_rel_error > 1e-3);
    }
}

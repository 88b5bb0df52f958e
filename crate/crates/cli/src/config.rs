//! Experiment configuration read from TOML. Unknown keys are rejected and
//! every range violation is reported together.

use std::path::{Path, PathBuf};

use ordembed::data::triplet_count;
use ordembed::LossKind;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    /// Target test error for evaluations-to-threshold accounting.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub dataset: DatasetConfig,
    pub loss: LossConfig,
    pub embedding: EmbeddingConfig,
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_threshold() -> f64 {
    0.15
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Gaussian cloud `N(0, variance I)`; triplets sampled from its distances.
    Synthetic {
        n: usize,
        p: usize,
        #[serde(default = "default_variance")]
        variance: f64,
    },
    /// Triplet or quadruplet file with 1-based indices.
    Comparisons { path: PathBuf, n: Option<usize> },
    /// Square symmetric distance matrix; triplets sampled from it.
    DistanceMatrix { path: PathBuf },
    /// The bundled 21-city road distance matrix.
    Eurodist,
    /// One class label per line; same-class pairs are closer than cross-class pairs.
    ClassLabels { path: PathBuf },
}

fn default_variance() -> f64 {
    1.0 / 20.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub kind: String,
    /// Student-t degrees of freedom for TSTE; defaults to `dim - 1`.
    pub alpha: Option<f64>,
}

impl LossConfig {
    pub fn loss_kind(&self) -> Option<LossKind> {
        self.kind.parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub dim: usize,
    /// Standard deviation of the random starting embedding.
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
}

fn default_init_scale() -> f64 {
    0.01
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonMode {
    /// `epsilon` times the secant curvature of the first two snapshots.
    Relative,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbbParams {
    pub epochs: usize,
    #[serde(default = "one")]
    pub b: usize,
    /// Inner-loop length; defaults to the training set size.
    pub m: Option<usize>,
    #[serde(default = "default_eta0")]
    pub eta0: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_epsilon_mode")]
    pub epsilon_rule: EpsilonMode,
    /// Run `ceil(m / b)` inner iterations so every epoch costs the same.
    #[serde(default = "yes")]
    pub fair_inner_loop: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModularParams {
    pub epochs: usize,
    pub modules: usize,
    #[serde(default)]
    pub restart_from_snapshot: bool,
    #[serde(default = "one")]
    pub b: usize,
    pub m: Option<usize>,
    #[serde(default = "default_eta0")]
    pub eta0: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_epsilon_mode")]
    pub epsilon_rule: EpsilonMode,
    #[serde(default = "yes")]
    pub fair_inner_loop: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedParams {
    pub epochs: usize,
    pub eta: f64,
    #[serde(default = "one")]
    pub b: usize,
    pub m: Option<usize>,
    #[serde(default = "yes")]
    pub fair_inner_loop: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdParams {
    pub epochs: usize,
    pub eta: f64,
    /// With a decay the step is `eta / (1 + decay * t)`.
    pub decay: Option<f64>,
    /// Defaults to `3 |Q|`, the per-epoch cost of SVRG.
    pub steps_per_epoch: Option<usize>,
    #[serde(default = "one")]
    pub batch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdParams {
    pub epochs: usize,
    pub eta: f64,
    #[serde(default = "three")]
    pub iterations_per_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvexParams {
    pub epochs: usize,
    /// Step on the gradient of the mean loss.
    #[serde(default = "default_convex_eta")]
    pub eta: f64,
    #[serde(default = "three")]
    pub iterations_per_epoch: usize,
}

fn one() -> usize {
    1
}

fn three() -> usize {
    3
}

fn yes() -> bool {
    true
}

fn default_eta0() -> f64 {
    1e-2
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_epsilon_mode() -> EpsilonMode {
    EpsilonMode::Relative
}

fn default_convex_eta() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum OptimizerConfig {
    SvrgSbb(SbbParams),
    SvrgSbbModular(ModularParams),
    SvrgFixed(FixedParams),
    Sgd(SgdParams),
    BatchGd(GdParams),
    Convex(ConvexParams),
}

impl OptimizerConfig {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerConfig::SvrgSbb(_) => "svrg_sbb",
            OptimizerConfig::SvrgSbbModular(_) => "svrg_sbb_modular",
            OptimizerConfig::SvrgFixed(_) => "svrg_fixed",
            OptimizerConfig::Sgd(_) => "sgd",
            OptimizerConfig::BatchGd(_) => "batch_gd",
            OptimizerConfig::Convex(_) => "convex",
        }
    }

    pub fn epochs(&self) -> usize {
        match self {
            OptimizerConfig::SvrgSbb(p) => p.epochs,
            OptimizerConfig::SvrgSbbModular(p) => p.epochs,
            OptimizerConfig::SvrgFixed(p) => p.epochs,
            OptimizerConfig::Sgd(p) => p.epochs,
            OptimizerConfig::BatchGd(p) => p.epochs,
            OptimizerConfig::Convex(p) => p.epochs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    /// Training comparisons; for generated datasets `train + test` are drawn.
    pub train: Option<usize>,
    pub test: Option<usize>,
    /// Used for comparison files when counts are not given.
    pub train_fraction: Option<f64>,
    /// Fraction of training labels reversed.
    #[serde(default)]
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "three")]
    pub checkpoints_per_epoch: usize,
    /// Retrieval cut-offs, computed on the final embedding of class-label datasets.
    #[serde(default)]
    pub retrieval_k: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            checkpoints_per_epoch: 3,
            retrieval_k: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    #[serde(default = "yes")]
    pub plots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("results"),
            plots: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(vec![e.to_string()]))?;
        let problems = cfg.problems();
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(CliError::Config(problems))
        }
    }

    /// Reads a config file, resolving relative data paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.dataset {
            DatasetConfig::Comparisons { path, .. }
            | DatasetConfig::DistanceMatrix { path }
            | DatasetConfig::ClassLabels { path } => fix(path),
            DatasetConfig::Synthetic { .. } | DatasetConfig::Eurodist => {}
        }
        fix(&mut self.output.directory);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    /// Every range violation in the config; empty when it is usable.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                out.push(msg);
            }
        };
        need(!self.seeds.is_empty(), "seeds: at least one seed is required".into());
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        need(sorted.len() == self.seeds.len(), "seeds: duplicate seeds".into());
        need(
            self.threshold > 0.0 && self.threshold < 1.0,
            format!("threshold: must lie in (0, 1), got {}", self.threshold),
        );

        let objects = match &self.dataset {
            DatasetConfig::Synthetic { n, p, variance } => {
                need(*n >= 3, format!("dataset.n: need at least 3 objects, got {n}"));
                need(*p >= 1, "dataset.p: must be at least 1".into());
                need(
                    *variance > 0.0 && variance.is_finite(),
                    format!("dataset.variance: must be positive, got {variance}"),
                );
                Some(*n)
            }
            DatasetConfig::Comparisons { n, .. } => {
                if let Some(n) = n {
                    need(*n >= 3, format!("dataset.n: need at least 3 objects, got {n}"));
                }
                *n
            }
            DatasetConfig::Eurodist => Some(21),
            DatasetConfig::DistanceMatrix { .. } | DatasetConfig::ClassLabels { .. } => None,
        };

        let kind = self.loss.loss_kind();
        need(
            kind.is_some(),
            format!("loss.kind: unknown loss {:?} (gnmds, ckl, ste, tste)", self.loss.kind),
        );
        if let Some(alpha) = self.loss.alpha {
            need(alpha > 0.0 && alpha.is_finite(), format!("loss.alpha: must be positive, got {alpha}"));
            need(
                kind.is_none() || kind == Some(LossKind::Tste),
                "loss.alpha: only TSTE takes alpha".into(),
            );
        }

        need(self.embedding.dim >= 1, "embedding.dim: must be at least 1".into());
        need(
            self.embedding.init_scale > 0.0 && self.embedding.init_scale.is_finite(),
            format!("embedding.init_scale: must be positive, got {}", self.embedding.init_scale),
        );

        let positive = |v: f64| v > 0.0 && v.is_finite();
        need(self.optimizer.epochs() >= 1, "optimizer.epochs: must be at least 1".into());
        match &self.optimizer {
            OptimizerConfig::SvrgSbb(p) => {
                sbb_problems(&mut need, p.b, p.m, p.eta0, p.epsilon, p.epsilon_rule);
            }
            OptimizerConfig::SvrgSbbModular(p) => {
                sbb_problems(&mut need, p.b, p.m, p.eta0, p.epsilon, p.epsilon_rule);
                need(p.modules >= 1, "optimizer.modules: must be at least 1".into());
            }
            OptimizerConfig::SvrgFixed(p) => {
                need(p.b >= 1, "optimizer.b: must be at least 1".into());
                need(p.m != Some(0), "optimizer.m: must be at least 1".into());
                need(positive(p.eta), format!("optimizer.eta: must be positive, got {}", p.eta));
            }
            OptimizerConfig::Sgd(p) => {
                need(positive(p.eta), format!("optimizer.eta: must be positive, got {}", p.eta));
                if let Some(d) = p.decay {
                    need(d >= 0.0 && d.is_finite(), format!("optimizer.decay: must be non-negative, got {d}"));
                }
                need(p.steps_per_epoch != Some(0), "optimizer.steps_per_epoch: must be at least 1".into());
                need(p.batch >= 1, "optimizer.batch: must be at least 1".into());
            }
            OptimizerConfig::BatchGd(p) => {
                need(positive(p.eta), format!("optimizer.eta: must be positive, got {}", p.eta));
                need(p.iterations_per_epoch >= 1, "optimizer.iterations_per_epoch: must be at least 1".into());
            }
            OptimizerConfig::Convex(p) => {
                need(positive(p.eta), format!("optimizer.eta: must be positive, got {}", p.eta));
                need(p.iterations_per_epoch >= 1, "optimizer.iterations_per_epoch: must be at least 1".into());
            }
        }

        let s = &self.split;
        need(
            (0.0..1.0).contains(&s.noise),
            format!("split.noise: must lie in [0, 1), got {}", s.noise),
        );
        let generated = !matches!(self.dataset, DatasetConfig::Comparisons { .. });
        match (s.train, s.test, s.train_fraction) {
            (Some(tr), Some(te), None) => {
                need(tr >= 1 && te >= 1, "split: train and test must both be at least 1".into());
                if let (true, Some(n)) = (generated && !matches!(self.dataset, DatasetConfig::ClassLabels { .. }), objects) {
                    let total = triplet_count(n);
                    need(
                        tr + te <= total,
                        format!("split: train + test = {} exceeds the {total} distinct triplets on {n} objects", tr + te),
                    );
                }
            }
            (None, None, Some(f)) => {
                need(!generated, "split.train_fraction: only for comparison files; give train and test counts".into());
                need(f > 0.0 && f < 1.0, format!("split.train_fraction: must lie in (0, 1), got {f}"));
            }
            (None, None, None) => need(!generated, "split: train and test counts are required".into()),
            _ => need(false, "split: give either train and test, or train_fraction".into()),
        }

        need(self.eval.checkpoints_per_epoch >= 1, "eval.checkpoints_per_epoch: must be at least 1".into());
        if !self.eval.retrieval_k.is_empty() {
            need(
                matches!(self.dataset, DatasetConfig::ClassLabels { .. }),
                "eval.retrieval_k: retrieval needs a class_labels dataset".into(),
            );
            need(!self.eval.retrieval_k.contains(&0), "eval.retrieval_k: K must be at least 1".into());
        }
        out
    }
}

fn sbb_problems(
    need: &mut impl FnMut(bool, String),
    b: usize,
    m: Option<usize>,
    eta0: f64,
    epsilon: f64,
    rule: EpsilonMode,
) {
    need(b >= 1, "optimizer.b: must be at least 1".into());
    need(m != Some(0), "optimizer.m: must be at least 1".into());
    need(eta0 > 0.0 && eta0.is_finite(), format!("optimizer.eta0: must be positive, got {eta0}"));
    need(
        epsilon >= 0.0 && epsilon.is_finite(),
        format!("optimizer.epsilon: must be non-negative, got {epsilon}"),
    );
    if rule == EpsilonMode::Relative {
        need(epsilon > 0.0, "optimizer.epsilon: a relative rule needs epsilon > 0".into());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seeds = [1, 2]

[dataset]
source = "synthetic"
n = 20
p = 3

[loss]
kind = "ste"

[embedding]
dim = 3

[optimizer]
method = "svrg_sbb"
epochs = 2
b = 5

[split]
train = 300
test = 200
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.threshold, 0.15);
        assert_eq!(cfg.embedding.init_scale, 0.01);
        match &cfg.optimizer {
            OptimizerConfig::SvrgSbb(p) => {
                assert_eq!(p.b, 5);
                assert_eq!(p.eta0, 1e-2);
                assert!(p.fair_inner_loop);
            }
            other => panic!("parsed as {other:?}"),
        }
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let text = BASE.replace("b = 5", "b = 5\nbatch_size = 5");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(CliError::Config(_))));
        let text = BASE.replace("kind = \"ste\"", "kind = \"ste\"\nalpah = 2.0");
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = BASE.replace("p = 3\n", "p = 3\nsize = 4\n");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn all_problems_reported_together() {
        let text = BASE
            .replace("kind = \"ste\"", "kind = \"hinge\"")
            .replace("dim = 3", "dim = 0")
            .replace("train = 300", "train = 10000");
        match ExperimentConfig::from_toml(&text) {
            Err(CliError::Config(list)) => {
                assert_eq!(list.len(), 3, "{list:?}");
                assert!(list.iter().any(|m| m.starts_with("loss.kind")));
                assert!(list.iter().any(|m| m.starts_with("embedding.dim")));
                assert!(list.iter().any(|m| m.starts_with("split:")));
            }
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let text = BASE.replace(
            "source = \"synthetic\"\nn = 20\np = 3",
            "source = \"comparisons\"\npath = \"q.csv\"",
        );
        let text = text.replace("train = 300\ntest = 200", "train_fraction = 0.8");
        let mut cfg = ExperimentConfig::from_toml(&text).unwrap();
        cfg.resolve_paths(Path::new("/data/exp"));
        assert_eq!(
            cfg.dataset,
            DatasetConfig::Comparisons {
                path: PathBuf::from("/data/exp/q.csv"),
                n: None
            }
        );
        assert_eq!(cfg.output.directory, PathBuf::from("/data/exp/results"));
    }
}

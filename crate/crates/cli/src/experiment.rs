//! Per-seed experiment runs and the artifacts they leave on disk.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::{info, warn};
use nalgebra::DMatrix;
use ordembed::convex::{convex_solve_monitored, ConvexConfig};
use ordembed::data::{
    class_triplets, eurodist, gen_synthetic, load_comparisons, load_distance_matrix, random_init,
    sample_triplets, split, triplets_from_distance_matrix, SplitSpec, SyntheticSpec,
};
use ordembed::eval::{generalization_error_flat, retrieval_metrics, MetricsReport};
use ordembed::optim::{
    batch_gd_monitored, sgd_monitored, svrg_fixed_monitored, svrg_sbb_modular_monitored,
    svrg_sbb_monitored, Checkpoint, EpochTrace, EpsilonRule, FiniteSumOracle, GdConfig,
    OrdinalOracle, SbbConfig, SgdConfig, StepSchedule, SvrgFixedConfig,
};
use ordembed::{ComparisonSet, Embedding, LossModel, RngSeed};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{DatasetConfig, EpsilonMode, ExperimentConfig, OptimizerConfig};
use crate::error::CliError;
use crate::output::{self, fmt_f64};
use crate::plot;
use crate::summary::{self, first_hit, median_evals_to_threshold, SummaryRow, ThresholdHit};

/// One evaluation checkpoint of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub seed: u64,
    pub epoch: usize,
    pub checkpoint: usize,
    pub step_size: f64,
    pub train_loss: f64,
    pub test_error: f64,
    pub grad_evals: u64,
    /// Optimizer time since the start, excluding time spent evaluating checkpoints.
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeedStatus {
    Completed,
    Diverged { epoch: usize, reason: String },
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub status: SeedStatus,
    pub train_size: usize,
    pub test_size: usize,
    pub rows: Vec<TraceRow>,
    pub epochs: Vec<EpochTrace>,
    /// Final iterate, or the last finite snapshot of a diverged run.
    pub embedding: Embedding,
    pub final_train_loss: f64,
    pub final_test_error: f64,
    pub threshold_hit: Option<ThresholdHit>,
    pub retrieval: Option<MetricsReport>,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub runs: Vec<SeedRun>,
    pub summary: Vec<SummaryRow>,
}

impl Experiment {
    pub fn all_diverged(&self) -> bool {
        self.runs.iter().all(|r| r.status != SeedStatus::Completed)
    }

    /// Median evaluations-to-threshold in units of `|Q|`, infinite when not reached.
    pub fn median_evals_to_threshold(&self) -> f64 {
        median_evals_to_threshold(&self.runs)
    }
}

/// Dataset contents that do not depend on the seed, loaded once.
#[derive(Debug, Clone)]
enum Source {
    Synthetic { n: usize, p: usize, variance: f64 },
    Comparisons(ComparisonSet),
    Distances(DMatrix<f64>),
    Labels(Vec<usize>),
}

impl Source {
    fn load(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        Ok(match &cfg.dataset {
            DatasetConfig::Synthetic { n, p, variance } => Source::Synthetic {
                n: *n,
                p: *p,
                variance: *variance,
            },
            DatasetConfig::Comparisons { path, n } => Source::Comparisons(load_comparisons(path, *n)?),
            DatasetConfig::DistanceMatrix { path } => Source::Distances(load_distance_matrix(path)?),
            DatasetConfig::Eurodist => Source::Distances(eurodist().0),
            DatasetConfig::ClassLabels { path } => Source::Labels(load_labels(path)?),
        })
    }

    fn objects(&self) -> usize {
        match self {
            Source::Synthetic { n, .. } => *n,
            Source::Comparisons(set) => set.n(),
            Source::Distances(d) => d.nrows(),
            Source::Labels(l) => l.len(),
        }
    }

    fn labels(&self) -> Option<&[usize]> {
        match self {
            Source::Labels(l) => Some(l),
            _ => None,
        }
    }

    /// Clean comparisons to split for `seed`, and the split sizes.
    fn comparisons(&self, cfg: &ExperimentConfig, seed: u64) -> Result<(ComparisonSet, SplitSpec), CliError> {
        let s = &cfg.split;
        let counted = |total: usize| -> Result<SplitSpec, CliError> {
            let mut spec = match (s.train, s.test, s.train_fraction) {
                (Some(tr), Some(te), _) => SplitSpec::new(tr, te, seed),
                (_, _, Some(f)) => SplitSpec::from_fraction(total, f, seed)?,
                _ => SplitSpec::from_fraction(total, 0.8, seed)?,
            };
            spec.noise_rate = s.noise;
            Ok(spec)
        };
        let wanted = s.train.zip(s.test).map(|(a, b)| a + b);
        let need = || wanted.ok_or_else(|| CliError::Config(vec!["split: train and test counts are required".into()]));
        let set = match self {
            Source::Synthetic { n, p, variance } => {
                let truth = gen_synthetic(&SyntheticSpec::new(*n, *p, *variance, seed))?;
                sample_triplets(&truth, need()?, RngSeed(seed))?
            }
            Source::Comparisons(set) => set.clone(),
            Source::Distances(d) => triplets_from_distance_matrix(d, Some(need()?), RngSeed(seed))?,
            Source::Labels(labels) => class_triplets(labels, need()?, RngSeed(seed))?,
        };
        let spec = counted(set.len())?;
        Ok((set, spec))
    }
}

/// Class labels, one per line; `#` starts a comment. Labels are arbitrary
/// strings numbered in order of first appearance.
pub fn load_labels(path: &Path) -> Result<Vec<usize>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut names: Vec<String> = Vec::new();
    let mut out = Vec::new();
    for line in text.lines() {
        let label = line.split('#').next().unwrap_or("").trim();
        if label.is_empty() {
            continue;
        }
        let id = match names.iter().position(|n| n == label) {
            Some(id) => id,
            None => {
                names.push(label.to_string());
                names.len() - 1
            }
        };
        out.push(id);
    }
    if out.len() < 3 {
        return Err(CliError::Input(format!("{}: need at least 3 labelled objects", path.display())));
    }
    Ok(out)
}

fn epsilon_rule(mode: EpsilonMode, value: f64) -> EpsilonRule {
    match mode {
        EpsilonMode::Relative => EpsilonRule::Relative(value),
        EpsilonMode::Fixed => EpsilonRule::Fixed(value),
    }
}

fn loss_model(cfg: &ExperimentConfig) -> Result<LossModel, CliError> {
    let kind = cfg
        .loss
        .loss_kind()
        .ok_or_else(|| CliError::Config(vec![format!("loss.kind: unknown loss {:?}", cfg.loss.kind)]))?;
    Ok(match cfg.loss.alpha {
        Some(alpha) => LossModel::new(kind, alpha)?,
        None => LossModel::for_dim(kind, cfg.embedding.dim),
    })
}

/// Runs the configured optimizer for one seed. Divergence is reported in
/// the returned status rather than as an error.
fn run_seed_with(cfg: &ExperimentConfig, source: &Source, seed: u64) -> Result<SeedRun, CliError> {
    let (all, spec) = source.comparisons(cfg, seed)?;
    let (train, test) = split(&all, &spec)?;
    let n = source.objects();
    let dim = cfg.embedding.dim;
    let model = loss_model(cfg)?;
    let oracle = OrdinalOracle::new(model, &train, dim, n);
    let x0 = random_init(dim, n, cfg.embedding.init_scale, RngSeed(seed))?;
    let q = train.len();
    let cps = cfg.eval.checkpoints_per_epoch;

    let start = Instant::now();
    let mut eval_time = Duration::ZERO;
    let mut rows = Vec::new();
    let mut monitor = |cp: &Checkpoint<'_>| {
        let t0 = Instant::now();
        let wall = start.elapsed().saturating_sub(eval_time);
        rows.push(TraceRow {
            seed,
            epoch: cp.epoch,
            checkpoint: cp.index,
            step_size: cp.step_size,
            train_loss: oracle.objective(cp.x),
            test_error: generalization_error_flat(cp.x, dim, &test),
            grad_evals: cp.grad_evals,
            wall_ms: wall.as_secs_f64() * 1e3,
        });
        eval_time += t0.elapsed();
    };

    let sbb = |m: Option<usize>, b: usize, epochs: usize, eta0: f64, eps: f64, mode: EpsilonMode, fair: bool| {
        let mut c = SbbConfig::new(m.unwrap_or(q), b, epochs, seed);
        c.eta0 = eta0;
        c.epsilon = epsilon_rule(mode, eps);
        c.fair_inner_loop = fair;
        c.checkpoints_per_epoch = cps;
        c
    };
    let result = match &cfg.optimizer {
        OptimizerConfig::SvrgSbb(p) => {
            let c = sbb(p.m, p.b, p.epochs, p.eta0, p.epsilon, p.epsilon_rule, p.fair_inner_loop);
            svrg_sbb_monitored(&oracle, &c, x0.as_slice(), &mut monitor).map(|o| (o.snapshot, o.trace))
        }
        OptimizerConfig::SvrgSbbModular(p) => {
            let c = sbb(p.m, p.b, p.epochs, p.eta0, p.epsilon, p.epsilon_rule, p.fair_inner_loop);
            svrg_sbb_modular_monitored(&oracle, &c, p.modules, p.restart_from_snapshot, x0.as_slice(), &mut monitor)
                .map(|o| (o.snapshot, o.trace))
        }
        OptimizerConfig::SvrgFixed(p) => {
            let mut c = SvrgFixedConfig::new(p.eta, p.m.unwrap_or(q), p.b, p.epochs, seed);
            c.fair_inner_loop = p.fair_inner_loop;
            c.checkpoints_per_epoch = cps;
            svrg_fixed_monitored(&oracle, &c, x0.as_slice(), &mut monitor).map(|o| (o.snapshot, o.trace))
        }
        OptimizerConfig::Sgd(p) => {
            let schedule = match p.decay {
                Some(decay) => StepSchedule::InverseTime { eta0: p.eta, decay },
                None => StepSchedule::Constant(p.eta),
            };
            let mut c = SgdConfig::new(schedule, p.epochs, p.steps_per_epoch.unwrap_or(3 * q), seed);
            c.batch = p.batch;
            c.checkpoints_per_epoch = cps;
            sgd_monitored(&oracle, &c, x0.as_slice(), &mut monitor).map(|o| (o.snapshot, o.trace))
        }
        OptimizerConfig::BatchGd(p) => {
            let mut c = GdConfig::new(p.eta, p.epochs, p.iterations_per_epoch);
            c.checkpoints_per_epoch = cps;
            batch_gd_monitored(&oracle, &c, x0.as_slice(), &mut monitor).map(|o| (o.snapshot, o.trace))
        }
        OptimizerConfig::Convex(p) => {
            let c = ConvexConfig {
                eta: p.eta,
                epochs: p.epochs,
                iterations_per_epoch: p.iterations_per_epoch,
                checkpoints_per_epoch: cps,
            };
            convex_solve_monitored(&model, &train, &x0, &c, &mut monitor)
                .map(|o| (o.embedding.as_slice().to_vec(), o.trace))
        }
    };

    let (status, x, epochs) = match result {
        Ok((x, trace)) => (SeedStatus::Completed, x, trace),
        Err(ordembed::Error::Diverged(d)) => {
            warn!("seed {seed} diverged at epoch {}: {}", d.epoch, d.reason);
            let status = SeedStatus::Diverged {
                epoch: d.epoch,
                reason: d.reason.clone(),
            };
            (status, d.last_finite, d.trace)
        }
        Err(e) => return Err(e.into()),
    };
    let embedding = Embedding::from_column_slice(dim, n, &x)?;
    let retrieval = match (source.labels(), cfg.eval.retrieval_k.is_empty()) {
        (Some(labels), false) => Some(retrieval_metrics(&embedding, &embedding, labels, labels, &cfg.eval.retrieval_k)?),
        _ => None,
    };
    Ok(SeedRun {
        seed,
        status,
        train_size: q,
        test_size: test.len(),
        threshold_hit: first_hit(&rows, cfg.threshold),
        final_train_loss: oracle.objective(&x),
        final_test_error: generalization_error_flat(&x, dim, &test),
        rows,
        epochs,
        embedding,
        retrieval,
    })
}

/// Runs one seed of `cfg`.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun, CliError> {
    run_seed_with(cfg, &Source::load(cfg)?, seed)
}

/// Runs every seed of `cfg`, in parallel, keeping the configured seed order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment, CliError> {
    let problems = cfg.problems();
    if !problems.is_empty() {
        return Err(CliError::Config(problems));
    }
    let source = Source::load(cfg)?;
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let run = run_seed_with(cfg, &source, seed);
            if let Ok(r) = &run {
                info!(
                    "seed {seed}: final test error {:.4}, train loss {:.5}",
                    r.final_test_error, r.final_train_loss
                );
            }
            run
        })
        .collect::<Result<Vec<_>, _>>()?;
    let summary = summary::summarize(&runs);
    Ok(Experiment {
        config: cfg.clone(),
        runs,
        summary,
    })
}

fn header_lines(cfg: &ExperimentConfig, seed: Option<u64>) -> Vec<String> {
    let mut lines = vec![format!("ordembed {}", env!("CARGO_PKG_VERSION"))];
    if let Some(seed) = seed {
        lines.push(format!("seed = {seed}"));
    }
    lines.push("config:".into());
    lines.extend(cfg.to_toml().lines().map(|l| format!("  {l}")));
    lines
}

pub fn trace_file_name(seed: u64) -> String {
    format!("trace_seed_{seed}.csv")
}

/// Per-seed checkpoint trace.
pub fn trace_csv(cfg: &ExperimentConfig, run: &SeedRun) -> Result<Vec<u8>, CliError> {
    let rows = run.rows.iter().map(|r| {
        vec![
            r.seed.to_string(),
            r.epoch.to_string(),
            r.checkpoint.to_string(),
            fmt_f64(r.step_size),
            fmt_f64(r.train_loss),
            fmt_f64(r.test_error),
            r.grad_evals.to_string(),
            format!("{:.3}", r.wall_ms),
        ]
    });
    output::csv_bytes(
        &header_lines(cfg, Some(run.seed)),
        &["seed", "epoch", "checkpoint", "step_size", "train_loss", "test_error", "grad_evals", "wall_ms"],
        rows,
    )
}

fn epochs_csv(cfg: &ExperimentConfig, run: &SeedRun) -> Result<Vec<u8>, CliError> {
    let rows = run.epochs.iter().map(|e| {
        vec![
            run.seed.to_string(),
            e.epoch.to_string(),
            fmt_f64(e.step_size),
            e.epsilon.map(fmt_f64).unwrap_or_default(),
            fmt_f64(e.grad_norm),
            fmt_f64(e.objective),
            e.grad_evals.to_string(),
            e.inner_iterations.to_string(),
            format!("{:.3}", e.wall_seconds * 1e3),
        ]
    });
    output::csv_bytes(
        &header_lines(cfg, Some(run.seed)),
        &["seed", "epoch", "step_size", "epsilon", "grad_norm", "objective", "grad_evals", "inner_iterations", "wall_ms"],
        rows,
    )
}

fn summary_csv(exp: &Experiment) -> Result<Vec<u8>, CliError> {
    let rows = exp.summary.iter().map(|s| {
        vec![
            s.epoch.to_string(),
            s.checkpoint.to_string(),
            fmt_f64(s.evals_per_q),
            s.seeds.to_string(),
            fmt_f64(s.test_error.0),
            fmt_f64(s.test_error.1),
            fmt_f64(s.test_error.2),
            fmt_f64(s.train_loss.0),
            fmt_f64(s.train_loss.1),
            fmt_f64(s.train_loss.2),
            fmt_f64(s.step_size),
        ]
    });
    let mut header = header_lines(&exp.config, None);
    header.push("quantiles: linear interpolation between order statistics, h = (k - 1) q".into());
    output::csv_bytes(
        &header,
        &[
            "epoch",
            "checkpoint",
            "evals_per_q",
            "seeds",
            "test_error_median",
            "test_error_q25",
            "test_error_q75",
            "train_loss_median",
            "train_loss_q25",
            "train_loss_q75",
            "step_size_median",
        ],
        rows,
    )
}

fn threshold_csv(exp: &Experiment) -> Result<Vec<u8>, CliError> {
    let dash = || "-".to_string();
    let mut rows: Vec<Vec<String>> = exp
        .runs
        .iter()
        .map(|r| match r.threshold_hit {
            Some(h) => vec![
                r.seed.to_string(),
                h.grad_evals.to_string(),
                fmt_f64(h.grad_evals as f64 / r.train_size as f64),
                format!("{:.3}", h.wall_ms),
            ],
            None => vec![r.seed.to_string(), dash(), dash(), dash()],
        })
        .collect();
    let per_q: Vec<f64> = exp
        .runs
        .iter()
        .map(|r| r.threshold_hit.map_or(f64::INFINITY, |h| h.grad_evals as f64 / r.train_size as f64))
        .collect();
    let wall: Vec<f64> = exp
        .runs
        .iter()
        .map(|r| r.threshold_hit.map_or(f64::INFINITY, |h| h.wall_ms))
        .collect();
    let (med_q, med_w) = (summary::band(&per_q).0, summary::band(&wall).0);
    let show = |v: f64, f: &dyn Fn(f64) -> String| if v.is_finite() { f(v) } else { dash() };
    rows.push(vec![
        "median".into(),
        dash(),
        show(med_q, &fmt_f64),
        show(med_w, &|v| format!("{v:.3}")),
    ]);
    let mut header = header_lines(&exp.config, None);
    header.push(format!(
        "first checkpoint with test error <= {}; '-' when never reached",
        exp.config.threshold
    ));
    output::csv_bytes(&header, &["seed", "grad_evals", "evals_per_q", "wall_ms"], rows.into_iter())
}

fn manifest(exp: &Experiment) -> serde_json::Value {
    let per_q = |r: &SeedRun| r.threshold_hit.map(|h| h.grad_evals as f64 / r.train_size as f64);
    let seeds: Vec<_> = exp
        .runs
        .iter()
        .map(|r| {
            let (status, detail) = match &r.status {
                SeedStatus::Completed => ("completed", None),
                SeedStatus::Diverged { epoch, reason } => ("diverged", Some(format!("epoch {epoch}: {reason}"))),
            };
            json!({
                "seed": r.seed,
                "status": status,
                "divergence": detail,
                "train_size": r.train_size,
                "test_size": r.test_size,
                "final_train_loss": finite_or_null(r.final_train_loss),
                "final_test_error": finite_or_null(r.final_test_error),
                "evals_per_q_to_threshold": per_q(r),
                "wall_ms_to_threshold": r.threshold_hit.map(|h| h.wall_ms),
                "retrieval": r.retrieval.as_ref().map(|m| json!({
                    "precision_at_k": m.precision_at_k,
                    "recall_at_k": m.recall_at_k,
                    "map": m.map_score,
                })),
                "trace": trace_file_name(r.seed),
            })
        })
        .collect();
    json!({
        "tool": "ordembed",
        "version": env!("CARGO_PKG_VERSION"),
        "optimizer": exp.config.optimizer.name(),
        "loss": exp.config.loss.kind,
        "threshold": exp.config.threshold,
        "median_evals_per_q_to_threshold": finite_or_null(exp.median_evals_to_threshold()),
        "config": exp.config,
        "config_toml": exp.config.to_toml(),
        "seeds": seeds,
    })
}

fn finite_or_null(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Writes traces, summaries, final embeddings and plots into `dir`.
pub fn write_artifacts(exp: &Experiment, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, bytes: Vec<u8>| -> Result<(), CliError> {
        let path = dir.join(name);
        output::write_atomic(&path, &bytes)?;
        written.push(path);
        Ok(())
    };
    for run in &exp.runs {
        put(trace_file_name(run.seed), trace_csv(&exp.config, run)?)?;
        put(format!("epochs_seed_{}.csv", run.seed), epochs_csv(&exp.config, run)?)?;
        put(
            format!("embedding_seed_{}.csv", run.seed),
            output::embedding_csv(&run.embedding, &header_lines(&exp.config, Some(run.seed)))?,
        )?;
    }
    put("summary.csv".into(), summary_csv(exp)?)?;
    put("threshold.csv".into(), threshold_csv(exp)?)?;
    let text = serde_json::to_string_pretty(&manifest(exp)).expect("manifest serializes");
    put("summary.json".into(), text.into_bytes())?;
    if exp.config.output.plots {
        let provenance = header_lines(&exp.config, None).join("\n");
        put("error_vs_evals.svg".into(), plot::error_plot(exp, &provenance).into_bytes())?;
        put("step_size.svg".into(), plot::step_plot(exp, &provenance).into_bytes())?;
    }
    Ok(written)
}

/// `run <config>`: loads, runs, writes artifacts. All seeds diverging is an
/// error, reported after the artifacts are written.
pub fn run_config_file(path: &Path, output_override: Option<&Path>) -> Result<Experiment, CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(dir) = output_override {
        cfg.output.directory = dir.to_path_buf();
    }
    let exp = run_experiment(&cfg)?;
    let written = write_artifacts(&exp, &cfg.output.directory)?;
    info!("wrote {} files to {}", written.len(), cfg.output.directory.display());
    if exp.all_diverged() {
        return Err(CliError::AllDiverged);
    }
    Ok(exp)
}

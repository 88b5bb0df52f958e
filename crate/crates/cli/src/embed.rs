//! One-shot fit of a comparison file: embedding CSV plus a JSON manifest
//! from which the same fit can be replayed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{
    ConvexParams, DatasetConfig, EmbeddingConfig, EpsilonMode, EvalConfig, ExperimentConfig, FixedParams,
    GdParams, LossConfig, OptimizerConfig, OutputConfig, SbbParams, SgdParams, SplitConfig,
};
use crate::error::CliError;
use crate::experiment::{run_seed, SeedStatus};
use crate::output::{embedding_csv, write_atomic};

#[derive(Debug, Clone, PartialEq, clap::Args, Serialize, Deserialize)]
pub struct EmbedArgs {
    /// Triplet or quadruplet file with 1-based object indices
    #[arg(long, required_unless_present = "replay")]
    pub triplets: Option<PathBuf>,
    /// Number of objects; indices above it are an error
    #[arg(long)]
    pub n: Option<usize>,
    /// Embedding dimension
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    /// gnmds, ckl, ste or tste
    #[arg(long, default_value = "ste")]
    pub loss: String,
    /// TSTE degrees of freedom (default p - 1)
    #[arg(long)]
    pub alpha: Option<f64>,
    /// svrg_sbb, svrg_fixed, sgd, batch_gd or convex
    #[arg(long, default_value = "svrg_sbb")]
    pub optimizer: String,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    /// Mini-batch size of svrg_sbb and svrg_fixed
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    /// Constant step of svrg_fixed, sgd, batch_gd and convex
    #[arg(long)]
    pub eta: Option<f64>,
    /// First-epoch step of svrg_sbb
    #[arg(long, default_value_t = 1e-2)]
    pub eta0: f64,
    /// Relative epsilon of svrg_sbb
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Fraction of comparisons held out to report agreement
    #[arg(long, default_value_t = 0.1)]
    pub holdout: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.01)]
    pub init_scale: f64,
}

/// What a fit produced.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedReport {
    pub embedding_path: PathBuf,
    pub manifest_path: PathBuf,
    pub holdout_agreement: f64,
    pub train_loss: f64,
}

impl EmbedArgs {
    /// The equivalent single-seed experiment.
    pub fn to_config(&self) -> Result<ExperimentConfig, CliError> {
        let path = self
            .triplets
            .clone()
            .ok_or_else(|| CliError::Config(vec!["--triplets is required".into()]))?;
        let need_eta = |name: &str| {
            self.eta
                .ok_or_else(|| CliError::Config(vec![format!("--eta is required for {name}")]))
        };
        let optimizer = match self.optimizer.as_str() {
            "svrg_sbb" => OptimizerConfig::SvrgSbb(SbbParams {
                epochs: self.epochs,
                b: self.batch,
                m: None,
                eta0: self.eta0,
                epsilon: self.epsilon,
                epsilon_rule: EpsilonMode::Relative,
                fair_inner_loop: true,
            }),
            "svrg_fixed" => OptimizerConfig::SvrgFixed(FixedParams {
                epochs: self.epochs,
                eta: need_eta("svrg_fixed")?,
                b: self.batch,
                m: None,
                fair_inner_loop: true,
            }),
            "sgd" => OptimizerConfig::Sgd(SgdParams {
                epochs: self.epochs,
                eta: need_eta("sgd")?,
                decay: None,
                steps_per_epoch: None,
                batch: 1,
            }),
            "batch_gd" => OptimizerConfig::BatchGd(GdParams {
                epochs: self.epochs,
                eta: need_eta("batch_gd")?,
                iterations_per_epoch: 3,
            }),
            "convex" => OptimizerConfig::Convex(ConvexParams {
                epochs: self.epochs,
                eta: self.eta.unwrap_or(1.0),
                iterations_per_epoch: 3,
            }),
            other => return Err(CliError::Config(vec![format!("--optimizer: unknown method {other:?}")])),
        };
        let cfg = ExperimentConfig {
            seeds: vec![self.seed],
            threshold: 0.15,
            dataset: DatasetConfig::Comparisons { path, n: self.n },
            loss: LossConfig {
                kind: self.loss.clone(),
                alpha: self.alpha,
            },
            embedding: EmbeddingConfig {
                dim: self.p,
                init_scale: self.init_scale,
            },
            optimizer,
            split: SplitConfig {
                train: None,
                test: None,
                train_fraction: Some(1.0 - self.holdout),
                noise: 0.0,
            },
            eval: EvalConfig::default(),
            output: OutputConfig::default(),
        };
        let mut problems = cfg.problems();
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            problems.retain(|p| !p.starts_with("split.train_fraction"));
            problems.push(format!("--holdout: must lie in (0, 1), got {}", self.holdout));
        }
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(CliError::Config(problems))
        }
    }
}

/// Recovers the fit arguments stored in a manifest.
pub fn args_from_manifest(path: &Path) -> Result<EmbedArgs, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_value(value["args"].clone())
        .map_err(|e| CliError::Input(format!("{}: no usable fit arguments: {e}", path.display())))
}

/// Fits, then writes the embedding to `out` and the manifest next to it
/// (or to `manifest`).
pub fn embed(args: &EmbedArgs, out: &Path, manifest: Option<&Path>) -> Result<EmbedReport, CliError> {
    let cfg = args.to_config()?;
    let run = run_seed(&cfg, args.seed)?;
    if let SeedStatus::Diverged { epoch, reason } = &run.status {
        return Err(CliError::Input(format!("optimizer diverged at epoch {epoch}: {reason}")));
    }
    let comments = vec![
        format!("ordembed {}", env!("CARGO_PKG_VERSION")),
        format!(
            "embed {} loss={} p={} optimizer={} seed={}",
            args.triplets.as_deref().unwrap_or(Path::new("")).display(),
            args.loss,
            args.p,
            args.optimizer,
            args.seed
        ),
    ];
    write_atomic(out, &embedding_csv(&run.embedding, &comments)?)?;
    let manifest_path = manifest
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.with_extension("json"));
    let agreement = 1.0 - run.final_test_error;
    let doc = json!({
        "tool": "ordembed",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "embed",
        "args": args,
        "config": cfg,
        "seed": args.seed,
        "embedding": out,
        "metrics": {
            "train_size": run.train_size,
            "holdout_size": run.test_size,
            "train_loss": run.final_train_loss,
            "holdout_error": run.final_test_error,
            "holdout_agreement": agreement,
        },
    });
    let text = serde_json::to_string_pretty(&doc).expect("manifest serializes");
    write_atomic(&manifest_path, text.as_bytes())?;
    Ok(EmbedReport {
        embedding_path: out.to_path_buf(),
        manifest_path,
        holdout_agreement: agreement,
        train_loss: run.final_train_loss,
    })
}

//! Finite-sum optimizers: SVRG with stabilized Barzilai-Borwein steps, its
//! restarted (modular) form, and SGD / fixed-step SVRG / gradient descent baselines.

pub mod baselines;
pub mod oracle;
pub mod step;
mod svrg;

pub use baselines::{batch_gd, batch_gd_monitored, sgd, sgd_monitored, GdConfig, SgdConfig, StepSchedule};
pub use oracle::{DiagonalQuadratic, FiniteSumOracle, OrdinalOracle, SineSquaredPl};
pub use step::{batch_size_admissible, batch_size_bound, bb_step_raw, sbb_step, secant_lipschitz, StepFailure};
pub use svrg::{
    svrg_fixed, svrg_fixed_monitored, svrg_sbb, svrg_sbb_modular, svrg_sbb_modular_monitored,
    svrg_sbb_monitored, variance_reduced_direction_into,
};

use crate::error::{Divergence, Error, Result};
use crate::types::RngSeed;

/// Summary of one finished epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochTrace {
    /// 0-based epoch index (continues across modules in the modular variant).
    pub epoch: usize,
    /// Step size `eta` used by the inner loop of this epoch (before the `b` factor).
    pub step_size: f64,
    /// Resolved epsilon; `None` before it is known or for rules without one.
    pub epsilon: Option<f64>,
    /// Norm of the full gradient at the end-of-epoch snapshot.
    pub grad_norm: f64,
    /// Objective at the end-of-epoch snapshot.
    pub objective: f64,
    /// Cumulative component-gradient evaluations through this epoch.
    pub grad_evals: u64,
    pub inner_iterations: usize,
    pub wall_seconds: f64,
}

/// An intermediate point handed to a [`Monitor`].
#[derive(Debug, Clone, Copy)]
pub struct Checkpoint<'a> {
    pub epoch: usize,
    /// 1-based position within the epoch, up to `per_epoch`.
    pub index: usize,
    pub per_epoch: usize,
    pub x: &'a [f64],
    pub step_size: f64,
    /// Cumulative component-gradient evaluations at this point.
    pub grad_evals: u64,
}

/// Observer called at evenly spaced points inside each epoch.
pub trait Monitor {
    fn checkpoint(&mut self, cp: &Checkpoint<'_>);
}

/// Monitor that ignores every checkpoint.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoMonitor;

impl Monitor for NoMonitor {
    fn checkpoint(&mut self, _cp: &Checkpoint<'_>) {}
}

impl<F: FnMut(&Checkpoint<'_>)> Monitor for F {
    fn checkpoint(&mut self, cp: &Checkpoint<'_>) {
        self(cp)
    }
}

/// Result of an optimizer run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Iterate drawn uniformly from all inner iterates (equal to `snapshot`
    /// for the baselines).
    pub x_out: Vec<f64>,
    /// Final iterate.
    pub snapshot: Vec<f64>,
    pub trace: Vec<EpochTrace>,
}

/// How epsilon is chosen for the stabilized step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonRule {
    Fixed(f64),
    /// `factor * ||dy|| / ||dx||`, measured on the first two full gradients.
    Relative(f64),
}

impl Default for EpsilonRule {
    fn default() -> Self {
        EpsilonRule::Relative(0.1)
    }
}

/// Settings for SVRG with stabilized BB steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SbbConfig {
    pub epsilon: EpsilonRule,
    /// Update frequency (inner-loop length before the fairness reduction).
    pub m: usize,
    /// Mini-batch size.
    pub b: usize,
    pub epochs: usize,
    /// First-epoch step, applied as `eta0 / m`.
    pub eta0: f64,
    pub seed: RngSeed,
    /// Run `ceil(m / b)` inner iterations instead of `m`.
    pub fair_inner_loop: bool,
    pub checkpoints_per_epoch: usize,
}

impl SbbConfig {
    pub fn new(m: usize, b: usize, epochs: usize, seed: u64) -> Self {
        Self {
            epsilon: EpsilonRule::default(),
            m,
            b,
            epochs,
            eta0: 1e-2,
            seed: RngSeed(seed),
            fair_inner_loop: false,
            checkpoints_per_epoch: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_loop(self.m, self.b, self.epochs)?;
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::arg(format!("eta0 must be positive, got {}", self.eta0)));
        }
        match self.epsilon {
            EpsilonRule::Fixed(e) | EpsilonRule::Relative(e) if !(e >= 0.0 && e.is_finite()) => {
                Err(Error::arg(format!("epsilon must be non-negative, got {e}")))
            }
            _ => Ok(()),
        }
    }

    pub fn inner_iterations(&self) -> usize {
        inner_iterations(self.m, self.b, self.fair_inner_loop)
    }
}

/// Settings for SVRG with the constant step `eta / m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrgFixedConfig {
    pub eta: f64,
    pub m: usize,
    pub b: usize,
    pub epochs: usize,
    pub seed: RngSeed,
    pub fair_inner_loop: bool,
    pub checkpoints_per_epoch: usize,
}

impl SvrgFixedConfig {
    pub fn new(eta: f64, m: usize, b: usize, epochs: usize, seed: u64) -> Self {
        Self {
            eta,
            m,
            b,
            epochs,
            seed: RngSeed(seed),
            fair_inner_loop: false,
            checkpoints_per_epoch: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_loop(self.m, self.b, self.epochs)?;
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::arg(format!("eta must be positive, got {}", self.eta)));
        }
        Ok(())
    }

    pub fn inner_iterations(&self) -> usize {
        inner_iterations(self.m, self.b, self.fair_inner_loop)
    }
}

fn validate_loop(m: usize, b: usize, epochs: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::arg("m must be at least 1"));
    }
    if b == 0 {
        return Err(Error::arg("mini-batch size b must be at least 1"));
    }
    if epochs == 0 {
        return Err(Error::arg("number of epochs must be at least 1"));
    }
    Ok(())
}

pub(crate) fn inner_iterations(m: usize, b: usize, fair: bool) -> usize {
    if fair {
        m.div_ceil(b)
    } else {
        m
    }
}

/// Inner-loop positions (1-based iteration counts) after which checkpoints fire.
pub(crate) fn checkpoint_positions(iters: usize, count: usize) -> Vec<usize> {
    if count == 0 || iters == 0 {
        return Vec::new();
    }
    let mut out: Vec<usize> = (1..=count)
        .map(|c| ((c * iters) as f64 / count as f64).round() as usize)
        .map(|t| t.clamp(1, iters))
        .collect();
    out.dedup();
    out
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Aborts a run whose objective explodes or whose iterate stops being finite.
#[derive(Debug, Clone)]
pub(crate) struct DivergenceGuard {
    limit: f64,
    last_finite: Vec<f64>,
}

impl DivergenceGuard {
    /// Objective limit is `1e6 * max(|f0|, 1)`.
    pub(crate) fn new(x0: &[f64], f0: f64) -> Self {
        Self {
            limit: 1e6 * f0.abs().max(1.0),
            last_finite: x0.to_vec(),
        }
    }

    pub(crate) fn check(
        &mut self,
        epoch: usize,
        x: &[f64],
        objective: f64,
        trace: &[EpochTrace],
    ) -> Result<()> {
        let reason = if x.iter().any(|v| !v.is_finite()) {
            Some("iterate has non-finite entries".to_string())
        } else if !objective.is_finite() {
            Some(format!("objective is {objective}"))
        } else if objective > self.limit {
            Some(format!("objective {objective:.3e} exceeds limit {:.3e}", self.limit))
        } else {
            None
        };
        match reason {
            Some(reason) => Err(Error::Diverged(Box::new(Divergence {
                epoch,
                reason,
                last_finite: self.last_finite.clone(),
                trace: trace.to_vec(),
            }))),
            None => {
                self.last_finite.clear();
                self.last_finite.extend_from_slice(x);
                Ok(())
            }
        }
    }
}

pub(crate) fn check_start<O: FiniteSumOracle + ?Sized>(oracle: &O, x0: &[f64]) -> Result<()> {
    if x0.len() != oracle.dim() {
        return Err(Error::arg(format!(
            "starting point has length {}, oracle expects {}",
            x0.len(),
            oracle.dim()
        )));
    }
    if oracle.sample_count() == 0 {
        return Err(Error::arg("oracle has no components"));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericInput("starting point has non-finite entries".into()));
    }
    Ok(())
}

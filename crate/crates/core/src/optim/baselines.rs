//! Plain SGD and full-batch gradient descent.

use std::time::Instant;

use rand::Rng;

use super::{
    check_start, checkpoint_positions, norm, Checkpoint, DivergenceGuard, EpochTrace,
    FiniteSumOracle, Monitor, NoMonitor, RunOutput,
};
use crate::error::{Error, Result};
use crate::types::{streams, RngSeed};

/// SGD step schedule over the global step counter `t` (starting at 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `eta0 / (1 + decay * t)`.
    InverseTime { eta0: f64, decay: f64 },
}

impl StepSchedule {
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            StepSchedule::Constant(eta) => eta,
            StepSchedule::InverseTime { eta0, decay } => eta0 / (1.0 + decay * t as f64),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::Constant(eta) => eta > 0.0 && eta.is_finite(),
            StepSchedule::InverseTime { eta0, decay } => {
                eta0 > 0.0 && eta0.is_finite() && decay >= 0.0 && decay.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::arg(format!("invalid step schedule {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub schedule: StepSchedule,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub batch: usize,
    pub seed: RngSeed,
    pub checkpoints_per_epoch: usize,
}

impl SgdConfig {
    pub fn new(schedule: StepSchedule, epochs: usize, steps_per_epoch: usize, seed: u64) -> Self {
        Self {
            schedule,
            epochs,
            steps_per_epoch,
            batch: 1,
            seed: RngSeed(seed),
            checkpoints_per_epoch: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.epochs == 0 || self.steps_per_epoch == 0 || self.batch == 0 {
            return Err(Error::arg("epochs, steps per epoch and batch must all be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdConfig {
    pub eta: f64,
    pub epochs: usize,
    pub iterations_per_epoch: usize,
    pub checkpoints_per_epoch: usize,
}

impl GdConfig {
    pub fn new(eta: f64, epochs: usize, iterations_per_epoch: usize) -> Self {
        Self {
            eta,
            epochs,
            iterations_per_epoch,
            checkpoints_per_epoch: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::arg(format!("eta must be positive, got {}", self.eta)));
        }
        if self.epochs == 0 || self.iterations_per_epoch == 0 {
            return Err(Error::arg("epochs and iterations per epoch must be at least 1"));
        }
        Ok(())
    }
}

/// Mini-batch SGD, batches drawn with replacement.
pub fn sgd<O: FiniteSumOracle + ?Sized>(oracle: &O, cfg: &SgdConfig, x0: &[f64]) -> Result<RunOutput> {
    sgd_monitored(oracle, cfg, x0, &mut NoMonitor)
}

pub fn sgd_monitored<O: FiniteSumOracle + ?Sized, M: Monitor + ?Sized>(
    oracle: &O,
    cfg: &SgdConfig,
    x0: &[f64],
    monitor: &mut M,
) -> Result<RunOutput> {
    cfg.validate()?;
    check_start(oracle, x0)?;
    let started = Instant::now();
    let n = oracle.sample_count();
    let mut rng = cfg.seed.rng(streams::BATCHES);
    let positions = checkpoint_positions(cfg.steps_per_epoch, cfg.checkpoints_per_epoch);
    let per_step = cfg.batch as u64;
    let inv_b = 1.0 / cfg.batch as f64;

    let mut x = x0.to_vec();
    let mut dir = vec![0.0; x.len()];
    let mut guard = DivergenceGuard::new(&x, oracle.objective(&x));
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut t: u64 = 0;
    for epoch in 0..cfg.epochs {
        let mut next_cp = 0;
        let mut eta = cfg.schedule.at(t);
        for step in 0..cfg.steps_per_epoch {
            eta = cfg.schedule.at(t);
            dir.fill(0.0);
            for _ in 0..cfg.batch {
                let i = rng.random_range(0..n);
                oracle.add_component_grad(i, &x, inv_b, &mut dir);
            }
            for (xi, di) in x.iter_mut().zip(&dir) {
                *xi -= eta * di;
            }
            t += 1;
            if next_cp < positions.len() && positions[next_cp] == step + 1 {
                next_cp += 1;
                monitor.checkpoint(&Checkpoint {
                    epoch,
                    index: next_cp,
                    per_epoch: positions.len(),
                    x: &x,
                    step_size: eta,
                    grad_evals: t * per_step,
                });
            }
        }
        let objective = oracle.objective(&x);
        guard.check(epoch, &x, objective, &trace)?;
        trace.push(EpochTrace {
            epoch,
            step_size: eta,
            epsilon: None,
            grad_norm: norm(&oracle.full_grad(&x)),
            objective,
            grad_evals: t * per_step,
            inner_iterations: cfg.steps_per_epoch,
            wall_seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(RunOutput {
        x_out: x.clone(),
        snapshot: x,
        trace,
    })
}

/// Full-batch gradient descent with a constant step.
pub fn batch_gd<O: FiniteSumOracle + ?Sized>(oracle: &O, cfg: &GdConfig, x0: &[f64]) -> Result<RunOutput> {
    batch_gd_monitored(oracle, cfg, x0, &mut NoMonitor)
}

pub fn batch_gd_monitored<O: FiniteSumOracle + ?Sized, M: Monitor + ?Sized>(
    oracle: &O,
    cfg: &GdConfig,
    x0: &[f64],
    monitor: &mut M,
) -> Result<RunOutput> {
    cfg.validate()?;
    check_start(oracle, x0)?;
    let started = Instant::now();
    let n = oracle.sample_count() as u64;
    let positions = checkpoint_positions(cfg.iterations_per_epoch, cfg.checkpoints_per_epoch);

    let mut x = x0.to_vec();
    let mut grad = vec![0.0; x.len()];
    let mut guard = DivergenceGuard::new(&x, oracle.objective(&x));
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut evals: u64 = 0;
    for epoch in 0..cfg.epochs {
        let mut next_cp = 0;
        for it in 0..cfg.iterations_per_epoch {
            oracle.full_grad_into(&x, &mut grad);
            evals += n;
            for (xi, gi) in x.iter_mut().zip(&grad) {
                *xi -= cfg.eta * gi;
            }
            if next_cp < positions.len() && positions[next_cp] == it + 1 {
                next_cp += 1;
                monitor.checkpoint(&Checkpoint {
                    epoch,
                    index: next_cp,
                    per_epoch: positions.len(),
                    x: &x,
                    step_size: cfg.eta,
                    grad_evals: evals,
                });
            }
        }
        let objective = oracle.objective(&x);
        guard.check(epoch, &x, objective, &trace)?;
        oracle.full_grad_into(&x, &mut grad);
        trace.push(EpochTrace {
            epoch,
            step_size: cfg.eta,
            epsilon: None,
            grad_norm: norm(&grad),
            objective,
            grad_evals: evals,
            inner_iterations: cfg.iterations_per_epoch,
            wall_seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(RunOutput {
        x_out: x.clone(),
        snapshot: x,
        trace,
    })
}

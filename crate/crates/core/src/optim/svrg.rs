use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::step::{sbb_step, secant_lipschitz, StepFailure};
use super::{
    check_start, checkpoint_positions, norm, Checkpoint, DivergenceGuard, EpochTrace,
    EpsilonRule, FiniteSumOracle, Monitor, NoMonitor, RunOutput, SbbConfig, SvrgFixedConfig,
};
use crate::error::Result;
use crate::types::{streams, RngSeed};

/// Stream offset between consecutive modules of the restarted variant.
const MODULE_STREAM_STRIDE: u64 = 1000;

#[derive(Debug, Clone, Copy)]
enum StepRule {
    Sbb { epsilon: EpsilonRule, eta0: f64 },
    Fixed { eta: f64 },
}

#[derive(Debug, Clone, Copy)]
struct LoopSpec {
    m: usize,
    b: usize,
    epochs: usize,
    iters: usize,
    checkpoints: usize,
    seed: RngSeed,
    stream_offset: u64,
}

/// Running totals carried from one module into the next.
#[derive(Debug, Clone, Copy, Default)]
struct Offsets {
    epoch: usize,
    grad_evals: u64,
    wall: f64,
}

/// Uniform choice of one inner iterate without storing them all.
struct Reservoir {
    rng: ChaCha8Rng,
    seen: u64,
    chosen: Vec<f64>,
}

impl Reservoir {
    fn new(rng: ChaCha8Rng, dim: usize) -> Self {
        Self {
            rng,
            seen: 0,
            chosen: vec![0.0; dim],
        }
    }

    fn offer(&mut self, x: &[f64]) {
        self.seen += 1;
        if self.rng.random_range(0..self.seen) == 0 {
            self.chosen.copy_from_slice(x);
        }
    }
}

/// `out = (1/b) sum_{i in batch} (grad f_i(x) - grad f_i(snapshot)) + snapshot_grad`.
pub fn variance_reduced_direction_into<O: FiniteSumOracle + ?Sized>(
    oracle: &O,
    batch: &[usize],
    x: &[f64],
    snapshot: &[f64],
    snapshot_grad: &[f64],
    out: &mut [f64],
) {
    out.copy_from_slice(snapshot_grad);
    let inv_b = 1.0 / batch.len() as f64;
    for &i in batch {
        oracle.add_component_grad(i, x, inv_b, out);
        oracle.add_component_grad(i, snapshot, -inv_b, out);
    }
}

/// SVRG with stabilized Barzilai-Borwein step sizes.
pub fn svrg_sbb<O: FiniteSumOracle + ?Sized>(
    oracle: &O,
    cfg: &SbbConfig,
    x0: &[f64],
) -> Result<RunOutput> {
    svrg_sbb_monitored(oracle, cfg, x0, &mut NoMonitor)
}

pub fn svrg_sbb_monitored<O: FiniteSumOracle + ?Sized, M: Monitor + ?Sized>(
    oracle: &O,
    cfg: &SbbConfig,
    x0: &[f64],
    monitor: &mut M,
) -> Result<RunOutput> {
    cfg.validate()?;
    check_start(oracle, x0)?;
    let (out, _) = run_svrg(
        oracle,
        sbb_rule(cfg),
        sbb_spec(cfg, 0),
        x0,
        Offsets::default(),
        monitor,
    )?;
    Ok(out)
}

/// SVRG with the constant step size `eta / m`.
pub fn svrg_fixed<O: FiniteSumOracle + ?Sized>(
    oracle: &O,
    cfg: &SvrgFixedConfig,
    x0: &[f64],
) -> Result<RunOutput> {
    svrg_fixed_monitored(oracle, cfg, x0, &mut NoMonitor)
}

pub fn svrg_fixed_monitored<O: FiniteSumOracle + ?Sized, M: Monitor + ?Sized>(
    oracle: &O,
    cfg: &SvrgFixedConfig,
    x0: &[f64],
    monitor: &mut M,
) -> Result<RunOutput> {
    cfg.validate()?;
    check_start(oracle, x0)?;
    let spec = LoopSpec {
        m: cfg.m,
        b: cfg.b,
        epochs: cfg.epochs,
        iters: cfg.inner_iterations(),
        checkpoints: cfg.checkpoints_per_epoch,
        seed: cfg.seed,
        stream_offset: 0,
    };
    let (out, _) = run_svrg(
        oracle,
        StepRule::Fixed { eta: cfg.eta },
        spec,
        x0,
        Offsets::default(),
        monitor,
    )?;
    Ok(out)
}

/// `modules` consecutive runs of [`svrg_sbb`], each restarted from the point
/// the previous one returned, with step sizes and epsilon re-derived per module.
///
/// With `restart_from_snapshot` the next module starts from the last
/// snapshot; otherwise from the uniformly drawn inner iterate.
pub fn svrg_sbb_modular<O: FiniteSumOracle + ?Sized>(
    oracle: &O,
    cfg: &SbbConfig,
    modules: usize,
    restart_from_snapshot: bool,
    x0: &[f64],
) -> Result<RunOutput> {
    svrg_sbb_modular_monitored(oracle, cfg, modules, restart_from_snapshot, x0, &mut NoMonitor)
}

pub fn svrg_sbb_modular_monitored<O: FiniteSumOracle + ?Sized, M: Monitor + ?Sized>(
    oracle: &O,
    cfg: &SbbConfig,
    modules: usize,
    restart_from_snapshot: bool,
    x0: &[f64],
    monitor: &mut M,
) -> Result<RunOutput> {
    cfg.validate()?;
    check_start(oracle, x0)?;
    if modules == 0 {
        return Err(crate::error::Error::arg("module count must be at least 1"));
    }
    let mut start = x0.to_vec();
    let mut offsets = Offsets::default();
    let mut trace = Vec::with_capacity(modules * cfg.epochs);
    let mut last = None;
    for k in 0..modules {
        let spec = sbb_spec(cfg, k as u64 * MODULE_STREAM_STRIDE);
        let (out, next) = match run_svrg(oracle, sbb_rule(cfg), spec, &start, offsets, monitor) {
            Ok(v) => v,
            Err(crate::error::Error::Diverged(mut d)) => {
                let mut full = std::mem::take(&mut trace);
                full.append(&mut d.trace);
                d.trace = full;
                return Err(crate::error::Error::Diverged(d));
            }
            Err(e) => return Err(e),
        };
        offsets = next;
        start = if restart_from_snapshot {
            out.snapshot.clone()
        } else {
            out.x_out.clone()
        };
        trace.extend(out.trace.iter().cloned());
        last = Some(out);
    }
    let last = last.expect("at least one module ran");
    Ok(RunOutput {
        x_out: start,
        snapshot: last.snapshot,
        trace,
    })
}

fn sbb_rule(cfg: &SbbConfig) -> StepRule {
    StepRule::Sbb {
        epsilon: cfg.epsilon,
        eta0: cfg.eta0,
    }
}

fn sbb_spec(cfg: &SbbConfig, stream_offset: u64) -> LoopSpec {
    LoopSpec {
        m: cfg.m,
        b: cfg.b,
        epochs: cfg.epochs,
        iters: cfg.inner_iterations(),
        checkpoints: cfg.checkpoints_per_epoch,
        seed: cfg.seed,
        stream_offset,
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn run_svrg<O: FiniteSumOracle + ?Sized, M: Monitor + ?Sized>(
    oracle: &O,
    rule: StepRule,
    spec: LoopSpec,
    x0: &[f64],
    offsets: Offsets,
    monitor: &mut M,
) -> Result<(RunOutput, Offsets)> {
    let started = Instant::now();
    let dim = oracle.dim();
    let n = oracle.sample_count();
    let mut batch_rng = spec.seed.rng(streams::BATCHES + spec.stream_offset);
    let mut reservoir = Reservoir::new(spec.seed.rng(streams::RESERVOIR + spec.stream_offset), dim);
    let positions = checkpoint_positions(spec.iters, spec.checkpoints);
    let per_epoch_evals = n as u64 + 2 * (spec.b * spec.iters) as u64;

    let mut snapshot = x0.to_vec();
    let mut grad = oracle.full_grad(&snapshot);
    let f0 = oracle.objective(&snapshot);
    let mut guard = DivergenceGuard::new(&snapshot, f0);
    guard.check(offsets.epoch, &snapshot, f0, &[])?;

    let mut prev_snapshot: Vec<f64> = Vec::new();
    let mut prev_grad: Vec<f64> = Vec::new();
    let mut epsilon: Option<f64> = match rule {
        StepRule::Sbb {
            epsilon: EpsilonRule::Fixed(e),
            ..
        } => Some(e),
        _ => None,
    };
    let mut eta = match rule {
        StepRule::Sbb { eta0, .. } => eta0 / spec.m as f64,
        StepRule::Fixed { eta } => eta / spec.m as f64,
    };

    let mut x = vec![0.0; dim];
    let mut dir = vec![0.0; dim];
    let mut batch = vec![0usize; spec.b];
    let mut trace = Vec::with_capacity(spec.epochs);

    for s in 0..spec.epochs {
        let epoch = offsets.epoch + s;
        if s > 0 {
            if let StepRule::Sbb { epsilon: rule_eps, .. } = rule {
                let dx = sub(&snapshot, &prev_snapshot);
                let dy = sub(&grad, &prev_grad);
                if epsilon.is_none() {
                    if let EpsilonRule::Relative(factor) = rule_eps {
                        epsilon = secant_lipschitz(&dx, &dy).map(|l| factor * l);
                    }
                }
                match epsilon {
                    Some(e) => match sbb_step(&dx, &dy, e, spec.m)? {
                        Ok(step) => eta = step,
                        Err(StepFailure::Stagnation) => {
                            log::debug!("epoch {epoch}: snapshot did not move, keeping step {eta:e}");
                        }
                        Err(StepFailure::DegenerateCurvature) => {
                            log::warn!("epoch {epoch}: zero curvature with epsilon 0, keeping step {eta:e}");
                        }
                    },
                    None => {
                        log::debug!("epoch {epoch}: epsilon not yet measurable, keeping step {eta:e}");
                    }
                }
            }
        }

        x.copy_from_slice(&snapshot);
        let evals_before = offsets.grad_evals + s as u64 * per_epoch_evals + n as u64;
        let mut next_cp = 0;
        for t in 0..spec.iters {
            for slot in batch.iter_mut() {
                *slot = batch_rng.random_range(0..n);
            }
            variance_reduced_direction_into(oracle, &batch, &x, &snapshot, &grad, &mut dir);
            let scale = spec.b as f64 * eta;
            for (xi, di) in x.iter_mut().zip(&dir) {
                *xi -= scale * di;
            }
            reservoir.offer(&x);
            if next_cp < positions.len() && positions[next_cp] == t + 1 {
                next_cp += 1;
                monitor.checkpoint(&Checkpoint {
                    epoch,
                    index: next_cp,
                    per_epoch: positions.len(),
                    x: &x,
                    step_size: eta,
                    grad_evals: evals_before + 2 * (spec.b * (t + 1)) as u64,
                });
            }
        }

        prev_snapshot = std::mem::replace(&mut snapshot, x.clone());
        let objective = oracle.objective(&snapshot);
        guard.check(epoch, &snapshot, objective, &trace)?;
        prev_grad = std::mem::replace(&mut grad, oracle.full_grad(&snapshot));
        trace.push(EpochTrace {
            epoch,
            step_size: eta,
            epsilon,
            grad_norm: norm(&grad),
            objective,
            grad_evals: offsets.grad_evals + (s as u64 + 1) * per_epoch_evals,
            inner_iterations: spec.iters,
            wall_seconds: offsets.wall + started.elapsed().as_secs_f64(),
        });
    }

    let next = Offsets {
        epoch: offsets.epoch + spec.epochs,
        grad_evals: offsets.grad_evals + spec.epochs as u64 * per_epoch_evals,
        wall: offsets.wall + started.elapsed().as_secs_f64(),
    };
    Ok((
        RunOutput {
            x_out: reservoir.chosen,
            snapshot,
            trace,
        },
        next,
    ))
}

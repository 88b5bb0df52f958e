//! Barzilai-Borwein step sizes computed from successive iterate and gradient differences.

use crate::error::{Error, Result};

/// Why a stabilized step could not be formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepFailure {
    /// `dx = 0`: the iterate did not move between snapshots.
    Stagnation,
    /// `epsilon = 0` and `dx . dy = 0`: the step would be infinite.
    DegenerateCurvature,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_lengths(dx: &[f64], dy: &[f64]) -> Result<()> {
    if dx.len() != dy.len() {
        return Err(Error::arg(format!(
            "step vectors differ in length ({} vs {})",
            dx.len(),
            dy.len()
        )));
    }
    Ok(())
}

/// Classic BB step `||dx||^2 / (dx . dy)`. `None` when the denominator vanishes.
///
/// The value can be negative on non-convex problems.
pub fn bb_step_raw(dx: &[f64], dy: &[f64]) -> Result<Option<f64>> {
    check_lengths(dx, dy)?;
    let curvature = dot(dx, dy);
    if curvature == 0.0 {
        return Ok(None);
    }
    Ok(Some(dot(dx, dx) / curvature))
}

/// Stabilized BB step `(1/m) ||dx||^2 / (|dx . dy| + epsilon ||dx||^2)`.
///
/// Evaluated as `1 / (m (|dx . dy| / ||dx||^2 + epsilon))`, which is the same
/// quantity, so that it lies in `[1/(m (L + epsilon)), 1/(m epsilon)]` whenever
/// the curvature ratio is bounded by `L`.
pub fn sbb_step(
    dx: &[f64],
    dy: &[f64],
    epsilon: f64,
    m: usize,
) -> Result<std::result::Result<f64, StepFailure>> {
    check_lengths(dx, dy)?;
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::arg(format!("epsilon must be non-negative, got {epsilon}")));
    }
    if m == 0 {
        return Err(Error::arg("update frequency m must be at least 1"));
    }
    let sq = dot(dx, dx);
    if sq == 0.0 {
        return Ok(Err(StepFailure::Stagnation));
    }
    let ratio = dot(dx, dy).abs() / sq;
    let denom = ratio + epsilon;
    if denom == 0.0 || !denom.is_finite() {
        return Ok(Err(StepFailure::DegenerateCurvature));
    }
    let step = 1.0 / (m as f64 * denom);
    if !step.is_finite() {
        return Ok(Err(StepFailure::DegenerateCurvature));
    }
    Ok(Ok(step))
}

/// Curvature estimate `||dy|| / ||dx||` used to scale a relative epsilon.
pub fn secant_lipschitz(dx: &[f64], dy: &[f64]) -> Option<f64> {
    let nx = dot(dx, dx).sqrt();
    if nx == 0.0 {
        return None;
    }
    Some(dot(dy, dy).sqrt() / nx)
}

/// Whether a mini-batch size satisfies the sufficient condition for the
/// sublinear rate given `m`, `epsilon > 0` and a Lipschitz estimate `lipschitz`:
///
/// `b < min(m eps^2 / (L^2 (1 + sqrt(1 + 4 eps / L))), m eps / (2 L (1 + sqrt(1 + 4 L / eps))))`.
pub fn batch_size_admissible(b: usize, m: usize, epsilon: f64, lipschitz: f64) -> bool {
    batch_size_bound(m, epsilon, lipschitz).is_some_and(|bound| (b as f64) < bound)
}

/// Upper bound on admissible mini-batch sizes, or `None` for invalid inputs.
pub fn batch_size_bound(m: usize, epsilon: f64, lipschitz: f64) -> Option<f64> {
    if !(epsilon > 0.0 && lipschitz > 0.0) {
        return None;
    }
    let (e, l, m) = (epsilon, lipschitz, m as f64);
    let first = m * e * e / (l * l * (1.0 + (1.0 + 4.0 * e / l).sqrt()));
    let second = m * e / (2.0 * l * (1.0 + (1.0 + 4.0 * l / e).sqrt()));
    Some(first.min(second))
}

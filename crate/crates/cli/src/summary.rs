//! Aggregation across seeds: quantile bands per checkpoint and
//! evaluations-to-threshold.

use crate::experiment::{SeedRun, TraceRow};

/// Linear interpolation between order statistics (`h = (n - 1) q`).
/// `values` must be sorted; infinities are allowed and propagate.
pub fn quantile_sorted(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    let h = (values.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi || values[lo] == values[hi] {
        return values[lo];
    }
    values[lo] + (h - lo as f64) * (values[hi] - values[lo])
}

/// Median, 0.25 and 0.75 quantiles of an unsorted sample.
pub fn band(values: &[f64]) -> (f64, f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    (quantile_sorted(&v, 0.5), quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.75))
}

/// First checkpoint at which the test error is at or below the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdHit {
    pub grad_evals: u64,
    pub wall_ms: f64,
}

pub fn first_hit(rows: &[TraceRow], threshold: f64) -> Option<ThresholdHit> {
    rows.iter()
        .find(|r| r.test_error <= threshold)
        .map(|r| ThresholdHit {
            grad_evals: r.grad_evals,
            wall_ms: r.wall_ms,
        })
}

/// Median over seeds of evaluations-to-threshold in units of `|Q|`;
/// seeds that never reach it count as infinite.
pub fn median_evals_to_threshold(runs: &[SeedRun]) -> f64 {
    let values: Vec<f64> = runs
        .iter()
        .map(|r| match r.threshold_hit {
            Some(h) => h.grad_evals as f64 / r.train_size as f64,
            None => f64::INFINITY,
        })
        .collect();
    band(&values).0
}

/// One aligned checkpoint across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub epoch: usize,
    pub checkpoint: usize,
    pub evals_per_q: f64,
    pub seeds: usize,
    pub test_error: (f64, f64, f64),
    pub train_loss: (f64, f64, f64),
    pub step_size: f64,
}

/// Aligns trace rows by position. Rows of seeds that stopped early are
/// simply absent from the later positions.
pub fn summarize(runs: &[SeedRun]) -> Vec<SummaryRow> {
    let longest = runs.iter().map(|r| r.rows.len()).max().unwrap_or(0);
    (0..longest)
        .map(|pos| {
            let present: Vec<(&TraceRow, usize)> = runs
                .iter()
                .filter_map(|r| r.rows.get(pos).map(|row| (row, r.train_size)))
                .collect();
            let (first, q) = present[0];
            let losses: Vec<f64> = present.iter().map(|(r, _)| r.train_loss).collect();
            let errors: Vec<f64> = present.iter().map(|(r, _)| r.test_error).collect();
            let steps: Vec<f64> = present.iter().map(|(r, _)| r.step_size).collect();
            SummaryRow {
                epoch: first.epoch,
                checkpoint: first.checkpoint,
                evals_per_q: first.grad_evals as f64 / q as f64,
                seeds: present.len(),
                test_error: band(&errors),
                train_loss: band(&losses),
                step_size: band(&steps).0,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.25), 1.75);
        assert_eq!(quantile_sorted(&v, 0.75), 3.25);
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert_eq!(quantile_sorted(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn unreached_seeds_push_the_median_to_infinity() {
        assert_eq!(band(&[1.0, f64::INFINITY, f64::INFINITY]).0, f64::INFINITY);
        assert_eq!(band(&[1.0, 2.0, f64::INFINITY]).0, 2.0);
        assert_eq!(band(&[1.0, 3.0, f64::INFINITY, f64::INFINITY]).0, f64::INFINITY);
    }

    #[test]
    fn first_hit_uses_the_first_qualifying_row() {
        let row = |evals: u64, err: f64| TraceRow {
            seed: 0,
            epoch: 0,
            checkpoint: 1,
            step_size: 0.1,
            train_loss: 1.0,
            test_error: err,
            grad_evals: evals,
            wall_ms: evals as f64,
        };
        let rows = vec![row(10, 0.3), row(20, 0.15), row(30, 0.1)];
        assert_eq!(first_hit(&rows, 0.15).unwrap().grad_evals, 20);
        assert!(first_hit(&rows, 0.05).is_none());
    }
}

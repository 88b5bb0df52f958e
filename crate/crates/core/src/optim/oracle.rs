use crate::losses::{mean_loss_flat, LossModel};
use crate::types::ComparisonSet;

/// A finite-sum objective `f(x) = (1/N) sum_i f_i(x)` over flat points.
pub trait FiniteSumOracle {
    /// Length of a point.
    fn dim(&self) -> usize;

    /// Number of components `N`.
    fn sample_count(&self) -> usize;

    fn objective(&self, x: &[f64]) -> f64;

    /// `out += scale * grad f_index(x)`.
    fn add_component_grad(&self, index: usize, x: &[f64], scale: f64, out: &mut [f64]);

    /// Mean gradient over `batch` (indices may repeat).
    fn component_grad(&self, batch: &[usize], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        if batch.is_empty() {
            return out;
        }
        let scale = 1.0 / batch.len() as f64;
        for &i in batch {
            self.add_component_grad(i, x, scale, &mut out);
        }
        out
    }

    /// Full gradient, summed in index order.
    fn full_grad_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let scale = 1.0 / self.sample_count() as f64;
        for i in 0..self.sample_count() {
            self.add_component_grad(i, x, scale, out);
        }
    }

    fn full_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.full_grad_into(x, &mut out);
        out
    }
}

/// Ordinal embedding objective: one component per comparison, points are
/// column-major `p x n` embeddings.
#[derive(Debug, Clone, Copy)]
pub struct OrdinalOracle<'a> {
    model: LossModel,
    set: &'a ComparisonSet,
    p: usize,
    n: usize,
}

impl<'a> OrdinalOracle<'a> {
    /// `n` may exceed the largest index in `set`.
    pub fn new(model: LossModel, set: &'a ComparisonSet, p: usize, n: usize) -> Self {
        assert!(set.n() <= n, "comparison set refers to more objects than the embedding holds");
        assert!(!set.is_empty(), "ordinal oracle needs at least one comparison");
        Self { model, set, p, n }
    }

    pub fn model(&self) -> &LossModel {
        &self.model
    }

    pub fn comparisons(&self) -> &ComparisonSet {
        self.set
    }

    pub fn embedding_dim(&self) -> usize {
        self.p
    }

    pub fn object_count(&self) -> usize {
        self.n
    }
}

impl FiniteSumOracle for OrdinalOracle<'_> {
    fn dim(&self) -> usize {
        self.p * self.n
    }

    fn sample_count(&self) -> usize {
        self.set.len()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        mean_loss_flat(&self.model, x, self.p, self.set)
    }

    fn add_component_grad(&self, index: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        self.model
            .add_grad(x, self.p, &self.set.comparisons()[index], scale, out);
    }
}

/// Sum of diagonal quadratics `f_i(x) = 1/2 sum_r a_ir (x_r - c_r)^2` sharing
/// the minimizer `c`.
#[derive(Debug, Clone)]
pub struct DiagonalQuadratic {
    /// `coeffs[i]` is the diagonal of component `i`.
    coeffs: Vec<Vec<f64>>,
    center: Vec<f64>,
}

impl DiagonalQuadratic {
    pub fn new(coeffs: Vec<Vec<f64>>, center: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty());
        assert!(coeffs.iter().all(|c| c.len() == center.len()));
        Self { coeffs, center }
    }

    /// Components whose mean diagonal is `mean_diag`; component `i` scales the
    /// diagonal by `1 + spread * w_i` with zero-mean weights `w_i`.
    pub fn with_mean(mean_diag: &[f64], components: usize, spread: f64) -> Self {
        assert!(components >= 1);
        let coeffs = (0..components)
            .map(|i| {
                let w = if components == 1 {
                    0.0
                } else {
                    2.0 * i as f64 / (components - 1) as f64 - 1.0
                };
                mean_diag
                    .iter()
                    .enumerate()
                    .map(|(r, a)| {
                        // alternate the sign per coordinate so components differ in shape
                        let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                        a * (1.0 + spread * sign * w)
                    })
                    .collect()
            })
            .collect();
        Self::new(coeffs, vec![0.0; mean_diag.len()])
    }

    pub fn minimizer(&self) -> &[f64] {
        &self.center
    }

    pub fn mean_diagonal(&self) -> Vec<f64> {
        let n = self.coeffs.len() as f64;
        (0..self.center.len())
            .map(|r| self.coeffs.iter().map(|c| c[r]).sum::<f64>() / n)
            .collect()
    }

    /// Largest per-component curvature (the component Lipschitz constant).
    pub fn component_lipschitz(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|c| c.iter().map(|a| a.abs()))
            .fold(0.0, f64::max)
    }

    /// Smallest curvature magnitude of the mean.
    pub fn mean_curvature_floor(&self) -> f64 {
        self.mean_diagonal()
            .iter()
            .map(|a| a.abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn mean_lipschitz(&self) -> f64 {
        self.mean_diagonal().iter().map(|a| a.abs()).fold(0.0, f64::max)
    }
}

impl FiniteSumOracle for DiagonalQuadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn sample_count(&self) -> usize {
        self.coeffs.len()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let total: f64 = self
            .coeffs
            .iter()
            .map(|c| {
                c.iter()
                    .zip(x.iter().zip(&self.center))
                    .map(|(a, (xr, cr))| 0.5 * a * (xr - cr) * (xr - cr))
                    .sum::<f64>()
            })
            .sum();
        total / self.coeffs.len() as f64
    }

    fn add_component_grad(&self, index: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        for (r, a) in self.coeffs[index].iter().enumerate() {
            out[r] += scale * a * (x[r] - self.center[r]);
        }
    }
}

/// One-dimensional finite sum `f_i(x) = a_i x^2 + 3 b_i sin^2 x` whose mean is
/// `x^2 + 3 sin^2 x` when the `a_i` and `b_i` both average to one.
///
/// The mean is non-convex, has its unique global minimum `f* = 0` at `x = 0`
/// and satisfies the PL inequality.
#[derive(Debug, Clone)]
pub struct SineSquaredPl {
    terms: Vec<(f64, f64)>,
}

impl SineSquaredPl {
    pub fn new(terms: Vec<(f64, f64)>) -> Self {
        assert!(!terms.is_empty());
        Self { terms }
    }

    /// Four components averaging to `x^2 + 3 sin^2 x`.
    pub fn standard() -> Self {
        Self::new(vec![(0.5, 1.4), (1.5, 0.6), (0.8, 1.2), (1.2, 0.8)])
    }

    pub fn optimal_value(&self) -> f64 {
        0.0
    }
}

impl FiniteSumOracle for SineSquaredPl {
    fn dim(&self) -> usize {
        1
    }

    fn sample_count(&self) -> usize {
        self.terms.len()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let s = x[0].sin();
        let total: f64 = self
            .terms
            .iter()
            .map(|(a, b)| a * x[0] * x[0] + 3.0 * b * s * s)
            .sum();
        total / self.terms.len() as f64
    }

    fn add_component_grad(&self, index: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let (a, b) = self.terms[index];
        // d/dx 3 sin^2 x = 3 sin 2x
        out[0] += scale * (2.0 * a * x[0] + 3.0 * b * (2.0 * x[0]).sin());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossKind;
    use crate::types::Comparison;

    fn assert_mean_of_components_is_full<O: FiniteSumOracle>(o: &O, x: &[f64]) {
        let n = o.sample_count();
        let mut acc = vec![0.0; o.dim()];
        for i in 0..n {
            let g = o.component_grad(&[i], x);
            for (a, v) in acc.iter_mut().zip(g) {
                *a += v / n as f64;
            }
        }
        let full = o.full_grad(x);
        for (a, b) in acc.iter().zip(&full) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn singleton_components_average_to_full_gradient() {
        let q = DiagonalQuadratic::with_mean(&[1.0, 2.0, 3.0, 4.0, 5.0], 5, 0.5);
        assert_mean_of_components_is_full(&q, &[0.3, -1.0, 2.0, 0.1, -0.7]);

        let pl = SineSquaredPl::standard();
        assert_mean_of_components_is_full(&pl, &[1.7]);

        let set = crate::types::ComparisonSet::new(
            4,
            vec![
                Comparison::triplet(0, 1, 2).unwrap(),
                Comparison::triplet(3, 2, 1).unwrap(),
                Comparison::triplet(1, 3, 0).unwrap(),
            ],
        )
        .unwrap();
        let o = OrdinalOracle::new(LossModel::for_dim(LossKind::Ste, 2), &set, 2, 4);
        assert_mean_of_components_is_full(&o, &[0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8]);
    }

    #[test]
    fn quadratic_mean_is_requested_diagonal() {
        let q = DiagonalQuadratic::with_mean(&[1.0, 2.0, 3.0, 4.0, 5.0], 4, 0.5);
        for (a, b) in q.mean_diagonal().iter().zip([1.0, 2.0, 3.0, 4.0, 5.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((q.component_lipschitz() - 7.5).abs() < 1e-12);
        assert!((q.mean_curvature_floor() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pl_function_mean() {
        let pl = SineSquaredPl::standard();
        let x: f64 = 0.9;
        let expect = x * x + 3.0 * x.sin().powi(2);
        assert!((pl.objective(&[x]) - expect).abs() < 1e-12);
    }
}

//! Per-comparison objectives over the embedding matrix.
//!
//! Every model reduces a comparison to the two squared distances it compares.
//! After orienting the comparison so that it asserts `d_near < d_far`, a model
//! is a scalar function `loss(d_near, d_far)` together with its two partial
//! derivatives; the gradient with respect to the touched columns follows from
//! `d(d_ab)/d(x_a) = 2 (x_a - x_b)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::types::{sq_dist, Comparison, ComparisonSet, Embedding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// Hinge loss on the distance margin.
    Gnmds,
    /// Crowd kernel logistic loss, `p = exp(d_far) / (exp(d_near) + exp(d_far))`.
    Ckl,
    /// Stochastic triplet embedding with a Gaussian kernel.
    Ste,
    /// Stochastic triplet embedding with a Student-t kernel.
    Tste,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::Gnmds, LossKind::Ckl, LossKind::Ste, LossKind::Tste];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Gnmds => "gnmds",
            LossKind::Ckl => "ckl",
            LossKind::Ste => "ste",
            LossKind::Tste => "tste",
        }
    }

    pub fn is_smooth(self) -> bool {
        !matches!(self, LossKind::Gnmds)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gnmds" => Ok(LossKind::Gnmds),
            "ckl" => Ok(LossKind::Ckl),
            "ste" => Ok(LossKind::Ste),
            "tste" | "t-ste" => Ok(LossKind::Tste),
            other => Err(Error::arg(format!("unknown loss '{other}'"))),
        }
    }
}

/// A loss kind plus its parameters. `alpha` is only read by TSTE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossModel {
    kind: LossKind,
    alpha: f64,
}

impl LossModel {
    pub fn new(kind: LossKind, alpha: f64) -> Result<Self> {
        if kind == LossKind::Tste && !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::arg(format!(
                "TSTE degrees of freedom must be positive, got {alpha}"
            )));
        }
        Ok(Self { kind, alpha })
    }

    /// Model with default parameters for an embedding of dimension `p`
    /// (TSTE uses `alpha = max(p - 1, 1)`).
    pub fn for_dim(kind: LossKind, p: usize) -> Self {
        Self {
            kind,
            alpha: default_alpha(p),
        }
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Loss of an oriented comparison and its partials `(dL/dd_near, dL/dd_far)`.
    #[inline]
    pub fn eval_distances(&self, near: f64, far: f64) -> (f64, f64, f64) {
        match self.kind {
            LossKind::Gnmds => {
                let h = 1.0 + near - far;
                if h >= 0.0 {
                    (h, 1.0, -1.0)
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
            // -log(exp(far) / (exp(near) + exp(far))) and
            // -log(exp(-near) / (exp(-near) + exp(-far))) are both softplus(near - far).
            LossKind::Ckl | LossKind::Ste => {
                let z = near - far;
                let s = sigmoid(z);
                (softplus(z), s, -s)
            }
            LossKind::Tste => {
                let a = self.alpha;
                let half = 0.5 * (a + 1.0);
                let z = half * ((near / a).ln_1p() - (far / a).ln_1p());
                let s = sigmoid(z);
                (softplus(z), s * half / (a + near), -s * half / (a + far))
            }
        }
    }

    /// Per-comparison loss.
    pub fn loss(&self, x: &Embedding, q: &Comparison) -> Result<f64> {
        check_touched(x, q)?;
        let (near, far) = distances(x.as_slice(), x.dim(), q);
        Ok(self.eval_distances(near, far).0)
    }

    /// Gradient of [`LossModel::loss`] with respect to the columns `q` touches.
    pub fn grad(&self, x: &Embedding, q: &Comparison) -> Result<PerComparisonGrad> {
        check_touched(x, q)?;
        let p = x.dim();
        let mut indices: Vec<usize> = Vec::with_capacity(4);
        for idx in q.indices() {
            if !indices.contains(&idx) {
                indices.push(idx);
            }
        }
        let mut columns = vec![0.0; indices.len() * p];
        let mut scratch = vec![0.0; x.as_slice().len()];
        self.add_grad(x.as_slice(), p, q, 1.0, &mut scratch);
        for (slot, &idx) in indices.iter().enumerate() {
            columns[slot * p..(slot + 1) * p].copy_from_slice(&scratch[idx * p..(idx + 1) * p]);
        }
        Ok(PerComparisonGrad { p, indices, columns })
    }

    /// Loss on flat column-major storage; no validation.
    #[inline]
    pub fn loss_flat(&self, x: &[f64], p: usize, q: &Comparison) -> f64 {
        let (near, far) = distances(x, p, q);
        self.eval_distances(near, far).0
    }

    /// Adds `scale * grad` of one comparison into `out`; no validation.
    #[inline]
    pub fn add_grad(&self, x: &[f64], p: usize, q: &Comparison, scale: f64, out: &mut [f64]) {
        let ((a, b), (c, d)) = q.oriented();
        let near = sq_dist(col(x, p, a), col(x, p, b));
        let far = sq_dist(col(x, p, c), col(x, p, d));
        let (_, dn, df) = self.eval_distances(near, far);
        if dn != 0.0 {
            add_pair_grad(x, p, a, b, 2.0 * scale * dn, out);
        }
        if df != 0.0 {
            add_pair_grad(x, p, c, d, 2.0 * scale * df, out);
        }
    }
}

pub fn default_alpha(p: usize) -> f64 {
    (p as f64 - 1.0).max(1.0)
}

/// Gradient of one comparison, restricted to the (at most four) columns it touches.
///
/// For triplets the anchor appears once with the contributions of both pairs summed.
#[derive(Debug, Clone, PartialEq)]
pub struct PerComparisonGrad {
    p: usize,
    indices: Vec<usize>,
    columns: Vec<f64>,
}

impl PerComparisonGrad {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn column(&self, slot: usize) -> &[f64] {
        &self.columns[slot * self.p..(slot + 1) * self.p]
    }

    /// Gradient column for object `idx`, if the comparison touches it.
    pub fn column_for(&self, idx: usize) -> Option<&[f64]> {
        self.indices
            .iter()
            .position(|&i| i == idx)
            .map(|slot| self.column(slot))
    }

    /// Dense `p x n` matrix with zeros outside the touched columns.
    pub fn scatter(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.p, n);
        for (slot, &idx) in self.indices.iter().enumerate() {
            m.column_mut(idx).copy_from_slice(self.column(slot));
        }
        m
    }
}

/// Mean loss over the comparison set.
pub fn full_objective(model: &LossModel, x: &Embedding, set: &ComparisonSet) -> Result<f64> {
    check_set(x, set)?;
    Ok(mean_loss_flat(model, x.as_slice(), x.dim(), set))
}

/// Mean of the per-comparison gradients as a dense `p x n` matrix.
pub fn full_gradient(model: &LossModel, x: &Embedding, set: &ComparisonSet) -> Result<DMatrix<f64>> {
    check_set(x, set)?;
    let mut out = vec![0.0; x.as_slice().len()];
    let scale = 1.0 / set.len() as f64;
    for q in set {
        model.add_grad(x.as_slice(), x.dim(), q, scale, &mut out);
    }
    Ok(DMatrix::from_vec(x.dim(), x.len(), out))
}

pub(crate) fn mean_loss_flat(model: &LossModel, x: &[f64], p: usize, set: &ComparisonSet) -> f64 {
    let total: f64 = set.iter().map(|q| model.loss_flat(x, p, q)).sum();
    total / set.len() as f64
}

fn check_set(x: &Embedding, set: &ComparisonSet) -> Result<()> {
    if set.is_empty() {
        return Err(Error::arg("comparison set is empty"));
    }
    if set.n() > x.len() {
        return Err(Error::Range {
            index: set.n() - 1,
            n: x.len(),
        });
    }
    Ok(())
}

fn check_touched(x: &Embedding, q: &Comparison) -> Result<()> {
    for idx in q.indices() {
        if idx >= x.len() {
            return Err(Error::Range { index: idx, n: x.len() });
        }
    }
    Ok(())
}

#[inline]
fn col(x: &[f64], p: usize, i: usize) -> &[f64] {
    &x[i * p..(i + 1) * p]
}

#[inline]
fn distances(x: &[f64], p: usize, q: &Comparison) -> (f64, f64) {
    let ((a, b), (c, d)) = q.oriented();
    (
        sq_dist(col(x, p, a), col(x, p, b)),
        sq_dist(col(x, p, c), col(x, p, d)),
    )
}

/// `out[a] += coef (x_a - x_b)`, `out[b] -= coef (x_a - x_b)`.
#[inline]
fn add_pair_grad(x: &[f64], p: usize, a: usize, b: usize, coef: f64, out: &mut [f64]) {
    for r in 0..p {
        let diff = coef * (x[a * p + r] - x[b * p + r]);
        out[a * p + r] += diff;
        out[b * p + r] -= diff;
    }
}

#[inline]
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Label;

    const LN2: f64 = std::f64::consts::LN_2;

    fn line(points: &[f64]) -> Embedding {
        Embedding::from_column_slice(1, points.len(), points).unwrap()
    }

    /// Central differences of the loss over every entry of `x`.
    fn fd_grad(model: &LossModel, x: &Embedding, q: &Comparison, h: f64) -> Vec<f64> {
        let mut v = x.as_slice().to_vec();
        let p = x.dim();
        (0..v.len())
            .map(|e| {
                let orig = v[e];
                v[e] = orig + h;
                let up = model.loss_flat(&v, p, q);
                v[e] = orig - h;
                let down = model.loss_flat(&v, p, q);
                v[e] = orig;
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let denom = na.max(nb);
        if denom == 0.0 {
            0.0
        } else {
            diff / denom
        }
    }

    #[test]
    fn ste_symmetric_is_ln2() {
        // d01 = 1 = d12
        let x = line(&[0.0, 1.0, 2.0]);
        let q = Comparison::new(0, 1, 1, 2, Label::Closer).unwrap();
        let v = LossModel::for_dim(LossKind::Ste, 1).loss(&x, &q).unwrap();
        assert!((v - LN2).abs() < 1e-15);
    }

    #[test]
    fn tste_symmetric_is_ln2_for_any_alpha() {
        let x = line(&[0.0, 1.0, 2.0]);
        let q = Comparison::new(0, 1, 1, 2, Label::Closer).unwrap();
        for alpha in [0.1, 1.0, 9.0, 250.0] {
            let v = LossModel::new(LossKind::Tste, alpha).unwrap().loss(&x, &q).unwrap();
            assert!((v - LN2).abs() < 1e-15, "alpha {alpha}: {v}");
        }
    }

    #[test]
    fn gnmds_satisfied_margin_is_zero() {
        // d01 = 0, d02 = 2
        let x = Embedding::from_column_slice(1, 3, &[0.0, 0.0, 2f64.sqrt()]).unwrap();
        let q = Comparison::triplet(0, 1, 2).unwrap();
        let m = LossModel::for_dim(LossKind::Gnmds, 1);
        assert!(m.loss(&x, &q).unwrap().abs() < 1e-15);
    }

    #[test]
    fn ste_known_value() {
        // d_ij = 0, d_lk = ln 3: loss = ln(1 + e^{-ln 3}) = ln(4/3)
        let x = Embedding::from_column_slice(1, 3, &[0.0, 0.0, 3f64.ln().sqrt()]).unwrap();
        let q = Comparison::triplet(0, 1, 2).unwrap();
        let v = LossModel::for_dim(LossKind::Ste, 1).loss(&x, &q).unwrap();
        assert!((v - 0.287_682_072_451_780_9).abs() < 1e-12, "{v}");
    }

    #[test]
    fn ckl_matches_direct_probability() {
        let x = line(&[0.0, 0.7, -1.1, 2.0]);
        let q = Comparison::new(0, 1, 2, 3, Label::Closer).unwrap();
        let dn: f64 = 0.49;
        let df: f64 = 9.61;
        let p = df.exp() / (dn.exp() + df.exp());
        let v = LossModel::for_dim(LossKind::Ckl, 1).loss(&x, &q).unwrap();
        assert!((v + p.ln()).abs() < 1e-12);
    }

    #[test]
    fn losses_stay_finite_for_huge_distances() {
        let x = line(&[0.0, 1e3, -1e3]);
        for kind in LossKind::ALL {
            let m = LossModel::for_dim(kind, 1);
            for q in [
                Comparison::triplet(0, 1, 2).unwrap(),
                Comparison::triplet(1, 0, 2).unwrap(),
            ] {
                let v = m.loss(&x, &q).unwrap();
                assert!(v.is_finite() && v >= 0.0, "{kind}: {v}");
                let g = m.grad(&x, &q).unwrap();
                assert!(g.columns.iter().all(|c| c.is_finite()));
            }
        }
    }

    #[test]
    fn gnmds_flat_region_has_zero_gradient() {
        // margin = 1 - 9 = -8 < -1
        let x = line(&[0.0, 1.0, 3.0]);
        let q = Comparison::triplet(0, 1, 2).unwrap();
        let g = LossModel::for_dim(LossKind::Gnmds, 1).grad(&x, &q).unwrap();
        assert!(g.columns.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn gnmds_kink_uses_active_branch() {
        // d01 = 1, d02 = 2 exactly: 1 + 1 - 2 = 0
        let x = Embedding::from_column_slice(2, 3, &[0.0, 0.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
        let q = Comparison::triplet(0, 1, 2).unwrap();
        let m = LossModel::for_dim(LossKind::Gnmds, 2);
        assert_eq!(m.loss(&x, &q).unwrap(), 0.0);
        let g = m.grad(&x, &q).unwrap();
        // anchor: 2(x0 - x1) - 2(x0 - x2)
        assert_eq!(g.column_for(0).unwrap(), &[0.0, 2.0]);
    }

    #[test]
    fn ste_symmetric_placement_gradient() {
        // x_i = x_l, x_j and x_k mirror images: equal distances
        let x = Embedding::from_column_slice(2, 3, &[0.0, 0.0, 1.0, 0.5, -1.0, 0.5]).unwrap();
        let q = Comparison::triplet(0, 1, 2).unwrap();
        let m = LossModel::for_dim(LossKind::Ste, 2);
        let g = m.grad(&x, &q).unwrap();
        let gj = g.column_for(1).unwrap();
        let gk = g.column_for(2).unwrap();
        // mirrored across the vertical axis with opposite sign
        assert!((gj[0] - gk[0]).abs() < 1e-15);
        assert!((gj[1] + gk[1]).abs() < 1e-15);
        let fd = fd_grad(&m, &x, &q, 1e-5);
        assert!(rel_err(g.scatter(3).as_slice(), &fd) < 1e-6);
    }

    #[test]
    fn ckl_matches_finite_differences() {
        let x = Embedding::from_column_slice(
            3,
            4,
            &[0.3, -0.2, 0.9, 1.1, 0.4, -0.7, -0.5, 0.8, 0.1, 0.2, -1.3, 0.6],
        )
        .unwrap();
        let m = LossModel::for_dim(LossKind::Ckl, 3);
        for q in [
            Comparison::new(0, 1, 2, 3, Label::Closer).unwrap(),
            Comparison::new(0, 1, 2, 3, Label::Farther).unwrap(),
            Comparison::triplet(2, 0, 3).unwrap(),
        ] {
            let g = m.grad(&x, &q).unwrap();
            let fd = fd_grad(&m, &x, &q, 1e-5);
            assert!(rel_err(g.scatter(4).as_slice(), &fd) < 1e-6);
        }
    }

    #[test]
    fn label_flip_equals_pair_swap() {
        let x = line(&[0.0, 0.4, 1.3, -0.8]);
        let q = Comparison::new(0, 1, 2, 3, Label::Farther).unwrap();
        let swapped = Comparison::new(2, 3, 0, 1, Label::Closer).unwrap();
        for kind in LossKind::ALL {
            let m = LossModel::for_dim(kind, 1);
            assert_eq!(m.loss(&x, &q).unwrap(), m.loss(&x, &swapped).unwrap());
        }
    }

    #[test]
    fn triplet_gradient_touches_three_columns() {
        let x = line(&[0.0, 0.4, 1.3, -0.8]);
        let q = Comparison::triplet(1, 0, 3).unwrap();
        let g = LossModel::for_dim(LossKind::Ste, 1).grad(&x, &q).unwrap();
        assert_eq!(g.indices(), &[1, 0, 3]);
        assert!(g.column_for(2).is_none());
        assert!(g.scatter(4).column(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_objective_examples() {
        let x = line(&[0.0, 0.4, 1.3, -0.8]);
        let q = Comparison::triplet(1, 0, 3).unwrap();
        let m = LossModel::for_dim(LossKind::Tste, 1);
        let single = ComparisonSet::new(4, vec![q]).unwrap();
        assert_eq!(full_objective(&m, &x, &single).unwrap(), m.loss(&x, &q).unwrap());
        let g = full_gradient(&m, &x, &single).unwrap();
        assert_eq!(g, m.grad(&x, &q).unwrap().scatter(4));

        let empty = ComparisonSet::new(4, vec![]).unwrap();
        assert!(full_objective(&m, &x, &empty).is_err());
        assert!(full_gradient(&m, &x, &empty).is_err());
    }

    #[test]
    fn all_satisfied_gnmds_has_zero_full_gradient() {
        let x = line(&[0.0, 0.1, 5.0, 9.0]);
        let set = ComparisonSet::new(
            4,
            vec![
                Comparison::triplet(0, 1, 2).unwrap(),
                Comparison::triplet(1, 0, 3).unwrap(),
                Comparison::triplet(3, 2, 0).unwrap(),
            ],
        )
        .unwrap();
        let g = full_gradient(&LossModel::for_dim(LossKind::Gnmds, 1), &x, &set).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tste_requires_positive_alpha() {
        assert!(LossModel::new(LossKind::Tste, 0.0).is_err());
        assert!(LossModel::new(LossKind::Tste, -1.0).is_err());
        assert!(LossModel::new(LossKind::Ste, 0.0).is_ok());
        assert_eq!(LossModel::for_dim(LossKind::Tste, 10).alpha(), 9.0);
        assert_eq!(LossModel::for_dim(LossKind::Tste, 1).alpha(), 1.0);
    }

    #[test]
    fn parse_kinds() {
        assert_eq!("STE".parse::<LossKind>().unwrap(), LossKind::Ste);
        assert_eq!("t-ste".parse::<LossKind>().unwrap(), LossKind::Tste);
        assert!("mds".parse::<LossKind>().is_err());
    }
}

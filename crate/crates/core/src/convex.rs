//! Gram-matrix formulation: projected gradient descent over centered PSD
//! matrices, and conversions between Gram matrices, squared distances and
//! embeddings.

use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Divergence, Error, Result};
use crate::losses::LossModel;
use crate::optim::{Checkpoint, EpochTrace, Monitor, NoMonitor};
use crate::types::{ComparisonSet, Embedding};

/// Largest object count the dense solver accepts.
pub const MAX_OBJECTS: usize = 2000;

const SYMMETRY_TOL: f64 = 1e-10;

/// A symmetric `n x n` Gram matrix with its target embedding rank.
#[derive(Debug, Clone, PartialEq)]
pub struct GramState {
    g: DMatrix<f64>,
    target_rank: usize,
}

impl GramState {
    pub fn new(g: DMatrix<f64>, target_rank: usize) -> Result<Self> {
        check_symmetric(&g)?;
        if target_rank == 0 || target_rank > g.nrows() {
            return Err(Error::arg(format!(
                "target rank {target_rank} must lie in 1..={}",
                g.nrows()
            )));
        }
        Ok(Self { g, target_rank })
    }

    pub fn from_embedding(x: &Embedding) -> Self {
        Self {
            g: x.gram(),
            target_rank: x.dim(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.g
    }

    pub fn target_rank(&self) -> usize {
        self.target_rank
    }

    pub fn len(&self) -> usize {
        self.g.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.g.nrows() == 0
    }
}

fn check_square(g: &DMatrix<f64>) -> Result<()> {
    if g.nrows() != g.ncols() {
        return Err(Error::arg(format!("matrix is {}x{}, expected square", g.nrows(), g.ncols())));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericInput("matrix has non-finite entries".into()));
    }
    Ok(())
}

fn check_symmetric(g: &DMatrix<f64>) -> Result<()> {
    check_square(g)?;
    let scale = g.amax().max(1.0);
    let n = g.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (g[(i, j)] - g[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::arg(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// `d_ab = g_aa - g_ab - g_ba + g_bb`.
#[inline]
fn gram_distance(g: &DMatrix<f64>, a: usize, b: usize) -> f64 {
    g[(a, a)] - g[(a, b)] - g[(b, a)] + g[(b, b)]
}

#[inline]
fn add_stencil(out: &mut DMatrix<f64>, a: usize, b: usize, coef: f64) {
    out[(a, a)] += coef;
    out[(b, b)] += coef;
    out[(a, b)] -= coef;
    out[(b, a)] -= coef;
}

/// Mean loss over `set` with each distance read off `g`, and its gradient
/// with respect to the entries of `g`.
pub fn gram_loss_grad(
    model: &LossModel,
    g: &DMatrix<f64>,
    set: &ComparisonSet,
) -> Result<(f64, DMatrix<f64>)> {
    check_symmetric(g)?;
    if set.is_empty() {
        return Err(Error::arg("comparison set is empty"));
    }
    if set.n() > g.nrows() {
        return Err(Error::Range {
            index: set.n() - 1,
            n: g.nrows(),
        });
    }
    Ok(gram_loss_grad_unchecked(model, g, set))
}

fn gram_loss_grad_unchecked(
    model: &LossModel,
    g: &DMatrix<f64>,
    set: &ComparisonSet,
) -> (f64, DMatrix<f64>) {
    let n = g.nrows();
    let scale = 1.0 / set.len() as f64;
    let mut grad = DMatrix::zeros(n, n);
    let mut total = 0.0;
    for q in set {
        let ((a, b), (c, d)) = q.oriented();
        let (loss, dn, df) = model.eval_distances(gram_distance(g, a, b), gram_distance(g, c, d));
        total += loss;
        if dn != 0.0 {
            add_stencil(&mut grad, a, b, scale * dn);
        }
        if df != 0.0 {
            add_stencil(&mut grad, c, d, scale * df);
        }
    }
    (total * scale, grad)
}

/// `C g C` with `C = I - (1/n) 1 1^T`.
pub fn double_center(g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows();
    let row_means: Vec<f64> = (0..n).map(|i| g.row(i).sum() / n as f64).collect();
    let col_means: Vec<f64> = (0..n).map(|j| g.column(j).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    DMatrix::from_fn(n, n, |i, j| g[(i, j)] - row_means[i] - col_means[j] + grand)
}

fn symmetrize(g: &mut DMatrix<f64>) {
    let n = g.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
}

fn eigen(g: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    SymmetricEigen::try_new(g.clone(), f64::EPSILON, 1_000_000)
        .ok_or_else(|| Error::Eigen(format!("symmetric eigensolver did not converge on a {0}x{0} matrix", g.nrows())))
}

/// Eigenpairs sorted by eigenvalue, largest first.
fn sorted_eigen(g: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let eig = eigen(g)?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(g.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Centers `g` and clamps its negative eigenvalues to zero.
pub fn project_psd_centered(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(g)?;
    let mut centered = double_center(g);
    symmetrize(&mut centered);
    let eig = eigen(&centered)?;
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    let mut p = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    p = double_center(&p);
    symmetrize(&mut p);
    Ok(p)
}

/// Embedding from the top `p` eigenpairs: `X = Lambda_p^{1/2} U_p^T`.
pub fn gram_to_embedding(g: &DMatrix<f64>, p: usize) -> Result<Embedding> {
    check_symmetric(g)?;
    let n = g.nrows();
    if p == 0 || p > n {
        return Err(Error::arg(format!("embedding dimension {p} must lie in 1..={n}")));
    }
    let (values, vectors) = sorted_eigen(g)?;
    let data = DMatrix::from_fn(p, n, |r, c| values[r].max(0.0).sqrt() * vectors[(c, r)]);
    Embedding::new(data)
}

/// `G = -1/2 C D C` for a matrix of squared distances.
pub fn gram_from_sq_distances(d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(d)?;
    if let Some(i) = (0..d.nrows()).find(|&i| d[(i, i)] != 0.0) {
        return Err(Error::arg(format!("distance matrix has nonzero diagonal at {i}")));
    }
    let mut g = double_center(d) * -0.5;
    symmetrize(&mut g);
    Ok(g)
}

/// `D = diag(G) 1^T - 2 G + 1 diag(G)^T`.
pub fn sq_distances_from_gram(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(g)?;
    let n = g.nrows();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            g[(i, i)] + g[(j, j)] - 2.0 * g[(i, j)]
        }
    }))
}

/// Classical multidimensional scaling of a squared-distance matrix.
pub fn classical_mds(sq_distances: &DMatrix<f64>, p: usize) -> Result<Embedding> {
    gram_to_embedding(&gram_from_sq_distances(sq_distances)?, p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexConfig {
    /// Step applied to the gradient of the mean loss.
    pub eta: f64,
    pub epochs: usize,
    pub iterations_per_epoch: usize,
    pub checkpoints_per_epoch: usize,
}

impl ConvexConfig {
    pub fn new(eta: f64, iterations: usize) -> Self {
        Self {
            eta,
            epochs: 1,
            iterations_per_epoch: iterations,
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

#[derive(Debug, Clone)]
pub struct ConvexOutput {
    pub embedding: Embedding,
    pub gram: DMatrix<f64>,
    pub trace: Vec<EpochTrace>,
}

/// Projected gradient descent on the Gram matrix, started from the Gram
/// matrix of `x0`, followed by rank-`p` truncation.
pub fn convex_solve(
    model: &LossModel,
    set: &ComparisonSet,
    x0: &Embedding,
    cfg: &ConvexConfig,
) -> Result<ConvexOutput> {
    convex_solve_monitored(model, set, x0, cfg, &mut NoMonitor)
}

/// As [`convex_solve`]; checkpoints carry the flat rank-`p` embedding of the current iterate.
pub fn convex_solve_monitored<M: Monitor + ?Sized>(
    model: &LossModel,
    set: &ComparisonSet,
    x0: &Embedding,
    cfg: &ConvexConfig,
    monitor: &mut M,
) -> Result<ConvexOutput> {
    cfg.validate()?;
    let (n, p) = (x0.len(), x0.dim());
    if n > MAX_OBJECTS {
        return Err(Error::arg(format!(
            "dense Gram solver is limited to {MAX_OBJECTS} objects, got {n}"
        )));
    }
    if set.is_empty() {
        return Err(Error::arg("comparison set is empty"));
    }
    if set.n() > n {
        return Err(Error::Range { index: set.n() - 1, n });
    }
    let started = Instant::now();
    let positions = crate::optim::checkpoint_positions(cfg.iterations_per_epoch, cfg.checkpoints_per_epoch);
    let per_iter = set.len() as u64;

    let mut g = project_psd_centered(&x0.gram())?;
    let (f0, _) = gram_loss_grad_unchecked(model, &g, set);
    let limit = 1e6 * f0.abs().max(1.0);
    let mut last_finite = g.clone();
    let mut trace: Vec<EpochTrace> = Vec::with_capacity(cfg.epochs);
    let mut evals: u64 = 0;
    for epoch in 0..cfg.epochs {
        let mut next_cp = 0;
        for it in 0..cfg.iterations_per_epoch {
            let (_, grad) = gram_loss_grad_unchecked(model, &g, set);
            evals += per_iter;
            g -= grad * cfg.eta;
            if g.iter().any(|v| !v.is_finite()) {
                return Err(diverged(epoch, "Gram iterate has non-finite entries", &last_finite, p, &trace));
            }
            g = project_psd_centered(&g)?;
            if next_cp < positions.len() && positions[next_cp] == it + 1 {
                next_cp += 1;
                let x = gram_to_embedding(&g, p)?;
                monitor.checkpoint(&Checkpoint {
                    epoch,
                    index: next_cp,
                    per_epoch: positions.len(),
                    x: x.as_slice(),
                    step_size: cfg.eta,
                    grad_evals: evals,
                });
            }
        }
        let (objective, grad) = gram_loss_grad_unchecked(model, &g, set);
        if !objective.is_finite() || objective > limit {
            return Err(diverged(epoch, &format!("objective {objective:.3e} out of range"), &last_finite, p, &trace));
        }
        last_finite.copy_from(&g);
        trace.push(EpochTrace {
            epoch,
            step_size: cfg.eta,
            epsilon: None,
            grad_norm: grad.norm(),
            objective,
            grad_evals: evals,
            inner_iterations: cfg.iterations_per_epoch,
            wall_seconds: started.elapsed().as_secs_f64(),
        });
    }
    let embedding = gram_to_embedding(&g, p)?;
    Ok(ConvexOutput {
        embedding,
        gram: g,
        trace,
    })
}

fn diverged(epoch: usize, reason: &str, last: &DMatrix<f64>, p: usize, trace: &[EpochTrace]) -> Error {
    let last_finite = gram_to_embedding(last, p)
        .map(|x| x.as_slice().to_vec())
        .unwrap_or_default();
    Error::Diverged(Box::new(Divergence {
        epoch,
        reason: reason.to_string(),
        last_finite,
        trace: trace.to_vec(),
    }))
}

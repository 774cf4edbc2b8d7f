//! Multi-view reconstructive preserving embedding.
//!
//! Each view contributes an alignment matrix `M_v` built from its own
//! locally linear reconstruction weights. The shared embedding `Y` (`d x n`,
//! orthonormal rows) and the view weights `alpha` (on the simplex) minimize
//!
//! ```text
//! sum_v alpha_v^r * tr(Y M_v Y^T)
//! ```
//!
//! by alternating two exact block minimizations: `Y` is the bottom of the
//! spectrum of `sum_v alpha_v^r M_v`, and `alpha` has the closed form
//! `alpha_v ∝ tr(Y M_v Y^T)^(-1/(r-1))`. Both steps can only lower the
//! objective, so the recorded trace is non-increasing.
//!
//! The exponent `r > 1` controls how evenly the views are weighted: as
//! `r -> 1` all weight collapses onto the view with the smallest trace, as
//! `r -> ∞` the weights approach `1/m`.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{MultiViewDataset, ViewMatrix};
use crate::error::{Error, Result};
use crate::neighbors::knn;
use crate::reconstruction::{
    build_alignment, build_weight_matrix, default_reg_eps, AlignmentMatrix,
};
use crate::spectral::{smallest_eigenvectors, EigenSelection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrpeConfig {
    /// Embedding dimension.
    pub d: usize,
    /// Neighbors per sample.
    pub k: usize,
    /// View-weight exponent, strictly greater than 1.
    pub r: f64,
    /// Gram ridge; `None` picks [`default_reg_eps`] per view.
    pub reg_eps: Option<f64>,
    pub max_iters: usize,
    /// Stop once `|obj_t - obj_{t-1}| <= tol * |obj_{t-1}|`. The objective
    /// carries a factor `alpha^r`, so it is often far below 1 and only a
    /// purely relative test is meaningful.
    pub tol: f64,
    /// Skip the bottom (near-constant) eigenvector.
    pub drop_trivial: bool,
}

impl Default for MrpeConfig {
    fn default() -> Self {
        Self {
            d: 10,
            k: 10,
            r: 5.0,
            reg_eps: None,
            max_iters: 100,
            tol: 1e-7,
            drop_trivial: true,
        }
    }
}

impl MrpeConfig {
    pub fn validate(&self, dataset: &MultiViewDataset) -> Result<()> {
        if !(self.r > 1.0 && self.r.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "r must be finite and > 1, got {}",
                self.r
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if let Some(eps) = self.reg_eps {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "reg_eps must be finite and >= 0, got {eps}"
                )));
            }
        }
        let n = dataset.n_samples();
        if self.k == 0 || self.k >= n {
            return Err(Error::KTooLarge { k: self.k, n });
        }
        let min_dim = dataset
            .views()
            .iter()
            .map(ViewMatrix::dim)
            .min()
            .unwrap_or(0);
        if self.d == 0 || self.d >= min_dim {
            return Err(Error::InvalidConfig(format!(
                "d must satisfy 1 <= d < min view dimension ({min_dim}), got {}",
                self.d
            )));
        }
        if self.d + usize::from(self.drop_trivial) > n {
            return Err(Error::InvalidConfig(format!(
                "d = {} too large for n = {n}",
                self.d
            )));
        }
        Ok(())
    }

    fn reg_eps_for(&self, view: &ViewMatrix) -> f64 {
        self.reg_eps
            .unwrap_or_else(|| default_reg_eps(self.k, view.dim()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingResult {
    /// `d x n` shared embedding with orthonormal rows.
    pub y: DMatrix<f64>,
    /// Final view weights.
    pub alpha: Vec<f64>,
    /// Objective after each full iteration.
    pub objective_trace: Vec<f64>,
    /// View weights after each full iteration.
    pub alpha_trace: Vec<Vec<f64>>,
    /// `tr(Y M_v Y^T)` for the final `Y`.
    pub per_view_traces: Vec<f64>,
    /// Eigenvalues of the last combined matrix matching the rows of `y`.
    pub eigenvalues: Vec<f64>,
    pub iters_run: usize,
    pub converged: bool,
    pub degenerate_subspace: bool,
    pub wall_time_seconds: f64,
    pub iteration_seconds: Vec<f64>,
    pub config: MrpeConfig,
}

/// Closed-form minimizer of `sum_v alpha_v^r t_v` over the simplex.
///
/// Views with a zero trace are the limit case: they split the weight evenly
/// and every other view gets zero.
pub fn update_alpha(traces: &[f64], r: f64) -> Result<Vec<f64>> {
    if traces.is_empty() {
        return Err(Error::InvalidConfig("no view traces".into()));
    }
    if !(r > 1.0 && r.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "r must be finite and > 1, got {r}"
        )));
    }
    if traces.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "traces must be finite and >= 0: {traces:?}"
        )));
    }
    let zeros = traces.iter().filter(|&&t| t == 0.0).count();
    if zeros > 0 {
        let share = 1.0 / zeros as f64;
        return Ok(traces
            .iter()
            .map(|&t| if t == 0.0 { share } else { 0.0 })
            .collect());
    }
    // (1/t)^(1/(r-1)) in log space; r close to 1 makes the exponent huge
    let logs: Vec<f64> = traces.iter().map(|t| -t.ln() / (r - 1.0)).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// `sum_v alpha_v^r M_v`.
pub fn combine_alignments(
    alignments: &[AlignmentMatrix],
    alpha: &[f64],
    r: f64,
) -> AlignmentMatrix {
    assert_eq!(alignments.len(), alpha.len(), "one weight per view");
    let n = alignments[0].n_samples();
    let mut combined = DMatrix::zeros(n, n);
    for (m, &a) in alignments.iter().zip(alpha) {
        let coef = a.powf(r);
        if coef != 0.0 {
            combined += m.matrix() * coef;
        }
    }
    AlignmentMatrix::from_matrix(combined)
}

/// Bottom `d` eigenvectors of `m` as rows.
///
/// With `drop_trivial` the rows are constrained to be orthogonal to the
/// constant vector, which every alignment matrix annihilates. Skipping "the
/// first eigenvector" instead is not the same thing once `m` has other
/// (near) null directions: that vector then moves with `alpha` and the
/// alternation loses its descent guarantee.
pub fn solve_embedding(
    m: &AlignmentMatrix,
    d: usize,
    drop_trivial: bool,
) -> Result<EigenSelection> {
    if !drop_trivial {
        return smallest_eigenvectors(m.matrix(), d, 0);
    }
    let n = m.n_samples();
    if d + 1 > n {
        return Err(Error::InvalidConfig(format!(
            "d = {d} too large for n = {n}"
        )));
    }
    smallest_eigenvectors(&centered_with_shift(m.matrix()), d, 0)
}

/// `P m P + c * 11^T / n` with `P` the centering projector and `c` above the
/// spectrum of `P m P`, which pushes the constant direction to the top.
fn centered_with_shift(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let nf = n as f64;
    let row_means: Vec<f64> = m.row_iter().map(|r| r.sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    // m is symmetric, so column means equal row means
    let mut c = DMatrix::from_fn(n, n, |i, j| m[(i, j)] - row_means[i] - row_means[j] + grand);
    let bound = c
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let shift = (2.0 * bound).max(1.0) / nf;
    c.add_scalar_mut(shift);
    c
}

/// `sum_v alpha_v^r tr(Y M_v Y^T)`.
pub fn objective(alignments: &[AlignmentMatrix], y: &DMatrix<f64>, alpha: &[f64], r: f64) -> f64 {
    alignments
        .iter()
        .zip(alpha)
        .map(|(m, a)| a.powf(r) * m.quadratic_trace(y))
        .sum()
}

/// Builds the alignment matrix of every view (kNN, weights, `M_v`).
pub fn view_alignments(
    dataset: &MultiViewDataset,
    config: &MrpeConfig,
) -> Result<Vec<AlignmentMatrix>> {
    dataset
        .views()
        .par_iter()
        .map(|view| {
            let graph = knn(view, config.k)?;
            let weights = build_weight_matrix(view, &graph, config.reg_eps_for(view))?;
            Ok(build_alignment(&weights))
        })
        .enumerate()
        .map(|(v, res): (usize, Result<AlignmentMatrix>)| {
            res.map_err(|e| e.context(format!("view {v} ('{}')", dataset.view(v).name())))
        })
        .collect()
}

/// Runs the full alternating optimization on `dataset`.
pub fn fit(dataset: &MultiViewDataset, config: &MrpeConfig) -> Result<EmbeddingResult> {
    config.validate(dataset)?;
    let start = Instant::now();
    let alignments = view_alignments(dataset, config)?;
    let mut result = fit_alignments(&alignments, config)?;
    result.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(result)
}

/// The alternating loop over precomputed per-view alignment matrices.
pub fn fit_alignments(
    alignments: &[AlignmentMatrix],
    config: &MrpeConfig,
) -> Result<EmbeddingResult> {
    if alignments.is_empty() {
        return Err(Error::InvalidConfig("no views".into()));
    }
    if config.r.is_nan() || config.r <= 1.0 || config.max_iters == 0 {
        return Err(Error::InvalidConfig("need r > 1 and max_iters >= 1".into()));
    }
    let start = Instant::now();
    let m = alignments.len();
    let mut alpha = vec![1.0 / m as f64; m];
    let mut objective_trace = Vec::new();
    let mut alpha_trace = Vec::new();
    let mut iteration_seconds = Vec::new();
    let mut converged = false;
    let mut last: Option<(EigenSelection, Vec<f64>)> = None;

    for iter in 1..=config.max_iters {
        let tick = Instant::now();
        let combined = combine_alignments(alignments, &alpha, config.r);
        let selection = solve_embedding(&combined, config.d, config.drop_trivial)
            .map_err(|e| e.context(format!("eigen step of iteration {iter}")))?;
        // rounding can push a PSD quadratic form a hair below zero
        let traces: Vec<f64> = alignments
            .iter()
            .map(|a| a.quadratic_trace(&selection.vectors).max(0.0))
            .collect();
        let next_alpha = update_alpha(&traces, config.r)?;
        let obj: f64 = next_alpha
            .iter()
            .zip(&traces)
            .map(|(a, t)| a.powf(config.r) * t)
            .sum();
        log::info!("iteration {iter}: objective {obj:.9e}, alpha {next_alpha:?}");

        let settled = objective_trace
            .last()
            .is_some_and(|&prev: &f64| (obj - prev).abs() <= config.tol * prev.abs());
        let unchanged = next_alpha == alpha;
        objective_trace.push(obj);
        alpha_trace.push(next_alpha.clone());
        iteration_seconds.push(tick.elapsed().as_secs_f64());
        alpha = next_alpha;
        last = Some((selection, traces));
        if settled || unchanged {
            converged = true;
            break;
        }
    }

    let (selection, per_view_traces) = last.expect("max_iters >= 1");
    Ok(EmbeddingResult {
        y: selection.vectors,
        alpha,
        iters_run: objective_trace.len(),
        objective_trace,
        alpha_trace,
        per_view_traces,
        eigenvalues: selection.eigenvalues,
        converged,
        degenerate_subspace: selection.degenerate,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        iteration_seconds,
        config: config.clone(),
    })
}

//! Single-view and feature-concatenation baselines: locally linear
//! embedding and Laplacian eigenmaps.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{MultiViewDataset, ViewMatrix};
use crate::error::{Error, Result};
use crate::mrpe::solve_embedding;
use crate::neighbors::knn;
use crate::reconstruction::{build_alignment, build_weight_matrix, default_reg_eps};
use crate::spectral::smallest_eigenvectors;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    /// LLE on each view separately.
    #[serde(rename = "slle")]
    SingleViewLle,
    /// LLE on the stacked features of all views.
    #[serde(rename = "fclle")]
    ConcatLle,
    /// Laplacian eigenmaps on each view separately.
    #[serde(rename = "sle")]
    SingleViewLe,
    /// Laplacian eigenmaps on the stacked features.
    #[serde(rename = "fcle")]
    ConcatLe,
}

impl BaselineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::SingleViewLle => "slle",
            BaselineKind::ConcatLle => "fclle",
            BaselineKind::SingleViewLe => "sle",
            BaselineKind::ConcatLe => "fcle",
        }
    }

    pub fn is_single_view(self) -> bool {
        matches!(
            self,
            BaselineKind::SingleViewLle | BaselineKind::SingleViewLe
        )
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slle" => Ok(BaselineKind::SingleViewLle),
            "fclle" => Ok(BaselineKind::ConcatLle),
            "sle" => Ok(BaselineKind::SingleViewLe),
            "fcle" => Ok(BaselineKind::ConcatLe),
            other => Err(Error::InvalidConfig(format!(
                "unknown baseline '{other}' (expected slle, fclle, sle or fcle)"
            ))),
        }
    }
}

/// Edge weighting for Laplacian eigenmaps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EdgeWeighting {
    /// `exp(-dist^2 / sigma^2)`; `None` uses the median neighbor distance.
    Heat(Option<f64>),
    Binary,
}

impl Default for EdgeWeighting {
    fn default() -> Self {
        EdgeWeighting::Heat(None)
    }
}

#[derive(Debug, Clone)]
pub struct LleEmbedding {
    /// `d x n`.
    pub y: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// `tr(Y M Y^T)`.
    pub objective: f64,
    pub degenerate_subspace: bool,
}

/// Plain locally linear embedding of a single view.
pub fn lle(
    view: &ViewMatrix,
    d: usize,
    k: usize,
    reg_eps: Option<f64>,
    drop_trivial: bool,
) -> Result<LleEmbedding> {
    let graph = knn(view, k)?;
    let eps = reg_eps.unwrap_or_else(|| default_reg_eps(k, view.dim()));
    let weights = build_weight_matrix(view, &graph, eps)?;
    let m = build_alignment(&weights);
    let sel = solve_embedding(&m, d, drop_trivial)?;
    Ok(LleEmbedding {
        objective: m.quadratic_trace(&sel.vectors),
        y: sel.vectors,
        eigenvalues: sel.eigenvalues,
        degenerate_subspace: sel.degenerate,
    })
}

/// Stacks all views into one `(sum D_v) x n` view, in view order.
pub fn concat_views(dataset: &MultiViewDataset) -> ViewMatrix {
    let total: usize = dataset.views().iter().map(ViewMatrix::dim).sum();
    let mut data = DMatrix::zeros(total, dataset.n_samples());
    let mut offset = 0;
    for view in dataset.views() {
        data.rows_mut(offset, view.dim()).copy_from(view.data());
        offset += view.dim();
    }
    let name = dataset
        .views()
        .iter()
        .map(ViewMatrix::name)
        .collect::<Vec<_>>()
        .join("+");
    ViewMatrix::new(name, data).expect("concatenation of valid views is valid")
}

#[derive(Debug, Clone)]
pub struct LaplacianEmbedding {
    /// `d x n`, generalized eigenvectors normalized so that `y D y^T = I`.
    pub y: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// The neighbor graph has more than one connected component (or a
    /// vertex whose heat weights all underflowed).
    pub disconnected: bool,
    pub degenerate_subspace: bool,
    /// Heat-kernel width actually used (`None` for binary weights).
    pub heat_sigma: Option<f64>,
}

/// Symmetrized kNN adjacency: an edge exists if either endpoint lists the
/// other among its neighbors.
pub fn knn_adjacency(
    view: &ViewMatrix,
    k: usize,
    weighting: EdgeWeighting,
) -> Result<(DMatrix<f64>, Option<f64>)> {
    let graph = knn(view, k)?;
    let n = view.n_samples();
    let sigma = match weighting {
        EdgeWeighting::Binary => None,
        EdgeWeighting::Heat(Some(s)) => {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "heat sigma must be > 0, got {s}"
                )));
            }
            Some(s)
        }
        EdgeWeighting::Heat(None) => {
            let mut all = graph.all_distances().to_vec();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = all[all.len() / 2];
            Some(if median > 0.0 { median } else { 1.0 })
        }
    };
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for (&j, &dist) in graph.neighbors(i).iter().zip(graph.distances(i)) {
            let weight = match sigma {
                None => 1.0,
                Some(s) => (-(dist * dist) / (s * s)).exp(),
            };
            w[(i, j)] = weight;
            w[(j, i)] = weight;
        }
    }
    Ok((w, sigma))
}

fn component_count(adjacency: &DMatrix<f64>) -> usize {
    let n = adjacency.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if adjacency[(i, j)] > 0.0 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

/// Laplacian eigenmaps on a precomputed symmetric adjacency: the `d`
/// smallest nontrivial solutions of `L y = lambda D y`.
pub fn laplacian_eigenmaps_from_adjacency(
    adjacency: &DMatrix<f64>,
    d: usize,
) -> Result<LaplacianEmbedding> {
    let n = adjacency.nrows();
    if d == 0 || d + 1 > n {
        return Err(Error::InvalidConfig(format!("d = {d} invalid for n = {n}")));
    }
    let degrees: Vec<f64> = adjacency.row_iter().map(|r| r.sum()).collect();
    let isolated = degrees.iter().any(|&g| g <= 0.0);
    let inv_sqrt: Vec<f64> = degrees
        .iter()
        .map(|&g| if g > 0.0 { 1.0 / g.sqrt() } else { 0.0 })
        .collect();

    // D^{-1/2} L D^{-1/2}; an isolated vertex contributes a zero row
    let normalized = DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j && degrees[i] > 0.0 { 1.0 } else { 0.0 };
        diag - inv_sqrt[i] * adjacency[(i, j)] * inv_sqrt[j]
    });
    let sel = smallest_eigenvectors(&normalized, d, 1)?;
    let mut y = sel.vectors;
    for mut row in y.row_iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v *= inv_sqrt[j];
        }
    }
    Ok(LaplacianEmbedding {
        y,
        eigenvalues: sel.eigenvalues,
        disconnected: isolated || component_count(adjacency) > 1,
        degenerate_subspace: sel.degenerate,
        heat_sigma: None,
    })
}

pub fn laplacian_eigenmaps(
    view: &ViewMatrix,
    d: usize,
    k: usize,
    weighting: EdgeWeighting,
) -> Result<LaplacianEmbedding> {
    let (adjacency, sigma) = knn_adjacency(view, k, weighting)?;
    let mut emb = laplacian_eigenmaps_from_adjacency(&adjacency, d)?;
    emb.heat_sigma = sigma;
    if emb.disconnected {
        log::warn!("neighbor graph of view '{}' is disconnected", view.name());
    }
    Ok(emb)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub d: usize,
    pub k: usize,
    pub reg_eps: Option<f64>,
    pub drop_trivial: bool,
    pub weighting: EdgeWeighting,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            d: 10,
            k: 10,
            reg_eps: None,
            drop_trivial: true,
            weighting: EdgeWeighting::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineEmbedding {
    /// Source view for single-view kinds, `None` for concatenation.
    pub view: Option<usize>,
    /// `d x n`.
    pub y: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub degenerate_subspace: bool,
    pub disconnected: bool,
}

fn embed_one(
    kind: BaselineKind,
    view: &ViewMatrix,
    params: &BaselineParams,
    index: Option<usize>,
) -> Result<BaselineEmbedding> {
    if params.d == 0 || params.d >= view.dim() {
        return Err(Error::InvalidConfig(format!(
            "d must satisfy 1 <= d < view dimension ({}), got {}",
            view.dim(),
            params.d
        )));
    }
    match kind {
        BaselineKind::SingleViewLle | BaselineKind::ConcatLle => {
            let e = lle(
                view,
                params.d,
                params.k,
                params.reg_eps,
                params.drop_trivial,
            )?;
            Ok(BaselineEmbedding {
                view: index,
                y: e.y,
                eigenvalues: e.eigenvalues,
                degenerate_subspace: e.degenerate_subspace,
                disconnected: false,
            })
        }
        BaselineKind::SingleViewLe | BaselineKind::ConcatLe => {
            let e = laplacian_eigenmaps(view, params.d, params.k, params.weighting)?;
            Ok(BaselineEmbedding {
                view: index,
                y: e.y,
                eigenvalues: e.eigenvalues,
                degenerate_subspace: e.degenerate_subspace,
                disconnected: e.disconnected,
            })
        }
    }
}

/// One embedding per view for single-view kinds, one for concatenation.
pub fn run_baseline(
    kind: BaselineKind,
    dataset: &MultiViewDataset,
    params: &BaselineParams,
) -> Result<Vec<BaselineEmbedding>> {
    if kind.is_single_view() {
        dataset
            .views()
            .iter()
            .enumerate()
            .map(|(v, view)| {
                embed_one(kind, view, params, Some(v))
                    .map_err(|e| e.context(format!("{kind} on view {v} ('{}')", view.name())))
            })
            .collect()
    } else {
        let view = concat_views(dataset);
        Ok(vec![
            embed_one(kind, &view, params, None).map_err(|e| e.context(kind.to_string()))?
        ])
    }
}

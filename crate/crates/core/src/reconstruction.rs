//! Locally linear reconstruction weights and the per-view alignment matrix.
//!
//! Each sample is written as an affine combination of its neighbors; the
//! weights are then frozen and reused to score embeddings through
//! `M = (I - W)^T (I - W)`, with sample `i`'s weights stored in row `i` of
//! `W`.

use nalgebra::{DMatrix, DVector, DVectorView};
use rayon::prelude::*;

use crate::data::ViewMatrix;
use crate::error::{Error, Result};
use crate::neighbors::NeighborGraph;

/// Ridge applied to the local Gram matrix when none is given: strong when
/// the neighborhood is over-complete (`k > dim`), negligible otherwise.
pub fn default_reg_eps(k: usize, dim: usize) -> f64 {
    if k > dim {
        1e-3
    } else {
        1e-12
    }
}

/// Minimizes `|x - N w|^2 + reg_eps * tr(G) * |w|^2` subject to `sum(w) = 1`,
/// where the columns of `neighbors` are the `k` neighbor vectors and `G` is
/// the local Gram matrix of the neighbor offsets.
pub fn solve_local_weights(
    x: DVectorView<'_, f64>,
    neighbors: &DMatrix<f64>,
    reg_eps: f64,
) -> Result<DVector<f64>> {
    let k = neighbors.ncols();
    assert_eq!(x.len(), neighbors.nrows(), "dimension mismatch");
    assert!(k >= 1, "need at least one neighbor");

    let mut offsets = neighbors.clone();
    for mut col in offsets.column_iter_mut() {
        col -= &x;
    }
    let mut gram = offsets.tr_mul(&offsets);
    let trace = gram.trace();
    if trace == 0.0 {
        // every neighbor coincides with x: any affine combination is exact
        return Ok(DVector::from_element(k, 1.0 / k as f64));
    }
    let ridge = reg_eps * trace;
    for i in 0..k {
        gram[(i, i)] += ridge;
    }

    let ones = DVector::from_element(k, 1.0);
    let raw = match gram.clone().cholesky() {
        Some(chol) => Some(chol.solve(&ones)),
        None => gram.lu().solve(&ones),
    };
    let raw = raw.ok_or(Error::DegenerateNeighborhood { sample: None })?;
    let total = raw.sum();
    if !total.is_finite() || total.abs() < f64::MIN_POSITIVE || raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateNeighborhood { sample: None });
    }
    Ok(raw / total)
}

/// Sparse row-stochastic reconstruction matrix: row `i` holds the weights of
/// sample `i` on its `k` neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionWeights {
    k: usize,
    columns: Vec<usize>,
    values: Vec<f64>,
}

impl ReconstructionWeights {
    /// Builds from per-row `(column, weight)` lists, each of length `k`.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let k = rows.first().map_or(0, Vec::len);
        let mut columns = Vec::with_capacity(rows.len() * k);
        let mut values = Vec::with_capacity(rows.len() * k);
        for row in rows {
            assert_eq!(row.len(), k, "ragged weight rows");
            for (c, w) in row {
                columns.push(c);
                values.push(w);
            }
        }
        Self { k, columns, values }
    }

    pub fn n_samples(&self) -> usize {
        self.columns.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = i * self.k..(i + 1) * self.k;
        self.columns[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n_samples();
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for (j, v) in self.row(i) {
                w[(i, j)] += v;
            }
        }
        w
    }
}

/// Solves every local problem of `view` over the neighborhoods in `graph`.
pub fn build_weight_matrix(
    view: &ViewMatrix,
    graph: &NeighborGraph,
    reg_eps: f64,
) -> Result<ReconstructionWeights> {
    let n = view.n_samples();
    assert_eq!(graph.n_samples(), n, "graph was built for another view");
    let data = view.data();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let idx = graph.neighbors(i);
            let neighbors = data.select_columns(idx);
            let w = solve_local_weights(data.column(i), &neighbors, reg_eps)
                .map_err(|_| Error::DegenerateNeighborhood { sample: Some(i) })?;
            Ok(idx.iter().copied().zip(w.iter().copied()).collect())
        })
        .collect::<Result<_>>()?;
    Ok(ReconstructionWeights::from_rows(rows))
}

/// Dense symmetric PSD matrix scoring an embedding against one view's local
/// reconstruction structure.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMatrix {
    matrix: DMatrix<f64>,
}

impl AlignmentMatrix {
    /// Wraps a square matrix, symmetrizing it as `(A + A^T) / 2`.
    pub fn from_matrix(a: DMatrix<f64>) -> Self {
        assert!(a.is_square(), "alignment matrix must be square");
        let matrix = (&a + a.transpose()) * 0.5;
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn n_samples(&self) -> usize {
        self.matrix.nrows()
    }

    /// `tr(Y M Y^T)` for a `d x n` embedding.
    pub fn quadratic_trace(&self, y: &DMatrix<f64>) -> f64 {
        (y * &self.matrix).component_mul(y).sum()
    }
}

/// `M = (I - W)^T (I - W) = I - W - W^T + W^T W`, accumulated from the
/// sparse rows of `W`.
pub fn build_alignment(weights: &ReconstructionWeights) -> AlignmentMatrix {
    let n = weights.n_samples();
    let mut m = DMatrix::identity(n, n);
    for i in 0..n {
        for (j, w) in weights.row(i) {
            m[(i, j)] -= w;
            m[(j, i)] -= w;
        }
        for (a, wa) in weights.row(i) {
            for (b, wb) in weights.row(i) {
                m[(a, b)] += wa * wb;
            }
        }
    }
    AlignmentMatrix::from_matrix(m)
}

#[cfg(test)]
mod tests {
    use nalgebra::dvector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::neighbors::knn;

    fn cols(points: &[&[f64]]) -> DMatrix<f64> {
        let dim = points[0].len();
        DMatrix::from_fn(dim, points.len(), |r, c| points[c][r])
    }

    #[test]
    fn symmetric_pair() {
        let x = dvector![0.0];
        let w = solve_local_weights(x.as_view(), &cols(&[&[-1.0], &[1.0]]), 1e-3).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-15);
        assert!((w[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_coincident_neighbor() {
        let x = dvector![2.0, 3.0];
        let w = solve_local_weights(x.as_view(), &cols(&[&[2.0, 3.0]]), 1e-3).unwrap();
        assert_eq!(w.as_slice(), &[1.0]);
        // single distinct neighbor: constraint still forces 1
        let w = solve_local_weights(x.as_view(), &cols(&[&[5.0, 3.0]]), 1e-3).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn all_neighbors_coincide_gives_uniform() {
        let x = dvector![1.0, 1.0];
        let w = solve_local_weights(x.as_view(), &cols(&[&[1.0, 1.0][..]; 4]), 1e-3).unwrap();
        assert!(w.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn triangle_affine_coordinates() {
        // x = 0.8 * (0,0) + 0.2 * (1,0) + 0 * (0,1), the unique exact fit
        let x = dvector![0.2, 0.0];
        let n = cols(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let w = solve_local_weights(x.as_view(), &n, 1e-12).unwrap();
        let want = [0.8, 0.2, 0.0];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-6, "{w}");
        }

        // coarse grid over the affine plane sum(w) = 1 agrees
        let objective = |w: &[f64]| (&x - &n * DVector::from_row_slice(w)).norm_squared();
        let mut best = (f64::INFINITY, [0.0; 3]);
        for a in -20..=20 {
            for b in -20..=20 {
                let (w1, w2) = (a as f64 * 0.05, b as f64 * 0.05);
                let cand = [1.0 - w1 - w2, w1, w2];
                let f = objective(&cand);
                if f < best.0 {
                    best = (f, cand);
                }
            }
        }
        for (a, b) in w.iter().zip(best.1) {
            assert!((a - b).abs() < 1e-9 + 0.05);
        }
        assert!(objective(w.as_slice()) <= best.0 + 1e-12);
    }

    #[test]
    fn translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let dim = rng.random_range(2..8);
            let k = rng.random_range(2..10);
            let x = DVector::from_fn(dim, |_, _| rng.random::<f64>());
            let n = DMatrix::from_fn(dim, k, |_, _| rng.random::<f64>());
            let c = DVector::from_fn(dim, |_, _| rng.random_range(-50.0..50.0));
            let mut shifted = n.clone();
            for mut col in shifted.column_iter_mut() {
                col += &c;
            }
            let eps = default_reg_eps(k, dim);
            let w0 = solve_local_weights(x.as_view(), &n, eps).unwrap();
            let w1 = solve_local_weights((&x + &c).as_view(), &shifted, eps).unwrap();
            assert!((w0 - w1).amax() < 1e-8);
        }
    }

    #[test]
    fn collinear_middle_point() {
        let view = ViewMatrix::new("l", DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 2.0])).unwrap();
        let g = knn(&view, 2).unwrap();
        let w = build_weight_matrix(&view, &g, 1e-3).unwrap();
        let mut row: Vec<(usize, f64)> = w.row(1).collect();
        row.sort_by_key(|e| e.0);
        assert_eq!(row.iter().map(|e| e.0).collect::<Vec<_>>(), vec![0, 2]);
        assert!((row[0].1 - 0.5).abs() < 1e-12 && (row[1].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn weight_rows_sum_to_one_and_match_row_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let view =
            ViewMatrix::new("r", DMatrix::from_fn(6, 30, |_, _| rng.random::<f64>())).unwrap();
        let g = knn(&view, 8).unwrap();
        let eps = default_reg_eps(8, 6);
        let w = build_weight_matrix(&view, &g, eps).unwrap();
        for i in 0..30 {
            let row: Vec<(usize, f64)> = w.row(i).collect();
            assert!(row.len() <= 8 && row.iter().all(|e| e.0 != i));
            assert!((row.iter().map(|e| e.1).sum::<f64>() - 1.0).abs() < 1e-10);
            let n = view.data().select_columns(g.neighbors(i));
            let direct = solve_local_weights(view.data().column(i), &n, eps).unwrap();
            for (e, d) in row.iter().zip(direct.iter()) {
                assert_eq!(e.1, *d);
            }
        }
    }

    #[test]
    fn zero_weights_give_identity() {
        let w =
            ReconstructionWeights::from_rows(vec![vec![(1, 0.0)], vec![(0, 0.0)], vec![(0, 0.0)]]);
        assert_eq!(build_alignment(&w).matrix(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn alignment_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let view =
            ViewMatrix::new("r", DMatrix::from_fn(3, 25, |_, _| rng.random::<f64>())).unwrap();
        let g = knn(&view, 5).unwrap();
        let w = build_weight_matrix(&view, &g, default_reg_eps(5, 3)).unwrap();
        let m = build_alignment(&w);
        let a = DMatrix::identity(25, 25) - w.to_dense();
        let dense = a.transpose() * a;
        assert!((m.matrix() - &dense).amax() < 1e-12);
        assert!((m.matrix() - m.matrix().transpose()).amax() == 0.0);
        let ones = DVector::from_element(25, 1.0);
        assert!((m.matrix() * ones).norm() <= 1e-8 * m.matrix().norm());
    }
}

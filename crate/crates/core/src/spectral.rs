//! Smallest-eigenpair selection for dense symmetric matrices.
//!
//! The returned basis is canonical: within numerically repeated eigenvalues
//! the eigenvectors are rebuilt by pivoted Gram-Schmidt on the projected
//! unit vectors, and every vector is signed so that its largest-magnitude
//! entry (first one on ties) is positive. Two matrices that agree to
//! rounding therefore produce the same rows, not just the same subspace.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Absolute eigengap below which the selected subspace is considered
/// not uniquely determined.
pub const DEGENERATE_GAP: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct EigenSelection {
    /// `d x n`, one eigenvector per row.
    pub vectors: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// Gap between the last selected and the next eigenvalue is below
    /// [`DEGENERATE_GAP`].
    pub degenerate: bool,
}

/// Full decomposition with eigenvalues ascending; eigenvectors as columns.
pub fn sorted_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let eig =
        SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0).ok_or(Error::EigenFailure { n })?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure { n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = eig.eigenvectors.select_columns(&order);
    Ok((values, vectors))
}

/// Eigenvectors for sorted positions `skip .. skip + d` of a symmetric `m`.
pub fn smallest_eigenvectors(m: &DMatrix<f64>, d: usize, skip: usize) -> Result<EigenSelection> {
    let n = m.nrows();
    assert!(m.is_square());
    if d == 0 || skip + d > n {
        return Err(Error::InvalidConfig(format!(
            "cannot select {d} eigenvectors after skipping {skip} from a {n}x{n} matrix"
        )));
    }
    let (values, mut vectors) = sorted_eigen(m)?;
    let end = skip + d;

    let scale = values.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let tol = DEGENERATE_GAP * scale;
    let mut start = 0;
    while start < n {
        let mut stop = start + 1;
        while stop < n && values[stop] - values[stop - 1] <= tol {
            stop += 1;
        }
        let overlaps = start < end && stop > skip;
        if stop - start > 1 && overlaps {
            canonicalize_cluster(&mut vectors, start, stop);
        }
        start = stop;
    }

    let degenerate = end < n && values[end] - values[end - 1] < DEGENERATE_GAP;
    let mut rows = DMatrix::zeros(d, n);
    for (r, c) in (skip..end).enumerate() {
        let mut v: DVector<f64> = vectors.column(c).into_owned();
        fix_sign(&mut v);
        rows.row_mut(r).copy_from(&v.transpose());
    }
    Ok(EigenSelection {
        vectors: rows,
        eigenvalues: values[skip..end].to_vec(),
        degenerate,
    })
}

/// Replaces columns `start..stop` by a canonical orthonormal basis of their
/// span.
fn canonicalize_cluster(vectors: &mut DMatrix<f64>, start: usize, stop: usize) {
    let basis = vectors.columns(start, stop - start).into_owned();
    // column j = coordinates of the projection of e_j onto the span
    let mut coords = basis.transpose();
    let c = basis.ncols();
    for slot in 0..c {
        let (pivot, norm) = coords.column_iter().map(|col| col.norm()).enumerate().fold(
            (0, -1.0),
            |best, (j, v)| if v > best.1 { (j, v) } else { best },
        );
        let q = coords.column(pivot) / norm;
        let mut canonical = &basis * &q;
        canonical /= canonical.norm();
        vectors.column_mut(start + slot).copy_from(&canonical);
        let proj = q.transpose() * &coords;
        coords -= &q * proj;
    }
}

fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

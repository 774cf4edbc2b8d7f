//! Exact Euclidean k-nearest-neighbor graphs.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::data::ViewMatrix;
use crate::error::{Error, Result};

/// Per-sample neighbor lists, nearest first. Ties in distance go to the
/// lower sample index.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    k: usize,
    indices: Vec<usize>,
    distances: Vec<f64>,
}

impl NeighborGraph {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_samples(&self) -> usize {
        self.indices.len() / self.k
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[i * self.k..(i + 1) * self.k]
    }

    pub fn all_distances(&self) -> &[f64] {
        &self.distances
    }
}

fn sq_dist(view: &ViewMatrix, i: usize, j: usize) -> f64 {
    let data = view.data();
    data.column(i)
        .iter()
        .zip(data.column(j).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.partial_cmp(&b.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

/// Brute-force exact kNN over the columns of `view`.
pub fn knn(view: &ViewMatrix, k: usize) -> Result<NeighborGraph> {
    let n = view.n_samples();
    if k == 0 || k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    let rows: Vec<Vec<(f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (sq_dist(view, i, j), j))
                .collect();
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, by_distance_then_index);
                cand.truncate(k);
            }
            cand.sort_by(by_distance_then_index);
            cand
        })
        .collect();

    let mut indices = Vec::with_capacity(n * k);
    let mut distances = Vec::with_capacity(n * k);
    for row in rows {
        for (d2, j) in row {
            indices.push(j);
            distances.push(d2.sqrt());
        }
    }
    Ok(NeighborGraph {
        k,
        indices,
        distances,
    })
}

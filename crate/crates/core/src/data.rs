//! Multi-view dataset representation and the synthetic generator.
//!
//! Every view stores its samples as columns: a view with `D_v` features over
//! `n` samples is a `D_v x n` matrix, regardless of how it was laid out on
//! disk.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One feature representation of the samples, `dim x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewMatrix {
    name: String,
    data: DMatrix<f64>,
}

impl ViewMatrix {
    pub fn new(name: impl Into<String>, data: DMatrix<f64>) -> Result<Self> {
        let name = name.into();
        if data.nrows() == 0 {
            return Err(Error::InvalidSpec(format!("view '{name}' has no features")));
        }
        if let Some((idx, _)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            // column-major storage
            let (row, col) = (idx % data.nrows(), idx / data.nrows());
            return Err(Error::NonFiniteValue {
                view: name,
                row,
                col,
            });
        }
        Ok(Self { name, data })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Feature dimensionality `D_v`.
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    /// Number of samples (columns).
    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Per-feature z-scoring. Constant features are centered only.
    pub fn standardized(&self) -> ViewMatrix {
        let n = self.n_samples() as f64;
        let mut data = self.data.clone();
        for mut row in data.row_iter_mut() {
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            for v in row.iter_mut() {
                *v -= mean;
                if sd > 0.0 {
                    *v /= sd;
                }
            }
        }
        ViewMatrix {
            name: self.name.clone(),
            data,
        }
    }
}

/// `n` samples described by `m >= 1` views, optionally labelled.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    views: Vec<ViewMatrix>,
    n: usize,
    labels: Option<Vec<i64>>,
    sample_ids: Option<Vec<String>>,
}

impl MultiViewDataset {
    pub fn new(views: Vec<ViewMatrix>, labels: Option<Vec<i64>>) -> Result<Self> {
        let first = views
            .first()
            .ok_or_else(|| Error::InvalidSpec("dataset needs at least one view".into()))?;
        let n = first.n_samples();
        for view in &views[1..] {
            if view.n_samples() != n {
                return Err(Error::MismatchedSampleCount {
                    view: view.name().to_string(),
                    expected: n,
                    found: view.n_samples(),
                });
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::MismatchedSampleCount {
                    view: "labels".into(),
                    expected: n,
                    found: labels.len(),
                });
            }
        }
        Ok(Self {
            views,
            n,
            labels,
            sample_ids: None,
        })
    }

    pub fn with_sample_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n {
            return Err(Error::MismatchedSampleCount {
                view: "sample_ids".into(),
                expected: self.n,
                found: ids.len(),
            });
        }
        self.sample_ids = Some(ids);
        Ok(self)
    }

    pub fn views(&self) -> &[ViewMatrix] {
        &self.views
    }

    pub fn view(&self, v: usize) -> &ViewMatrix {
        &self.views[v]
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn sample_ids(&self) -> Option<&[String]> {
        self.sample_ids.as_deref()
    }

    pub fn standardized(&self) -> MultiViewDataset {
        MultiViewDataset {
            views: self.views.iter().map(ViewMatrix::standardized).collect(),
            n: self.n,
            labels: self.labels.clone(),
            sample_ids: self.sample_ids.clone(),
        }
    }

    /// Reorders samples so that new sample `i` is old sample `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<MultiViewDataset> {
        if perm.len() != self.n {
            return Err(Error::InvalidSpec(
                "permutation length differs from n".into(),
            ));
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidSpec("not a permutation".into()));
            }
        }
        let views = self
            .views
            .iter()
            .map(|v| ViewMatrix {
                name: v.name.clone(),
                data: v.data.select_columns(perm),
            })
            .collect();
        Ok(MultiViewDataset {
            views,
            n: self.n,
            labels: self
                .labels
                .as_ref()
                .map(|l| perm.iter().map(|&p| l[p]).collect()),
            sample_ids: self
                .sample_ids
                .as_ref()
                .map(|s| perm.iter().map(|&p| s[p].clone()).collect()),
        })
    }
}

/// One synthetic view: its feature dimension and which latent coordinates
/// it can see. An empty `signal_axes` means both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub dim: usize,
    #[serde(default)]
    pub signal_axes: Vec<usize>,
}

impl ViewSpec {
    pub fn full(dim: usize) -> Self {
        Self {
            dim,
            signal_axes: Vec::new(),
        }
    }

    pub fn axis(dim: usize, axis: usize) -> Self {
        Self {
            dim,
            signal_axes: vec![axis],
        }
    }
}

/// Parameters of [`generate_synthetic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub n_classes: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub views: Vec<ViewSpec>,
}

pub const LATENT_DIM: usize = 2;

impl SynthSpec {
    /// The default two-view problem: 300 samples, 3 classes, each view sees
    /// one latent axis so neither view separates all classes on its own.
    pub fn two_view_default(seed: u64) -> Self {
        Self {
            n: 300,
            n_classes: 3,
            noise_sigma: 0.5,
            seed,
            views: vec![ViewSpec::axis(25, 0), ViewSpec::axis(25, 1)],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.n < self.n_classes {
            return Err(Error::InvalidSpec(format!(
                "need n >= n_classes >= 1 (n = {}, n_classes = {})",
                self.n, self.n_classes
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidSpec(
                "noise_sigma must be finite and >= 0".into(),
            ));
        }
        if self.views.is_empty() {
            return Err(Error::InvalidSpec("at least one view is required".into()));
        }
        for (v, spec) in self.views.iter().enumerate() {
            if spec.dim == 0 {
                return Err(Error::InvalidSpec(format!("view {v} has dim 0")));
            }
            if let Some(&a) = spec.signal_axes.iter().find(|&&a| a >= LATENT_DIM) {
                return Err(Error::InvalidSpec(format!(
                    "view {v} signal axis {a} out of range (latent dim is {LATENT_DIM})"
                )));
            }
        }
        Ok(())
    }
}

/// Class centers on the unit circle, evenly spaced by angle.
pub fn class_centers(n_classes: usize) -> Vec<Vector2<f64>> {
    (0..n_classes)
        .map(|c| {
            let theta = 2.0 * PI * c as f64 / n_classes as f64 + PI / 12.0;
            Vector2::new(theta.cos(), theta.sin())
        })
        .collect()
}

/// Generates `m` noisy random linear lifts of one class-clustered 2-D latent.
///
/// Sample `i` has label `i % n_classes` and latent position equal to its
/// class center. View `v` maps the latent through a `dim x 2` Gaussian
/// matrix (columns of hidden axes zeroed) and adds isotropic Gaussian noise
/// of standard deviation `noise_sigma`. Output is a pure function of `spec`.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<MultiViewDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = class_centers(spec.n_classes);
    let labels: Vec<i64> = (0..spec.n).map(|i| (i % spec.n_classes) as i64).collect();

    let lifts: Vec<DMatrix<f64>> = spec
        .views
        .iter()
        .map(|vs| {
            let mut lift =
                DMatrix::from_fn(vs.dim, LATENT_DIM, |_, _| StandardNormal.sample(&mut rng));
            if !vs.signal_axes.is_empty() {
                for axis in 0..LATENT_DIM {
                    if !vs.signal_axes.contains(&axis) {
                        lift.column_mut(axis).fill(0.0);
                    }
                }
            }
            lift
        })
        .collect();

    let mut views = Vec::with_capacity(spec.views.len());
    for (v, lift) in lifts.iter().enumerate() {
        let mut data = DMatrix::zeros(lift.nrows(), spec.n);
        for i in 0..spec.n {
            let z = centers[labels[i] as usize];
            let x = lift * z;
            for f in 0..lift.nrows() {
                let noise = if spec.noise_sigma > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    spec.noise_sigma * z
                } else {
                    0.0
                };
                data[(f, i)] = x[f] + noise;
            }
        }
        views.push(ViewMatrix::new(format!("view{v}"), data)?);
    }
    MultiViewDataset::new(views, Some(labels))
}

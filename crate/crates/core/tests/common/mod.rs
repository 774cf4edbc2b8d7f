#![allow(dead_code)]

use mvembed::data::{MultiViewDataset, ViewMatrix};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn random_view(rng: &mut ChaCha8Rng, name: &str, dim: usize, n: usize) -> ViewMatrix {
    ViewMatrix::new(name, gaussian(rng, dim, n)).unwrap()
}

/// Points near a noisy curve, so neighborhoods carry real structure.
pub fn curve_view(
    rng: &mut ChaCha8Rng,
    name: &str,
    dim: usize,
    n: usize,
    noise: f64,
) -> ViewMatrix {
    let lift = gaussian(rng, dim, 3);
    let data = DMatrix::from_fn(dim, n, |i, j| {
        let t = 3.0 * j as f64 / n as f64;
        let latent = [t.cos(), t.sin(), t];
        let z: f64 = StandardNormal.sample(rng);
        (0..3).map(|a| lift[(i, a)] * latent[a]).sum::<f64>() + noise * z
    });
    ViewMatrix::new(name, data).unwrap()
}

pub fn dataset(views: Vec<ViewMatrix>) -> MultiViewDataset {
    MultiViewDataset::new(views, None).unwrap()
}

pub fn random_rotation(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    gaussian(rng, d, d).qr().q()
}

/// Cyclic Jacobi eigensolver for small symmetric matrices; eigenvalues
/// ascending with eigenvectors as columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    (values, v.select_columns(&order))
}

/// Sine of the largest principal angle between the row spaces of two
/// matrices with orthonormal rows.
pub fn max_principal_sine(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    // residual of b's rows after projecting onto a's row space
    let residual = b - (b * a.transpose()) * a;
    residual.singular_values().max().min(1.0)
}

pub fn orthonormality_error(y: &DMatrix<f64>) -> f64 {
    let d = y.nrows();
    (y * y.transpose() - DMatrix::<f64>::identity(d, d)).amax()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_usize(rng: &mut ChaCha8Rng, lo: usize, hi_inclusive: usize) -> usize {
    rng.random_range(lo..=hi_inclusive)
}

//! PCA by power iteration with deflation on the (population) covariance.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::linalg::{dot, norm2, Matrix};

/// Mean vector plus a k×d matrix whose rows are orthonormal components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: Matrix,
}

impl PcaModel {
    /// Projection (x - mean) · components^T.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        self.components.matvec(&centered)
    }

    pub fn output_dim(&self) -> usize {
        self.components.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.components.cols()
    }
}

fn covariance(x: &Matrix, mean: &[f64]) -> Matrix {
    let (n, d) = (x.rows(), x.cols());
    let mut cov = Matrix::zeros(d, d);
    for r in 0..n {
        let row = x.row(r);
        for i in 0..d {
            let ci = row[i] - mean[i];
            for j in i..d {
                let v = cov.get(i, j) + ci * (row[j] - mean[j]);
                cov.set(i, j, v);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov.get(i, j) / n as f64;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }
    cov
}

/// Remove projections onto `basis` rows, in place.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        for (vi, bi) in v.iter_mut().zip(b) {
            *vi -= c * bi;
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = norm2(v);
    if n > 0.0 {
        for vi in v.iter_mut() {
            *vi /= n;
        }
    }
    n
}

/// Deterministic start vector: the covariance column with the largest norm,
/// orthogonalized against the components already found. Falls back to basis
/// vectors when the matrix has (numerically) no mass left.
fn start_vector(cov: &Matrix, found: &[Vec<f64>]) -> Vec<f64> {
    let d = cov.cols();
    let mut best = (0usize, -1.0);
    for j in 0..d {
        let col: Vec<f64> = (0..d).map(|i| cov.get(i, j)).collect();
        let n = norm2(&col);
        if n > best.1 {
            best = (j, n);
        }
    }
    let mut v: Vec<f64> = (0..d).map(|i| cov.get(i, best.0)).collect();
    orthogonalize(&mut v, found);
    if normalize(&mut v) > 1e-12 {
        return v;
    }
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        orthogonalize(&mut e, found);
        if normalize(&mut e) > 1e-6 {
            return e;
        }
    }
    let mut e = vec![0.0; d];
    e[0] = 1.0;
    e
}

/// Top-k principal components via power iteration with deflation.
pub fn fit_pca(x: &Matrix, k: usize) -> Result<PcaModel, TrainError> {
    let (n, d) = (x.rows(), x.cols());
    if n == 0 || d == 0 {
        return Err(TrainError::EmptyInput);
    }
    if k == 0 || k > n.min(d) {
        return Err(TrainError::InvalidParam(format!(
            "k={k} out of range for a {n}x{d} matrix"
        )));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64)
        .collect();
    let mut cov = covariance(x, &mean);

    let mut components: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut v = start_vector(&cov, &components);
        for _ in 0..1000 {
            let mut next = cov.matvec(&v);
            orthogonalize(&mut next, &components);
            if normalize(&mut next) < 1e-300 {
                // Deflated matrix is numerically zero along this direction;
                // keep the current orthonormal vector.
                break;
            }
            let align = dot(&next, &v);
            v = next;
            if 1.0 - align.abs() < 1e-15 {
                break;
            }
        }
        orthogonalize(&mut v, &components);
        normalize(&mut v);
        // Deflate: cov -= eigenvalue * v v^T.
        let eigenvalue = dot(&cov.matvec(&v), &v);
        for i in 0..d {
            for j in 0..d {
                let upd = cov.get(i, j) - eigenvalue * v[i] * v[j];
                cov.set(i, j, upd);
            }
        }
        components.push(v);
    }

    Ok(PcaModel {
        mean,
        components: Matrix::from_rows(&components),
    })
}

//! Eigen-reduction of a dataset to the (λ, z) summary the estimators consume.

use faer::{Mat, Side};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Dataset;

/// Eigenvalues below this fraction of the largest are treated as exact zeros.
pub const ZERO_EIGEN_RTOL: f64 = 1e-12;

/// Spectrum `λ = eig(XXᵀ)/p` (non-increasing) and rotated response `z = Uᵀy`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignSpectrum {
    lambda: Vec<f64>,
    z: Vec<f64>,
    p: usize,
    y_sq_norm: f64,
}

impl DesignSpectrum {
    /// Validates and wraps a precomputed spectrum. `y_sq_norm` is taken as `Σ z²`.
    pub fn from_parts(lambda: Vec<f64>, z: Vec<f64>, p: usize) -> Result<Self> {
        if lambda.len() != z.len() {
            return Err(Error::DimensionMismatch {
                what: "rotated response length",
                expected: lambda.len(),
                found: z.len(),
            });
        }
        if lambda.is_empty() {
            return Err(Error::InvalidInput("spectrum must be non-empty".into()));
        }
        if lambda.iter().chain(&z).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectrum"));
        }
        if lambda.iter().any(|&l| l < 0.0) {
            return Err(Error::InvalidInput("eigenvalues must be non-negative".into()));
        }
        if lambda.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput("eigenvalues must be sorted non-increasing".into()));
        }
        if p < lambda.len() {
            return Err(Error::DimensionError { n: lambda.len(), p });
        }
        let y_sq_norm = z.iter().map(|v| v * v).sum();
        Ok(Self { lambda, z, p, y_sq_norm })
    }

    /// Construction for internal callers that already guarantee the invariants
    /// but may have fewer effective columns than rows.
    pub(crate) fn from_trusted(lambda: Vec<f64>, z: Vec<f64>, p: usize) -> Self {
        let y_sq_norm = z.iter().map(|v| v * v).sum();
        Self { lambda, z, p, y_sq_norm }
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn y_sq_norm(&self) -> f64 {
        self.y_sq_norm
    }

    /// `‖y‖²/n`, the moment estimate of `θ² + σ²`.
    pub fn mean_sq_response(&self) -> f64 {
        self.y_sq_norm / self.n() as f64
    }

    /// Same spectrum with the response multiplied by `c`.
    pub fn scale_response(&self, c: f64) -> Self {
        Self::from_trusted(self.lambda.clone(), self.z.iter().map(|v| v * c).collect(), self.p)
    }
}

/// Eigen-reduction of the n×n Gram matrix. Requires `n <= p`.
pub fn spectral_decompose(data: &Dataset) -> Result<DesignSpectrum> {
    Ok(spectral_decompose_with_vectors(data)?.0)
}

/// As [`spectral_decompose`], also returning the eigenvector matrix `U`
/// (columns ordered like `λ`).
pub fn spectral_decompose_with_vectors(data: &Dataset) -> Result<(DesignSpectrum, Mat<f64>)> {
    if data.n() > data.p() {
        return Err(Error::DimensionError { n: data.n(), p: data.p() });
    }
    let gram = data.x() * data.x().transpose();
    let (lambda, u) = gram_eigen(&gram, data.p() as f64)?;
    let z = rotate(&u, data.y());
    Ok((DesignSpectrum::from_trusted(lambda, z, data.p()), u))
}

/// Reduction of `x` without the `n <= p` check: when `x` has fewer columns than
/// rows the trailing eigenvalues are zero.
pub(crate) fn decompose_any(x: &Mat<f64>, y: &[f64]) -> Result<DesignSpectrum> {
    let gram = x * x.transpose();
    let (lambda, u) = gram_eigen(&gram, x.ncols() as f64)?;
    Ok(DesignSpectrum::from_trusted(lambda, rotate(&u, y), x.ncols()))
}

/// Eigenpairs of a symmetric Gram matrix divided by `scale`, sorted
/// non-increasing, tiny values clamped to zero, and each eigenvector signed so
/// its largest-magnitude entry is positive.
pub(crate) fn gram_eigen(gram: &Mat<f64>, scale: f64) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = gram.nrows();
    let eig = gram
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Gram eigendecomposition failed: {e:?}")))?;
    let vals = eig.S().column_vector();
    let vecs = eig.U();
    // faer returns ascending order
    let order: Vec<usize> = (0..n).rev().collect();
    let top = vals[order[0]].max(0.0) / scale;
    let mut lambda = Vec::with_capacity(n);
    let mut u = Mat::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        let l = vals[src] / scale;
        lambda.push(if l < ZERO_EIGEN_RTOL * top || l < 0.0 { 0.0 } else { l });
        let col = vecs.col(src);
        let mut arg = 0;
        for i in 1..n {
            if col[i].abs() > col[arg].abs() {
                arg = i;
            }
        }
        let sign = if col[arg] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            u[(i, k)] = sign * col[i];
        }
    }
    if lambda.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigenvalues"));
    }
    Ok((lambda, u))
}

fn rotate(u: &Mat<f64>, y: &[f64]) -> Vec<f64> {
    (0..u.ncols())
        .map(|k| u.col(k).iter().zip(y).map(|(a, b)| a * b).sum())
        .collect()
}

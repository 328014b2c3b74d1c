//! Observed data and the transformations applied before spectral reduction.

use faer::{Mat, Side};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Design matrix `x` (rows are observations) and response `y`.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Mat<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Mat<f64>, y: Vec<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "response length",
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "design must be non-empty, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response"));
        }
        for j in 0..x.ncols() {
            if x.col(j).iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("design matrix"));
            }
        }
        Ok(Self { x, y })
    }

    /// Builds a dataset from row-major values.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::DimensionMismatch {
                what: if i == 0 { "row length" } else { "row length (ragged input)" },
                expected: p,
                found: r.len(),
            });
        }
        Self::new(Mat::from_fn(n, p, |i, j| rows[i][j]), y)
    }

    pub fn x(&self) -> &Mat<f64> {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn into_parts(self) -> (Mat<f64>, Vec<f64>) {
        (self.x, self.y)
    }
}

/// Known covariance of the design rows.
#[derive(Debug, Clone)]
pub enum CovarianceSpec {
    Identity,
    Explicit(Mat<f64>),
}

impl CovarianceSpec {
    /// Checks symmetry and strict positive definiteness.
    pub fn validate(&self) -> Result<()> {
        match self {
            CovarianceSpec::Identity => Ok(()),
            CovarianceSpec::Explicit(s) => inv_sqrt(s).map(|_| ()),
        }
    }
}

/// Centers each column and scales it to unit sample variance (divisor n-1).
pub fn standardize_columns(data: &Dataset) -> Result<Dataset> {
    let n = data.n();
    let mut x = data.x.clone();
    for j in 0..data.p() {
        let col = x.col(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let scale = col.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if n < 2 || ss <= (1e-13 * scale).powi(2) * n as f64 {
            return Err(Error::ConstantColumn(j));
        }
        let sd = (ss / (n - 1) as f64).sqrt();
        for v in x.col_mut(j).iter_mut() {
            *v = (*v - mean) / sd;
        }
    }
    Ok(Dataset { x, y: data.y.clone() })
}

/// Symmetric inverse square root of an SPD matrix.
pub(crate) fn inv_sqrt(s: &Mat<f64>) -> Result<Mat<f64>> {
    let p = s.nrows();
    if s.ncols() != p {
        return Err(Error::NotPositiveDefinite(format!(
            "matrix is {}x{}, not square",
            p,
            s.ncols()
        )));
    }
    let mut amax = 0.0_f64;
    for j in 0..p {
        for i in 0..p {
            let v = s[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFinite("covariance matrix"));
            }
            amax = amax.max(v.abs());
        }
    }
    for j in 0..p {
        for i in 0..j {
            if (s[(i, j)] - s[(j, i)]).abs() > 1e-10 * amax.max(1.0) {
                return Err(Error::NotPositiveDefinite(format!(
                    "entries ({i},{j}) and ({j},{i}) differ"
                )));
            }
        }
    }
    let eig = s
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let vals = eig.S().column_vector();
    let u = eig.U();
    let top = (0..p).fold(0.0_f64, |m, i| m.max(vals[i].abs()));
    let min = (0..p).fold(f64::INFINITY, |m, i| m.min(vals[i]));
    if !(min > 1e-10 * top.max(f64::MIN_POSITIVE)) {
        return Err(Error::NotPositiveDefinite(format!("smallest eigenvalue {min:e}")));
    }
    let scaled = Mat::from_fn(p, p, |i, k| u[(i, k)] / vals[k].sqrt());
    Ok(&scaled * u.transpose())
}

/// Replaces `X` by `X Σ^{-1/2}`; the identity case returns an unmodified copy.
pub fn whiten(data: &Dataset, cov: &CovarianceSpec) -> Result<Dataset> {
    match cov {
        CovarianceSpec::Identity => Ok(data.clone()),
        CovarianceSpec::Explicit(s) => {
            if s.nrows() != data.p() {
                return Err(Error::DimensionMismatch {
                    what: "covariance dimension",
                    expected: data.p(),
                    found: s.nrows(),
                });
            }
            let w = inv_sqrt(s)?;
            Ok(Dataset { x: &data.x * &w, y: data.y.clone() })
        }
    }
}

/// Row indices of the two parts: the first has `round(fraction * n)` rows
/// (half-up), drawn by a seeded shuffle. Both index lists are sorted.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    let first = ((fraction * n as f64) + 0.5).floor() as usize;
    let first = first.min(n);
    if first == 0 || first == n {
        return Err(Error::EmptySplit { first, second: n - first });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut a = idx[..first].to_vec();
    let mut b = idx[first..].to_vec();
    a.sort_unstable();
    b.sort_unstable();
    Ok((a, b))
}

pub fn select_rows(data: &Dataset, rows: &[usize]) -> Dataset {
    Dataset {
        x: Mat::from_fn(rows.len(), data.p(), |i, j| data.x[(rows[i], j)]),
        y: rows.iter().map(|&i| data.y[i]).collect(),
    }
}

/// Splits rows into two disjoint datasets, deterministically in `seed`.
pub fn split_sample(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (a, b) = split_indices(data.n(), fraction, seed)?;
    Ok((select_rows(data, &a), select_rows(data, &b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn col_moments(x: &Mat<f64>, j: usize) -> (f64, f64) {
        let n = x.nrows() as f64;
        let m = x.col(j).iter().sum::<f64>() / n;
        let v = x.col(j).iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn standardize_two_point_column() {
        let d = Dataset::from_rows(&[vec![0.0], vec![0.0], vec![2.0], vec![2.0]], vec![1.0; 4]).unwrap();
        let s = standardize_columns(&d).unwrap();
        let c = 3f64.sqrt() / 2.0;
        let expect = [-c, -c, c, c];
        for (i, e) in expect.iter().enumerate() {
            assert!((s.x()[(i, 0)] - e).abs() < 1e-15);
        }
        assert_eq!(s.y(), d.y());
    }

    #[test]
    fn standardize_bernoulli_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = Mat::from_fn(20, 5, |_, _| if rng.random::<f64>() < 0.3 { 1.0 } else { 0.0 });
        // guarantee no constant column
        for j in 0..5 {
            x[(0, j)] = 1.0;
            x[(1, j)] = 0.0;
        }
        let d = Dataset::new(x, vec![0.0; 20]).unwrap();
        let s = standardize_columns(&d).unwrap();
        for j in 0..5 {
            let (m, v) = col_moments(s.x(), j);
            assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        }
        let s2 = standardize_columns(&s).unwrap();
        for j in 0..5 {
            for i in 0..20 {
                assert!((s2.x()[(i, j)] - s.x()[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn standardize_rejects_constant_column() {
        let d = Dataset::from_rows(&[vec![1.0, 5.0], vec![2.0, 5.0]], vec![0.0, 0.0]).unwrap();
        assert_eq!(standardize_columns(&d).unwrap_err(), Error::ConstantColumn(1));
    }

    #[test]
    fn whiten_identity_is_bit_identical() {
        let d = Dataset::from_rows(&[vec![0.1, -3.0], vec![7.0, 1e-300]], vec![1.0, 2.0]).unwrap();
        let w = whiten(&d, &CovarianceSpec::Identity).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(w.x()[(i, j)].to_bits(), d.x()[(i, j)].to_bits());
            }
        }
    }

    #[test]
    fn whiten_scalar_covariance() {
        let d = Dataset::from_rows(&[vec![2.0, 2.0]], vec![0.0]).unwrap();
        let s = Mat::from_fn(2, 2, |i, j| if i == j { 4.0 } else { 0.0 });
        let w = whiten(&d, &CovarianceSpec::Explicit(s)).unwrap();
        assert!((w.x()[(0, 0)] - 1.0).abs() < 1e-14 && (w.x()[(0, 1)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn whiten_reproduces_inverse_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Mat::from_fn(3, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let d = Dataset::new(x.clone(), vec![0.0; 3]).unwrap();
        let s = Mat::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 0.5 });
        let w = whiten(&d, &CovarianceSpec::Explicit(s)).unwrap();
        let lhs = w.x() * w.x().transpose();
        // explicit 2x2 inverse
        let inv = Mat::from_fn(2, 2, |i, j| if i == j { 4.0 / 3.0 } else { -2.0 / 3.0 });
        let rhs = &x * &inv * x.transpose();
        for i in 0..3 {
            for j in 0..3 {
                assert!((lhs[(i, j)] - rhs[(i, j)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn whiten_rejects_indefinite() {
        let d = Dataset::from_rows(&[vec![1.0, 1.0]], vec![0.0]).unwrap();
        let s = Mat::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 2.0 });
        assert!(matches!(
            whiten(&d, &CovarianceSpec::Explicit(s)),
            Err(Error::NotPositiveDefinite(_))
        ));
        let asym = Mat::from_fn(2, 2, |i, j| if i == j { 1.0 } else if i < j { 0.1 } else { 0.0 });
        assert!(CovarianceSpec::Explicit(asym).validate().is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let d = Dataset::from_rows(&rows, (0..10).map(|i| i as f64).collect()).unwrap();
        let (a, b) = split_sample(&d, 0.5, 42).unwrap();
        assert_eq!((a.n(), b.n()), (5, 5));
        let (a2, _) = split_sample(&d, 0.5, 42).unwrap();
        assert_eq!(a.y(), a2.y());
        let mut all: Vec<f64> = a.y().iter().chain(b.y()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(|i| i as f64).collect::<Vec<_>>());
        // rows travel with their responses
        for i in 0..a.n() {
            assert_eq!(a.x()[(i, 0)], a.y()[i]);
        }
    }

    #[test]
    fn split_rounds_half_up() {
        // enumerate: floor(f*n + 0.5)
        assert_eq!(split_indices(7, 0.5, 1).unwrap().0.len(), 4);
        assert_eq!(split_indices(7, 0.3, 1).unwrap().0.len(), 2);
        assert_eq!(split_indices(5, 0.3, 1).unwrap().0.len(), 2);
        assert!(matches!(split_indices(3, 0.1, 1), Err(Error::EmptySplit { first: 0, second: 3 })));
        assert!(matches!(split_indices(3, 0.9, 1), Err(Error::EmptySplit { first: 3, second: 0 })));
    }
}

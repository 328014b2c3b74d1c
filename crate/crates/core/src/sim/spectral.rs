//! Direct sampling of `(λ, z)` for an i.i.d. N(0, 1) design.
//!
//! The eigenvalues of `XXᵀ` share their law with those of `BBᵀ`, where `B`
//! is lower bidiagonal with diagonal `χ_p, χ_{p-1}, …, χ_{p-n+1}` and
//! subdiagonal `χ_{n-1}, …, χ_1`. The right singular vectors are Haar and
//! independent of the spectrum, so `Uᵀ X β` has the law of
//! `√(pλ) ∘ θ·u` with `u` the first `n` coordinates of a uniform unit vector
//! in `ℝᵖ`, and `Uᵀε ~ N(0, σ²I)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::spectrum::{DesignSpectrum, ZERO_EIGEN_RTOL};

fn chi(k: usize, rng: &mut ChaCha8Rng) -> f64 {
    ChiSquared::new(k as f64).expect("positive degrees of freedom").sample(rng).sqrt()
}

/// Eigenvalues of `XXᵀ/p` for `X` n×p with i.i.d. N(0, 1) entries,
/// sorted non-increasing.
pub fn sample_gaussian_eigenvalues(n: usize, p: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if n > p || n == 0 {
        return Err(Error::DimensionError { n, p });
    }
    let a: Vec<f64> = (0..n).map(|i| chi(p - i, rng)).collect();
    let b: Vec<f64> = (1..n).map(|i| chi(n - i, rng)).collect();
    // T = BBᵀ: T_ii = a_i² + b_{i-1}², T_{i,i+1} = a_i b_i
    let mut d: Vec<f64> = (0..n).map(|i| a[i] * a[i] + if i > 0 { b[i - 1] * b[i - 1] } else { 0.0 }).collect();
    let mut e: Vec<f64> = (0..n).map(|i| if i + 1 < n { a[i] * b[i] } else { 0.0 }).collect();
    tridiagonal_eigenvalues(&mut d, &mut e)?;
    d.sort_by(|x, y| y.total_cmp(x));
    let top = d[0].max(0.0);
    Ok(d.into_iter()
        .map(|v| if v < ZERO_EIGEN_RTOL * top { 0.0 } else { v / p as f64 })
        .collect())
}

/// `(λ, z)` for `y = Xβ + ε` with `‖β‖² = θ²` and Gaussian noise.
pub fn sample_gaussian_spectrum(
    n: usize,
    p: usize,
    theta2: f64,
    sigma2: f64,
    design_rng: &mut ChaCha8Rng,
    noise_rng: &mut ChaCha8Rng,
) -> Result<DesignSpectrum> {
    let lambda = sample_gaussian_eigenvalues(n, p, design_rng)?;
    let g: Vec<f64> = (0..p).map(|_| design_rng.sample(StandardNormal)).collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (theta, sigma) = (theta2.sqrt(), sigma2.sqrt());
    let z = (0..n)
        .map(|i| {
            (p as f64 * lambda[i]).sqrt() * theta * g[i] / norm + sigma * noise_rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Ok(DesignSpectrum::from_trusted(lambda, z, p))
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix with
/// diagonal `d` and off-diagonal `e` (`e[i]` couples `i` and `i+1`; the last
/// entry is ignored). Eigenvalues overwrite `d`, unsorted.
pub(crate) fn tridiagonal_eigenvalues(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Numerical("tridiagonal QL did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

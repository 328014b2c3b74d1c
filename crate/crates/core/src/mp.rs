//! Marčenko–Pastur law with ratio γ = n/p and unit mean.
//!
//! Integrals use the substitution `x = (1+γ) + 2√γ cos t`, `t ∈ [0, π]`,
//! which turns the square-root edges of the density into the smooth weight
//! `(2√γ sin t)² / (2πγx)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::integrate;
use crate::solver::{solve_minmax, ConstraintSet};

const QUAD_TOL: f64 = 1e-12;

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidGamma(gamma))
    }
}

fn support(gamma: f64) -> (f64, f64) {
    ((1.0 - gamma.sqrt()).powi(2), (1.0 + gamma.sqrt()).powi(2))
}

/// `∫ x^k f(x) dx` over the part of the support where `t ∈ [t0, t1]`.
fn moment_t(gamma: f64, k: i32, t0: f64, t1: f64) -> f64 {
    let m = 1.0 + gamma;
    let r = 2.0 * gamma.sqrt();
    integrate(
        |t| {
            let x = m + r * t.cos();
            (r * t.sin()).powi(2) * x.powi(k - 1) / (2.0 * PI * gamma)
        },
        t0,
        t1,
        QUAD_TOL,
        QUAD_TOL,
    )
}

fn angle(gamma: f64, x: f64) -> f64 {
    let m = 1.0 + gamma;
    let r = 2.0 * gamma.sqrt();
    ((x - m) / r).clamp(-1.0, 1.0).acos()
}

pub fn mp_pdf(gamma: f64, x: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let (lo, hi) = support(gamma);
    if x <= lo || x >= hi {
        return Ok(0.0);
    }
    Ok(((hi - x) * (x - lo)).sqrt() / (2.0 * PI * gamma * x))
}

pub fn mp_cdf(gamma: f64, x: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let (lo, hi) = support(gamma);
    if x <= lo {
        return Ok(0.0);
    }
    if x >= hi {
        return Ok(1.0);
    }
    Ok(moment_t(gamma, 0, angle(gamma, x), PI).clamp(0.0, 1.0))
}

/// `∫ x^k f(x) dx` over the whole support.
pub fn mp_moment(gamma: f64, k: i32) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(moment_t(gamma, k, 0.0, PI))
}

/// Quantile by bisection on the CDF.
pub fn mp_quantile(gamma: f64, q: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidInput(format!("quantile level must lie in [0, 1], got {q}")));
    }
    let (mut lo, mut hi) = support(gamma);
    if q == 0.0 {
        return Ok(lo);
    }
    if q == 1.0 {
        return Ok(hi);
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if mp_cdf(gamma, mid)? < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// MP law with its median `M` and the constants
/// `A = E[Y(1{Y ≥ M} - 1{Y < M})]`, `B = E[Y²]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MPModel {
    pub gamma: f64,
    pub support_lo: f64,
    pub support_hi: f64,
    pub median: f64,
    pub a: f64,
    pub b: f64,
}

impl MPModel {
    /// `√Var(Y) = √(B - 1)`.
    pub fn sd(&self) -> f64 {
        (self.b - 1.0).max(0.0).sqrt()
    }

    pub fn are_upper_bound(&self) -> f64 {
        std::f64::consts::SQRT_2 * (1.0 / self.a).max(self.b.sqrt() / self.a)
    }
}

pub fn mp_model(gamma: f64) -> Result<MPModel> {
    check_gamma(gamma)?;
    let (lo, hi) = support(gamma);
    let median = mp_quantile(gamma, 0.5)?;
    let tm = angle(gamma, median);
    // x ≥ M ⇔ t ≤ tm
    let above = moment_t(gamma, 1, 0.0, tm);
    let below = moment_t(gamma, 1, tm, PI);
    Ok(MPModel {
        gamma,
        support_lo: lo,
        support_hi: hi,
        median,
        a: above - below,
        b: moment_t(gamma, 2, 0.0, PI),
    })
}

/// `√2·max(1/A, √B/A)`, the asymptotic upper bound on the width ratio
/// between the EigenPrism θ² interval and the known-σ² interval.
pub fn are_upper_bound(gamma: f64) -> Result<f64> {
    Ok(mp_model(gamma)?.are_upper_bound())
}

/// Deterministic spectrum of `n` MP quantiles at levels `(i - ½)/n`,
/// sorted non-increasing.
pub fn mp_quantile_spectrum(gamma: f64, n: usize) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    let mut v = (0..n)
        .map(|i| mp_quantile(gamma, (i as f64 + 0.5) / n as f64))
        .collect::<Result<Vec<f64>>>()?;
    v.reverse();
    Ok(v)
}

/// Width ratio `√(n·val(P1))` of the EigenPrism θ² interval to the
/// known-σ² interval, evaluated on an MP quantile spectrum of size `n`.
pub fn numeric_are(gamma: f64, n: usize) -> Result<f64> {
    let lam = mp_quantile_spectrum(gamma, n)?;
    let sol = solve_minmax(&lam, &ConstraintSet::theta2(Default::default()))?;
    Ok((n as f64 * sol.objective).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArePoint {
    pub gamma: f64,
    pub are_upper_bound: f64,
    pub are_numeric: f64,
}

pub fn are_curve(gammas: &[f64], n: usize) -> Result<Vec<ArePoint>> {
    gammas
        .iter()
        .map(|&g| {
            Ok(ArePoint { gamma: g, are_upper_bound: are_upper_bound(g)?, are_numeric: numeric_are(g, n)? })
        })
        .collect()
}

/// Lower bound on the summed type I and type II error of any test between
/// signal fractions 0 and ½, for a spectrum normalised to `Σλ = n`. Floored at 0.
pub fn indistinguishability_bound(lambda: &[f64], n: usize, p: usize) -> Result<f64> {
    if lambda.len() != n {
        return Err(Error::DimensionMismatch { what: "spectrum length", expected: n, found: lambda.len() });
    }
    if p < n || n == 0 {
        return Err(Error::DimensionError { n, p });
    }
    let sum: f64 = lambda.iter().sum();
    if !((sum - n as f64).abs() <= 1e-6 * n as f64) {
        return Err(Error::NormalizationError { sum, n });
    }
    let dev: f64 = lambda.iter().map(|l| (l - 1.0).powi(2)).sum();
    let ratio = n as f64 / p as f64;
    Ok((1.0 - ((dev / 8.0).sqrt() + (ratio / (4.0 * PI)).sqrt())).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_outside_support() {
        assert_eq!(mp_pdf(0.3, 0.01).unwrap(), 0.0);
        assert_eq!(mp_pdf(0.3, 5.0).unwrap(), 0.0);
        assert!(mp_pdf(0.3, 1.0).unwrap() > 0.0);
        assert_eq!(mp_pdf(1.0, 1.0).unwrap_err(), Error::InvalidGamma(1.0));
        assert!(mp_model(0.0).is_err());
    }

    #[test]
    fn moments_in_x_coordinates() {
        // direct x-space quadrature, independent of the angle substitution
        let g = 0.2;
        let (lo, hi) = support(g);
        let f = |x: f64| mp_pdf(g, x).unwrap();
        let m0 = integrate(f, lo, hi, 1e-11, 1e-11);
        let m1 = integrate(|x| x * f(x), lo, hi, 1e-11, 1e-11);
        let m2 = integrate(|x| x * x * f(x), lo, hi, 1e-11, 1e-11);
        assert!((m0 - 1.0).abs() < 1e-8);
        assert!((m1 - 1.0).abs() < 1e-8);
        assert!((m2 - 1.2).abs() < 1e-8);
    }

    #[test]
    fn moments_across_gamma() {
        for k in 1..10 {
            let g = k as f64 / 10.0;
            if g >= 1.0 {
                continue;
            }
            assert!((mp_moment(g, 0).unwrap() - 1.0).abs() < 1e-8);
            assert!((mp_moment(g, 1).unwrap() - 1.0).abs() < 1e-8);
            assert!((mp_moment(g, 2).unwrap() - (1.0 + g)).abs() < 1e-8);
        }
    }

    #[test]
    fn model_constants() {
        for &g in &[0.1, 0.25, 0.5, 0.9] {
            let m = mp_model(g).unwrap();
            assert!(m.support_lo < m.median && m.median < m.support_hi);
            assert!((mp_cdf(g, m.median).unwrap() - 0.5).abs() < 1e-8);
            assert!((m.b - (1.0 + g)).abs() < 1e-3);
            assert!((m.sd() - g.sqrt()).abs() < 1e-3);
            assert!(m.a > 0.0);
            assert!((m.are_upper_bound() - std::f64::consts::SQRT_2 * m.b.sqrt() / m.a).abs() < 1e-15);
        }
    }

    #[test]
    fn indistinguishability() {
        let v = indistinguishability_bound(&[1.0; 10], 10, 1000).unwrap();
        assert!((v - (1.0 - (0.01 / (4.0 * PI)).sqrt())).abs() < 1e-12);
        assert!((v - 0.9718).abs() < 1e-4);
        let near = indistinguishability_bound(&[1.0; 10], 10, 10_000_000_000).unwrap();
        assert!(near > 0.9999);
        assert!(matches!(indistinguishability_bound(&[2.0; 10], 10, 100), Err(Error::NormalizationError { .. })));
        let a = indistinguishability_bound(&[1.1, 0.9, 1.0, 1.0], 4, 400).unwrap();
        let b = indistinguishability_bound(&[1.2, 0.8, 1.0, 1.0], 4, 400).unwrap();
        assert!(b < a);
    }

    #[test]
    fn quantile_spectrum_is_normalised_approximately() {
        let l = mp_quantile_spectrum(0.5, 200).unwrap();
        assert!(l.windows(2).all(|w| w[0] >= w[1]));
        let mean = l.iter().sum::<f64>() / 200.0;
        assert!((mean - 1.0).abs() < 1e-3);
    }
}

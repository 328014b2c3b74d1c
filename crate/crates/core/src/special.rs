//! Normal and chi-square distribution functions and their inverses.
//!
//! `erfc` comes from `libm` and the incomplete gamma functions from `statrs`;
//! the quantiles are Newton inversions of those.

use statrs::function::{erf, gamma};

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile. Returns -inf / +inf at 0 / 1.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -normal_quantile(1.0 - p);
    }
    // statrs' erfc_inv is good to ~1e-10; one Newton step against libm's erfc finishes it
    let x = -SQRT_2 * erf::erfc_inv(2.0 * p);
    let d = normal_pdf(x);
    if d > 0.0 {
        x - (normal_cdf(x) - p) / d
    } else {
        x
    }
}

/// Two-sided critical value `z*_{1-alpha/2}`.
pub fn z_critical(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(normal_quantile(1.0 - alpha / 2.0))
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

pub fn chi2_cdf(df: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma::gamma_lr(0.5 * df, 0.5 * x)
    }
}

/// Upper tail `P(chi2_df > x)`, computed directly for accuracy near 1.
pub fn chi2_sf(df: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma::gamma_ur(0.5 * df, 0.5 * x)
    }
}

pub fn chi2_pdf(df: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return if df < 2.0 {
            f64::INFINITY
        } else if df == 2.0 {
            0.5
        } else {
            0.0
        };
    }
    let k = 0.5 * df;
    ((k - 1.0) * x.ln() - 0.5 * x - k * std::f64::consts::LN_2 - gamma::ln_gamma(k)).exp()
}

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

/// Quantile `Q_tau` of the chi-square distribution with `df` degrees of freedom.
pub fn chi2_quantile(df: f64, tau: f64) -> Result<f64> {
    if !(df.is_finite() && df > 0.0) {
        return Err(Error::InvalidInput(format!("degrees of freedom must be positive, got {df}")));
    }
    if !(tau.is_finite() && tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidInput(format!("quantile level must lie in (0, 1), got {tau}")));
    }
    // Residual on whichever tail is smaller keeps full relative precision.
    let upper = tau > 0.5;
    let target = if upper { 1.0 - tau } else { tau };
    let resid = |x: f64| {
        if upper {
            target - chi2_sf(df, x)
        } else {
            chi2_cdf(df, x) - target
        }
    };

    // Wilson-Hilferty starting point.
    let z = normal_quantile(tau);
    let h = 2.0 / (9.0 * df);
    let mut x = df * (1.0 - h + z * h.sqrt()).powi(3);
    if !(x.is_finite() && x > 0.0) {
        x = df.max(1e-3);
    }

    let mut lo = 0.0_f64;
    let mut hi = x.max(df).max(1.0);
    while resid(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Numerical("chi-square quantile bracket overflow".into()));
        }
    }
    if x <= lo || x >= hi {
        x = 0.5 * (lo + hi);
    }

    for _ in 0..200 {
        let r = resid(x);
        if r == 0.0 {
            return Ok(x);
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = chi2_pdf(df, x);
        let mut next = if d > 0.0 && d.is_finite() { x - r / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(f64::MIN_POSITIVE) || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Plain bisection on the forward CDF; independent of the Newton path.
    fn bisect_quantile(df: f64, tau: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        while chi2_cdf(df, hi) < tau {
            hi *= 2.0;
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if chi2_cdf(df, mid) < tau {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn chi2_quantile_matches_bisection() {
        for &df in &[1.0, 2.0, 5.0, 10.0, 100.0, 1000.0] {
            for &tau in &[1e-6, 0.025, 0.3, 0.5, 0.9, 0.975, 0.999] {
                let q = chi2_quantile(df, tau).unwrap();
                let b = bisect_quantile(df, tau);
                assert!((q - b).abs() <= 1e-10 * b.max(1.0), "df={df} tau={tau}: {q} vs {b}");
            }
        }
    }

    #[test]
    fn chi2_quantile_known_values() {
        // Textbook table values.
        assert!((chi2_quantile(1.0, 0.95).unwrap() - 3.841_458_820_694_124).abs() < 1e-10);
        assert!((chi2_quantile(10.0, 0.05).unwrap() - 3.940_299_136_119_060_5).abs() < 1e-9);
        assert!((chi2_quantile(100.0, 0.975).unwrap() - 129.561_197_185_836_6).abs() < 1e-8);
        assert!((chi2_quantile(100.0, 0.025).unwrap() - 74.221_927_474_923_73).abs() < 1e-8);
    }

    #[test]
    fn normal_quantile_round_trip() {
        for &p in &[1e-10, 0.001, 0.025, 0.5, 0.8, 0.975] {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() < 1e-14_f64.max(p * 1e-12));
        }
        assert!((z_critical(0.05).unwrap() - 1.959_963_984_540_054).abs() < 1e-12);
    }

    #[test]
    fn alpha_validation() {
        assert_eq!(z_critical(0.0), Err(Error::InvalidAlpha(0.0)));
        assert!(z_critical(1.5).is_err());
        assert!(z_critical(f64::NAN).is_err());
    }
}

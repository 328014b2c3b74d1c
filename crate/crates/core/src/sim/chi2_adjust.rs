use crate::error::{Error, Result};
use crate::quad::integrate;
use crate::special::{chi2_pdf, chi2_quantile, normal_cdf, z_critical};

/// `P(|N(0,1)| ≤ z*·W/n)` with `W ~ χ²ₙ` independent: the coverage of a
/// nominal `1-α` normal interval whose half-width carries the χ²
/// fluctuation of `‖y‖²/n`.
///
/// Integrated in `t = √(W/n)`, which keeps the integrand smooth for small `n`.
pub fn chi2_width_adjustment_coverage(n: usize, alpha: f64) -> Result<f64> {
    let z = z_critical(alpha)?;
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let df = n as f64;
    let upper = (chi2_quantile(df, 1.0 - 1e-15)? / df).sqrt();
    let f = |t: f64| {
        let w = df * t * t;
        df * chi2_pdf(df, w) * 2.0 * t * (2.0 * normal_cdf(z * t * t) - 1.0)
    };
    Ok(integrate(f, 0.0, upper, 1e-13, 1e-12).clamp(0.0, 1.0))
}

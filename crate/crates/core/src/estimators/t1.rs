//! Known-σ² intervals built on `T1 = ‖y‖²/n - σ²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Estimand, IntervalEstimate};
use crate::error::{Error, Result};
use crate::special::{check_alpha, chi2_quantile, normal_cdf, normal_quantile};

pub const DEFAULT_BOOTSTRAP_REPLICATES: usize = 10_000;

fn check_inputs(y: &[f64], sigma2: f64) -> Result<()> {
    if y.is_empty() {
        return Err(Error::InvalidInput("response must have at least one entry".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("response"));
    }
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(Error::InvalidInput(format!("sigma2 must be finite and non-negative, got {sigma2}")));
    }
    Ok(())
}

/// Exact interval from `‖y‖²/(θ²+σ²) ~ χ²ₙ`.
pub fn t1_interval(y: &[f64], sigma2: f64, alpha: f64) -> Result<IntervalEstimate> {
    check_alpha(alpha)?;
    check_inputs(y, sigma2)?;
    let n = y.len() as f64;
    let ysq: f64 = y.iter().map(|v| v * v).sum();
    let stat = ysq / n - sigma2;
    let lo = ysq / chi2_quantile(n, 1.0 - alpha / 2.0)? - sigma2;
    let hi = ysq / chi2_quantile(n, alpha / 2.0)? - sigma2;
    Ok(IntervalEstimate {
        estimand: Estimand::ThetaSquared,
        point: stat.max(0.0),
        lower: lo.max(0.0),
        upper: hi.max(0.0),
        alpha,
        sd_bound: (2.0 / n).sqrt() * ysq / n,
        clipped_lower: lo < 0.0,
        clipped_upper: hi < 0.0,
        statistic: stat,
        diagnostics: None,
        two_step_fallback: false,
    })
}

/// Linear-interpolation quantile of sorted data.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = h.floor() as usize;
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[i] + (h - i as f64) * (sorted[i + 1] - sorted[i])
}

/// BCa bootstrap interval for θ², resampling the entries of `y`.
pub fn bootstrap_t1_interval(y: &[f64], sigma2: f64, alpha: f64, b: usize, seed: u64) -> Result<IntervalEstimate> {
    check_alpha(alpha)?;
    check_inputs(y, sigma2)?;
    if b < 1000 {
        return Err(Error::InvalidInput(format!("at least 1000 bootstrap replicates are required, got {b}")));
    }
    let n = y.len();
    let sq: Vec<f64> = y.iter().map(|v| v * v).collect();
    let total: f64 = sq.iter().sum();
    let stat = total / n as f64 - sigma2;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boot: Vec<f64> = (0..b)
        .map(|_| {
            let s: f64 = (0..n).map(|_| sq[rng.random_range(0..n)]).sum();
            s / n as f64 - sigma2
        })
        .collect();
    boot.sort_unstable_by(f64::total_cmp);
    if boot[b - 1] - boot[0] <= f64::EPSILON * boot[b - 1].abs().max(boot[0].abs()) {
        return Err(Error::DegenerateBootstrap);
    }

    // bias correction: ties count half
    let below = boot.partition_point(|&v| v < stat);
    let at_or_below = boot.partition_point(|&v| v <= stat);
    let frac = (below as f64 + 0.5 * (at_or_below - below) as f64) / b as f64;
    let z0 = normal_quantile(frac.clamp(0.5 / b as f64, 1.0 - 0.5 / b as f64));

    // acceleration from the jackknife
    let jack: Vec<f64> = sq.iter().map(|s| (total - s) / (n as f64 - 1.0).max(1.0)).collect();
    let jm = jack.iter().sum::<f64>() / n as f64;
    let (num, den) = jack.iter().fold((0.0, 0.0), |(a, b), j| {
        let d = jm - j;
        (a + d * d * d, b + d * d)
    });
    let accel = if den > 0.0 { num / (6.0 * den.powf(1.5)) } else { 0.0 };

    let adjust = |zq: f64| {
        let t = z0 + zq;
        normal_cdf(z0 + t / (1.0 - accel * t))
    };
    let zl = normal_quantile(alpha / 2.0);
    let lo = sorted_quantile(&boot, adjust(zl));
    let hi = sorted_quantile(&boot, adjust(-zl));

    let mean = boot.iter().sum::<f64>() / b as f64;
    let sd = (boot.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1) as f64).sqrt();
    Ok(IntervalEstimate {
        estimand: Estimand::ThetaSquared,
        point: stat.max(0.0),
        lower: lo.max(0.0),
        upper: hi.max(0.0),
        alpha,
        sd_bound: sd,
        clipped_lower: lo < 0.0,
        clipped_upper: hi < 0.0,
        statistic: stat,
        diagnostics: None,
        two_step_fallback: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    #[test]
    fn noiseless_interval() {
        let y = [1.0, -2.0, 0.5, 3.0];
        let r = t1_interval(&y, 0.0, 0.05).unwrap();
        let ysq = 14.25;
        assert!((r.lower - ysq / chi2_quantile(4.0, 0.975).unwrap()).abs() < 1e-12);
        assert!((r.upper - ysq / chi2_quantile(4.0, 0.025).unwrap()).abs() < 1e-12);
        assert!(r.lower > 0.0);
    }

    #[test]
    fn exact_moment_response() {
        // ‖y‖² = n(θ²+σ²) = 1000 at n = 100
        let y = vec![10f64.sqrt(); 100];
        let r = t1_interval(&y, 5.0, 0.05).unwrap();
        assert!((r.lower - (1000.0 / 129.561_197_185_836_6 - 5.0)).abs() < 1e-9);
        assert!((r.upper - (1000.0 / 74.221_927_474_923_73 - 5.0)).abs() < 1e-9);
        assert!((r.point - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_alpha() {
        assert_eq!(t1_interval(&[1.0], 0.0, 1.0).unwrap_err(), Error::InvalidAlpha(1.0));
    }

    #[test]
    fn bootstrap_constant_response_is_degenerate() {
        assert_eq!(bootstrap_t1_interval(&[2.0; 30], 1.0, 0.05, 1000, 1).unwrap_err(), Error::DegenerateBootstrap);
        assert!(bootstrap_t1_interval(&[2.0; 30], 1.0, 0.05, 999, 1).is_err());
    }

    #[test]
    fn bootstrap_stabilizes_in_b() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let y: Vec<f64> = (0..200).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let a = bootstrap_t1_interval(&y, 1.0, 0.05, 10_000, 1).unwrap();
        let b = bootstrap_t1_interval(&y, 1.0, 0.05, 20_000, 2).unwrap();
        assert!((a.lower - b.lower).abs() <= 1e-2 * a.lower);
        assert!((a.upper - b.upper).abs() <= 1e-2 * a.upper);
        assert!(a.lower <= a.point && a.point <= a.upper);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let y: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 4.0).collect();
        assert_eq!(
            bootstrap_t1_interval(&y, 0.5, 0.1, 2000, 9).unwrap(),
            bootstrap_t1_interval(&y, 0.5, 0.1, 2000, 9).unwrap()
        );
    }
}

use super::{EigenPrismOptions, Estimand, IntervalEstimate, SolverDiagnostics, Target};
use crate::error::{Error, Result};
use crate::solver::{
    kkt_residual, quadratic_kkt_residual, solve_minmax, solve_weighted_quadratic, ConstraintSet,
};
use crate::special::z_critical;
use crate::spectrum::DesignSpectrum;

/// Floor applied to the 2-step quadratic weights.
const TWO_STEP_C_FLOOR: f64 = 1e-12;

fn constraints(target: Target, spec: &DesignSpectrum, opts: &EigenPrismOptions) -> ConstraintSet {
    let pinned = opts.pinned(spec.lambda());
    match target {
        Target::ThetaSquared => ConstraintSet::theta2(pinned),
        Target::SigmaSquared => ConstraintSet::sigma2(pinned),
    }
}

/// EigenPrism interval: min-max weights, `T = Σwz²`,
/// `sd = √(2 val)·‖y‖²/n`, endpoints `T ± z*·sd` clipped at zero.
pub fn eigenprism_estimate(
    spec: &DesignSpectrum,
    target: Target,
    opts: &EigenPrismOptions,
) -> Result<IntervalEstimate> {
    if opts.two_step {
        return two_step_interval(spec, target, opts);
    }
    opts.validate(spec.n())?;
    let z = z_critical(opts.alpha)?;
    let cons = constraints(target, spec, opts);
    let sol = solve_minmax(spec.lambda(), &cons)?;
    let stat = sol.statistic(spec.z());
    let sd = (2.0 * sol.objective).sqrt() * spec.mean_sq_response();
    let mut est = IntervalEstimate::gaussian(target.into(), stat, sd, z, opts.alpha);
    est.diagnostics = Some(SolverDiagnostics {
        objective: sol.objective,
        delta: sol.delta,
        kappa1: sol.kappa1,
        kappa2: sol.kappa2,
        kkt_residual: kkt_residual(spec.lambda(), &sol, &cons),
        pinned: cons.forced_zero().len(),
        rho_hat: None,
    });
    Ok(est)
}

/// Refinement that plugs the first-pass `ρ̂` into the tighter variance
/// expression `2(θ²+σ²)² Σw²(ρλ + 1 - ρ)²` and re-optimises the weights.
pub fn two_step_interval(
    spec: &DesignSpectrum,
    target: Target,
    opts: &EigenPrismOptions,
) -> Result<IntervalEstimate> {
    let base = EigenPrismOptions { two_step: false, ..*opts };
    base.validate(spec.n())?;
    let z = z_critical(opts.alpha)?;
    let scale = spec.mean_sq_response();

    let first = eigenprism_estimate(spec, Target::ThetaSquared, &base)?;
    let step1 = match target {
        Target::ThetaSquared => first.clone(),
        Target::SigmaSquared => eigenprism_estimate(spec, target, &base)?,
    };
    if step1.width() == 0.0 || scale == 0.0 {
        return Ok(IntervalEstimate { two_step_fallback: true, ..step1 });
    }
    let rho = (first.statistic / scale).clamp(0.0, 1.0);

    let c: Vec<f64> = spec
        .lambda()
        .iter()
        .map(|l| (l * rho + 1.0 - rho).powi(2).max(TWO_STEP_C_FLOOR))
        .collect();
    let cons = constraints(target, spec, opts);
    let sol = solve_weighted_quadratic(spec.lambda(), &c, &cons)?;
    let stat = sol.statistic(spec.z());
    let sd = std::f64::consts::SQRT_2 * scale * sol.objective.sqrt();
    let mut est = IntervalEstimate::gaussian(target.into(), stat, sd, z, opts.alpha);
    est.diagnostics = Some(SolverDiagnostics {
        objective: sol.objective,
        delta: None,
        kappa1: sol.kappa1,
        kappa2: sol.kappa2,
        kkt_residual: quadratic_kkt_residual(spec.lambda(), &c, &sol, &cons),
        pinned: cons.forced_zero().len(),
        rho_hat: Some(rho),
    });
    Ok(est)
}

/// Interval for `θ²/(θ²+σ²)`: the θ² interval divided by `‖y‖²/n`, clamped
/// to `[0, 1]`.
pub fn snr_interval(spec: &DesignSpectrum, opts: &EigenPrismOptions) -> Result<IntervalEstimate> {
    let scale = spec.mean_sq_response();
    if !(scale > 0.0) {
        return Err(Error::ZeroResponse);
    }
    let t = eigenprism_estimate(spec, Target::ThetaSquared, opts)?;
    let z = z_critical(opts.alpha)?;
    let stat = t.statistic / scale;
    let sd = t.sd_bound / scale;
    let lo = stat - z * sd;
    let hi = stat + z * sd;
    Ok(IntervalEstimate {
        estimand: Estimand::Snr,
        point: stat.clamp(0.0, 1.0),
        lower: lo.clamp(0.0, 1.0),
        upper: hi.clamp(0.0, 1.0),
        alpha: opts.alpha,
        sd_bound: sd,
        clipped_lower: !(0.0..=1.0).contains(&lo),
        clipped_upper: !(0.0..=1.0).contains(&hi),
        statistic: stat,
        diagnostics: t.diagnostics,
        two_step_fallback: t.two_step_fallback,
    })
}

/// Variance of `Σwᵢzᵢ²` given the spectrum, for `β` uniform on the sphere of
/// radius θ in `ℝᵖ` and Gaussian noise.
pub fn exact_conditional_variance(w: &[f64], lambda: &[f64], theta2: f64, sigma2: f64, p: usize) -> Result<f64> {
    if w.len() != lambda.len() {
        return Err(Error::DimensionMismatch { what: "weight vector", expected: lambda.len(), found: w.len() });
    }
    let (mut s_w2, mut s_w2l, mut s_w2l2, mut s_wl) = (0.0, 0.0, 0.0, 0.0);
    for (&wi, &li) in w.iter().zip(lambda) {
        s_w2 += wi * wi;
        s_w2l += wi * wi * li;
        s_w2l2 += wi * wi * li * li;
        s_wl += wi * li;
    }
    let p = p as f64;
    Ok(2.0 * sigma2 * sigma2 * s_w2
        + 4.0 * sigma2 * theta2 * s_w2l
        + 2.0 * theta2 * theta2 * ((p / (p + 2.0)) * s_w2l2 - s_wl * s_wl / (p + 2.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::z_critical;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn two_level_spec() -> DesignSpectrum {
        let lam = vec![1.5, 1.5, 0.5, 0.5];
        let z: Vec<f64> = lam.iter().map(|l: &f64| l.sqrt()).collect();
        DesignSpectrum::from_parts(lam, z, 40).unwrap()
    }

    #[test]
    fn constraint_forced_statistic() {
        // zᵢ² = λᵢ ⇒ Σwz² = Σwλ = 1
        let r = eigenprism_estimate(&two_level_spec(), Target::ThetaSquared, &EigenPrismOptions::default()).unwrap();
        assert!((r.statistic - 1.0).abs() < 1e-12);
        assert!((r.sd_bound - 2.5f64.sqrt()).abs() < 1e-12);
        let z = z_critical(0.05).unwrap();
        assert!((r.upper - (1.0 + z * r.sd_bound)).abs() < 1e-12);
        assert!(r.diagnostics.unwrap().kkt_residual < 1e-10);
    }

    #[test]
    fn variance_special_cases() {
        let w = [0.5, 0.5, -0.5, -0.5];
        let lam = [1.5, 1.5, 0.5, 0.5];
        let v = exact_conditional_variance(&w, &lam, 0.0, 2.0, 10).unwrap();
        assert!((v - 2.0 * 4.0 * 1.0).abs() < 1e-14);
        let v = exact_conditional_variance(&w, &lam, 3.0, 0.0, 10).unwrap();
        assert!((v - 2.0 * 9.0 * ((10.0 / 12.0) * 1.25 - 1.0 / 12.0)).abs() < 1e-12);
        assert!(exact_conditional_variance(&w, &lam[..3], 1.0, 1.0, 10).is_err());
    }

    #[test]
    fn snr_clamps() {
        // zero signal statistic: all z equal, Σw = 0 ⇒ T2 = 0
        let lam = vec![2.0, 1.0, 0.5, 0.25];
        let s = DesignSpectrum::from_parts(lam.clone(), vec![1.0; 4], 10).unwrap();
        let r = snr_interval(&s, &EigenPrismOptions::default()).unwrap();
        assert!(r.point.abs() < 1e-12 && r.lower == 0.0);
        let zero = DesignSpectrum::from_parts(lam, vec![0.0; 4], 10).unwrap();
        assert_eq!(snr_interval(&zero, &EigenPrismOptions::default()).unwrap_err(), Error::ZeroResponse);
    }

    #[test]
    fn two_step_limits() {
        let lam: Vec<f64> = (0..30).map(|i| 2.5 - 0.08 * i as f64).collect();
        let cons = ConstraintSet::theta2(BTreeSet::new());
        let ones = solve_weighted_quadratic(&lam, &vec![1.0; 30], &cons).unwrap();
        // ρ̂ = 0 when every z is equal: T2 = 0 exactly
        let s = DesignSpectrum::from_parts(lam.clone(), vec![1.0; 30], 100).unwrap();
        let r = two_step_interval(&s, Target::ThetaSquared, &EigenPrismOptions::default()).unwrap();
        let d = r.diagnostics.unwrap();
        assert!(d.rho_hat.unwrap() < 1e-12);
        assert!((d.objective - ones.objective).abs() < 1e-10 * ones.objective);
        // ρ̂ = 1: c = λ²
        let sq: Vec<f64> = lam.iter().map(|l| l * l).collect();
        let full = solve_weighted_quadratic(&lam, &sq, &cons).unwrap();
        let hi = DesignSpectrum::from_parts(lam.clone(), lam.iter().map(|l| 10.0 * l).collect(), 100).unwrap();
        let r = two_step_interval(&hi, Target::ThetaSquared, &EigenPrismOptions::default()).unwrap();
        let d = r.diagnostics.unwrap();
        if d.rho_hat == Some(1.0) {
            assert!((d.objective - full.objective).abs() < 1e-10 * full.objective);
        }
        assert!(!r.two_step_fallback);
    }

    #[test]
    fn two_step_falls_back_on_degenerate_interval() {
        let s = DesignSpectrum::from_parts(vec![2.0, 1.0, 0.5], vec![0.0; 3], 10).unwrap();
        let opts = EigenPrismOptions { two_step: true, ..Default::default() };
        let r = eigenprism_estimate(&s, Target::ThetaSquared, &opts).unwrap();
        assert!(r.two_step_fallback);
        assert_eq!(r.width(), 0.0);
    }

    #[test]
    fn zero_first_too_large() {
        let opts = EigenPrismOptions { zero_first: 3, ..Default::default() };
        assert!(eigenprism_estimate(&two_level_spec(), Target::ThetaSquared, &opts).is_err());
        let opts = EigenPrismOptions { zero_first: 2, ..Default::default() };
        // remaining λ are constant
        assert!(eigenprism_estimate(&two_level_spec(), Target::ThetaSquared, &opts).is_err());
    }

    fn random_spec(seed: u64, n: usize) -> DesignSpectrum {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut lam: Vec<f64> = (0..n).map(|_| 0.1 + 2.5 * rng.random::<f64>()).collect();
        lam.sort_by(|a, b| b.total_cmp(a));
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        DesignSpectrum::from_parts(lam, z, 4 * n).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn response_scale_equivariance(seed in 0u64..500, c in 0.1f64..10.0) {
            let s = random_spec(seed, 20);
            let sc = s.scale_response(c);
            let o = EigenPrismOptions::default();
            let a = eigenprism_estimate(&s, Target::ThetaSquared, &o).unwrap();
            let b = eigenprism_estimate(&sc, Target::ThetaSquared, &o).unwrap();
            let c2 = c * c;
            let tol = |x: f64| 1e-10 * (1.0 + x.abs() * c2);
            prop_assert!((b.statistic - c2 * a.statistic).abs() <= tol(a.statistic));
            prop_assert!((b.sd_bound - c2 * a.sd_bound).abs() <= tol(a.sd_bound));
            prop_assert!((b.lower - c2 * a.lower).abs() <= tol(a.lower));
            prop_assert!((b.upper - c2 * a.upper).abs() <= tol(a.upper));
            let sa = snr_interval(&s, &o).unwrap();
            let sb = snr_interval(&sc, &o).unwrap();
            prop_assert!((sa.lower - sb.lower).abs() < 1e-10 && (sa.upper - sb.upper).abs() < 1e-10);
        }

        #[test]
        fn intervals_nest_in_alpha(seed in 0u64..500, two_step in any::<bool>()) {
            let s = random_spec(seed, 25);
            for t in [Target::ThetaSquared, Target::SigmaSquared] {
                let wide = eigenprism_estimate(&s, t, &EigenPrismOptions { alpha: 0.01, two_step, ..Default::default() }).unwrap();
                let narrow = eigenprism_estimate(&s, t, &EigenPrismOptions { alpha: 0.05, two_step, ..Default::default() }).unwrap();
                prop_assert!(wide.lower <= narrow.lower && narrow.upper <= wide.upper);
                prop_assert!(wide.lower <= wide.point && wide.point <= wide.upper);
            }
        }

        #[test]
        fn variance_bound_dominates(seed in 0u64..500, t2 in 0.0f64..10.0, s2 in 0.0f64..10.0) {
            let s = random_spec(seed, 15);
            let sol = solve_minmax(s.lambda(), &ConstraintSet::theta2(BTreeSet::new())).unwrap();
            let v = exact_conditional_variance(&sol.w, s.lambda(), t2, s2, s.p()).unwrap();
            let bound = 2.0 * (t2 + s2).powi(2) * sol.objective;
            prop_assert!(v <= bound * (1.0 + 1e-12) + 1e-14);
        }
    }
}

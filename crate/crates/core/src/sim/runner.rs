use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use super::design::{gen_beta, gen_noise, stream, DesignGenerator, DESIGN_STREAM, NOISE_STREAM, PROCEDURE_STREAM};
use super::scenario::{Evaluation, Procedure, Sampler, SimulationScenario};
use super::spectral::sample_gaussian_spectrum;
use crate::error::{Error, Result};
use crate::estimators::{
    bootstrap_t1_interval, eigenprism_estimate, root_scale, snr_interval, t1_interval, Estimand, IntervalEstimate,
    Target,
};
use crate::spectrum::DesignSpectrum;

/// One interval from one trial, with the truth it was scored against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalOutcome {
    pub truth: f64,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub statistic: f64,
    pub sd_bound: f64,
    pub covered: bool,
    /// `(statistic - truth)/sd_bound` on the statistic's own scale.
    pub standardized: f64,
    pub two_step_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// One entry per evaluation, in [`SimulationScenario::evaluations`] order;
    /// failed estimator calls keep their error message.
    pub outcomes: Vec<std::result::Result<IntervalOutcome, String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub scenario: SimulationScenario,
    pub target: Estimand,
    pub procedure: Procedure,
    pub trials: usize,
    pub completed: usize,
    pub failure_count: usize,
    pub empirical_coverage: f64,
    /// `√(cov(1-cov)/completed)`.
    pub se_coverage: f64,
    pub mean_width: f64,
    pub mean_point: f64,
    pub mean_statistic: f64,
    pub sd_statistic: f64,
    pub mean_standardized: f64,
    pub sd_standardized: f64,
    pub expected_undercoverage: bool,
}

/// Value an interval for `target` should cover.
pub fn true_value(s: &SimulationScenario, target: Estimand) -> f64 {
    match target {
        Estimand::ThetaSquared => s.theta2,
        Estimand::SigmaSquared => s.sigma2,
        Estimand::Snr => s.signal_fraction(),
        // β̂ = 0, so the error is ‖β‖
        Estimand::RegressionErrorL2 => s.theta2.sqrt(),
    }
}

fn statistic_truth(s: &SimulationScenario, target: Estimand) -> f64 {
    match target {
        Estimand::RegressionErrorL2 => s.theta2,
        t => true_value(s, t),
    }
}

struct TrialData {
    spectrum: Option<DesignSpectrum>,
    y: Option<Vec<f64>>,
}

fn needs_spectrum(evals: &[Evaluation]) -> bool {
    evals.iter().any(|e| matches!(e.procedure, Procedure::EigenPrism | Procedure::TwoStep))
}

fn generate(s: &SimulationScenario, gen: &DesignGenerator, evals: &[Evaluation], trial: usize) -> Result<TrialData> {
    match s.sampler {
        Sampler::Spectral => {
            let mut d = stream(s.seed, trial, DESIGN_STREAM);
            let mut e = stream(s.seed, trial, NOISE_STREAM);
            let spec = sample_gaussian_spectrum(s.n, s.p, s.theta2, s.sigma2, &mut d, &mut e)?;
            Ok(TrialData { spectrum: Some(spec), y: None })
        }
        Sampler::Explicit => {
            let x = gen.draw(trial)?;
            let beta = gen_beta(s, trial);
            let noise = gen_noise(s, trial)?;
            let y: Vec<f64> = x.matvec(&beta).iter().zip(&noise).map(|(a, b)| a + b).collect();
            let spectrum = if needs_spectrum(evals) { Some(x.spectrum(&y, s.p)?) } else { None };
            Ok(TrialData { spectrum, y: Some(y) })
        }
    }
}

fn evaluate(s: &SimulationScenario, e: Evaluation, data: &TrialData, trial: usize) -> Result<IntervalEstimate> {
    let spectrum = || data.spectrum.as_ref().ok_or_else(|| Error::InvalidInput("spectrum unavailable".into()));
    let y = || data.y.as_deref().ok_or_else(|| Error::InvalidInput("response unavailable".into()));
    match e.procedure {
        Procedure::EigenPrism | Procedure::TwoStep => {
            let mut opts = s.estimator_options();
            opts.two_step |= e.procedure == Procedure::TwoStep;
            let spec = spectrum()?;
            match e.target {
                Estimand::ThetaSquared => eigenprism_estimate(spec, Target::ThetaSquared, &opts),
                Estimand::SigmaSquared => eigenprism_estimate(spec, Target::SigmaSquared, &opts),
                Estimand::Snr => snr_interval(spec, &opts),
                Estimand::RegressionErrorL2 => Ok(root_scale(eigenprism_estimate(spec, Target::ThetaSquared, &opts)?)),
            }
        }
        Procedure::KnownSigmaT1 => t1_interval(y()?, s.sigma2, s.alpha),
        Procedure::BootstrapT1 { replicates } => {
            let seed = stream(s.seed, trial, PROCEDURE_STREAM).next_u64();
            bootstrap_t1_interval(y()?, s.sigma2, s.alpha, replicates, seed)
        }
    }
}

fn outcome(s: &SimulationScenario, target: Estimand, est: IntervalEstimate) -> IntervalOutcome {
    let truth = true_value(s, target);
    IntervalOutcome {
        truth,
        point: est.point,
        lower: est.lower,
        upper: est.upper,
        statistic: est.statistic,
        sd_bound: est.sd_bound,
        covered: est.contains(truth),
        standardized: (est.statistic - statistic_truth(s, target)) / est.sd_bound,
        two_step_fallback: est.two_step_fallback,
    }
}

fn run_one(s: &SimulationScenario, gen: &DesignGenerator, evals: &[Evaluation], trial: usize) -> TrialRecord {
    let outcomes = match generate(s, gen, evals, trial) {
        Ok(data) => evals
            .iter()
            .map(|&e| evaluate(s, e, &data, trial).map(|est| outcome(s, e.target, est)).map_err(|err| err.to_string()))
            .collect(),
        Err(err) => vec![Err(err.to_string()); evals.len()],
    };
    TrialRecord { trial, outcomes }
}

/// Runs every trial. Trials draw from independent per-trial streams, so the
/// records do not depend on the thread count; `threads = Some(k)` caps the
/// worker pool and `Some(1)` runs serially.
pub fn run_trials(s: &SimulationScenario, threads: Option<usize>) -> Result<Vec<TrialRecord>> {
    s.validate()?;
    let gen = DesignGenerator::new(s)?;
    let evals = s.evaluations();
    let work = || -> Vec<TrialRecord> {
        (0..s.trials).into_par_iter().map(|t| run_one(s, &gen, &evals, t)).collect()
    };
    match threads {
        Some(1) => Ok((0..s.trials).map(|t| run_one(s, &gen, &evals, t)).collect()),
        Some(0) => Err(Error::InvalidInput("thread count must be positive".into())),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::InvalidInput(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let v: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    (m, sd)
}

/// Aggregates trial records into one report per evaluation.
pub fn summarize(s: &SimulationScenario, records: &[TrialRecord]) -> Result<Vec<CoverageReport>> {
    let evals = s.evaluations();
    let mut reports = Vec::with_capacity(evals.len());
    for (k, e) in evals.iter().enumerate() {
        let mut ok = Vec::new();
        let mut failures = Vec::new();
        for r in records {
            match &r.outcomes[k] {
                Ok(o) => ok.push(o),
                Err(msg) => failures.push(format!("trial {}: {msg}", r.trial)),
            }
        }
        if ok.is_empty() || (!failures.is_empty() && !s.allow_failures) {
            return Err(Error::TrialFailures {
                count: failures.len(),
                first: failures.first().cloned().unwrap_or_else(|| "no trials".into()),
            });
        }
        let m = ok.len() as f64;
        let cov = ok.iter().filter(|o| o.covered).count() as f64 / m;
        let mean = |f: fn(&IntervalOutcome) -> f64| ok.iter().map(|o| f(o)).sum::<f64>() / m;
        let stats: Vec<f64> = ok.iter().map(|o| o.statistic).collect();
        let std: Vec<f64> = ok.iter().map(|o| o.standardized).collect();
        let (mean_statistic, sd_statistic) = mean_sd(&stats);
        let (mean_standardized, sd_standardized) = mean_sd(&std);
        reports.push(CoverageReport {
            scenario: s.clone(),
            target: e.target,
            procedure: e.procedure,
            trials: records.len(),
            completed: ok.len(),
            failure_count: failures.len(),
            empirical_coverage: cov,
            se_coverage: (cov * (1.0 - cov) / m).sqrt(),
            mean_width: mean(|o| o.upper - o.lower),
            mean_point: mean(|o| o.point),
            mean_statistic,
            sd_statistic,
            mean_standardized,
            sd_standardized,
            expected_undercoverage: s.expected_undercoverage(),
        });
    }
    Ok(reports)
}

/// Reports for the primary evaluation and every companion.
pub fn run_scenario_all(s: &SimulationScenario, threads: Option<usize>) -> Result<Vec<CoverageReport>> {
    summarize(s, &run_trials(s, threads)?)
}

/// Report for the scenario's primary target and procedure.
pub fn run_scenario(s: &SimulationScenario) -> Result<CoverageReport> {
    let mut only = s.clone();
    only.companions.clear();
    Ok(run_scenario_all(&only, None)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::{BetaFamily, DesignFamily};

    #[test]
    fn single_trial_coverage_is_binary() {
        let s = SimulationScenario::new(20, 60, 1.0, 1.0, Estimand::ThetaSquared, 1, 5);
        let r = run_scenario(&s).unwrap();
        assert!(r.empirical_coverage == 0.0 || r.empirical_coverage == 1.0);
        assert_eq!(r.completed, 1);
    }

    #[test]
    fn serial_and_parallel_agree() {
        let mut s = SimulationScenario::new(15, 40, 1.0, 2.0, Estimand::SigmaSquared, 24, 9);
        s.companions.push(Evaluation { target: Estimand::Snr, procedure: Procedure::EigenPrism });
        s.companions.push(Evaluation { target: Estimand::ThetaSquared, procedure: Procedure::KnownSigmaT1 });
        let a = run_trials(&s, Some(1)).unwrap();
        let b = run_trials(&s, Some(3)).unwrap();
        let c = run_trials(&s, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        let reports = summarize(&s, &a).unwrap();
        assert_eq!(reports.len(), 3);
        assert_eq!(reports, summarize(&s, &b).unwrap());
    }

    #[test]
    fn se_matches_formula() {
        let s = SimulationScenario::new(10, 30, 1.0, 1.0, Estimand::ThetaSquared, 40, 2);
        let r = run_scenario(&s).unwrap();
        let c = r.empirical_coverage;
        assert_eq!(r.se_coverage, (c * (1.0 - c) / 40.0).sqrt());
    }

    #[test]
    fn failures_abort_unless_allowed() {
        // zero signal and zero noise cannot be validated, so force an estimator failure instead
        let mut s = SimulationScenario::new(10, 30, 1.0, 1.0, Estimand::ThetaSquared, 3, 2);
        s.procedure = Procedure::BootstrapT1 { replicates: 1000 };
        s.n = 1; // a single response has no bootstrap spread
        assert!(matches!(run_scenario(&s), Err(Error::TrialFailures { count: 3, .. })));
        s.allow_failures = true;
        assert!(matches!(run_scenario(&s), Err(Error::TrialFailures { .. })));
    }

    #[test]
    fn regression_error_truth_is_root_theta() {
        let mut s = SimulationScenario::new(30, 90, 4.0, 1.0, Estimand::RegressionErrorL2, 5, 3);
        s.beta_family = BetaFamily::Sparse { fraction_nonzero: 0.1 };
        s.design = DesignFamily::BernoulliIid { q: 0.2 };
        let recs = run_trials(&s, Some(1)).unwrap();
        for r in recs {
            let o = r.outcomes[0].as_ref().unwrap();
            assert_eq!(o.truth, 2.0);
            assert!((o.point * o.point - o.statistic.max(0.0)).abs() < 1e-9);
        }
        assert!(s.expected_undercoverage());
    }

    #[test]
    fn spectral_sampler_runs() {
        let mut s = SimulationScenario::new(40, 200, 1.0, 1.0, Estimand::ThetaSquared, 50, 4);
        s.sampler = Sampler::Spectral;
        s.companions.push(Evaluation { target: Estimand::ThetaSquared, procedure: Procedure::TwoStep });
        let r = run_scenario_all(&s, Some(2)).unwrap();
        assert!(r.iter().all(|x| x.completed == 50));
    }
}

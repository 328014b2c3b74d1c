//! Monte-Carlo harness: scenario description, data generators, the trial
//! runner and the χ² width-adjustment calculation.

mod design;
mod runner;
mod scenario;
pub mod spectral;
mod chi2_adjust;

pub use design::{correlation_matrix, gen_design, gen_beta, BernoulliDesign, DesignDraw, DesignGenerator};
pub use runner::{
    run_scenario, run_scenario_all, run_trials, summarize, true_value, CoverageReport, IntervalOutcome, TrialRecord,
};
pub use scenario::{
    BetaFamily, CorrelationSpec, DesignFamily, Evaluation, NoiseFamily, Procedure, Sampler, SimulationScenario,
};
pub use chi2_adjust::chi2_width_adjustment_coverage;

//! Interval estimators for θ², σ², SNR and ℓ2 regression error.

mod prism;
mod regression;
mod t1;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::check_alpha;

pub use prism::{eigenprism_estimate, exact_conditional_variance, snr_interval, two_step_interval};
pub use regression::regression_error_interval;
pub(crate) use regression::root_scale;
pub use t1::{bootstrap_t1_interval, t1_interval, DEFAULT_BOOTSTRAP_REPLICATES};

/// Quantity an interval is reported for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimand {
    ThetaSquared,
    SigmaSquared,
    Snr,
    RegressionErrorL2,
}

/// Variance component targeted by the weight programs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    ThetaSquared,
    SigmaSquared,
}

impl From<Target> for Estimand {
    fn from(t: Target) -> Self {
        match t {
            Target::ThetaSquared => Estimand::ThetaSquared,
            Target::SigmaSquared => Estimand::SigmaSquared,
        }
    }
}

/// Weight-solver certificates attached to an EigenPrism interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    pub objective: f64,
    pub delta: Option<f64>,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kkt_residual: f64,
    pub pinned: usize,
    /// First-pass signal fraction, present for 2-step intervals.
    pub rho_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalEstimate {
    pub estimand: Estimand,
    /// Point estimate, clipped into the estimand's admissible range.
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub sd_bound: f64,
    pub clipped_lower: bool,
    pub clipped_upper: bool,
    /// Unclipped statistic the endpoints were built from.
    pub statistic: f64,
    pub diagnostics: Option<SolverDiagnostics>,
    /// Set when a 2-step request fell back to the first-pass interval.
    pub two_step_fallback: bool,
}

impl IntervalEstimate {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    /// Gaussian-approximation interval `stat ± z·sd`, clipped below at zero.
    pub(crate) fn gaussian(estimand: Estimand, stat: f64, sd: f64, z: f64, alpha: f64) -> Self {
        let lo = stat - z * sd;
        let hi = stat + z * sd;
        Self {
            estimand,
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
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenPrismOptions {
    /// Pin the weights of the `zero_first` largest eigenvalues to zero.
    pub zero_first: usize,
    /// Pin the last weight when the smallest eigenvalue is exactly zero.
    pub zero_last_if_null: bool,
    pub alpha: f64,
    pub two_step: bool,
}

impl Default for EigenPrismOptions {
    fn default() -> Self {
        Self { zero_first: 0, zero_last_if_null: true, alpha: 0.05, two_step: false }
    }
}

impl EigenPrismOptions {
    pub fn validate(&self, n: usize) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.zero_first + 2 > n {
            return Err(Error::InvalidConstraints(format!(
                "zero_first = {} leaves fewer than 2 free weights for n = {n}",
                self.zero_first
            )));
        }
        Ok(())
    }

    pub(crate) fn pinned(&self, lambda: &[f64]) -> BTreeSet<usize> {
        let n = lambda.len();
        let mut s: BTreeSet<usize> = (0..self.zero_first.min(n)).collect();
        if self.zero_last_if_null && n > 0 && lambda[n - 1] == 0.0 {
            s.insert(n - 1);
        }
        s
    }
}

use faer::Mat;

use super::{eigenprism_estimate, EigenPrismOptions, Estimand, IntervalEstimate, Target};
use crate::error::{Error, Result};
use crate::model::{whiten, CovarianceSpec, Dataset};
use crate::spectrum::{decompose_any, spectral_decompose};

/// Interval for `‖β - β̂‖₂` (or `‖β_R - β̂_R‖₂` on a column subset, or
/// `‖Σ^{1/2}(β - β̂)‖₂` with an explicit covariance) from a holdout sample.
///
/// `holdout` must be independent of the data `beta_hat` was fitted on. The
/// endpoints are square roots of the θ² endpoints for the residual
/// `y - Xβ̂`; `sd_bound` refers to that squared-scale statistic.
pub fn regression_error_interval(
    holdout: &Dataset,
    beta_hat: &[f64],
    subset: Option<&[usize]>,
    cov: &CovarianceSpec,
    opts: &EigenPrismOptions,
) -> Result<IntervalEstimate> {
    let p = holdout.p();
    if beta_hat.len() != p {
        return Err(Error::DimensionMismatch { what: "beta_hat length", expected: p, found: beta_hat.len() });
    }
    if beta_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("beta_hat"));
    }
    let x = holdout.x();
    let resid: Vec<f64> = (0..holdout.n())
        .map(|i| holdout.y()[i] - (0..p).map(|j| x[(i, j)] * beta_hat[j]).sum::<f64>())
        .collect();

    let spec = match (subset, cov) {
        (None, CovarianceSpec::Identity) => {
            spectral_decompose(&Dataset::new(x.clone(), resid)?)?
        }
        (None, CovarianceSpec::Explicit(_)) => {
            let white = whiten(&Dataset::new(x.clone(), resid)?, cov)?;
            spectral_decompose(&white)?
        }
        (Some(cols), CovarianceSpec::Identity) => {
            let cols = check_subset(cols, p)?;
            let xr = Mat::from_fn(holdout.n(), cols.len(), |i, k| x[(i, cols[k])]);
            decompose_any(&xr, &resid)?
        }
        (Some(_), CovarianceSpec::Explicit(_)) => {
            return Err(Error::InvalidInput(
                "a column subset cannot be combined with an explicit covariance".into(),
            ))
        }
    };

    Ok(root_scale(eigenprism_estimate(&spec, Target::ThetaSquared, opts)?))
}

/// Maps a θ² interval for a residual onto the `‖β - β̂‖₂` scale.
pub(crate) fn root_scale(t: IntervalEstimate) -> IntervalEstimate {
    IntervalEstimate {
        estimand: Estimand::RegressionErrorL2,
        point: t.statistic.max(0.0).sqrt(),
        lower: t.lower.sqrt(),
        upper: t.upper.sqrt(),
        ..t
    }
}

fn check_subset(cols: &[usize], p: usize) -> Result<Vec<usize>> {
    if cols.is_empty() {
        return Err(Error::InvalidInput("column subset is empty".into()));
    }
    let mut sorted = cols.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != cols.len() {
        return Err(Error::InvalidInput("column subset contains duplicates".into()));
    }
    if let Some(&bad) = sorted.iter().find(|&&j| j >= p) {
        return Err(Error::InvalidInput(format!("subset column {bad} out of range for p = {p}")));
    }
    Ok(sorted)
}

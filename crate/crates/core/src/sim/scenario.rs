use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EigenPrismOptions, Estimand};
use crate::special::check_alpha;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrelationSpec {
    /// Unit diagonal, constant `rho` off the diagonal.
    Dense { rho: f64 },
    /// Off-diagonal entries `±magnitude` in an alternating pattern, projected
    /// onto the PSD cone and rescaled to unit diagonal.
    Sparse { magnitude: f64 },
}

/// Distribution of the design entries. Non-Gaussian families are centred and
/// scaled to mean 0, variance 1 in distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignFamily {
    GaussianIid,
    BernoulliIid { q: f64 },
    StudentT { df: f64 },
    CorrelatedGaussian { correlation: CorrelationSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BetaFamily {
    /// i.i.d. standard normal, renormalised to `‖β‖² = θ²`.
    DenseGaussianDirection,
    /// As above, with all but `⌈fraction_nonzero·p⌉` entries zeroed first.
    Sparse { fraction_nonzero: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    /// Student t scaled to variance σ² (requires `df > 2`).
    StudentT { df: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Procedure {
    /// EigenPrism interval; honours `options.two_step`.
    EigenPrism,
    /// 2-step refinement regardless of `options.two_step`.
    TwoStep,
    /// Exact χ² interval with the true σ² supplied.
    KnownSigmaT1,
    /// BCa bootstrap on T1 with the true σ² supplied.
    BootstrapT1 { replicates: usize },
}

/// How each trial's spectral summary is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Generate `X`, `β`, `ε` and reduce.
    Explicit,
    /// Draw `(λ, z)` directly from their joint law under an i.i.d. Gaussian
    /// design and Gaussian noise (bidiagonal Laguerre model). Exact in
    /// distribution and O(n²) per trial.
    Spectral,
}

/// One interval computed on every trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub target: Estimand,
    pub procedure: Procedure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationScenario {
    pub n: usize,
    pub p: usize,
    pub design: DesignFamily,
    pub beta_family: BetaFamily,
    pub theta2: f64,
    pub sigma2: f64,
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
    pub target: Estimand,
    #[serde(default = "default_procedure")]
    pub procedure: Procedure,
    #[serde(default)]
    pub options: EigenPrismOptions,
    #[serde(default = "default_noise")]
    pub noise: NoiseFamily,
    #[serde(default = "default_sampler")]
    pub sampler: Sampler,
    /// Draw β once per scenario instead of once per trial.
    #[serde(default)]
    pub fixed_beta: bool,
    /// Further intervals evaluated on the same trials.
    #[serde(default)]
    pub companions: Vec<Evaluation>,
    #[serde(default)]
    pub allow_failures: bool,
}

fn default_procedure() -> Procedure {
    Procedure::EigenPrism
}

fn default_noise() -> NoiseFamily {
    NoiseFamily::Gaussian
}

fn default_sampler() -> Sampler {
    Sampler::Explicit
}

impl SimulationScenario {
    /// Scenario with Gaussian design, dense β, Gaussian noise and the
    /// EigenPrism procedure.
    pub fn new(n: usize, p: usize, theta2: f64, sigma2: f64, target: Estimand, trials: usize, seed: u64) -> Self {
        Self {
            n,
            p,
            design: DesignFamily::GaussianIid,
            beta_family: BetaFamily::DenseGaussianDirection,
            theta2,
            sigma2,
            alpha: 0.05,
            trials,
            seed,
            target,
            procedure: Procedure::EigenPrism,
            options: EigenPrismOptions::default(),
            noise: NoiseFamily::Gaussian,
            sampler: Sampler::Explicit,
            fixed_beta: false,
            companions: Vec::new(),
            allow_failures: false,
        }
    }

    pub fn evaluations(&self) -> Vec<Evaluation> {
        std::iter::once(Evaluation { target: self.target, procedure: self.procedure })
            .chain(self.companions.iter().copied())
            .collect()
    }

    /// Options actually passed to the estimators (`alpha` taken from the scenario).
    pub fn estimator_options(&self) -> EigenPrismOptions {
        EigenPrismOptions { alpha: self.alpha, ..self.options }
    }

    /// Sparse design with sparse β, where undercoverage is expected.
    pub fn expected_undercoverage(&self) -> bool {
        matches!(self.design, DesignFamily::BernoulliIid { .. }) && matches!(self.beta_family, BetaFamily::Sparse { .. })
    }

    pub fn signal_fraction(&self) -> f64 {
        self.theta2 / (self.theta2 + self.sigma2)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n == 0 || self.p == 0 {
            return bad(format!("dimensions must be positive, got n = {}, p = {}", self.n, self.p));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.theta2 >= 0.0 && self.sigma2 >= 0.0 && self.theta2.is_finite() && self.sigma2.is_finite()) {
            return bad("theta2 and sigma2 must be finite and non-negative".into());
        }
        if !(self.theta2 + self.sigma2 > 0.0) {
            return bad("theta2 + sigma2 must be positive".into());
        }
        check_alpha(self.alpha)?;
        match self.design {
            DesignFamily::BernoulliIid { q } if !(q > 0.0 && q < 1.0) => {
                return bad(format!("Bernoulli rate must lie in (0, 1), got {q}"))
            }
            DesignFamily::StudentT { df } if !(df > 2.0) => {
                return bad(format!("design t degrees of freedom must exceed 2, got {df}"))
            }
            DesignFamily::CorrelatedGaussian { correlation } => check_correlation(correlation, self.p)?,
            _ => {}
        }
        if let NoiseFamily::StudentT { df } = self.noise {
            if !(df > 2.0) {
                return bad(format!("noise t degrees of freedom must exceed 2, got {df}"));
            }
        }
        if let BetaFamily::Sparse { fraction_nonzero: f } = self.beta_family {
            if !(f > 0.0 && f <= 1.0) {
                return bad(format!("nonzero fraction must lie in (0, 1], got {f}"));
            }
        }
        if self.sampler == Sampler::Spectral
            && (self.design != DesignFamily::GaussianIid || self.noise != NoiseFamily::Gaussian)
        {
            return bad("the spectral sampler requires an i.i.d. Gaussian design and Gaussian noise".into());
        }
        for e in self.evaluations() {
            match e.procedure {
                Procedure::KnownSigmaT1 | Procedure::BootstrapT1 { .. } => {
                    if e.target != Estimand::ThetaSquared {
                        return bad("known-sigma procedures only target theta2".into());
                    }
                    if self.sampler == Sampler::Spectral {
                        return bad("known-sigma procedures need the explicit sampler".into());
                    }
                    if let Procedure::BootstrapT1 { replicates } = e.procedure {
                        if replicates < 1000 {
                            return bad(format!("at least 1000 bootstrap replicates are required, got {replicates}"));
                        }
                    }
                }
                Procedure::EigenPrism | Procedure::TwoStep => {
                    if self.n > self.p {
                        return Err(Error::DimensionError { n: self.n, p: self.p });
                    }
                    self.estimator_options().validate(self.n)?;
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn check_correlation(c: CorrelationSpec, p: usize) -> Result<()> {
    match c {
        CorrelationSpec::Dense { rho } => {
            let floor = if p > 1 { -1.0 / (p as f64 - 1.0) } else { -1.0 };
            if !(rho.is_finite() && rho >= floor && rho <= 1.0) {
                return Err(Error::InvalidCorrelation(format!(
                    "constant correlation {rho} is not positive semidefinite for p = {p} (needs {floor} <= rho <= 1)"
                )));
            }
        }
        CorrelationSpec::Sparse { magnitude } => {
            if !(magnitude.is_finite() && magnitude.abs() < 1.0) {
                return Err(Error::InvalidCorrelation(format!("off-diagonal magnitude {magnitude} must lie in (-1, 1)")));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut s = SimulationScenario::new(50, 200, 1.0, 1.0, Estimand::SigmaSquared, 10, 3);
        s.design = DesignFamily::BernoulliIid { q: 0.1 };
        s.companions.push(Evaluation { target: Estimand::ThetaSquared, procedure: Procedure::TwoStep });
        let text = toml::to_string(&s).unwrap();
        let back: SimulationScenario = toml::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let text = r#"
            n = 20
            p = 40
            theta2 = 1.0
            sigma2 = 2.0
            alpha = 0.1
            trials = 5
            seed = 1
            target = "snr"
            design = { kind = "gaussian_iid" }
            beta_family = { kind = "sparse", fraction_nonzero = 0.1 }
        "#;
        let s: SimulationScenario = toml::from_str(text).unwrap();
        assert_eq!(s.procedure, Procedure::EigenPrism);
        assert_eq!(s.sampler, Sampler::Explicit);
        assert!(s.options.zero_last_if_null);
        s.validate().unwrap();
    }

    #[test]
    fn validation_errors() {
        let mut s = SimulationScenario::new(20, 40, 0.0, 0.0, Estimand::ThetaSquared, 5, 1);
        assert!(s.validate().is_err());
        s.sigma2 = 1.0;
        s.validate().unwrap();
        s.design = DesignFamily::CorrelatedGaussian { correlation: CorrelationSpec::Dense { rho: -0.5 } };
        assert!(matches!(s.validate(), Err(Error::InvalidCorrelation(_))));
        s.design = DesignFamily::GaussianIid;
        s.target = Estimand::Snr;
        s.procedure = Procedure::KnownSigmaT1;
        assert!(s.validate().is_err());
        s.procedure = Procedure::EigenPrism;
        s.n = 50;
        assert!(matches!(s.validate(), Err(Error::DimensionError { .. })));
    }
}

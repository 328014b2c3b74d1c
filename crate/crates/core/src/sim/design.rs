//! Random designs, coefficient vectors and noise for the Monte-Carlo harness.

use faer::{Mat, Side};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, StandardNormal, StudentT};

use super::scenario::{check_correlation, BetaFamily, CorrelationSpec, DesignFamily, NoiseFamily, SimulationScenario};
use crate::error::{Error, Result};
use crate::spectrum::{gram_eigen, DesignSpectrum};

const STREAMS_PER_TRIAL: u64 = 4;
pub(crate) const DESIGN_STREAM: u64 = 0;
pub(crate) const BETA_STREAM: u64 = 1;
pub(crate) const NOISE_STREAM: u64 = 2;
pub(crate) const PROCEDURE_STREAM: u64 = 3;
const FIXED_BETA_STREAM: u64 = u64::MAX;

/// Independent generator for one (trial, purpose) pair.
pub(crate) fn stream(seed: u64, trial: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 * STREAMS_PER_TRIAL + purpose);
    rng
}

/// Correlation matrix of a [`CorrelationSpec`].
pub fn correlation_matrix(spec: CorrelationSpec, p: usize) -> Result<Mat<f64>> {
    check_correlation(spec, p)?;
    match spec {
        CorrelationSpec::Dense { rho } => Ok(Mat::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho })),
        CorrelationSpec::Sparse { .. } => {
            let f = sparse_factor(spec, p)?;
            let mut c = &f * f.transpose();
            for i in 0..p {
                c[(i, i)] = 1.0;
            }
            Ok(c)
        }
    }
}

/// Factor `F` with `F Fᵀ` equal to the sparse correlation matrix: the
/// alternating pattern (`+m` among even indices, `-m` among odd indices, `0`
/// across parities) is projected onto the PSD cone by eigenvalue clipping
/// and rescaled to unit diagonal.
fn sparse_factor(spec: CorrelationSpec, p: usize) -> Result<Mat<f64>> {
    let CorrelationSpec::Sparse { magnitude } = spec else {
        unreachable!("dense correlation has a closed-form factor")
    };
    let raw = Mat::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else if i % 2 != j % 2 {
            0.0
        } else if i % 2 == 0 {
            magnitude
        } else {
            -magnitude
        }
    });
    let eig = raw
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("correlation eigendecomposition failed: {e:?}")))?;
    let vals = eig.S().column_vector();
    let u = eig.U();
    let root = Mat::from_fn(p, p, |i, k| u[(i, k)] * vals[k].max(0.0).sqrt());
    let mut f = root;
    for i in 0..p {
        let d: f64 = f.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(d > 0.0) {
            return Err(Error::InvalidCorrelation(format!("projection left variable {i} with zero variance")));
        }
        for k in 0..p {
            f[(i, k)] /= d;
        }
    }
    Ok(f)
}

/// Bernoulli(q) design stored by column, standardised as `(b - q)/√(q(1-q))`.
#[derive(Debug, Clone)]
pub struct BernoulliDesign {
    n: usize,
    p: usize,
    q: f64,
    /// Rows holding a one, per column.
    ones: Vec<Vec<u32>>,
}

impl BernoulliDesign {
    fn draw(n: usize, p: usize, q: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        let geo = Geometric::new(q).map_err(|e| Error::InvalidInput(format!("Bernoulli rate: {e}")))?;
        let total = (n as u64) * (p as u64);
        let mut ones = vec![Vec::new(); p];
        // column-major positions of ones via geometric gaps
        let mut pos = geo.sample(rng);
        while pos < total {
            ones[(pos / n as u64) as usize].push((pos % n as u64) as u32);
            pos = pos.saturating_add(1).saturating_add(geo.sample(rng));
        }
        Ok(Self { n, p, q, ones })
    }

    fn scale(&self) -> f64 {
        (self.q * (1.0 - self.q)).sqrt()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let s = self.scale();
        let mut x = Mat::from_fn(self.n, self.p, |_, _| -self.q / s);
        for (j, rows) in self.ones.iter().enumerate() {
            for &i in rows {
                x[(i as usize, j)] = (1.0 - self.q) / s;
            }
        }
        x
    }

    fn matvec(&self, beta: &[f64]) -> Vec<f64> {
        let s = self.scale();
        let shift = self.q * beta.iter().sum::<f64>();
        let mut out = vec![-shift; self.n];
        for (j, rows) in self.ones.iter().enumerate() {
            for &i in rows {
                out[i as usize] += beta[j];
            }
        }
        out.iter_mut().for_each(|v| *v /= s);
        out
    }

    /// `X Xᵀ` from the sparse pattern: `(BBᵀ - q(r1ᵀ + 1rᵀ) + q²p 11ᵀ)/s²`.
    fn gram(&self) -> Mat<f64> {
        let n = self.n;
        let mut bb = Mat::<f64>::zeros(n, n);
        let mut r = vec![0.0; n];
        for rows in &self.ones {
            for (a, &i) in rows.iter().enumerate() {
                r[i as usize] += 1.0;
                for &k in &rows[..=a] {
                    bb[(i as usize, k as usize)] += 1.0;
                }
            }
        }
        let s2 = self.q * (1.0 - self.q);
        let c = self.q * self.q * self.p as f64;
        Mat::from_fn(n, n, |i, k| {
            let v = if i >= k { bb[(i, k)] } else { bb[(k, i)] };
            (v - self.q * (r[i] + r[k]) + c) / s2
        })
    }
}

/// One draw of the design matrix.
#[derive(Debug, Clone)]
pub enum DesignDraw {
    Dense(Mat<f64>),
    Bernoulli(BernoulliDesign),
}

impl DesignDraw {
    pub fn to_dense(&self) -> Mat<f64> {
        match self {
            DesignDraw::Dense(x) => x.clone(),
            DesignDraw::Bernoulli(b) => b.to_dense(),
        }
    }

    pub fn matvec(&self, beta: &[f64]) -> Vec<f64> {
        match self {
            DesignDraw::Dense(x) => {
                (0..x.nrows()).map(|i| (0..x.ncols()).map(|j| x[(i, j)] * beta[j]).sum()).collect()
            }
            DesignDraw::Bernoulli(b) => b.matvec(beta),
        }
    }

    pub fn gram(&self) -> Mat<f64> {
        match self {
            DesignDraw::Dense(x) => x * x.transpose(),
            DesignDraw::Bernoulli(b) => b.gram(),
        }
    }

    /// Spectral summary of this design with response `y`; trailing
    /// eigenvalues are zero when `n > p`.
    pub fn spectrum(&self, y: &[f64], p: usize) -> Result<DesignSpectrum> {
        let (lambda, u) = gram_eigen(&self.gram(), p as f64)?;
        let z = (0..u.ncols()).map(|k| u.col(k).iter().zip(y).map(|(a, b)| a * b).sum()).collect();
        Ok(DesignSpectrum::from_trusted(lambda, z, p))
    }
}

/// Scenario-level state shared across trials (correlation factors).
#[derive(Debug, Clone)]
pub struct DesignGenerator {
    family: DesignFamily,
    n: usize,
    p: usize,
    seed: u64,
    factor: Option<Mat<f64>>,
}

impl DesignGenerator {
    pub fn new(s: &SimulationScenario) -> Result<Self> {
        let factor = match s.design {
            DesignFamily::CorrelatedGaussian { correlation: c @ CorrelationSpec::Sparse { .. } } => {
                check_correlation(c, s.p)?;
                Some(sparse_factor(c, s.p)?)
            }
            DesignFamily::CorrelatedGaussian { correlation } => {
                check_correlation(correlation, s.p)?;
                None
            }
            _ => None,
        };
        Ok(Self { family: s.design, n: s.n, p: s.p, seed: s.seed, factor })
    }

    pub fn draw(&self, trial: usize) -> Result<DesignDraw> {
        let mut rng = stream(self.seed, trial, DESIGN_STREAM);
        let (n, p) = (self.n, self.p);
        let normal = |rng: &mut ChaCha8Rng| rng.sample::<f64, _>(StandardNormal);
        Ok(match self.family {
            DesignFamily::GaussianIid => DesignDraw::Dense(Mat::from_fn(n, p, |_, _| normal(&mut rng))),
            DesignFamily::BernoulliIid { q } => DesignDraw::Bernoulli(BernoulliDesign::draw(n, p, q, &mut rng)?),
            DesignFamily::StudentT { df } => {
                let t = StudentT::new(df).map_err(|e| Error::InvalidInput(format!("t design: {e}")))?;
                let sd = (df / (df - 2.0)).sqrt();
                DesignDraw::Dense(Mat::from_fn(n, p, |_, _| t.sample(&mut rng) / sd))
            }
            DesignFamily::CorrelatedGaussian { correlation } => {
                let z = Mat::from_fn(n, p, |_, _| normal(&mut rng));
                match (correlation, &self.factor) {
                    (_, Some(f)) => DesignDraw::Dense(&z * f.transpose()),
                    (CorrelationSpec::Dense { rho }, None) => DesignDraw::Dense(equicorrelated(&z, rho)),
                    (CorrelationSpec::Sparse { .. }, None) => unreachable!("sparse factor is precomputed"),
                }
            }
        })
    }
}

/// `Z (I(1-ρ) + ρ11ᵀ)^{1/2}`, computed row-wise in O(np).
fn equicorrelated(z: &Mat<f64>, rho: f64) -> Mat<f64> {
    let (n, p) = (z.nrows(), z.ncols());
    if rho >= 1.0 {
        return Mat::from_fn(n, p, |i, _| z[(i, 0)]);
    }
    let a = (1.0 - rho).sqrt();
    let c = rho / (1.0 - rho);
    let k = ((1.0 + c * p as f64).max(0.0).sqrt() - 1.0) / p as f64;
    let shifts: Vec<f64> = (0..n).map(|i| a * k * z.row(i).iter().sum::<f64>()).collect();
    Mat::from_fn(n, p, |i, j| a * z[(i, j)] + shifts[i])
}

/// Design matrix of `trial`, deterministic in `(seed, trial)`.
pub fn gen_design(s: &SimulationScenario, trial: usize) -> Result<Mat<f64>> {
    Ok(DesignGenerator::new(s)?.draw(trial)?.to_dense())
}

/// Coefficient vector with `‖β‖² = θ²`.
pub fn gen_beta(s: &SimulationScenario, trial: usize) -> Vec<f64> {
    let mut rng = if s.fixed_beta {
        let mut r = ChaCha8Rng::seed_from_u64(s.seed);
        r.set_stream(FIXED_BETA_STREAM);
        r
    } else {
        stream(s.seed, trial, BETA_STREAM)
    };
    let p = s.p;
    if s.theta2 == 0.0 {
        return vec![0.0; p];
    }
    let mut beta = vec![0.0; p];
    match s.beta_family {
        BetaFamily::DenseGaussianDirection => {
            beta.iter_mut().for_each(|b| *b = rng.sample(StandardNormal));
        }
        BetaFamily::Sparse { fraction_nonzero } => {
            let k = ((fraction_nonzero * p as f64 - 1e-9).ceil() as usize).clamp(1, p);
            for j in index::sample(&mut rng, p, k) {
                beta[j] = rng.sample(StandardNormal);
            }
        }
    }
    let norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    let scale = s.theta2.sqrt() / norm;
    beta.iter_mut().for_each(|b| *b *= scale);
    beta
}

/// Noise vector of variance σ² per entry.
pub(crate) fn gen_noise(s: &SimulationScenario, trial: usize) -> Result<Vec<f64>> {
    let mut rng = stream(s.seed, trial, NOISE_STREAM);
    let sigma = s.sigma2.sqrt();
    Ok(match s.noise {
        NoiseFamily::Gaussian => (0..s.n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect(),
        NoiseFamily::StudentT { df } => {
            let t = StudentT::new(df).map_err(|e| Error::InvalidInput(format!("t noise: {e}")))?;
            let sd = (df / (df - 2.0)).sqrt();
            (0..s.n).map(|_| sigma * t.sample(&mut rng) / sd).collect()
        }
    })
}

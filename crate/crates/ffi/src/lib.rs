//! C interface to `eigenprism`.
//!
//! Every function returns an [`EpStatus`]; on failure a description is
//! available from [`ep_last_error_message`] on the same thread. Matrices are
//! passed row-major. Objects are opaque and released with their `_free`
//! function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use eigenprism::estimators::{
    bootstrap_t1_interval, eigenprism_estimate, snr_interval, t1_interval, EigenPrismOptions, Estimand,
    IntervalEstimate, Target,
};
use eigenprism::model::Dataset;
use eigenprism::mp::mp_model;
use eigenprism::sim::chi2_width_adjustment_coverage;
use eigenprism::solver::{kkt_residual, solve_minmax, ConstraintSet};
use eigenprism::spectrum::{spectral_decompose, DesignSpectrum};
use eigenprism::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionError = 3,
    DimensionMismatch = 4,
    NotPositiveDefinite = 5,
    ConstantColumn = 6,
    EmptySplit = 7,
    SingularSystem = 8,
    DegenerateDual = 9,
    InvalidConstraints = 10,
    InvalidAlpha = 11,
    DegenerateBootstrap = 12,
    ZeroResponse = 13,
    InvalidGamma = 14,
    NormalizationError = 15,
    InvalidCorrelation = 16,
    NonFinite = 17,
    Numerical = 18,
    TrialFailures = 19,
    Io = 20,
    Parse = 21,
    Panic = 99,
}

impl From<&Error> for EpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::ConstantColumn(_) => EpStatus::ConstantColumn,
            Error::NotPositiveDefinite(_) => EpStatus::NotPositiveDefinite,
            Error::DimensionError { .. } => EpStatus::DimensionError,
            Error::DimensionMismatch { .. } => EpStatus::DimensionMismatch,
            Error::EmptySplit { .. } => EpStatus::EmptySplit,
            Error::SingularSystem => EpStatus::SingularSystem,
            Error::DegenerateDual => EpStatus::DegenerateDual,
            Error::InvalidConstraints(_) => EpStatus::InvalidConstraints,
            Error::InvalidAlpha(_) => EpStatus::InvalidAlpha,
            Error::DegenerateBootstrap => EpStatus::DegenerateBootstrap,
            Error::ZeroResponse => EpStatus::ZeroResponse,
            Error::InvalidGamma(_) => EpStatus::InvalidGamma,
            Error::NormalizationError { .. } => EpStatus::NormalizationError,
            Error::InvalidCorrelation(_) => EpStatus::InvalidCorrelation,
            Error::NonFinite(_) => EpStatus::NonFinite,
            Error::Numerical(_) => EpStatus::Numerical,
            Error::TrialFailures { .. } => EpStatus::TrialFailures,
            Error::InvalidInput(_) => EpStatus::InvalidInput,
            Error::Io(_) => EpStatus::Io,
            Error::Parse(_) => EpStatus::Parse,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpEstimand {
    ThetaSquared = 0,
    SigmaSquared = 1,
    Snr = 2,
    RegressionErrorL2 = 3,
}

impl From<Estimand> for EpEstimand {
    fn from(e: Estimand) -> Self {
        match e {
            Estimand::ThetaSquared => EpEstimand::ThetaSquared,
            Estimand::SigmaSquared => EpEstimand::SigmaSquared,
            Estimand::Snr => EpEstimand::Snr,
            Estimand::RegressionErrorL2 => EpEstimand::RegressionErrorL2,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpTarget {
    ThetaSquared = 0,
    SigmaSquared = 1,
}

impl From<EpTarget> for Target {
    fn from(t: EpTarget) -> Self {
        match t {
            EpTarget::ThetaSquared => Target::ThetaSquared,
            EpTarget::SigmaSquared => Target::SigmaSquared,
        }
    }
}

/// Estimator settings; start from [`ep_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EpOptions {
    pub zero_first: usize,
    pub zero_last_if_null: bool,
    pub alpha: f64,
    pub two_step: bool,
}

impl From<EpOptions> for EigenPrismOptions {
    fn from(o: EpOptions) -> Self {
        EigenPrismOptions { zero_first: o.zero_first, zero_last_if_null: o.zero_last_if_null, alpha: o.alpha, two_step: o.two_step }
    }
}

/// Confidence interval. `objective`, `delta` and `kkt_residual` are NaN when
/// the procedure has no weight solve (or no dual weight).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EpInterval {
    pub estimand: EpEstimand,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub sd_bound: f64,
    pub statistic: f64,
    pub clipped_lower: bool,
    pub clipped_upper: bool,
    pub two_step_fallback: bool,
    pub objective: f64,
    pub delta: f64,
    pub kkt_residual: f64,
}

impl From<IntervalEstimate> for EpInterval {
    fn from(e: IntervalEstimate) -> Self {
        let d = e.diagnostics.as_ref();
        EpInterval {
            estimand: e.estimand.into(),
            point: e.point,
            lower: e.lower,
            upper: e.upper,
            alpha: e.alpha,
            sd_bound: e.sd_bound,
            statistic: e.statistic,
            clipped_lower: e.clipped_lower,
            clipped_upper: e.clipped_upper,
            two_step_fallback: e.two_step_fallback,
            objective: d.map_or(f64::NAN, |d| d.objective),
            delta: d.and_then(|d| d.delta).unwrap_or(f64::NAN),
            kkt_residual: d.map_or(f64::NAN, |d| d.kkt_residual),
        }
    }
}

/// Certificates of a weight solve.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EpWeightInfo {
    pub objective: f64,
    pub delta: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kkt_residual: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EpMpModel {
    pub gamma: f64,
    pub support_lo: f64,
    pub support_hi: f64,
    pub median: f64,
    pub a: f64,
    pub b: f64,
    pub sd: f64,
    pub are_upper_bound: f64,
}

/// Opaque spectral summary `(λ, z)` of a dataset.
pub struct EpSpectrum(DesignSpectrum);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            EpStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            EpStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            (&e).into()
        }
        Err(_) => {
            set_error("internal panic".into());
            EpStatus::Panic
        }
    }
}

unsafe fn input<'a>(ptr: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a, T>(ptr: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    ptr.as_mut().ok_or(Fail::Null(what))
}

/// Message for the last failed call on this thread (empty after success).
/// Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn ep_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ep_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn ep_options_default() -> EpOptions {
    let d = EigenPrismOptions::default();
    EpOptions { zero_first: d.zero_first, zero_last_if_null: d.zero_last_if_null, alpha: d.alpha, two_step: d.two_step }
}

/// Spectral summary of the `n × p` row-major design `x` with response `y`.
#[no_mangle]
pub unsafe extern "C" fn ep_spectrum_from_data(
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut EpSpectrum,
) -> EpStatus {
    guard(|| {
        let out = output(out, "out")?;
        let len = n.checked_mul(p).ok_or_else(|| Error::InvalidInput("n * p overflows".into()))?;
        let x = input(x, len, "x")?;
        let y = input(y, n, "y")?;
        let rows: Vec<Vec<f64>> = x.chunks(p.max(1)).map(<[f64]>::to_vec).collect();
        let data = Dataset::from_rows(&rows, y.to_vec())?;
        *out = Box::into_raw(Box::new(EpSpectrum(spectral_decompose(&data)?)));
        Ok(())
    })
}

/// Spectral summary from precomputed eigenvalues of `XXᵀ/p` and `z = Uᵀy`.
#[no_mangle]
pub unsafe extern "C" fn ep_spectrum_from_parts(
    lambda: *const f64,
    z: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut EpSpectrum,
) -> EpStatus {
    guard(|| {
        let out = output(out, "out")?;
        let l = input(lambda, n, "lambda")?;
        let z = input(z, n, "z")?;
        *out = Box::into_raw(Box::new(EpSpectrum(DesignSpectrum::from_parts(l.to_vec(), z.to_vec(), p)?)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ep_spectrum_free(spec: *mut EpSpectrum) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Number of observations, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ep_spectrum_n(spec: *const EpSpectrum) -> usize {
    spec.as_ref().map_or(0, |s| s.0.n())
}

/// Copies the eigenvalues (non-increasing) into `out`, which holds `len` values.
#[no_mangle]
pub unsafe extern "C" fn ep_spectrum_lambda(spec: *const EpSpectrum, out: *mut f64, len: usize) -> EpStatus {
    guard(|| {
        let s = spec.as_ref().ok_or(Fail::Null("spec"))?;
        copy_out(s.0.lambda(), out, len)
    })
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> Result<(), Fail> {
    if len != src.len() {
        return Err(Error::DimensionMismatch { what: "output buffer", expected: src.len(), found: len }.into());
    }
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    slice::from_raw_parts_mut(out, len).copy_from_slice(src);
    Ok(())
}

unsafe fn options(opts: *const EpOptions) -> Result<EigenPrismOptions, Fail> {
    Ok((*opts.as_ref().ok_or(Fail::Null("opts"))?).into())
}

/// EigenPrism interval for θ² or σ².
#[no_mangle]
pub unsafe extern "C" fn ep_estimate(
    spec: *const EpSpectrum,
    target: EpTarget,
    opts: *const EpOptions,
    out: *mut EpInterval,
) -> EpStatus {
    guard(|| {
        let s = spec.as_ref().ok_or(Fail::Null("spec"))?;
        let o = options(opts)?;
        let out = output(out, "out")?;
        *out = eigenprism_estimate(&s.0, target.into(), &o)?.into();
        Ok(())
    })
}

/// Interval for the signal fraction θ²/(θ²+σ²).
#[no_mangle]
pub unsafe extern "C" fn ep_snr(spec: *const EpSpectrum, opts: *const EpOptions, out: *mut EpInterval) -> EpStatus {
    guard(|| {
        let s = spec.as_ref().ok_or(Fail::Null("spec"))?;
        let o = options(opts)?;
        let out = output(out, "out")?;
        *out = snr_interval(&s.0, &o)?.into();
        Ok(())
    })
}

/// Exact χ² interval for θ² with known σ².
#[no_mangle]
pub unsafe extern "C" fn ep_t1(y: *const f64, n: usize, sigma2: f64, alpha: f64, out: *mut EpInterval) -> EpStatus {
    guard(|| {
        let y = input(y, n, "y")?;
        let out = output(out, "out")?;
        *out = t1_interval(y, sigma2, alpha)?.into();
        Ok(())
    })
}

/// BCa bootstrap interval for θ² with known σ² (`replicates >= 1000`).
#[no_mangle]
pub unsafe extern "C" fn ep_bootstrap_t1(
    y: *const f64,
    n: usize,
    sigma2: f64,
    alpha: f64,
    replicates: usize,
    seed: u64,
    out: *mut EpInterval,
) -> EpStatus {
    guard(|| {
        let y = input(y, n, "y")?;
        let out = output(out, "out")?;
        *out = bootstrap_t1_interval(y, sigma2, alpha, replicates, seed)?.into();
        Ok(())
    })
}

/// Min-max weights for the spectrum `lambda` (length `n`, non-increasing),
/// with the first `zero_first` and last `zero_last` weights pinned to zero.
/// `w` receives `n` weights.
#[no_mangle]
pub unsafe extern "C" fn ep_solve_weights(
    lambda: *const f64,
    n: usize,
    target: EpTarget,
    zero_first: usize,
    zero_last: usize,
    w: *mut f64,
    info: *mut EpWeightInfo,
) -> EpStatus {
    guard(|| {
        let lam = input(lambda, n, "lambda")?;
        let info = output(info, "info")?;
        if zero_first.saturating_add(zero_last) > n {
            return Err(Error::InvalidConstraints(format!("cannot pin {zero_first} + {zero_last} of {n} weights")).into());
        }
        let pinned = (0..zero_first).chain(n - zero_last..n).collect();
        let cons = match target {
            EpTarget::ThetaSquared => ConstraintSet::theta2(pinned),
            EpTarget::SigmaSquared => ConstraintSet::sigma2(pinned),
        };
        let sol = solve_minmax(lam, &cons)?;
        copy_out(&sol.w, w, n)?;
        *info = EpWeightInfo {
            objective: sol.objective,
            delta: sol.delta.unwrap_or(f64::NAN),
            kappa1: sol.kappa1,
            kappa2: sol.kappa2,
            kkt_residual: kkt_residual(lam, &sol, &cons),
        };
        Ok(())
    })
}

/// Marčenko–Pastur constants for ratio `gamma` in (0, 1).
#[no_mangle]
pub unsafe extern "C" fn ep_mp_model(gamma: f64, out: *mut EpMpModel) -> EpStatus {
    guard(|| {
        let out = output(out, "out")?;
        let m = mp_model(gamma)?;
        *out = EpMpModel {
            gamma: m.gamma,
            support_lo: m.support_lo,
            support_hi: m.support_hi,
            median: m.median,
            a: m.a,
            b: m.b,
            sd: m.sd(),
            are_upper_bound: m.are_upper_bound(),
        };
        Ok(())
    })
}

/// `P(|N(0,1)| ≤ z*·W/n)` with `W ~ χ²ₙ`.
#[no_mangle]
pub unsafe extern "C" fn ep_chi2_width_adjustment_coverage(n: usize, alpha: f64, out: *mut f64) -> EpStatus {
    guard(|| {
        let out = output(out, "out")?;
        *out = chi2_width_adjustment_coverage(n, alpha)?;
        Ok(())
    })
}

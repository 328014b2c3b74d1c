//! Minimum-variance weights for the statistic `Σ wᵢ zᵢ²`.
//!
//! Both programs share the same shape: two linear equality constraints
//! (`Σw = a`, `Σwλ = b`) and either a weighted quadratic objective `Σ cᵢwᵢ²`
//! or the min-max objective `max(Σw², Σw²λ²)`. The weighted problem has a
//! closed form. The min-max problem is solved through its scalar dual
//!
//! ```text
//! f(δ) = min_w  δ Σw² + (1-δ) Σw²λ²,   δ ∈ [0, 1],
//! ```
//!
//! which is concave with derivative `Σw(δ)² - Σw(δ)²λ²`. The maximiser is
//! located on a grid, refined by golden-section search and finished by
//! bisection on the sign of the derivative.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};

/// Lower end of the dual search interval when `δ = 0` is not admissible.
pub const DELTA_MIN: f64 = 1e-10;
/// Default number of dual grid points used to seed the search.
pub const DEFAULT_GRID: usize = 1024;

/// Right-hand sides of `Σw = sum_target` and `Σwλ = lam_target`, plus the
/// set of (0-based) indices whose weight is pinned to zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintSet {
    sum_target: f64,
    lam_target: f64,
    forced_zero: BTreeSet<usize>,
}

impl ConstraintSet {
    pub fn new(sum_target: f64, lam_target: f64, forced_zero: BTreeSet<usize>) -> Result<Self> {
        let ok = (sum_target, lam_target) == (0.0, 1.0) || (sum_target, lam_target) == (1.0, 0.0);
        if !ok {
            return Err(Error::InvalidConstraints(format!(
                "targets ({sum_target}, {lam_target}) must be (0, 1) or (1, 0)"
            )));
        }
        Ok(Self { sum_target, lam_target, forced_zero })
    }

    /// Unbiased for θ²: `Σw = 0`, `Σwλ = 1`.
    pub fn theta2(forced_zero: BTreeSet<usize>) -> Self {
        Self { sum_target: 0.0, lam_target: 1.0, forced_zero }
    }

    /// Unbiased for σ²: `Σw = 1`, `Σwλ = 0`.
    pub fn sigma2(forced_zero: BTreeSet<usize>) -> Self {
        Self { sum_target: 1.0, lam_target: 0.0, forced_zero }
    }

    pub fn sum_target(&self) -> f64 {
        self.sum_target
    }

    pub fn lam_target(&self) -> f64 {
        self.lam_target
    }

    pub fn forced_zero(&self) -> &BTreeSet<usize> {
        &self.forced_zero
    }

    fn free_indices(&self, n: usize) -> Result<Vec<usize>> {
        if let Some(&bad) = self.forced_zero.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidConstraints(format!("pinned index {bad} out of range for n = {n}")));
        }
        let free: Vec<usize> = (0..n).filter(|i| !self.forced_zero.contains(i)).collect();
        if free.len() < 2 {
            return Err(Error::InvalidConstraints(format!(
                "only {} free weight(s) remain; at least 2 are required",
                free.len()
            )));
        }
        Ok(free)
    }
}

/// Optimal weights and their certificates.
///
/// `kappa1`, `kappa2` are the multipliers of the two equality constraints in
/// the stationarity condition `2cᵢwᵢ + κ₁ + κ₂λᵢ = 0` on free indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightSolution {
    pub w: Vec<f64>,
    pub objective: f64,
    /// Dual weight on `Σw²`; `None` for a weighted-quadratic solve.
    pub delta: Option<f64>,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl WeightSolution {
    pub fn sum_sq(&self) -> f64 {
        self.w.iter().map(|w| w * w).sum()
    }

    pub fn sum_sq_lambda_sq(&self, lambda: &[f64]) -> f64 {
        self.w.iter().zip(lambda).map(|(w, l)| (w * l).powi(2)).sum()
    }

    /// `Σ wᵢ zᵢ²`.
    pub fn statistic(&self, z: &[f64]) -> f64 {
        self.w.iter().zip(z).map(|(w, z)| w * z * z).sum()
    }
}

/// Free-index view of a problem instance.
struct Reduced {
    lam: Vec<f64>,
    idx: Vec<usize>,
    n: usize,
    a: f64,
    b: f64,
}

/// Closed-form inner solution in centered coordinates.
struct Inner {
    s0: f64,
    m: f64,
    v: f64,
}

impl Inner {
    fn coef(&self, a: f64, b: f64) -> (f64, f64) {
        (a / self.s0, (b - a * self.m) / self.v)
    }
}

impl Reduced {
    fn new(lambda: &[f64], cons: &ConstraintSet) -> Result<Self> {
        if lambda.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("eigenvalues"));
        }
        let idx = cons.free_indices(lambda.len())?;
        Ok(Self {
            lam: idx.iter().map(|&i| lambda[i]).collect(),
            idx,
            n: lambda.len(),
            a: cons.sum_target,
            b: cons.lam_target,
        })
    }

    fn inner(&self, c: impl Fn(usize) -> f64) -> Result<Inner> {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (k, &l) in self.lam.iter().enumerate() {
            let ic = 1.0 / c(k);
            s0 += ic;
            s1 += l * ic;
            s2 += l * l * ic;
        }
        let m = s1 / s0;
        let v: f64 = self.lam.iter().enumerate().map(|(k, &l)| (l - m).powi(2) / c(k)).sum();
        // normalised determinant of the 2x2 moment system
        if !(v > 1e-14 * s2) || !v.is_finite() {
            return Err(Error::SingularSystem);
        }
        Ok(Inner { s0, m, v })
    }

    fn weight(&self, inn: &Inner, k: usize, ck: f64) -> f64 {
        let (p, q) = inn.coef(self.a, self.b);
        (p + q * (self.lam[k] - inn.m)) / ck
    }

    /// `(Σw², Σw²λ²)` of the inner minimiser at dual weight `delta`.
    fn forms(&self, delta: f64) -> Result<(f64, f64)> {
        let c = |k: usize| delta + (1.0 - delta) * self.lam[k] * self.lam[k];
        let inn = self.inner(c)?;
        let (mut f, mut g) = (0.0, 0.0);
        for k in 0..self.lam.len() {
            let w = self.weight(&inn, k, c(k));
            f += w * w;
            g += (w * self.lam[k]).powi(2);
        }
        Ok((f, g))
    }

    fn dual(&self, delta: f64) -> Result<f64> {
        let (f, g) = self.forms(delta)?;
        Ok(delta * f + (1.0 - delta) * g)
    }

    fn solution(&self, c: impl Fn(usize) -> f64, delta: Option<f64>) -> Result<WeightSolution> {
        let inn = self.inner(&c)?;
        let mut w = vec![0.0; self.n];
        for (k, &i) in self.idx.iter().enumerate() {
            w[i] = self.weight(&inn, k, c(k));
        }
        let (p, q) = inn.coef(self.a, self.b);
        // w = (μ₁ + μ₂λ)/(2c) with μ₂ = 2q, μ₁ = 2p - μ₂m; κ = -μ
        let mu2 = 2.0 * q;
        let mu1 = 2.0 * p - mu2 * inn.m;
        let objective = match delta {
            Some(_) => {
                let f: f64 = w.iter().map(|v| v * v).sum();
                let g: f64 = self.idx.iter().map(|&i| (w[i] * self.lam_of(i)).powi(2)).sum();
                f.max(g)
            }
            None => self.idx.iter().enumerate().map(|(k, &i)| c(k) * w[i] * w[i]).sum(),
        };
        Ok(WeightSolution { w, objective, delta, kappa1: -mu1, kappa2: -mu2 })
    }

    fn lam_of(&self, i: usize) -> f64 {
        let k = self.idx.binary_search(&i).expect("free index");
        self.lam[k]
    }
}

/// Minimises `Σ cᵢwᵢ²` subject to the constraints, in closed form.
pub fn solve_weighted_quadratic(lambda: &[f64], c: &[f64], cons: &ConstraintSet) -> Result<WeightSolution> {
    if c.len() != lambda.len() {
        return Err(Error::DimensionMismatch { what: "weight vector c", expected: lambda.len(), found: c.len() });
    }
    let red = Reduced::new(lambda, cons)?;
    let cf: Vec<f64> = red.idx.iter().map(|&i| c[i]).collect();
    if let Some(bad) = cf.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidInput(format!("quadratic weights must be positive, got {bad}")));
    }
    red.solution(|k| cf[k], None)
}

/// Search settings for [`solve_minmax_with`].
#[derive(Debug, Clone, Copy)]
pub struct MinMaxOptions {
    pub grid_points: usize,
}

impl Default for MinMaxOptions {
    fn default() -> Self {
        Self { grid_points: DEFAULT_GRID }
    }
}

/// Minimises `max(Σw², Σw²λ²)` subject to the constraints.
pub fn solve_minmax(lambda: &[f64], cons: &ConstraintSet) -> Result<WeightSolution> {
    solve_minmax_with(lambda, cons, MinMaxOptions::default())
}

pub fn solve_minmax_with(lambda: &[f64], cons: &ConstraintSet, opts: MinMaxOptions) -> Result<WeightSolution> {
    let red = Reduced::new(lambda, cons)?;
    let delta = maximize_dual(&red, opts.grid_points.max(3))?;
    red.solution(|k| delta + (1.0 - delta) * red.lam[k] * red.lam[k], Some(delta))
}

/// Dual function `f(δ)`.
pub fn dual_value(lambda: &[f64], cons: &ConstraintSet, delta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidInput(format!("dual weight must lie in [0, 1], got {delta}")));
    }
    Reduced::new(lambda, cons)?.dual(delta)
}

fn maximize_dual(red: &Reduced, grid: usize) -> Result<f64> {
    let g = |d: f64| red.forms(d).map(|(f, g)| f - g);

    // Grid seed; singular points are skipped.
    let pts: Vec<f64> = (0..grid)
        .map(|k| DELTA_MIN + (1.0 - DELTA_MIN) * k as f64 / (grid - 1) as f64)
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (k, &d) in pts.iter().enumerate() {
        if let Ok(v) = red.dual(d) {
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((k, v));
            }
        }
    }
    let (kb, _) = best.ok_or(Error::DegenerateDual)?;

    // Boundary optima.
    if kb == 0 && g(DELTA_MIN).is_ok_and(|v| v <= 0.0) {
        if red.lam.iter().all(|&l| l > 0.0) && red.forms(0.0).is_ok() {
            return Ok(0.0);
        }
        return Ok(DELTA_MIN);
    }
    if kb == grid - 1 && g(1.0).is_ok_and(|v| v >= 0.0) {
        return Ok(1.0);
    }

    // Golden-section on the bracketing grid cell pair.
    let mut lo = pts[kb.saturating_sub(1)];
    let mut hi = pts[(kb + 1).min(grid - 1)];
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = red.dual(x1)?;
    let mut f2 = red.dual(x2)?;
    for _ in 0..60 {
        if hi - lo <= 1e-9 * hi {
            break;
        }
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = red.dual(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = red.dual(x2)?;
        }
    }

    // Derivative polish: smallest δ with f'(δ) <= 0 inside a sign bracket.
    let (mut a, mut b) = (lo, hi);
    let widen = |x: f64, step: f64| (x + step).clamp(DELTA_MIN, 1.0);
    let mut step = (hi - lo).max(1e-12);
    while a > DELTA_MIN && g(a)? <= 0.0 {
        a = widen(a, -step);
        step *= 2.0;
    }
    step = (hi - lo).max(1e-12);
    while b < 1.0 && g(b)? > 0.0 {
        b = widen(b, step);
        step *= 2.0;
    }
    if g(a)? <= 0.0 {
        return Ok(a);
    }
    if g(b)? > 0.0 {
        return Ok(b);
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if g(mid)? <= 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(b)
}

fn constraint_violation(lambda: &[f64], w: &[f64], cons: &ConstraintSet) -> f64 {
    let s: f64 = w.iter().sum();
    let sl: f64 = w.iter().zip(lambda).map(|(w, l)| w * l).sum();
    let pinned: f64 = cons.forced_zero.iter().filter_map(|&i| w.get(i)).map(|v| v.abs()).sum();
    (s - cons.sum_target).abs() + (sl - cons.lam_target).abs() + pinned
}

fn stationarity(lambda: &[f64], w: &[f64], cons: &ConstraintSet, k1: f64, k2: f64, c: impl Fn(usize) -> f64) -> f64 {
    (0..lambda.len())
        .filter(|i| !cons.forced_zero.contains(i))
        .map(|i| (2.0 * c(i) * w[i] + k1 + k2 * lambda[i]).abs())
        .fold(0.0, f64::max)
}

/// KKT residual of a min-max solution: stationarity of the Lagrangian on free
/// indices, constraint violations, pinned weights and complementary slackness
/// of the dual weight. Returns infinity for a weighted-quadratic solution.
pub fn kkt_residual(lambda: &[f64], sol: &WeightSolution, cons: &ConstraintSet) -> f64 {
    let Some(d) = sol.delta else {
        return f64::INFINITY;
    };
    if sol.w.len() != lambda.len() {
        return f64::INFINITY;
    }
    let stat = stationarity(lambda, &sol.w, cons, sol.kappa1, sol.kappa2, |i| d + (1.0 - d) * lambda[i] * lambda[i]);
    let f = sol.sum_sq();
    let g = sol.sum_sq_lambda_sq(lambda);
    let obj = f.max(g);
    let slack = d * (obj - f) + (1.0 - d) * (obj - g);
    stat + constraint_violation(lambda, &sol.w, cons) + slack
}

/// KKT residual of a weighted-quadratic solution with weights `c`.
pub fn quadratic_kkt_residual(lambda: &[f64], c: &[f64], sol: &WeightSolution, cons: &ConstraintSet) -> f64 {
    if sol.w.len() != lambda.len() || c.len() != lambda.len() {
        return f64::INFINITY;
    }
    stationarity(lambda, &sol.w, cons, sol.kappa1, sol.kappa2, |i| c[i]) + constraint_violation(lambda, &sol.w, cons)
}

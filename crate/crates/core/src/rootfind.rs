//! Scalar root solve for the drift-implicit step.
//!
//! One implicit step requires the unique positive root of
//!
//! ```text
//! F(y) = y - h (a_{-1} y^{-1} - a_0 + a_1 y - a_2 y^gamma) - rhs
//! ```
//!
//! Under `h a_1 < 1` the residual is strictly increasing on `(0, inf)` with
//! `F(0+) = -inf` and `F(inf) = +inf`, so a sign-changing bracket always
//! exists and contains exactly one root. The solver brackets first, then
//! runs Newton from the bracket midpoint with every iterate projected back
//! into the shrinking bracket; bisection steps are substituted whenever a
//! Newton step leaves the bracket or the derivative misbehaves. Convergence
//! is therefore guaranteed, and quadratic near the root.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Real;

/// Iteration budget; pure bisection from any realistic bracket converges to
/// machine precision well before this.
const MAX_ITERATIONS: usize = 200;

/// One implicit-step equation: stepsize, model constants and the explicit
/// part `rhs = y_prev + diffusion/jump increments`.
///
/// Invariant: `h * a_1 < 1`, the strict-monotonicity condition that makes
/// the positive root unique.
#[derive(Debug, Clone, Copy)]
pub struct ImplicitStepProblem<T> {
    h: T,
    params: ModelParams<T>,
    rhs: T,
}

impl<T: Real> ImplicitStepProblem<T> {
    pub fn new(h: T, params: ModelParams<T>, rhs: T) -> Result<Self> {
        if !h.is_finite() || h <= T::zero() {
            return Err(Error::InvalidParameter(format!(
                "stepsize must be positive and finite, got {h}"
            )));
        }
        if h * params.a1 >= T::one() {
            return Err(Error::Precondition(format!(
                "h * a1 = {} must be below 1 for a unique positive solution",
                h * params.a1
            )));
        }
        if !rhs.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "right-hand side must be finite, got {rhs}"
            )));
        }
        Ok(Self { h, params, rhs })
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn rhs(&self) -> T {
        self.rhs
    }

    /// Residual `F(y)`; strictly increasing in `y` on the positive axis.
    pub fn residual(&self, y: T) -> T {
        let p = &self.params;
        let mu = p.a_neg1 / y - p.a0 + p.a1 * y - p.a2 * y.powf(p.gamma);
        y - self.h * mu - self.rhs
    }

    /// Residual derivative `F'(y) = 1 + h a_{-1} y^{-2} - h a_1
    /// + h a_2 gamma y^{gamma-1}`.
    pub fn residual_prime(&self, y: T) -> T {
        let p = &self.params;
        T::one() + self.h * (p.a_neg1 / (y * y) - p.a1 + p.a2 * p.gamma * y.powf(p.gamma - T::one()))
    }

    /// Default tolerances: well below Monte Carlo noise in double
    /// precision, clamped to a few epsilon for narrower scalar types.
    pub fn default_tolerances() -> (T, T) {
        let eps = T::epsilon();
        let four = T::from_f64_lossy(4.0);
        (
            T::from_f64_lossy(1e-12).max(four * eps),
            T::from_f64_lossy(1e-14).max(four * T::min_positive_value()),
        )
    }
}

/// Finds the positive root of `prob` to within
/// `|F(y)| <= abs_tol + rel_tol * (|y| + |rhs|)`.
pub fn solve<T: Real>(prob: &ImplicitStepProblem<T>, rel_tol: T, abs_tol: T) -> Result<T> {
    if !rel_tol.is_finite() || !abs_tol.is_finite() || rel_tol <= T::zero() || abs_tol <= T::zero()
    {
        return Err(Error::InvalidParameter(
            "solver tolerances must be positive".into(),
        ));
    }
    let (mut lo, mut hi) = bracket(prob)?;
    debug_assert!(prob.residual(lo) < T::zero() && prob.residual(hi) > T::zero());

    let half = T::from_f64_lossy(0.5);
    let mut y = half * (lo + hi);
    for _ in 0..MAX_ITERATIONS {
        let f = prob.residual(y);
        if f.abs() <= abs_tol + rel_tol * (y.abs() + prob.rhs.abs()) {
            return Ok(y);
        }
        // maintain the sign-changing bracket
        if f < T::zero() {
            lo = y;
        } else {
            hi = y;
        }
        let fp = prob.residual_prime(y);
        let newton = y - f / fp;
        // fall back to bisection when Newton leaves the bracket or the
        // derivative under/overflowed
        y = if fp.is_finite() && fp > T::zero() && newton > lo && newton < hi {
            newton
        } else {
            half * (lo + hi)
        };
        // bracket collapsed to adjacent floats: return the better endpoint
        if !(lo < y && y < hi) {
            let (f_lo, f_hi) = (prob.residual(lo).abs(), prob.residual(hi).abs());
            return Ok(if f_lo <= f_hi { lo } else { hi });
        }
    }
    Err(Error::IterationLimit {
        iterations: MAX_ITERATIONS,
        lo: lo.to_f64().unwrap_or(f64::NAN),
        hi: hi.to_f64().unwrap_or(f64::NAN),
    })
}

/// Solves with the default tolerances.
pub fn solve_default<T: Real>(prob: &ImplicitStepProblem<T>) -> Result<T> {
    let (rel, abs) = ImplicitStepProblem::<T>::default_tolerances();
    solve(prob, rel, abs)
}

/// Constructs a sign-changing bracket `F(lo) < 0 < F(hi)`.
///
/// `lo` starts at `min(1, max(rhs, 0) + 1) / 2` and halves; the singular
/// `-h a_{-1} / y` term forces `F` negative before `lo` underflows. `hi`
/// starts at `max(1, rhs + 1)` and doubles; the `+ h a_2 y^gamma` term
/// forces `F` positive. Should the power overflow first, `hi` is pulled
/// back multiplicatively until the residual is finite again.
fn bracket<T: Real>(prob: &ImplicitStepProblem<T>) -> Result<(T, T)> {
    let one = T::one();
    let half = T::from_f64_lossy(0.5);
    let two = T::from_f64_lossy(2.0);

    let mut lo = half * one.min(prob.rhs.max(T::zero()) + one);
    while prob.residual(lo) >= T::zero() {
        lo *= half;
        if lo <= T::min_positive_value() {
            return Err(Error::Precondition(
                "failed to bracket the root from below".into(),
            ));
        }
    }

    let mut hi = one.max(prob.rhs + one);
    let mut f_hi = prob.residual(hi);
    while f_hi <= T::zero() || !f_hi.is_finite() {
        if !f_hi.is_finite() {
            // overflow in y^gamma: shrink back toward the geometric middle
            hi = (lo * hi).sqrt();
        } else {
            hi *= two;
        }
        if !hi.is_finite() || hi <= lo {
            return Err(Error::Precondition(
                "failed to bracket the root from above".into(),
            ));
        }
        f_hi = prob.residual(hi);
    }
    Ok((lo, hi))
}

//! Model coefficients and parameter-regime analysis.
//!
//! The rate process treated by this crate solves
//!
//! ```text
//! dX = (a_{-1} X^{-1} - a_0 + a_1 X - a_2 X^gamma) dt + b X^theta dW + phi(X_-) dN
//! ```
//!
//! on the positive half-line, with all coefficient constants positive and
//! `gamma, theta > 1`. The drift is singular at the origin and superlinearly
//! damping at infinity; the jump coefficient `phi` is one of three admissible
//! choices ([`JumpKind`]). Two parameter regimes are supported: the strict
//! regime `gamma + 1 > 2 theta` and the critical balance `gamma + 1 = 2 theta`,
//! the latter only when `a_2 / b^2 > 2 gamma - 3/2`.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Tolerance for deciding `gamma + 1 == 2 theta` in floating point.
/// Calibrated for f64 inputs; exact-rational parameters classify exactly.
const REGIME_EQ_TOL: f64 = 1e-12;

/// Relative slack applied to the jump lower-bound check so that choices
/// sitting exactly on the bound (e.g. `phi(x) = -0.2 x` with eps0 = 0.8)
/// are not rejected by a one-ulp rounding of `x + phi(x)`.
const LOWER_BOUND_SLACK: f64 = 1e-9;

/// Constants of the rate model, jump intensity and initial value.
///
/// Invariants: `a_neg1, a0, a1, a2, b, lambda, x0 > 0` and `gamma, theta > 1`.
/// Construct with a struct literal and call [`ModelParams::validate`] before
/// handing the parameters to a solver or experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    /// Coefficient of the singular mean-reversion term `x^{-1}`.
    pub a_neg1: T,
    /// Constant drift offset (entering with a minus sign).
    pub a0: T,
    /// Linear drift coefficient.
    pub a1: T,
    /// Superlinear damping coefficient of `x^gamma`.
    pub a2: T,
    /// Diffusion scale.
    pub b: T,
    /// Drift power, `> 1`.
    pub gamma: T,
    /// Diffusion power, `> 1`.
    pub theta: T,
    /// Poisson jump intensity per unit time.
    pub lambda: T,
    /// Initial value of the process.
    pub x0: T,
}

impl<T: Real> ModelParams<T> {
    /// Checks the structural invariants listed on the type.
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("a_neg1", self.a_neg1),
            ("a0", self.a0),
            ("a1", self.a1),
            ("a2", self.a2),
            ("b", self.b),
            ("lambda", self.lambda),
            ("x0", self.x0),
        ];
        for (name, v) in pos {
            if !v.is_finite() || v <= T::zero() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be strictly positive and finite, got {v}"
                )));
            }
        }
        for (name, v) in [("gamma", self.gamma), ("theta", self.theta)] {
            if !v.is_finite() || v <= T::one() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must exceed 1, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Parameter regime of the model, as decided by [`classify_regime`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `gamma + 1 > 2 theta`: the damping term dominates the diffusion.
    Strict,
    /// `gamma + 1 = 2 theta` (within tolerance). `critical_ok` records
    /// whether `a_2 / b^2 > 2 gamma - 3/2` holds, which the critical-case
    /// convergence theory requires.
    Critical { critical_ok: bool },
    /// `gamma + 1 < 2 theta`: outside the supported theory.
    Unsupported,
}

impl Regime {
    /// True for regimes the experiment layer accepts.
    pub fn is_supported(&self) -> bool {
        matches!(self, Regime::Strict | Regime::Critical { critical_ok: true })
    }
}

/// Decides the parameter regime of `p`.
///
/// Equality `gamma + 1 = 2 theta` is taken up to an absolute tolerance of
/// 1e-12 so that parameters entered as decimal literals classify as intended.
pub fn classify_regime<T: Real>(p: &ModelParams<T>) -> Regime {
    let gap = p.gamma + T::one() - (p.theta + p.theta);
    let tol = T::from_f64_lossy(REGIME_EQ_TOL);
    if gap > tol {
        Regime::Strict
    } else if gap < -tol {
        Regime::Unsupported
    } else {
        let three_halves = T::from_f64_lossy(1.5);
        let critical_ok = p.a2 / (p.b * p.b) > p.gamma + p.gamma - three_halves;
        Regime::Critical { critical_ok }
    }
}

/// Drift coefficient `a_{-1} x^{-1} - a_0 + a_1 x - a_2 x^gamma`.
pub fn drift<T: Real>(p: &ModelParams<T>, x: T) -> Result<T> {
    check_positive(x)?;
    Ok(p.a_neg1 / x - p.a0 + p.a1 * x - p.a2 * x.powf(p.gamma))
}

/// Derivative of the drift, `-a_{-1} x^{-2} + a_1 - a_2 gamma x^{gamma-1}`.
pub fn drift_prime<T: Real>(p: &ModelParams<T>, x: T) -> Result<T> {
    check_positive(x)?;
    Ok(p.a1 - p.a_neg1 / (x * x) - p.a2 * p.gamma * x.powf(p.gamma - T::one()))
}

/// Diffusion coefficient `b x^theta`.
pub fn diffusion<T: Real>(p: &ModelParams<T>, x: T) -> Result<T> {
    check_positive(x)?;
    Ok(p.b * x.powf(p.theta))
}

fn check_positive<T: Real>(x: T) -> Result<()> {
    if !x.is_finite() || x <= T::zero() {
        return Err(Error::Domain(format!(
            "state must be strictly positive and finite, got {x}"
        )));
    }
    Ok(())
}

/// The admissible jump coefficient functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpKind<T> {
    /// `phi(x) = c x` with `c > -1`.
    LinearScale(T),
    /// `phi(x) = x`.
    Identity,
    /// `phi(x) = sin(x)`.
    Sine,
}

/// A jump coefficient together with the constants of its admissibility
/// conditions: a global Lipschitz bound `M` and a lower-bound constant
/// `eps0` with `x + phi(x) > eps0 * min(1, x)` for all `x > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpSpec<T> {
    pub kind: JumpKind<T>,
    pub lipschitz_m: T,
    pub lower_eps0: T,
}

impl<T: Real> JumpSpec<T> {
    /// Linear jump `phi(x) = c x`. Requires `c > -1`, otherwise
    /// `x + phi(x)` would not stay positive.
    pub fn linear_scale(c: T) -> Result<Self> {
        if !c.is_finite() || c <= -T::one() {
            return Err(Error::InvalidParameter(format!(
                "linear jump scale must satisfy c > -1, got {c}"
            )));
        }
        Ok(Self {
            kind: JumpKind::LinearScale(c),
            lipschitz_m: c.abs(),
            lower_eps0: T::one() + c,
        })
    }

    /// Identity jump `phi(x) = x`. The sharp lower-bound constant is 2;
    /// 1.9 leaves margin for rounding.
    pub fn identity() -> Self {
        Self {
            kind: JumpKind::Identity,
            lipschitz_m: T::one(),
            lower_eps0: T::from_f64_lossy(1.9),
        }
    }

    /// Sinusoidal jump `phi(x) = sin(x)`. `x + sin(x)` exceeds
    /// `min(1, x)` on the positive axis; 0.99 keeps a strict margin.
    pub fn sine() -> Self {
        Self {
            kind: JumpKind::Sine,
            lipschitz_m: T::one(),
            lower_eps0: T::from_f64_lossy(0.99),
        }
    }

    /// Evaluates the jump coefficient at `x > 0`.
    pub fn phi(&self, x: T) -> Result<T> {
        check_positive(x)?;
        Ok(match self.kind {
            JumpKind::LinearScale(c) => c * x,
            JumpKind::Identity => x,
            JumpKind::Sine => x.sin(),
        })
    }

    /// Checks the two admissibility conditions at a single point pair.
    /// The lower bound is tested with a small relative slack because
    /// `eps0` may sit exactly on the sharp constant.
    pub fn check_admissible_at(&self, x: T, y: T) -> Result<()> {
        let (fx, fy) = (self.phi(x)?, self.phi(y)?);
        if (fx - fy).abs() > self.lipschitz_m * (x - y).abs() * lipschitz_slack::<T>() {
            return Err(Error::InvalidParameter(format!(
                "Lipschitz bound M = {} violated at x = {x}, y = {y}",
                self.lipschitz_m
            )));
        }
        let bound = self.lower_eps0 * x.min(T::one());
        if x + fx < bound * (T::one() - T::from_f64_lossy(LOWER_BOUND_SLACK)) {
            return Err(Error::InvalidParameter(format!(
                "lower bound x + phi(x) > eps0 min(1, x) violated at x = {x}"
            )));
        }
        Ok(())
    }
}

fn lipschitz_slack<T: Real>() -> T {
    T::one() + T::from_f64_lossy(1e-9)
}

/// One-sided Lipschitz constant `L` of the drift-diffusion pair in the
/// strict regime: for any `q > 2`,
///
/// ```text
/// <x - y, mu(x) - mu(y)> + (q-1)/2 |phi(x) - phi(y)|^2  <=  L |x - y|^2
/// ```
///
/// with `L = a_1 + sup_{x>0} ( (q-1)/2 b^2 theta^2 x^{2 theta - 2}
/// - a_2 gamma x^{gamma - 1} )`, evaluated here in closed form. The
/// admissible implicit stepsize is `h < 1 / (2 L)`.
pub fn monotonicity_constant<T: Real>(p: &ModelParams<T>, q: T) -> Result<T> {
    let two = T::from_f64_lossy(2.0);
    if classify_regime(p) != Regime::Strict {
        return Err(Error::Precondition(
            "monotonicity constant requires the strict regime gamma + 1 > 2 theta".into(),
        ));
    }
    if !q.is_finite() || q <= two {
        return Err(Error::Precondition(format!("q must exceed 2, got {q}")));
    }
    let one = T::one();
    let gap = p.gamma + one - two * p.theta;
    let qm1_b2_th2 = (q - one) * p.b * p.b * p.theta * p.theta;
    let prefactor = qm1_b2_th2 * gap / (two * (p.gamma - one));
    let base = qm1_b2_th2 * (p.theta - one) / (p.a2 * p.gamma * (p.gamma - one));
    let exponent = (two * p.theta - two) / gap;
    Ok(p.a1 + prefactor * base.powf(exponent))
}

/// Largest implicit stepsize covered by the critical-case theory, `1 / (2 a_1)`.
pub fn critical_step_bound<T: Real>(p: &ModelParams<T>) -> Result<T> {
    match classify_regime(p) {
        Regime::Critical { critical_ok: true } => {
            Ok(T::one() / (T::from_f64_lossy(2.0) * p.a1))
        }
        Regime::Critical { critical_ok: false } => Err(Error::Precondition(
            "critical regime requires a2 / b^2 > 2 gamma - 3/2".into(),
        )),
        _ => Err(Error::Precondition(
            "stepsize bound 1/(2 a1) applies to the critical regime only".into(),
        )),
    }
}

/// Stepsize bound `h < 1 / (2 L)` resp. `h < 1 / (2 a_1)` for the regime of
/// `p`, using the default exponent `q = 3` in the strict case. Errors in the
/// unsupported regime.
pub fn theorem_step_bound<T: Real>(p: &ModelParams<T>) -> Result<T> {
    match classify_regime(p) {
        Regime::Strict => {
            let l = monotonicity_constant(p, T::from_f64_lossy(DEFAULT_Q))?;
            Ok(T::one() / (T::from_f64_lossy(2.0) * l))
        }
        Regime::Critical { .. } => critical_step_bound(p),
        Regime::Unsupported => Err(Error::Precondition(
            "regime unsupported: gamma + 1 < 2 * theta".into(),
        )),
    }
}

/// Default exponent for [`monotonicity_constant`]: the smallest simple
/// value above 2.
pub const DEFAULT_Q: f64 = 3.0;

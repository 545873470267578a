//! One-step maps and path simulation.
//!
//! Two schemes share the same driving increments:
//!
//! * `Bem` — the drift-implicit backward Euler map. Each step solves
//!   `Y_n = Y_{n-1} + h mu(Y_n) + b Y_{n-1}^theta dW + phi(Y_{n-1}) dN`
//!   for `Y_n`, which is always strictly positive (see [`crate::rootfind`]).
//! * `Em` — the explicit Euler-Maruyama map, kept for comparison. It does
//!   not preserve positivity; a path is frozen ("absorbed") at its first
//!   non-positive value because fractional powers of negative states are
//!   undefined, and the positivity census only needs the first crossing.

use crate::error::{Error, Result};
use crate::model::{JumpSpec, ModelParams};
use crate::noise::{self, NoiseGrid};
use crate::rootfind::{self, ImplicitStepProblem};
use crate::scalar::Real;

/// Explicit paths whose magnitude passes this bound are declared diverged
/// and frozen; they are tallied separately from negative paths.
const DIVERGENCE_BOUND: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    /// Drift-implicit backward Euler.
    Bem,
    /// Explicit Euler-Maruyama.
    Em,
}

/// Outcome of simulating one path on one grid level.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult<T> {
    /// Value at the final grid point (frozen value for absorbed paths).
    pub terminal: T,
    /// True iff every computed state stayed strictly positive.
    pub positive: bool,
    /// Step index of the first non-positive state, if any.
    pub first_negative_step: Option<usize>,
    /// True iff the path was frozen at a non-positive value.
    pub absorbed: bool,
    /// True iff the path was frozen after exceeding the divergence bound
    /// (or producing a non-finite value) while still positive.
    pub diverged: bool,
    /// Per-step states `Y_0, ..., Y_N`, kept only on request.
    pub trajectory: Option<Vec<T>>,
}

/// One backward Euler step from `y_prev > 0`. Requires `h * a1 < 1`.
pub fn bem_step<T: Real>(
    p: &ModelParams<T>,
    jump: &JumpSpec<T>,
    h: T,
    y_prev: T,
    dw: T,
    dn: u32,
) -> Result<T> {
    if !y_prev.is_finite() || y_prev <= T::zero() {
        return Err(Error::Domain(format!(
            "backward Euler step requires a positive previous state, got {y_prev}"
        )));
    }
    let rhs = y_prev
        + p.b * y_prev.powf(p.theta) * dw
        + jump.phi(y_prev)? * T::from_u32(dn).unwrap();
    let prob = ImplicitStepProblem::new(h, *p, rhs)?;
    let y = rootfind::solve_default(&prob)?;
    if y.is_nan() || y <= T::zero() {
        // cannot happen for a correct solve; checked rather than assumed
        return Err(Error::PathAborted {
            step: 0,
            reason: format!("implicit step produced non-positive state {y}"),
        });
    }
    Ok(y)
}

/// One explicit Euler-Maruyama step. Non-positive previous states are
/// frozen (returned unchanged); divergence handling lives in the path loop.
pub fn em_step<T: Real>(
    p: &ModelParams<T>,
    jump: &JumpSpec<T>,
    h: T,
    y_prev: T,
    dw: T,
    dn: u32,
) -> T {
    if !y_prev.is_finite() || y_prev <= T::zero() {
        return y_prev;
    }
    let mu = p.a_neg1 / y_prev - p.a0 + p.a1 * y_prev - p.a2 * y_prev.powf(p.gamma);
    let phi = jump.phi(y_prev).expect("y_prev > 0 checked above");
    y_prev + h * mu + p.b * y_prev.powf(p.theta) * dw + phi * T::from_u32(dn).unwrap()
}

/// Simulates one path at `level`, consuming the coarsened increments of
/// `grid`. `Y_0 = x0`; the per-step positivity census is recorded in the
/// result.
pub fn simulate_path<T: Real>(
    p: &ModelParams<T>,
    jump: &JumpSpec<T>,
    kind: SchemeKind,
    grid: &NoiseGrid<T>,
    level: u32,
    keep_trajectory: bool,
) -> Result<PathResult<T>> {
    let (dw, dn) = noise::coarsen(grid, level)?;
    let h = grid.step_size(level);
    simulate_with_increments(p, jump, kind, h, &dw, &dn, keep_trajectory)
}

/// Simulation core over explicit increment arrays. [`simulate_path`] is the
/// coarsening front end; calling this directly with the same arrays gives
/// bit-identical results.
pub fn simulate_with_increments<T: Real>(
    p: &ModelParams<T>,
    jump: &JumpSpec<T>,
    kind: SchemeKind,
    h: T,
    dw: &[T],
    dn: &[u32],
    keep_trajectory: bool,
) -> Result<PathResult<T>> {
    if dw.len() != dn.len() {
        return Err(Error::Precondition(format!(
            "increment arrays disagree in length: {} vs {}",
            dw.len(),
            dn.len()
        )));
    }
    if kind == SchemeKind::Bem && h * p.a1 >= T::one() {
        return Err(Error::Precondition(format!(
            "backward Euler requires h * a1 < 1, got {}",
            h * p.a1
        )));
    }

    let mut y = p.x0;
    let mut trajectory = keep_trajectory.then(|| {
        let mut t = Vec::with_capacity(dw.len() + 1);
        t.push(y);
        t
    });
    let mut first_negative_step = None;
    let mut absorbed = false;
    let mut diverged = false;
    let bound = T::from_f64_lossy(DIVERGENCE_BOUND);

    for step in 0..dw.len() {
        if !(absorbed || diverged) {
            match kind {
                SchemeKind::Bem => {
                    y = bem_step(p, jump, h, y, dw[step], dn[step]).map_err(|e| match e {
                        Error::IterationLimit { .. } => Error::PathAborted {
                            step: step + 1,
                            reason: e.to_string(),
                        },
                        other => other,
                    })?;
                }
                SchemeKind::Em => {
                    y = em_step(p, jump, h, y, dw[step], dn[step]);
                    if y <= T::zero() {
                        first_negative_step = Some(step + 1);
                        absorbed = true;
                    } else if !y.is_finite() || y.abs() > bound {
                        diverged = true;
                    }
                }
            }
        }
        if let Some(t) = trajectory.as_mut() {
            t.push(y);
        }
    }

    Ok(PathResult {
        terminal: y,
        positive: first_negative_step.is_none(),
        first_negative_step,
        absorbed,
        diverged,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{generate, GridConfig};

    fn strict_params() -> ModelParams<f64> {
        ModelParams {
            a_neg1: 2.0,
            a0: 1.0,
            a1: 1.5,
            a2: 5.0,
            b: 1.0,
            gamma: 3.5,
            theta: 2.0,
            lambda: 1.0,
            x0: 1.0,
        }
    }

    fn lin_jump() -> JumpSpec<f64> {
        JumpSpec::linear_scale(-0.2).unwrap()
    }

    /// Equilibrium of the noise-free drift, located by bisection.
    fn drift_equilibrium(p: &ModelParams<f64>) -> f64 {
        let mu = |x: f64| p.a_neg1 / x - p.a0 + p.a1 * x - p.a2 * x.powf(p.gamma);
        let (mut lo, mut hi) = (0.1, 10.0);
        assert!(mu(lo) > 0.0 && mu(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mu(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn bem_step_fixes_the_drift_equilibrium() {
        let p = strict_params();
        let eq = drift_equilibrium(&p);
        let y = bem_step(&p, &lin_jump(), 0.25, eq, 0.0, 0).unwrap();
        assert!((y - eq).abs() < 1e-9, "{y} vs equilibrium {eq}");
    }

    #[test]
    fn bem_step_matches_high_precision_bisection() {
        let p = strict_params();
        let (h, y_prev, dw, dn) = (1.0 / 16.0, 1.0, 0.1, 1u32);
        let y = bem_step(&p, &lin_jump(), h, y_prev, dw, dn).unwrap();
        assert!(y > 0.0);

        // independent bisection on F(x) = x - h mu(x) - rhs
        let rhs = y_prev + p.b * y_prev.powf(p.theta) * dw - 0.2 * y_prev * dn as f64;
        let f = |x: f64| {
            x - h * (p.a_neg1 / x - p.a0 + p.a1 * x - p.a2 * x.powf(p.gamma)) - rhs
        };
        let (mut lo, mut hi) = (1e-8, 100.0);
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((y - 0.5 * (lo + hi)).abs() < 1e-10);
    }

    #[test]
    fn bem_step_rejects_nonpositive_state() {
        assert!(bem_step(&strict_params(), &lin_jump(), 0.25, 0.0, 0.0, 0).is_err());
        assert!(bem_step(&strict_params(), &lin_jump(), 0.25, -1.0, 0.0, 0).is_err());
    }

    #[test]
    fn em_step_reference_values() {
        let p = strict_params();
        let h = 1.0 / 16.0;
        // 1 + h * mu(1) = 1 - 2.5 / 16
        let y = em_step(&p, &lin_jump(), h, 1.0, 0.0, 0);
        assert!((y - 0.84375).abs() < 1e-14);
        // identity jump with two counts adds 2
        let y = em_step(&p, &JumpSpec::identity(), h, 1.0, 0.0, 2);
        assert!((y - 2.84375).abs() < 1e-14);
    }

    #[test]
    fn em_step_freezes_nonpositive_states() {
        let p = strict_params();
        assert_eq!(em_step(&p, &lin_jump(), 0.25, -0.4, 0.3, 1), -0.4);
        assert_eq!(em_step(&p, &lin_jump(), 0.25, 0.0, 0.3, 1), 0.0);
    }

    #[test]
    fn zero_noise_bem_converges_first_order_to_the_ode_flow() {
        // short horizon: past the transient the flow sits on the drift
        // equilibrium, which backward Euler reproduces exactly, and the
        // first-order error term vanishes
        let p = strict_params();
        let jump = lin_jump();
        let terminal = |level: u32| {
            let g = NoiseGrid::zeros(0.1, level);
            simulate_path(&p, &jump, SchemeKind::Bem, &g, level, false)
                .unwrap()
                .terminal
        };
        let reference = terminal(12);
        let d4 = (terminal(4) - reference).abs();
        let d5 = (terminal(5) - reference).abs();
        let ratio = d4 / d5;
        assert!(
            (1.5..=2.5).contains(&ratio),
            "deviation ratio {ratio} (d4 = {d4}, d5 = {d5})"
        );
    }

    #[test]
    fn bem_paths_stay_positive() {
        let p = strict_params();
        let jump = lin_jump();
        let cfg = GridConfig {
            t_horizon: 1.0,
            fine_level: 2,
            coarse_levels: vec![2],
        };
        for path in 0..500 {
            let g = generate(&cfg, p.lambda, 17, path).unwrap();
            let r = simulate_path(&p, &jump, SchemeKind::Bem, &g, 2, true).unwrap();
            assert!(r.positive && !r.absorbed && !r.diverged);
            assert!(r.trajectory.unwrap().iter().all(|&y| y > 0.0));
        }
    }

    #[test]
    fn em_absorbed_path_reports_frozen_terminal() {
        let p = strict_params();
        let jump = lin_jump();
        let cfg = GridConfig {
            t_horizon: 1.0,
            fine_level: 2,
            coarse_levels: vec![2],
        };
        // scan seeds for a path that goes negative at h = 1/4
        let mut seen = false;
        for path in 0..200 {
            let g = generate(&cfg, p.lambda, 4, path).unwrap();
            let r = simulate_path(&p, &jump, SchemeKind::Em, &g, 2, true).unwrap();
            if let Some(step) = r.first_negative_step {
                seen = true;
                assert!(!r.positive && r.absorbed);
                let traj = r.trajectory.unwrap();
                assert_eq!(traj[step], r.terminal);
                assert!(traj[step..].iter().all(|&y| y == r.terminal));
            }
        }
        assert!(seen, "no negative explicit path found in the scan");
    }

    #[test]
    fn front_end_and_increment_core_are_bit_identical() {
        let p = strict_params();
        let jump = JumpSpec::sine();
        let cfg = GridConfig {
            t_horizon: 1.0,
            fine_level: 8,
            coarse_levels: vec![5],
        };
        let g = generate(&cfg, p.lambda, 21, 9).unwrap();
        let via_grid = simulate_path(&p, &jump, SchemeKind::Bem, &g, 5, true).unwrap();
        let (dw, dn) = crate::noise::coarsen(&g, 5).unwrap();
        let direct = simulate_with_increments(
            &p,
            &jump,
            SchemeKind::Bem,
            g.step_size(5),
            &dw,
            &dn,
            true,
        )
        .unwrap();
        assert_eq!(via_grid, direct);
        assert_eq!(
            via_grid.terminal.to_bits(),
            direct.terminal.to_bits()
        );
    }

    #[test]
    fn bem_rejects_stepsizes_violating_solvability() {
        let p = strict_params(); // a1 = 1.5, so h = 1 violates h a1 < 1
        let g = NoiseGrid::zeros(1.0, 0);
        assert!(simulate_path(&p, &lin_jump(), SchemeKind::Bem, &g, 0, false).is_err());
    }
}

//! Monte Carlo harness: strong-error tables, convergence-slope regression,
//! negative-path census and moment probes.
//!
//! All estimators couple every stepsize to a single driving path per sample:
//! the noise is generated once on the finest grid and coarsened, so the
//! error between a test level and the reference level is a pathwise
//! quantity. Paths run in parallel; per-path results are collected in path
//! index order and reduced by a fixed-shape pairwise sum, making every
//! report bit-identical across thread counts and reruns.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{self, JumpSpec, ModelParams, Regime};
use crate::noise::{self, GridConfig};
use crate::scalar::{pairwise_sum, Real};
use crate::scheme::{self, PathResult, SchemeKind};

/// Number of path batches used for the Monte Carlo standard-error estimate.
const ERROR_BATCHES: usize = 10;

/// How the pathwise deviation from the reference is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorMode {
    /// Deviation of the terminal values only.
    #[default]
    Terminal,
    /// Largest deviation over all shared grid points of the path.
    SupOverGrid,
}

/// Description of one Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec<T> {
    pub params: ModelParams<T>,
    pub jump: JumpSpec<T>,
    pub grid: GridConfig<T>,
    pub num_paths: usize,
    pub base_seed: u64,
    pub scheme: SchemeKind,
    /// Grid levels whose terminal values are compared to the reference.
    pub levels_under_test: Vec<u32>,
    /// Level of the coupled reference solution ("true" solution proxy).
    pub reference_level: u32,
    /// Error measurement mode for [`strong_error`].
    pub error_mode: ErrorMode,
}

impl<T: Real> ExperimentSpec<T> {
    /// Validates every embedded object and the level layout.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.grid.validate()?;
        if !classify_supported(&self.params) {
            return Err(Error::Precondition(
                "regime unsupported: gamma + 1 < 2 * theta, or critical balance \
                 without a2 / b^2 > 2 gamma - 3/2"
                    .into(),
            ));
        }
        if self.num_paths == 0 {
            return Err(Error::InvalidParameter("num_paths must be positive".into()));
        }
        if self.levels_under_test.is_empty() {
            return Err(Error::InvalidParameter(
                "levels_under_test must not be empty".into(),
            ));
        }
        let max_level = *self.levels_under_test.iter().max().unwrap();
        if self.reference_level < max_level {
            return Err(Error::InvalidParameter(format!(
                "reference level {} below finest test level {max_level}",
                self.reference_level
            )));
        }
        if self.reference_level > self.grid.fine_level {
            return Err(Error::InvalidParameter(format!(
                "reference level {} exceeds the noise grid's fine level {}",
                self.reference_level, self.grid.fine_level
            )));
        }
        for &l in &self.levels_under_test {
            if !self.grid.coarse_levels.contains(&l) {
                return Err(Error::InvalidParameter(format!(
                    "test level {l} missing from the grid's coarse levels"
                )));
            }
        }
        Ok(())
    }

    /// Checks the scheme-specific stepsize bounds at every level that will
    /// be simulated (solvability for every backward Euler level, plus the
    /// sharper convergence-theory bound).
    pub fn validate_step_bounds(&self) -> Result<()> {
        if self.scheme != SchemeKind::Bem {
            return Ok(());
        }
        let bound = model::theorem_step_bound(&self.params)?;
        let mut levels = self.levels_under_test.clone();
        levels.push(self.reference_level);
        for level in levels {
            let h = self.grid.step_size(level);
            if h * self.params.a1 >= T::one() {
                return Err(Error::Precondition(format!(
                    "h * a1 >= 1 at level {level} (h = {h})"
                )));
            }
            if h >= bound {
                return Err(Error::Precondition(format!(
                    "stepsize {h} at level {level} exceeds the convergence bound {bound}"
                )));
            }
        }
        Ok(())
    }
}

fn classify_supported<T: Real>(p: &ModelParams<T>) -> bool {
    model::classify_regime(p).is_supported()
}

/// Stepsizes, root-mean-square terminal errors against the coupled
/// reference, and the fitted log-log regression.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport<T> {
    pub stepsizes: Vec<T>,
    pub rms_errors: Vec<T>,
    /// Batch-based Monte Carlo standard error per stepsize.
    pub batch_stderrs: Vec<T>,
    pub slope: T,
    pub intercept: T,
    pub r_squared: T,
    pub num_paths: usize,
}

/// Outcome counts of a positivity census.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityCensus {
    pub total: usize,
    /// Paths that produced a non-positive state.
    pub negative: usize,
    /// Paths frozen by the divergence guard while still positive.
    pub diverged: usize,
    pub fraction_negative: f64,
}

/// Mean-square error of each test level against the coupled reference
/// level, with the fitted convergence order.
///
/// Per path, the reference and every test level consume coarsenings of one
/// `NoiseGrid`; the error is measured at the terminal time. Any aborted
/// path fails the whole experiment (silently dropping paths would bias the
/// estimate).
pub fn strong_error<T>(spec: &ExperimentSpec<T>) -> Result<RateReport<T>>
where
    T: Real,
    rand_distr::StandardNormal: rand_distr::Distribution<T>,
{
    spec.validate()?;
    spec.validate_step_bounds()?;
    let levels = sorted_levels(&spec.levels_under_test);
    let n_levels = levels.len();
    let keep_trajectory = spec.error_mode == ErrorMode::SupOverGrid;

    // squared deviations per path, in path-index order
    let per_path: Vec<Vec<T>> = (0..spec.num_paths)
        .into_par_iter()
        .map(|path| -> Result<Vec<T>> {
            let grid = noise::generate(
                &spec.grid,
                spec.params.lambda,
                spec.base_seed,
                path as u64,
            )?;
            let reference = scheme::simulate_path(
                &spec.params,
                &spec.jump,
                spec.scheme,
                &grid,
                spec.reference_level,
                keep_trajectory,
            )?;
            let mut row = Vec::with_capacity(n_levels);
            for &level in &levels {
                let run = scheme::simulate_path(
                    &spec.params,
                    &spec.jump,
                    spec.scheme,
                    &grid,
                    level,
                    keep_trajectory,
                )?;
                let dev = match spec.error_mode {
                    ErrorMode::Terminal => run.terminal - reference.terminal,
                    ErrorMode::SupOverGrid => {
                        sup_deviation(&run, &reference, spec.reference_level - level)
                    }
                };
                row.push(dev * dev);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let n = T::from_usize_lossy(spec.num_paths);
    let mut rms_errors = Vec::with_capacity(n_levels);
    let mut batch_stderrs = Vec::with_capacity(n_levels);
    for k in 0..n_levels {
        let sq: Vec<T> = per_path.iter().map(|row| row[k]).collect();
        rms_errors.push((pairwise_sum(&sq) / n).sqrt());
        batch_stderrs.push(batch_stderr(&sq));
    }

    let stepsizes: Vec<T> = levels.iter().map(|&l| spec.grid.step_size(l)).collect();
    let (slope, intercept, r_squared) = if rms_errors.iter().all(|&e| e > T::zero()) {
        fit_rate(&stepsizes, &rms_errors)?
    } else {
        // self-comparison yields exact zeros; no regression possible
        (T::zero(), T::zero(), T::zero())
    };

    Ok(RateReport {
        stepsizes,
        rms_errors,
        batch_stderrs,
        slope,
        intercept,
        r_squared,
        num_paths: spec.num_paths,
    })
}

/// Largest absolute deviation over the coarse path's grid points, which are
/// every `2^level_gap`-th point of the reference trajectory.
fn sup_deviation<T: Real>(run: &PathResult<T>, reference: &PathResult<T>, level_gap: u32) -> T {
    let coarse = run.trajectory.as_ref().expect("trajectory kept");
    let fine = reference.trajectory.as_ref().expect("trajectory kept");
    let stride = 1usize << level_gap;
    let mut sup = T::zero();
    for (n, &y) in coarse.iter().enumerate() {
        sup = sup.max((y - fine[n * stride]).abs());
    }
    sup
}

/// Standard error of the rms estimate from a 10-batch partition of the
/// squared differences, in path-index order.
fn batch_stderr<T: Real>(sq: &[T]) -> T {
    let batches = ERROR_BATCHES.min(sq.len());
    if batches < 2 {
        return T::zero();
    }
    let mut rms = Vec::with_capacity(batches);
    let chunk = sq.len().div_ceil(batches);
    for c in sq.chunks(chunk) {
        rms.push((pairwise_sum(c) / T::from_usize_lossy(c.len())).sqrt());
    }
    let b = T::from_usize_lossy(rms.len());
    let mean = pairwise_sum(&rms) / b;
    let var: Vec<T> = rms.iter().map(|&r| (r - mean) * (r - mean)).collect();
    (pairwise_sum(&var) / (b - T::one())).sqrt() / b.sqrt()
}

/// Counts negative and diverged paths at a single stepsize
/// (`levels_under_test` must contain exactly one level).
pub fn negative_census<T>(spec: &ExperimentSpec<T>) -> Result<PositivityCensus>
where
    T: Real,
    rand_distr::StandardNormal: rand_distr::Distribution<T>,
{
    spec.validate()?;
    let &[level] = spec.levels_under_test.as_slice() else {
        return Err(Error::InvalidParameter(
            "positivity census runs one stepsize at a time".into(),
        ));
    };
    if spec.scheme == SchemeKind::Bem {
        let h = spec.grid.step_size(level);
        if h * spec.params.a1 >= T::one() {
            return Err(Error::Precondition(format!(
                "h * a1 >= 1 at level {level} (h = {h})"
            )));
        }
    }

    let outcomes: Vec<(bool, bool)> = (0..spec.num_paths)
        .into_par_iter()
        .map(|path| -> Result<(bool, bool)> {
            let grid = noise::generate(
                &spec.grid,
                spec.params.lambda,
                spec.base_seed,
                path as u64,
            )?;
            let r: PathResult<T> = scheme::simulate_path(
                &spec.params,
                &spec.jump,
                spec.scheme,
                &grid,
                level,
                false,
            )?;
            Ok((!r.positive, r.diverged))
        })
        .collect::<Result<_>>()?;

    let negative = outcomes.iter().filter(|&&(neg, _)| neg).count();
    let diverged = outcomes.iter().filter(|&&(_, div)| div).count();
    Ok(PositivityCensus {
        total: spec.num_paths,
        negative,
        diverged,
        fraction_negative: negative as f64 / spec.num_paths as f64,
    })
}

/// Per-step Monte Carlo estimates of `E |Y_n|^p` (`inverse = false`) or
/// `E |Y_n|^{-p}` (`inverse = true`) at the finest test level, as a
/// boundedness smoke test.
///
/// Admissible exponents follow the moment theory of the model: in the
/// strict regime any `p >= 2`; in the critical regime
/// `2 <= p < (2 a2 + b^2) / b^2`. Inverse moments additionally require
/// `p >= max(1, gamma - 1)`.
pub fn moment_probe<T>(spec: &ExperimentSpec<T>, p_exponent: T, inverse: bool) -> Result<Vec<T>>
where
    T: Real,
    rand_distr::StandardNormal: rand_distr::Distribution<T>,
{
    spec.validate()?;
    check_moment_exponent(&spec.params, p_exponent, inverse)?;
    let level = *spec.levels_under_test.iter().max().unwrap();
    let steps = 1usize << level;

    let sign = if inverse { -T::one() } else { T::one() };
    let per_path: Vec<Vec<T>> = (0..spec.num_paths)
        .into_par_iter()
        .map(|path| -> Result<Vec<T>> {
            let grid = noise::generate(
                &spec.grid,
                spec.params.lambda,
                spec.base_seed,
                path as u64,
            )?;
            let r = scheme::simulate_path(
                &spec.params,
                &spec.jump,
                spec.scheme,
                &grid,
                level,
                true,
            )?;
            let traj = r.trajectory.expect("trajectory requested");
            Ok(traj
                .iter()
                .map(|&y| y.abs().powf(sign * p_exponent))
                .collect())
        })
        .collect::<Result<_>>()?;

    let n = T::from_usize_lossy(spec.num_paths);
    let mut estimates = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let column: Vec<T> = per_path.iter().map(|row| row[step]).collect();
        estimates.push(pairwise_sum(&column) / n);
    }
    Ok(estimates)
}

fn check_moment_exponent<T: Real>(p: &ModelParams<T>, exponent: T, inverse: bool) -> Result<()> {
    let two = T::from_f64_lossy(2.0);
    if inverse {
        let min_p = T::one().max(p.gamma - T::one());
        if !exponent.is_finite() || exponent < min_p {
            return Err(Error::Precondition(format!(
                "inverse moment exponent must be at least max(1, gamma - 1) = {min_p}, got {exponent}"
            )));
        }
        return Ok(());
    }
    if !exponent.is_finite() || exponent < two {
        return Err(Error::Precondition(format!(
            "moment exponent must be at least 2, got {exponent}"
        )));
    }
    if let Regime::Critical { .. } = model::classify_regime(p) {
        let cap = (two * p.a2 + p.b * p.b) / (p.b * p.b);
        if exponent >= cap {
            return Err(Error::Precondition(format!(
                "critical regime admits moments of order p < (2 a2 + b^2) / b^2 = {cap}, got {exponent}"
            )));
        }
    }
    Ok(())
}

/// Ordinary least squares of `log(err)` against `log(h)`.
/// Returns `(slope, intercept, r_squared)`.
pub fn fit_rate<T: Real>(stepsizes: &[T], errors: &[T]) -> Result<(T, T, T)> {
    if stepsizes.len() != errors.len() || stepsizes.len() < 2 {
        return Err(Error::InvalidParameter(
            "rate fit needs two or more (h, error) pairs of equal length".into(),
        ));
    }
    for (&h, &e) in stepsizes.iter().zip(errors) {
        if !h.is_finite() || !e.is_finite() || h <= T::zero() || e <= T::zero() {
            return Err(Error::Domain(format!(
                "log-log regression requires positive entries, got ({h}, {e})"
            )));
        }
    }
    let n = T::from_usize_lossy(stepsizes.len());
    let xs: Vec<T> = stepsizes.iter().map(|&h| h.ln()).collect();
    let ys: Vec<T> = errors.iter().map(|&e| e.ln()).collect();
    let x_mean = pairwise_sum(&xs) / n;
    let y_mean = pairwise_sum(&ys) / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    let mut syy = T::zero();
    for (&x, &y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - x_mean, y - y_mean);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= T::zero() {
        return Err(Error::Domain("all stepsizes are identical".into()));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let r_squared = if syy > T::zero() {
        (sxy * sxy) / (sxx * syy)
    } else {
        T::one()
    };
    Ok((slope, intercept, r_squared))
}

fn sorted_levels(levels: &[u32]) -> Vec<u32> {
    let mut ls = levels.to_vec();
    ls.sort_unstable();
    ls.dedup();
    ls
}

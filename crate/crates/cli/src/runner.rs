//! Executes a validated [`RunConfig`] and writes the result file.

use aitsahalia::{moment_probe, negative_census, strong_error};

use crate::config::{ExperimentKind, OutputFormat, RunConfig};
use crate::output::{self, ConvergenceDoc, MomentsDoc, PositivityRow};
use crate::CliError;

/// Runs the configured experiment, writes `cfg.output` atomically and
/// returns the one-line summary.
pub fn run(cfg: &RunConfig) -> Result<String, CliError> {
    match cfg.experiment {
        ExperimentKind::Convergence => run_convergence(cfg),
        ExperimentKind::Positivity => run_positivity(cfg),
        ExperimentKind::Moments => run_moments(cfg),
    }
}

fn run_convergence(cfg: &RunConfig) -> Result<String, CliError> {
    let spec = cfg.experiment_specs().remove(0);
    let report = strong_error(&spec)?;
    let doc = ConvergenceDoc {
        h: report.stepsizes,
        rms_error: report.rms_errors,
        batch_stderr: report.batch_stderrs,
        slope: report.slope,
        intercept: report.intercept,
        r_squared: report.r_squared,
        num_paths: report.num_paths,
    };
    let bytes = match cfg.format {
        OutputFormat::Csv => doc.to_csv().into_bytes(),
        OutputFormat::Json => output::to_json(&doc).expect("serializable"),
    };
    output::atomic_write(&cfg.output, &bytes)?;
    Ok(format!("slope={} r2={}", doc.slope, doc.r_squared))
}

fn run_positivity(cfg: &RunConfig) -> Result<String, CliError> {
    let mut rows = Vec::new();
    let mut fractions = Vec::new();
    for spec in cfg.experiment_specs() {
        let census = negative_census(&spec)?;
        let level = spec.levels_under_test[0];
        rows.push(PositivityRow {
            scheme: cfg.scheme_label().to_string(),
            case: cfg.regime_label().to_string(),
            phi: cfg.phi_label(),
            h: spec.grid.step_size(level),
            total: census.total,
            negative: census.negative,
            diverged: census.diverged,
            fraction: census.fraction_negative,
        });
        fractions.push(census.fraction_negative.to_string());
    }
    let bytes = match cfg.format {
        OutputFormat::Csv => output::positivity_csv(&rows).into_bytes(),
        OutputFormat::Json => output::to_json(&rows).expect("serializable"),
    };
    output::atomic_write(&cfg.output, &bytes)?;
    Ok(format!("negative_fraction={}", fractions.join(",")))
}

fn run_moments(cfg: &RunConfig) -> Result<String, CliError> {
    let spec = cfg.experiment_specs().remove(0);
    let p = cfg.moment_p.expect("validated");
    let estimates = moment_probe(&spec, p, cfg.moment_inverse)?;
    let level = spec.levels_under_test[0];
    let h = spec.grid.step_size(level);
    let doc = MomentsDoc {
        t: (0..estimates.len()).map(|n| n as f64 * h).collect(),
        estimate: estimates,
    };
    let bytes = match cfg.format {
        OutputFormat::Csv => doc.to_csv().into_bytes(),
        OutputFormat::Json => output::to_json(&doc).expect("serializable"),
    };
    output::atomic_write(&cfg.output, &bytes)?;
    let max = doc.estimate.iter().copied().fold(f64::NAN, f64::max);
    Ok(format!("max_estimate={max}"))
}

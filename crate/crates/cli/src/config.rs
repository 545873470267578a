//! Experiment configuration: a flat `key = value` document.
//!
//! Lines are `key = value` pairs; `#` starts a comment (whole line or
//! trailing); blank lines are ignored. Unknown and duplicate keys are hard
//! errors so that typos never silently fall back to defaults. See the
//! project README for the full key reference.

use std::collections::BTreeMap;
use std::path::PathBuf;

use aitsahalia::{
    classify_regime, ErrorMode, ExperimentSpecF64, GridConfigF64, JumpKind, JumpSpecF64,
    ModelParamsF64, Regime, SchemeKind,
};

use crate::CliError;

/// Which experiment the runner executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Strong-error table plus fitted convergence order.
    Convergence,
    /// Negative/diverged path census, one row per stepsize.
    Positivity,
    /// Per-step moment estimates at a single stepsize.
    Moments,
}

impl ExperimentKind {
    fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Positivity => "positivity",
            ExperimentKind::Moments => "moments",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    fn as_str(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// Fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub params: ModelParamsF64,
    pub jump: JumpSpecF64,
    pub t_horizon: f64,
    pub levels: Vec<u32>,
    /// Level of the coupled reference solution; convergence only.
    pub reference_level: Option<u32>,
    pub paths: usize,
    pub seed: u64,
    pub scheme: SchemeKind,
    /// Error measurement for convergence runs: terminal-time (default) or
    /// supremum over the shared grid points.
    pub error_mode: ErrorMode,
    /// Moment exponent; moments only.
    pub moment_p: Option<f64>,
    pub moment_inverse: bool,
    pub output: PathBuf,
    pub format: OutputFormat,
}

/// Parses and validates a configuration document.
///
/// Every referenced object (model parameters, jump spec, grid layout) is
/// validated here, before any simulation starts.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut doc = Document::parse(text)?;

    let experiment = match doc.take("experiment")?.as_str() {
        "convergence" => ExperimentKind::Convergence,
        "positivity" => ExperimentKind::Positivity,
        "moments" => ExperimentKind::Moments,
        other => {
            return Err(config_err(format!(
                "experiment must be one of convergence | positivity | moments, got '{other}'"
            )))
        }
    };

    let params = ModelParamsF64 {
        a_neg1: doc.take_f64("a_neg1")?,
        a0: doc.take_f64("a0")?,
        a1: doc.take_f64("a1")?,
        a2: doc.take_f64("a2")?,
        b: doc.take_f64("b")?,
        gamma: doc.take_f64("gamma")?,
        theta: doc.take_f64("theta")?,
        lambda: doc.take_f64("lambda")?,
        x0: doc.take_f64("x0")?,
    };
    params.validate().map_err(|e| config_err(e.to_string()))?;
    match classify_regime(&params) {
        Regime::Strict | Regime::Critical { critical_ok: true } => {}
        Regime::Unsupported => {
            return Err(config_err(
                "regime unsupported: gamma + 1 < 2 * theta".to_string(),
            ))
        }
        Regime::Critical { critical_ok: false } => {
            return Err(config_err(
                "regime unsupported: critical balance needs a2 / b^2 > 2 * gamma - 3/2"
                    .to_string(),
            ))
        }
    }

    let jump = match doc.take("phi")?.as_str() {
        "linear_scale" => {
            let c = doc.take_f64("phi_c")?;
            JumpSpecF64::linear_scale(c).map_err(|e| config_err(e.to_string()))?
        }
        "identity" => JumpSpecF64::identity(),
        "sine" => JumpSpecF64::sine(),
        other => {
            return Err(config_err(format!(
                "phi must be one of linear_scale | identity | sine, got '{other}'"
            )))
        }
    };

    let t_horizon = doc.take_f64_or("t", 1.0)?;
    if !t_horizon.is_finite() || t_horizon <= 0.0 {
        return Err(config_err(format!(
            "t must be positive and finite, got {t_horizon}"
        )));
    }

    let levels = doc.take_levels("levels")?;
    let reference_level = match experiment {
        ExperimentKind::Convergence => Some(doc.take_u32("reference_level")?),
        _ => doc.take_u32_optional("reference_level")?,
    };
    if experiment != ExperimentKind::Convergence && reference_level.is_some() {
        return Err(config_err(
            "reference_level only applies to the convergence experiment".to_string(),
        ));
    }
    if let Some(r) = reference_level {
        if let Some(&max) = levels.iter().max() {
            if r < max {
                return Err(config_err(format!(
                    "reference_level {r} must not be below the finest test level {max}"
                )));
            }
        }
    }
    if experiment == ExperimentKind::Moments && levels.len() != 1 {
        return Err(config_err(
            "the moments experiment takes exactly one level".to_string(),
        ));
    }

    let paths = doc.take_usize("paths")?;
    if paths == 0 {
        return Err(config_err("paths must be positive".to_string()));
    }
    let seed = doc.take_u64("seed")?;

    let scheme = match doc.take_or("scheme", "bem")?.as_str() {
        "bem" => SchemeKind::Bem,
        "em" => SchemeKind::Em,
        other => {
            return Err(config_err(format!(
                "scheme must be bem | em, got '{other}'"
            )))
        }
    };

    let error_mode = match doc.take_or("error_mode", "terminal")?.as_str() {
        "terminal" => ErrorMode::Terminal,
        "sup" => ErrorMode::SupOverGrid,
        other => {
            return Err(config_err(format!(
                "error_mode must be terminal | sup, got '{other}'"
            )))
        }
    };
    if error_mode != ErrorMode::Terminal && experiment != ExperimentKind::Convergence {
        return Err(config_err(
            "error_mode only applies to the convergence experiment".to_string(),
        ));
    }

    let moment_p = match experiment {
        ExperimentKind::Moments => Some(doc.take_f64("moment_p")?),
        _ => {
            if doc.contains("moment_p") {
                return Err(config_err(
                    "moment_p only applies to the moments experiment".to_string(),
                ));
            }
            None
        }
    };
    let moment_inverse = doc.take_bool_or("moment_inverse", false)?;
    if moment_inverse && experiment != ExperimentKind::Moments {
        return Err(config_err(
            "moment_inverse only applies to the moments experiment".to_string(),
        ));
    }

    let output = PathBuf::from(doc.take("output")?);
    let format = match doc.take_or("format", "csv")?.as_str() {
        "csv" => OutputFormat::Csv,
        "json" => OutputFormat::Json,
        other => {
            return Err(config_err(format!(
                "format must be csv | json, got '{other}'"
            )))
        }
    };

    doc.finish()?;

    let cfg = RunConfig {
        experiment,
        params,
        jump,
        t_horizon,
        levels,
        reference_level,
        paths,
        seed,
        scheme,
        error_mode,
        moment_p,
        moment_inverse,
        output,
        format,
    };
    // a dry construction of the experiment spec(s) surfaces layout errors
    // before any simulation starts; convergence runs also get the
    // scheme's stepsize bounds checked here (the census needs only the
    // solvability bound, which is enforced at run time)
    for spec in cfg.experiment_specs() {
        spec.validate().map_err(|e| config_err(e.to_string()))?;
        if cfg.experiment == ExperimentKind::Convergence {
            spec.validate_step_bounds()
                .map_err(|e| config_err(e.to_string()))?;
        }
    }
    Ok(cfg)
}

impl RunConfig {
    /// The experiment specs this run will execute: one for convergence or
    /// moments, one per stepsize for the positivity census.
    pub fn experiment_specs(&self) -> Vec<ExperimentSpecF64> {
        match self.experiment {
            ExperimentKind::Convergence => {
                let reference = self.reference_level.expect("validated");
                let mut coarse = self.levels.clone();
                coarse.push(reference);
                vec![ExperimentSpecF64 {
                    params: self.params,
                    jump: self.jump,
                    grid: GridConfigF64 {
                        t_horizon: self.t_horizon,
                        fine_level: reference,
                        coarse_levels: coarse,
                    },
                    num_paths: self.paths,
                    base_seed: self.seed,
                    scheme: self.scheme,
                    levels_under_test: self.levels.clone(),
                    reference_level: reference,
                    error_mode: self.error_mode,
                }]
            }
            ExperimentKind::Positivity | ExperimentKind::Moments => self
                .levels
                .iter()
                .map(|&level| ExperimentSpecF64 {
                    params: self.params,
                    jump: self.jump,
                    grid: GridConfigF64 {
                        t_horizon: self.t_horizon,
                        fine_level: level,
                        coarse_levels: vec![level],
                    },
                    num_paths: self.paths,
                    base_seed: self.seed,
                    scheme: self.scheme,
                    levels_under_test: vec![level],
                    reference_level: level,
                    error_mode: ErrorMode::Terminal,
                })
                .collect(),
        }
    }

    /// Display string for the jump coefficient, used in output files.
    pub fn phi_label(&self) -> String {
        match self.jump.kind {
            JumpKind::LinearScale(c) => format!("{c}x"),
            JumpKind::Identity => "x".to_string(),
            JumpKind::Sine => "sin(x)".to_string(),
        }
    }

    /// Display string for the parameter regime, used in output files.
    pub fn regime_label(&self) -> &'static str {
        match classify_regime(&self.params) {
            Regime::Strict => "strict",
            Regime::Critical { .. } => "critical",
            Regime::Unsupported => "unsupported",
        }
    }

    pub fn scheme_label(&self) -> &'static str {
        match self.scheme {
            SchemeKind::Bem => "bem",
            SchemeKind::Em => "em",
        }
    }

    /// Emits the canonical document: parsing it back reproduces `self`.
    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("experiment", self.experiment.as_str().to_string());
        kv("a_neg1", self.params.a_neg1.to_string());
        kv("a0", self.params.a0.to_string());
        kv("a1", self.params.a1.to_string());
        kv("a2", self.params.a2.to_string());
        kv("b", self.params.b.to_string());
        kv("gamma", self.params.gamma.to_string());
        kv("theta", self.params.theta.to_string());
        kv("lambda", self.params.lambda.to_string());
        kv("x0", self.params.x0.to_string());
        match self.jump.kind {
            JumpKind::LinearScale(c) => {
                kv("phi", "linear_scale".to_string());
                kv("phi_c", c.to_string());
            }
            JumpKind::Identity => kv("phi", "identity".to_string()),
            JumpKind::Sine => kv("phi", "sine".to_string()),
        }
        kv("t", self.t_horizon.to_string());
        kv(
            "levels",
            self.levels
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        if let Some(r) = self.reference_level {
            kv("reference_level", r.to_string());
        }
        kv("paths", self.paths.to_string());
        kv("seed", self.seed.to_string());
        kv("scheme", self.scheme_label().to_string());
        if self.error_mode == ErrorMode::SupOverGrid {
            kv("error_mode", "sup".to_string());
        }
        if let Some(p) = self.moment_p {
            kv("moment_p", p.to_string());
            kv("moment_inverse", self.moment_inverse.to_string());
        }
        kv("output", self.output.display().to_string());
        kv("format", self.format.as_str().to_string());
        out
    }
}

fn config_err(msg: String) -> CliError {
    CliError::Config(msg)
}

/// Tokenized document with strict key accounting.
struct Document {
    entries: BTreeMap<String, (String, usize)>,
}

impl Document {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let Some((key, value)) = line.split_once('=') else {
                return Err(config_err(format!(
                    "line {lineno}: expected 'key = value', got '{line}'"
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(config_err(format!(
                    "line {lineno}: empty key or value"
                )));
            }
            if entries.insert(key.clone(), (value, lineno)).is_some() {
                return Err(config_err(format!(
                    "line {lineno}: duplicate key '{key}'"
                )));
            }
        }
        Ok(Self { entries })
    }

    fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn take(&mut self, key: &str) -> Result<String, CliError> {
        self.entries
            .remove(key)
            .map(|(v, _)| v)
            .ok_or_else(|| config_err(format!("missing required key '{key}'")))
    }

    fn take_or(&mut self, key: &str, default: &str) -> Result<String, CliError> {
        Ok(self
            .entries
            .remove(key)
            .map(|(v, _)| v)
            .unwrap_or_else(|| default.to_string()))
    }

    fn take_f64(&mut self, key: &str) -> Result<f64, CliError> {
        let (v, lineno) = self
            .entries
            .remove(key)
            .ok_or_else(|| config_err(format!("missing required key '{key}'")))?;
        v.parse::<f64>()
            .map_err(|_| config_err(format!("line {lineno}: '{key}' is not a number: '{v}'")))
    }

    fn take_f64_or(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        if self.contains(key) {
            self.take_f64(key)
        } else {
            Ok(default)
        }
    }

    fn take_u64(&mut self, key: &str) -> Result<u64, CliError> {
        let (v, lineno) = self
            .entries
            .remove(key)
            .ok_or_else(|| config_err(format!("missing required key '{key}'")))?;
        v.parse::<u64>().map_err(|_| {
            config_err(format!(
                "line {lineno}: '{key}' is not an unsigned integer: '{v}'"
            ))
        })
    }

    fn take_u32(&mut self, key: &str) -> Result<u32, CliError> {
        Ok(self.take_u64(key)? as u32)
    }

    fn take_u32_optional(&mut self, key: &str) -> Result<Option<u32>, CliError> {
        if self.contains(key) {
            Ok(Some(self.take_u32(key)?))
        } else {
            Ok(None)
        }
    }

    fn take_usize(&mut self, key: &str) -> Result<usize, CliError> {
        Ok(self.take_u64(key)? as usize)
    }

    fn take_bool_or(&mut self, key: &str, default: bool) -> Result<bool, CliError> {
        let Some((v, lineno)) = self.entries.remove(key) else {
            return Ok(default);
        };
        match v.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(config_err(format!(
                "line {lineno}: '{key}' must be true or false, got '{v}'"
            ))),
        }
    }

    fn take_levels(&mut self, key: &str) -> Result<Vec<u32>, CliError> {
        let (v, lineno) = self
            .entries
            .remove(key)
            .ok_or_else(|| config_err(format!("missing required key '{key}'")))?;
        let mut levels = Vec::new();
        for part in v.split(',') {
            let level = part.trim().parse::<u32>().map_err(|_| {
                config_err(format!(
                    "line {lineno}: '{key}' entries must be unsigned integers, got '{part}'"
                ))
            })?;
            levels.push(level);
        }
        if levels.is_empty() {
            return Err(config_err(format!("line {lineno}: '{key}' is empty")));
        }
        levels.sort_unstable();
        levels.dedup();
        Ok(levels)
    }

    fn finish(self) -> Result<(), CliError> {
        if let Some((key, (_, lineno))) = self.entries.into_iter().next() {
            return Err(config_err(format!(
                "line {lineno}: unknown key '{key}'"
            )));
        }
        Ok(())
    }
}

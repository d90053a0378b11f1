//! Run configuration, task execution and report assembly for `finsler-lab`.
//!
//! A report is a pure function of its configuration: wall-clock timing lives
//! in its own top-level field so that stripping it leaves byte-identical
//! output across runs.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use finsler_core::analysis::{
    classify, theorem_41_witness, verify_conformal, verify_identity, Classification, ConformalLaw, DefectVector,
    Identity, IdentityReport, PointEval, Theorem41Witness, Verdict, CLASSIFY_TOL,
};
use finsler_core::catalog::{standard_catalog, CatalogMetric, RhoSpec};
use finsler_core::curvature::{flag_and_sectional, FlagCurvatures};
use finsler_core::exec::ExecMode;
use finsler_core::sampling::{sample_points, SampleSpec, GENERATOR_ID};
use finsler_core::tensor::TensorJson;
use finsler_core::{FinslerError, MetricExpr, Point};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Where the metric comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSource {
    /// An entry of the standard catalog by label.
    Named(String),
    /// A parametrized catalog family.
    Catalog(CatalogMetric),
    /// A metric expression tree.
    Inline(MetricExpr),
}

impl MetricSource {
    pub fn build(&self) -> Result<MetricExpr, CliError> {
        match self {
            MetricSource::Named(name) => standard_catalog()
                .into_iter()
                .find(|(label, _)| label == name)
                .ok_or_else(|| CliError::Config(format!("no catalog metric named {name:?}")))?
                .1
                .build()
                .map_err(|e| CliError::Config(e.to_string())),
            MetricSource::Catalog(c) => c.build().map_err(|e| CliError::Config(e.to_string())),
            MetricSource::Inline(m) => Ok(m.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Eval,
    Classify,
    Verify,
    Conformal,
    Theorem41,
}

impl Task {
    pub fn parse(s: &str) -> Result<Task, CliError> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| CliError::Config(format!("unknown task {s:?}")))
    }

    /// Flag curvatures are scale invariant, so only these tasks get unit
    /// fiber vectors by default.
    fn prefers_normalized(self) -> bool {
        matches!(self, Task::Eval | Task::Theorem41)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub metric: MetricSource,
    #[serde(default)]
    pub sample: SampleSpec,
    /// Tolerance overrides keyed by identity name or letter, conformal law
    /// name, `conformal`, `classify` or `theorem41`.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    pub tasks: Vec<Task>,
    /// Identities for the `verify` task; all of them when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identities: Option<Vec<String>>,
    /// Conformal exponent for the `conformal` task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conformal: Option<RhoSpec>,
    #[serde(default)]
    pub mode: ExecMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    /// Parses a configuration. When `sample.normalize_v` is not given it
    /// defaults to on exactly when every task is a flag-curvature task.
    pub fn from_json(text: &str) -> Result<RunConfig, CliError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let explicit = value
            .get("sample")
            .and_then(|s| s.get("normalize_v"))
            .is_some();
        let mut cfg: RunConfig = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        if !explicit {
            cfg.sample.normalize_v = !cfg.tasks.is_empty() && cfg.tasks.iter().all(|t| t.prefers_normalized());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.sample.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.tasks.is_empty() {
            return Err(CliError::Config("no tasks requested".into()));
        }
        if self.tasks.contains(&Task::Conformal) && self.conformal.is_none() {
            return Err(CliError::Config("the conformal task needs a `conformal` exponent".into()));
        }
        for (key, tol) in &self.tolerances {
            if !(tol.is_finite() && *tol > 0.0) {
                return Err(CliError::Config(format!("tolerance {key} = {tol} must be positive")));
            }
            let known = matches!(key.as_str(), "classify" | "theorem41" | "conformal")
                || Identity::parse(key).is_ok()
                || ConformalLaw::ALL.iter().any(|l| l.name() == key);
            if !known {
                return Err(CliError::Config(format!("unknown tolerance key {key:?}")));
            }
        }
        self.selected_identities()?;
        Ok(())
    }

    fn selected_identities(&self) -> Result<Vec<Identity>, CliError> {
        match &self.identities {
            None => Ok(Identity::ALL.to_vec()),
            Some(names) => names
                .iter()
                .map(|s| Identity::parse(s).map_err(|e| CliError::Config(e.to_string())))
                .collect(),
        }
    }

    fn identity_tol(&self, identity: Identity) -> Option<f64> {
        self.tolerances
            .get(identity.name())
            .or_else(|| self.tolerances.get(&identity.letter().to_string()))
            .copied()
    }

    /// Applies `--tol name=value` style overrides.
    pub fn set_tolerance(&mut self, spec: &str) -> Result<(), CliError> {
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("tolerance {spec:?} is not name=value")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("tolerance {spec:?} has no numeric value")))?;
        self.tolerances.insert(name.trim().to_string(), value);
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("sampling starved: {0}")]
    Starvation(FinslerError),
    #[error(transparent)]
    Core(#[from] FinslerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Starvation(_) => 3,
            _ => 2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AcceptanceStats {
    pub generator: &'static str,
    pub accepted: usize,
    pub attempted: usize,
    pub rejections: BTreeMap<String, usize>,
}

/// Everything worth keeping about one accepted point.
#[derive(Clone, Debug, Serialize)]
pub struct PointReport {
    pub point: Point,
    pub metric_value: f64,
    pub levi_eigenvalues: Vec<f64>,
    pub levi_condition: f64,
    pub defects: DefectVector,
    pub curvatures_along_v: FlagCurvatures,
    pub scalar_chern: [f64; 2],
    pub scalar_canonical: [f64; 2],
    pub scalar_complexified: [f64; 2],
    pub levi: TensorJson,
    pub nonlinear_connection: TensorJson,
    pub chern_horizontal: TensorJson,
    pub canonical: TensorJson,
    pub complexified: TensorJson,
    pub ricci_chern: TensorJson,
    pub ricci_canonical: TensorJson,
}

impl PointReport {
    pub fn new(metric: &MetricExpr, p: &Point) -> Result<PointReport, FinslerError> {
        let e = PointEval::new(metric, p)?;
        let frame = e.geometry.frame();
        let b = &e.bundle;
        let pair = |c: num_complex::Complex64| [c.re, c.im];
        Ok(PointReport {
            point: p.clone(),
            metric_value: e.geometry.metric_series().value().re,
            levi_eigenvalues: frame.eigenvalues.clone(),
            levi_condition: frame.condition,
            defects: e.defects(),
            curvatures_along_v: flag_and_sectional(&e.geometry, b, &p.v)?,
            scalar_chern: pair(b.scalar_chern),
            scalar_canonical: pair(b.scalar_canonical),
            scalar_complexified: pair(b.scalar_complexified),
            levi: frame.levi.to_json(),
            nonlinear_connection: frame.nonlinear.to_json(),
            chern_horizontal: b.chern.horizontal.to_json(),
            canonical: b.canonical.to_json(),
            complexified: b.complexified.to_json(),
            ricci_chern: b.ricci_chern.to_json(),
            ricci_canonical: b.ricci_canonical.to_json(),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum TaskResult {
    Eval { points: Vec<PointReport> },
    Classify(Classification),
    Verify { reports: Vec<IdentityReport> },
    Conformal { rho: String, reports: Vec<IdentityReport> },
    Theorem41(Theorem41Witness),
}

impl TaskResult {
    fn identity_reports(&self) -> &[IdentityReport] {
        match self {
            TaskResult::Verify { reports } | TaskResult::Conformal { reports, .. } => reports,
            _ => &[],
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timing {
    pub sampling_ms: f64,
    pub tasks_ms: Vec<(Task, f64)>,
    pub total_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub metric: MetricExpr,
    pub acceptance: AcceptanceStats,
    pub results: Vec<TaskResult>,
    /// Non-skipped identity reports that failed, by name.
    pub failures: Vec<String>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report types serialize")
    }

    /// The report with its timing field removed.
    pub fn without_timing(&self) -> RunReport {
        RunReport {
            timing: None,
            ..self.clone()
        }
    }
}

/// Samples, runs every task in order and assembles the report.
pub fn run(cfg: &RunConfig) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let metric = cfg.metric.build()?;
    let sample = sample_points(&metric, &cfg.sample).map_err(|e| match e {
        FinslerError::Starvation { .. } => CliError::Starvation(e),
        FinslerError::InvalidParameter(m) => CliError::Config(m),
        other => CliError::Core(other),
    })?;
    let mut timing = Timing {
        sampling_ms: start.elapsed().as_secs_f64() * 1e3,
        ..Timing::default()
    };
    let pts = &sample.points;
    let mode = cfg.mode;
    let mut results = Vec::with_capacity(cfg.tasks.len());
    for &task in &cfg.tasks {
        let t0 = Instant::now();
        let result = match task {
            Task::Eval => TaskResult::Eval {
                points: mode
                    .map(pts, |p| PointReport::new(&metric, p))
                    .into_iter()
                    .collect::<Result<_, _>>()?,
            },
            Task::Classify => {
                let tol = cfg.tolerances.get("classify").copied().unwrap_or(CLASSIFY_TOL);
                TaskResult::Classify(classify(&metric, pts, tol, mode)?)
            }
            Task::Verify => TaskResult::Verify {
                reports: cfg
                    .selected_identities()?
                    .into_iter()
                    .map(|i| verify_identity(i, &metric, pts, cfg.identity_tol(i), mode))
                    .collect::<Result<_, _>>()?,
            },
            Task::Conformal => {
                let rho = cfg.conformal.as_ref().expect("validated").scalar()?;
                let mut reports = verify_conformal(&metric, &rho, pts, cfg.tolerances.get("conformal").copied(), mode)?;
                for r in &mut reports {
                    if let Some(&tol) = cfg.tolerances.get(&r.name) {
                        r.retolerate(tol);
                    }
                }
                TaskResult::Conformal {
                    rho: rho.name.clone(),
                    reports,
                }
            }
            Task::Theorem41 => {
                let tol = cfg.tolerances.get("theorem41").copied().unwrap_or(CLASSIFY_TOL);
                TaskResult::Theorem41(theorem_41_witness(&metric, pts, tol, mode)?)
            }
        };
        timing.tasks_ms.push((task, t0.elapsed().as_secs_f64() * 1e3));
        results.push(result);
    }
    let failures: Vec<String> = results
        .iter()
        .flat_map(|r| r.identity_reports())
        .filter(|r| r.verdict == Verdict::Fail)
        .map(|r| r.name.clone())
        .collect();
    timing.total_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(RunReport {
        config: cfg.clone(),
        metric,
        acceptance: AcceptanceStats {
            generator: GENERATOR_ID,
            accepted: pts.len(),
            attempted: sample.attempted,
            rejections: sample.rejections,
        },
        results,
        passed: failures.is_empty(),
        failures,
        timing: Some(timing),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_defaults_follow_tasks() {
        let flags = RunConfig::from_json(r#"{"metric": {"named": "flat"}, "tasks": ["eval"]}"#).unwrap();
        assert!(flags.sample.normalize_v);
        let mixed = RunConfig::from_json(r#"{"metric": {"named": "flat"}, "tasks": ["eval", "verify"]}"#).unwrap();
        assert!(!mixed.sample.normalize_v);
        let forced =
            RunConfig::from_json(r#"{"metric": {"named": "flat"}, "tasks": ["eval"], "sample": {"normalize_v": false}}"#)
                .unwrap();
        assert!(!forced.sample.normalize_v);
    }

    #[test]
    fn bad_configs_are_rejected() {
        for text in [
            r#"{"metric": {"named": "flat"}, "tasks": []}"#,
            r#"{"metric": {"named": "flat"}, "tasks": ["conformal"]}"#,
            r#"{"metric": {"named": "flat"}, "tasks": ["verify"], "tolerances": {"nonsense": 1e-3}}"#,
            r#"{"metric": {"named": "flat"}, "tasks": ["verify"], "sample": {"count": 0}}"#,
            r#"{"metric": {"named": "flat"}, "tasks": ["verify"], "extra": 1}"#,
        ] {
            assert_eq!(RunConfig::from_json(text).unwrap_err().exit_code(), 2, "{text}");
        }
    }

    #[test]
    fn tolerance_overrides_parse() {
        let mut cfg = RunConfig::from_json(r#"{"metric": {"named": "flat"}, "tasks": ["verify"]}"#).unwrap();
        cfg.set_tolerance("e=1e-3").unwrap();
        assert_eq!(cfg.identity_tol(Identity::RicciIdentity), Some(1e-3));
        assert!(cfg.set_tolerance("e").is_err());
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use finsler_cli::{run, CliError, MetricSource, PointReport, RunConfig, Task};
use finsler_core::analysis::{oracle_residual, ORACLE_MAX_ORDER};
use finsler_core::catalog::{standard_catalog, CatalogMetric};
use finsler_core::{eval_jet, FdOracle, MetricExpr, OrderBound, Point};
use num_complex::Complex64;
use serde_json::json;

#[derive(Parser)]
#[command(name = "finsler-lab", version, about = "Pointwise curvature laboratory for complex Finsler metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in metrics and the parameters of each family.
    Catalog,
    /// Run a configuration file and write a JSON report.
    Run(RunArgs),
    /// Evaluate one point and dump every tensor.
    Point(PointArgs),
    /// Compare the jet of G at one point with finite differences.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (also accepted as --config).
    config_path: Option<PathBuf>,
    #[arg(long = "config")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    points: Option<usize>,
    /// Tolerance override `name=value`; repeatable.
    #[arg(long = "tol")]
    tol: Vec<String>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces the configured task list; repeatable.
    #[arg(long = "task")]
    task: Vec<String>,
    /// Leave the timing field out of the report.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct PointSelection {
    /// Catalog label, or a JSON file holding a metric source, catalog
    /// family or metric expression.
    #[arg(long)]
    metric: String,
    /// Comma-separated complex coordinates, e.g. `0.1+0.2i,-0.3i`.
    #[arg(long, allow_hyphen_values = true)]
    z: String,
    #[arg(long, allow_hyphen_values = true)]
    v: String,
}

#[derive(Args)]
struct PointArgs {
    #[command(flatten)]
    at: PointSelection,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    at: PointSelection,
    /// Highest total derivative order compared.
    #[arg(long, default_value_t = ORACLE_MAX_ORDER)]
    max_order: u32,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            e.downcast_ref::<CliError>().map_or(2, CliError::exit_code)
        }
    };
    ExitCode::from(code as u8)
}

fn execute(cmd: Command) -> anyhow::Result<i32> {
    match cmd {
        Command::Catalog => {
            let families: Vec<_> = CatalogMetric::families()
                .into_iter()
                .map(|(name, doc)| json!({"family": name, "parameters": doc}))
                .collect();
            let metrics: Vec<_> = standard_catalog()
                .into_iter()
                .map(|(label, spec)| json!({"label": label, "spec": spec}))
                .collect();
            emit(&serde_json::to_string_pretty(&json!({"families": families, "metrics": metrics}))?)?;
            Ok(0)
        }
        Command::Run(args) => run_command(args),
        Command::Point(args) => {
            let (metric, p) = resolve(&args.at)?;
            let report = PointReport::new(&metric, &p)?;
            emit(&serde_json::to_string_pretty(&report)?)?;
            Ok(0)
        }
        Command::Oracle(args) => {
            let (metric, p) = resolve(&args.at)?;
            let table = eval_jet(&metric, &p, OrderBound::default())?;
            let mut oracle = FdOracle::for_metric(&metric, &p, args.max_order as usize)?;
            let mut rows = Vec::new();
            for (idx, value) in table.entries() {
                if idx.order() > args.max_order {
                    continue;
                }
                let fd = oracle.partial(&idx)?;
                rows.push(json!({
                    "index": idx,
                    "jet": [value.re, value.im],
                    "fd": [fd.re, fd.im],
                    "rel": (value - fd).norm() / value.norm().max(1.0),
                }));
            }
            let (summary, worst) = oracle_residual(&metric, &p, OrderBound::default(), args.max_order)?;
            let out = json!({
                "max_abs": summary.max_abs,
                "max_rel": summary.max_rel,
                "worst": worst,
                "entries": rows,
            });
            emit(&serde_json::to_string_pretty(&out)?)?;
            Ok(0)
        }
    }
}

fn run_command(args: RunArgs) -> anyhow::Result<i32> {
    let path = args
        .config
        .or(args.config_path)
        .ok_or_else(|| CliError::Config("no configuration given".into()))?;
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = RunConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        cfg.sample.seed = seed;
    }
    if let Some(n) = args.points {
        cfg.sample.count = n;
    }
    for t in &args.tol {
        cfg.set_tolerance(t)?;
    }
    if !args.task.is_empty() {
        cfg.tasks = args.task.iter().map(|t| Task::parse(t)).collect::<Result<_, _>>()?;
    }
    if let Some(out) = args.out {
        cfg.output = Some(out);
    }
    let mut report = run(&cfg)?;
    if args.no_timing {
        report = report.without_timing();
    }
    let text = report.to_json();
    match &cfg.output {
        Some(out) => std::fs::write(out, text + "\n").map_err(CliError::from)?,
        None => emit(&text)?,
    }
    for name in &report.failures {
        eprintln!("identity failed: {name}");
    }
    Ok(report.exit_code())
}

/// Writes to stdout, treating a closed pipe as a normal end of output.
fn emit(text: &str) -> std::io::Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other,
    }
}

fn resolve(at: &PointSelection) -> anyhow::Result<(MetricExpr, Point)> {
    let metric = load_metric(&at.metric)?;
    let p = Point::new(parse_complex_list(&at.z)?, parse_complex_list(&at.v)?)?;
    if p.n() != metric.n {
        return Err(CliError::Config(format!("point has dimension {} but the metric {}", p.n(), metric.n)).into());
    }
    Ok((metric, p))
}

fn load_metric(arg: &str) -> Result<MetricExpr, CliError> {
    if standard_catalog().iter().any(|(label, _)| label == arg) {
        return MetricSource::Named(arg.to_string()).build();
    }
    let text = std::fs::read_to_string(Path::new(arg))
        .map_err(|e| CliError::Config(format!("{arg:?} is neither a catalog label nor a readable file: {e}")))?;
    if let Ok(source) = serde_json::from_str::<MetricSource>(&text) {
        return source.build();
    }
    if let Ok(family) = serde_json::from_str::<CatalogMetric>(&text) {
        return MetricSource::Catalog(family).build();
    }
    MetricExpr::from_json(&text).map_err(|e| CliError::Config(e.to_string()))
}

fn parse_complex_list(s: &str) -> Result<Vec<Complex64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<Complex64>()
                .map_err(|_| CliError::Config(format!("cannot read {t:?} as a complex number")))
        })
        .collect()
}

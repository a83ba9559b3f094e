//! `aoi-isac` command line: solve, verify, simulate and sweep.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid configuration or input,
//! 3 value iteration did not converge, 4 a structure check failed.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{ConfigError, Format, RunConfig, OUTPUT_DIR_ENV};
use crate::grid::{PolicyGrid, ValueGrid};
use crate::io;
use crate::model::ModelParams;
use crate::sim::{self, BaselineKind, Policy, SimEstimate};
use crate::solver::{self, extract_thresholds, Solution, SolveError, SolveReport, ThresholdCurve};
use crate::structure::{self, StructureReport, STRUCTURE_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_VERIFY_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "aoi-isac", version, about = "Optimal AoI sensing/communication scheduling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve by value iteration and write value, policy and threshold artifacts.
    Solve(CommonArgs),
    /// Run every structure check on a solved (or loaded) value grid.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Value-grid CSV to check instead of solving in-process.
        #[arg(long)]
        values: Option<PathBuf>,
    },
    /// Monte Carlo estimate of a policy's discounted cost.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// optimal | always-sense | always-comm | alternate | random:P | file:PATH
        #[arg(long, default_value = "optimal")]
        policy: String,
        /// Number of trajectories to dump as CSV.
        #[arg(long, default_value_t = 1)]
        dump: usize,
    },
    /// Re-solve over a list of values of one parameter.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// lambda_s | lambda_c | c_s | c_c | gamma
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<String>,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config file; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "model.lambda_s", value_name = "P")]
    pub lambda_s: Option<String>,
    #[arg(long = "model.lambda_c", value_name = "P")]
    pub lambda_c: Option<String>,
    #[arg(long = "model.c_s", value_name = "COST")]
    pub c_s: Option<String>,
    #[arg(long = "model.c_c", value_name = "COST")]
    pub c_c: Option<String>,
    #[arg(long = "model.gamma", value_name = "GAMMA")]
    pub gamma: Option<String>,
    #[arg(long = "model.a_max", value_name = "N")]
    pub a_max: Option<String>,
    #[arg(long = "solver.tol", value_name = "TOL")]
    pub tol: Option<String>,
    #[arg(long = "solver.max_iter", value_name = "N")]
    pub max_iter: Option<String>,
    #[arg(long = "sim.n", value_name = "N")]
    pub n: Option<String>,
    #[arg(long = "sim.horizon", value_name = "N")]
    pub horizon: Option<String>,
    #[arg(long = "sim.seed", value_name = "SEED")]
    pub seed: Option<String>,
    #[arg(long = "sim.s0", value_name = "AS,AB")]
    pub s0: Option<String>,
    #[arg(long = "output.directory", value_name = "DIR")]
    pub directory: Option<String>,
    #[arg(long = "output.formats", value_name = "LIST")]
    pub formats: Option<String>,
}

impl CommonArgs {
    fn overrides(&self) -> [(&'static str, &Option<String>); 14] {
        [
            ("model.lambda_s", &self.lambda_s),
            ("model.lambda_c", &self.lambda_c),
            ("model.c_s", &self.c_s),
            ("model.c_c", &self.c_c),
            ("model.gamma", &self.gamma),
            ("model.a_max", &self.a_max),
            ("solver.tol", &self.tol),
            ("solver.max_iter", &self.max_iter),
            ("sim.n", &self.n),
            ("sim.horizon", &self.horizon),
            ("sim.seed", &self.seed),
            ("sim.s0", &self.s0),
            ("output.directory", &self.directory),
            ("output.formats", &self.formats),
        ]
    }

    /// Defaults, then the config file, then the output-directory environment
    /// variable, then flags.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            config.apply_override("output.directory", &dir)?;
        }
        for (field, value) in self.overrides() {
            if let Some(value) = value {
                config.apply_override(field, value)?;
            }
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn invalid(message: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.to_string(),
        }
    }

    fn io(path: &Path, err: std::io::Error) -> Self {
        Self {
            code: EXIT_IO,
            message: format!("{}: {err}", path.display()),
        }
    }
}

type CmdResult = Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Solve(common) => cmd_solve(common),
        Command::Verify { common, values } => cmd_verify(common, values.as_deref()),
        Command::Simulate {
            common,
            policy,
            dump,
        } => cmd_simulate(common, policy, *dump),
        Command::Sweep {
            common,
            axis,
            values,
        } => cmd_sweep(common, axis, values),
    };
    match result {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

fn resolve(common: &CommonArgs) -> Result<RunConfig, Failure> {
    common.resolve().map_err(Failure::invalid)
}

struct Writer<'a> {
    config: &'a RunConfig,
}

impl Writer<'_> {
    fn dir(&self) -> &Path {
        &self.config.output.directory
    }

    fn comments(&self, what: &str, extra: &[String]) -> Vec<String> {
        let a = self.config.model.a_max;
        let mut c = vec![format!(
            "aoi-isac {what}; rows alpha_s = 0..={a} ascending, columns alpha_b = 0..={a} ascending"
        )];
        c.extend_from_slice(extra);
        c.push(format!("config: {}", self.config.to_compact_json()));
        c
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        let dir = self.dir();
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| Failure::io(&path, e))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).expect("artifact serialises");
        text.push('\n');
        self.write(name, &text)
    }

    fn wants(&self, f: Format) -> bool {
        self.config.output.wants(f)
    }
}

/// Runs value iteration; a non-converged run yields its partial solution.
fn solve_config(config: &RunConfig) -> Result<(Solution, bool), Failure> {
    match solver::value_iteration(&config.model, config.solver.tol, config.solver.max_iter) {
        Ok(sol) => Ok((sol, true)),
        Err(SolveError::NotConverged(partial)) => Ok((*partial, false)),
        Err(e) => Err(Failure::invalid(e)),
    }
}

#[derive(Serialize)]
struct SolveArtifact<'a> {
    config: &'a RunConfig,
    converged: bool,
    partial: bool,
    report: &'a SolveReport,
    assumption_lambda_c_ge_lambda_s: bool,
    single_crossing_ok: bool,
    thresholds: &'a ThresholdCurve,
}

fn cmd_solve(common: &CommonArgs) -> CmdResult {
    let config = resolve(common)?;
    let (sol, converged) = solve_config(&config)?;
    let (curve, single_crossing_ok) = extract_thresholds(&sol.policy);
    let out = Writer { config: &config };
    let status = if converged {
        vec![]
    } else {
        vec!["status: NOT CONVERGED, partial result".to_owned()]
    };

    if out.wants(Format::Csv) {
        out.write("value.csv", &io::value_grid_to_csv(&sol.values, &out.comments("value grid", &status)))?;
        out.write(
            "policy.csv",
            &io::policy_grid_to_csv(&sol.policy, &out.comments("decision map (0 = sense, 1 = comm)", &status)),
        )?;
        out.write(
            "thresholds.csv",
            &io::thresholds_to_csv(&curve, &out.comments("threshold curve (-1 = comm in whole row)", &status)),
        )?;
    }
    if out.wants(Format::Ascii) {
        out.write(
            "decision_map.txt",
            &io::decision_map_ascii(&sol.policy, &out.comments("decision map (S = sense, C = comm)", &status)),
        )?;
    }
    if out.wants(Format::Pgm) {
        out.write("value.pgm", &io::value_grid_to_pgm(&sol.values, &out.comments("value surface", &status)))?;
    }
    if out.wants(Format::Json) {
        out.write_json(
            "solve.json",
            &SolveArtifact {
                config: &config,
                converged,
                partial: !converged,
                report: &sol.report,
                assumption_lambda_c_ge_lambda_s: config.model.assumption_holds(),
                single_crossing_ok,
                thresholds: &curve,
            },
        )?;
    }

    println!(
        "{} after {} sweeps (last change {:.3e}, suboptimality <= {:.3e})",
        if converged { "converged" } else { "NOT converged" },
        sol.report.iterations,
        sol.report.final_sweep_delta,
        sol.report.suboptimality_bound
    );
    println!("tau = {:?}", curve.tau);
    eprintln!("wall time {:.3}s", sol.report.wall_time);
    Ok(if converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

#[derive(Serialize)]
struct VerifyBundle<'a> {
    config: &'a RunConfig,
    source: String,
    assumption_lambda_c_ge_lambda_s: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    assumption_notice: Option<String>,
    all_passed: bool,
    checks: &'a [StructureReport],
}

const ASSUMPTION_NOTICE: &str =
    "lambda_c < lambda_s: the threshold-structure results assume lambda_c >= lambda_s";

fn cmd_verify(common: &CommonArgs, values_path: Option<&Path>) -> CmdResult {
    let config = resolve(common)?;
    let (values, source) = match values_path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::invalid(format!("cannot read value grid {}: {e}", path.display())))?;
            let grid = io::value_grid_from_csv(&text)
                .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
            if grid.a_max() != config.model.a_max {
                return Err(Failure::invalid(format!(
                    "{} holds a grid with a_max = {}, but model.a_max = {}",
                    path.display(),
                    grid.a_max(),
                    config.model.a_max
                )));
            }
            (grid, format!("file:{}", path.display()))
        }
        None => {
            let (sol, converged) = solve_config(&config)?;
            if !converged {
                return Err(Failure {
                    code: EXIT_NOT_CONVERGED,
                    message: format!(
                        "value iteration did not converge within {} sweeps",
                        config.solver.max_iter
                    ),
                });
            }
            (sol.values, "solved".to_owned())
        }
    };

    let checks = structure::full_suite(&values, &config.model, STRUCTURE_TOL);
    let all_passed = checks.iter().all(|c| c.passed);
    let notice = (!config.model.assumption_holds()).then(|| ASSUMPTION_NOTICE.to_owned());
    if let Some(n) = &notice {
        eprintln!("warning: {n}");
    }
    for c in &checks {
        println!(
            "{} {:<24} violations={} (reachable {}) max={:.3e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.check_name,
            c.violations.len(),
            c.reachable_violations,
            c.max_magnitude()
        );
    }
    let out = Writer { config: &config };
    if out.wants(Format::Json) {
        out.write_json(
            "verify.json",
            &VerifyBundle {
                config: &config,
                source,
                assumption_lambda_c_ge_lambda_s: config.model.assumption_holds(),
                assumption_notice: notice,
                all_passed,
                checks: &checks,
            },
        )?;
    }
    Ok(if all_passed { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

enum PolicySource {
    Optimal,
    Baseline(BaselineKind),
    File(PathBuf),
}

fn parse_policy_source(spec: &str) -> Result<PolicySource, Failure> {
    Ok(match spec {
        "optimal" => PolicySource::Optimal,
        "always-sense" => PolicySource::Baseline(BaselineKind::AlwaysSense),
        "always-comm" => PolicySource::Baseline(BaselineKind::AlwaysComm),
        "alternate" => PolicySource::Baseline(BaselineKind::Alternate),
        other => {
            if let Some(p) = other.strip_prefix("random:") {
                let p: f64 = p
                    .parse()
                    .map_err(|_| Failure::invalid(format!("policy: bad probability {p:?}")))?;
                PolicySource::Baseline(BaselineKind::RandomBernoulli(p))
            } else if let Some(path) = other.strip_prefix("file:") {
                PolicySource::File(PathBuf::from(path))
            } else {
                return Err(Failure::invalid(format!("policy: unknown source {other:?}")));
            }
        }
    })
}

#[derive(Serialize)]
struct SimulateArtifact<'a> {
    config: &'a RunConfig,
    policy_source: &'a str,
    estimate: &'a SimEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    optimal_value_at_s0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    abs_error: Option<f64>,
    /// `abs_error <= 3·std_error + truncation_bias_bound`.
    #[serde(skip_serializing_if = "Option::is_none")]
    within_bound: Option<bool>,
}

fn load_policy_file(path: &Path, params: &ModelParams) -> Result<PolicyGrid, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::invalid(format!("cannot read policy {}: {e}", path.display())))?;
    let grid = io::policy_grid_from_csv(&text)
        .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    if grid.a_max() != params.a_max {
        return Err(Failure::invalid(format!(
            "{} holds a policy with a_max = {}, but model.a_max = {}",
            path.display(),
            grid.a_max(),
            params.a_max
        )));
    }
    Ok(grid)
}

fn cmd_simulate(common: &CommonArgs, policy_spec: &str, dump: usize) -> CmdResult {
    let config = resolve(common)?;
    let params = &config.model;
    let source = parse_policy_source(policy_spec)?;
    let mut optimal_value = None;
    let policy: Box<dyn Policy> = match source {
        PolicySource::Optimal => {
            let (sol, converged) = solve_config(&config)?;
            if !converged {
                return Err(Failure {
                    code: EXIT_NOT_CONVERGED,
                    message: "value iteration did not converge; no optimal policy".into(),
                });
            }
            optimal_value = Some(sol.values[config.sim.s0]);
            Box::new(sol.policy)
        }
        PolicySource::Baseline(kind) => {
            Box::new(sim::baseline_policy(kind, params).map_err(Failure::invalid)?)
        }
        PolicySource::File(path) => Box::new(load_policy_file(&path, params)?),
    };

    let sc = &config.sim;
    let estimate = sim::estimate_value(policy.as_ref(), params, sc.s0, sc.n, sc.horizon, sc.seed);
    let abs_error = optimal_value.map(|v| (estimate.mean - v).abs());
    let within_bound =
        abs_error.map(|e| e <= 3.0 * estimate.std_error + estimate.truncation_bias_bound);

    let out = Writer { config: &config };
    if out.wants(Format::Csv) {
        for i in 0..dump.min(sc.n) {
            let t = sim::rollout_indexed(policy.as_ref(), params, sc.s0, sc.horizon, sc.seed, i as u64);
            let mut text = String::new();
            text.push_str(&format!("# aoi-isac trajectory {i} of policy {policy_spec}\n"));
            text.push_str(&format!("# config: {}\n", config.to_compact_json()));
            let mut buf = Vec::new();
            sim::write_trajectory_csv(&mut buf, &t, params).expect("writing to memory");
            text.push_str(std::str::from_utf8(&buf).expect("csv is utf-8"));
            out.write(&format!("trajectory_{i}.csv"), &text)?;
        }
    }
    if out.wants(Format::Json) {
        out.write_json(
            "simulate.json",
            &SimulateArtifact {
                config: &config,
                policy_source: policy_spec,
                estimate: &estimate,
                optimal_value_at_s0: optimal_value,
                abs_error,
                within_bound,
            },
        )?;
    }
    println!(
        "mean {:.6} ± {:.6} (n = {}, horizon {}, tail bound {:.3e})",
        estimate.mean, estimate.std_error, estimate.n_trajectories, estimate.horizon, estimate.truncation_bias_bound
    );
    if let (Some(v), Some(e)) = (optimal_value, abs_error) {
        println!("V*(s0) = {v:.6}, |mean - V*| = {e:.3e}");
    }
    Ok(EXIT_OK)
}

pub const SWEEP_AXES: &[&str] = &["lambda_s", "lambda_c", "c_s", "c_c", "gamma"];

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: String,
    /// `converged`, `not_converged` or `rejected`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    /// Check name and pass bit, in suite order.
    pub checks: Vec<(String, bool)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<i64>>,
}

#[derive(Serialize)]
struct SweepArtifact<'a> {
    config: &'a RunConfig,
    axis: &'a str,
    rows: &'a [SweepRow],
}

fn sweep_row(config: &RunConfig, axis: &str, raw: &str) -> SweepRow {
    let rejected = |diagnostic: String| SweepRow {
        value: raw.to_owned(),
        status: "rejected".into(),
        diagnostic: Some(diagnostic),
        iterations: None,
        checks: vec![],
        tau: None,
    };
    let mut cfg = config.clone();
    let field = format!("model.{axis}");
    if let Err(e) = cfg.apply_override(&field, raw).and_then(|_| cfg.validate()) {
        return rejected(e.to_string());
    }
    let (sol, converged) = match solve_config(&cfg) {
        Ok(s) => s,
        Err(f) => return rejected(f.message),
    };
    let checks = structure::full_suite(&sol.values, &cfg.model, STRUCTURE_TOL);
    let (curve, _) = extract_thresholds(&sol.policy);
    SweepRow {
        value: raw.to_owned(),
        status: if converged { "converged" } else { "not_converged" }.into(),
        diagnostic: None,
        iterations: Some(sol.report.iterations),
        checks: checks.iter().map(|c| (c.check_name.clone(), c.passed)).collect(),
        tau: Some(curve.tau),
    }
}

/// One row per value; invalid values become `rejected` rows.
pub fn run_sweep(config: &RunConfig, axis: &str, values: &[String]) -> Vec<SweepRow> {
    values.iter().map(|v| sweep_row(config, axis, v.trim())).collect()
}

fn sweep_csv(config: &RunConfig, axis: &str, rows: &[SweepRow]) -> String {
    let names: Vec<String> = structure::full_suite(
        &ValueGrid::filled(config.model.a_max, 0.0),
        &config.model,
        STRUCTURE_TOL,
    )
    .into_iter()
    .map(|c| c.check_name)
    .collect();
    let mut out = format!("# aoi-isac sweep over model.{axis}\n# config: {}\n", config.to_compact_json());
    out.push_str(&format!("{axis},status,iterations,{},tau\n", names.join(",")));
    for r in rows {
        let bits: Vec<String> = if r.checks.is_empty() {
            vec![String::new(); names.len()]
        } else {
            r.checks.iter().map(|(_, ok)| if *ok { "1" } else { "0" }.to_owned()).collect()
        };
        let tau = r
            .tau
            .as_ref()
            .map(|t| t.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.value,
            r.status,
            r.iterations.map(|i| i.to_string()).unwrap_or_default(),
            bits.join(","),
            tau
        ));
    }
    out
}

fn cmd_sweep(common: &CommonArgs, axis: &str, values: &[String]) -> CmdResult {
    let config = resolve(common)?;
    if !SWEEP_AXES.contains(&axis) {
        return Err(Failure::invalid(format!(
            "axis must be one of {}, got {axis:?}",
            SWEEP_AXES.join(", ")
        )));
    }
    let rows = run_sweep(&config, axis, values);
    for r in &rows {
        match &r.diagnostic {
            Some(d) => eprintln!("{axis} = {}: rejected: {d}", r.value),
            None => println!(
                "{axis} = {}: {} checks passed, {}",
                r.value,
                r.checks.iter().filter(|(_, ok)| *ok).count(),
                r.status
            ),
        }
    }
    let out = Writer { config: &config };
    if out.wants(Format::Csv) {
        out.write("sweep.csv", &sweep_csv(&config, axis, &rows))?;
    }
    if out.wants(Format::Json) {
        out.write_json(
            "sweep.json",
            &SweepArtifact {
                config: &config,
                axis,
                rows: &rows,
            },
        )?;
    }
    Ok(if rows.iter().any(|r| r.status == "rejected") {
        EXIT_INVALID
    } else if rows.iter().any(|r| r.status == "not_converged") {
        EXIT_NOT_CONVERGED
    } else if rows.iter().any(|r| r.checks.iter().any(|(_, ok)| !ok)) {
        EXIT_VERIFY_FAILED
    } else {
        EXIT_OK
    })
}

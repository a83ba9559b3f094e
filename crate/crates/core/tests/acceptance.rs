//! Acceptance suite: one PASS/FAIL line per criterion, with indented detail
//! lines for each part. Exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use aoi_isac::io::{value_grid_from_csv, value_grid_to_csv};
use aoi_isac::sim::{baseline_policy, estimate_value, BaselineKind};
use aoi_isac::structure::{
    check_delta_monotone, check_monotone, check_q_submodular, check_single_crossing,
    check_submodular, check_threshold_monotone, full_suite,
};
use aoi_isac::{
    delta, exhaustive_policy_oracle, extract_thresholds, policy_iteration, value_iteration,
    Action, AoIState, ModelParams, Solution, ValueGrid,
};

const TOL: f64 = 1e-9;
const MAX_SWEEPS: usize = 100_000;

struct Criterion {
    parts: Vec<(bool, String)>,
}

impl Criterion {
    fn new() -> Self {
        Self { parts: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: impl Into<String>) -> bool {
        self.parts.push((ok, detail.into()));
        ok
    }

    fn passed(&self) -> bool {
        self.parts.iter().all(|(ok, _)| *ok)
    }
}

type Run = fn(&mut Criterion);

fn mark(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn reference() -> ModelParams {
    ModelParams {
        lambda_s: 0.6,
        lambda_c: 0.9,
        c_s: 0.2,
        c_c: 0.1,
        gamma: 0.95,
        a_max: 30,
    }
}

fn solve(p: &ModelParams) -> Solution {
    value_iteration(p, TOL, MAX_SWEEPS).expect("value iteration converges")
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn reproduction(c: &mut Criterion) {
    let p = reference();
    let (sol, took) = timed(|| solve(&p));
    c.check(
        sol.report.iterations <= MAX_SWEEPS && took < Duration::from_secs(10),
        format!(
            "value iteration: {} sweeps, final change {:.2e}, {:.3} s",
            sol.report.iterations,
            sol.report.final_sweep_delta,
            took.as_secs_f64()
        ),
    );
    let mono = check_monotone(&sol.values, TOL);
    c.check(mono.passed, format!("check_monotone: {} violations", mono.violations.len()));
    let sub = check_submodular(&sol.values, TOL);
    c.check(
        sub.passed,
        format!(
            "check_submodular: {} violations, max {:.3e}",
            sub.violations.len(),
            sub.max_magnitude()
        ),
    );
}

fn switching_curve(c: &mut Criterion) {
    let p = reference();
    let sol = solve(&p);
    let crossing = check_single_crossing(&sol.policy);
    c.check(
        crossing.passed && sol.policy.side() == 31,
        format!("single crossing on {} rows: {} violations", sol.policy.side(), crossing.violations.len()),
    );
    let (curve, _) = extract_thresholds(&sol.policy);
    let tau = check_threshold_monotone(&curve);
    c.check(tau.passed, format!("tau nondecreasing: tau = {:?}", curve.tau));
    let dm = check_delta_monotone(&sol.values, &p, TOL);
    c.check(dm.passed, format!("check_delta_monotone: {} violations", dm.violations.len()));
    let qs = check_q_submodular(&sol.values, &p, TOL);
    c.check(
        qs.passed,
        format!(
            "check_q_submodular: {} violations, max {:.3e}",
            qs.violations.len(),
            qs.max_magnitude()
        ),
    );
}

fn oracle_equivalence(c: &mut Criterion) {
    let p = ModelParams {
        a_max: 2,
        gamma: 0.9,
        ..reference()
    };
    let ((oracle, sol), took) = timed(|| {
        let oracle = exhaustive_policy_oracle(&p).expect("oracle");
        (oracle, solve(&p))
    });
    let (v_oracle, pol_oracle) = oracle;
    let gap = v_oracle.sup_distance(&sol.values);
    c.check(gap <= 1e-6, format!("sup |V_oracle - V_vi| = {gap:.3e} over 512 policies"));
    let mismatches: Vec<AoIState> = p
        .states()
        .filter(|&s| delta(&sol.values, s, &p).abs() > 1e-9 && pol_oracle[s] != sol.policy[s])
        .collect();
    c.check(mismatches.is_empty(), format!("policy mismatches where |delta| > 1e-9: {mismatches:?}"));
    c.check(took < Duration::from_secs(1), format!("runtime {:.3} s", took.as_secs_f64()));
}

fn cross_method(c: &mut Criterion) {
    for a_max in [5, 10, 30] {
        let p = ModelParams { a_max, ..reference() };
        let vi = solve(&p);
        let (v_pi, _) = policy_iteration(&p, 1e-12).expect("policy iteration");
        let gap = vi.values.sup_distance(&v_pi);
        c.check(gap <= 1e-6, format!("a_max = {a_max}: sup |V_pi - V_vi| = {gap:.3e}"));
    }
}

fn monte_carlo(c: &mut Criterion) {
    let p = reference();
    let sol = solve(&p);
    let s0 = AoIState::new(1, 1);
    let horizon = 400;
    let (est, took) = timed(|| estimate_value(&sol.policy, &p, s0, 10_000, horizon, 42));
    let v = sol.values[s0];
    let bound = 3.0 * est.std_error
        + p.gamma.powi(horizon as i32) * (p.a_max as f64 + 0.2) / (1.0 - p.gamma);
    let err = (est.mean - v).abs();
    c.check(
        err <= bound,
        format!(
            "mean {:.6} +- {:.6}, V*(1,1) = {v:.6}, |error| = {err:.3e} <= {bound:.3e}",
            est.mean, est.std_error
        ),
    );
    c.check(took < Duration::from_secs(30), format!("runtime {:.3} s", took.as_secs_f64()));
}

fn dominance(c: &mut Criterion) {
    let p = reference();
    let sol = solve(&p);
    let s0 = AoIState::new(1, 1);
    let (n, horizon, seed) = (10_000, 400, 42);
    let opt = estimate_value(&sol.policy, &p, s0, n, horizon, seed);
    let baselines = [
        ("AlwaysSense", BaselineKind::AlwaysSense),
        ("AlwaysComm", BaselineKind::AlwaysComm),
        ("Alternate", BaselineKind::Alternate),
        ("RandomBernoulli(0.5)", BaselineKind::RandomBernoulli(0.5)),
    ];
    for (name, kind) in baselines {
        let pol = baseline_policy(kind, &p).expect("valid baseline");
        let est = estimate_value(&pol, &p, s0, n, horizon, seed);
        let margin = 3.0 * (opt.std_error.powi(2) + est.std_error.powi(2)).sqrt();
        let gain = est.mean - opt.mean;
        c.check(
            gain > margin,
            format!("{name}: {:.4} vs optimal {:.4}, gap {gain:.4} > {margin:.4}", est.mean, opt.mean),
        );
    }
}

fn robustness(c: &mut Criterion) {
    let d = reference();
    let mut instances: Vec<(String, ModelParams)> = Vec::new();
    for c_c in [0.05, 0.1, 0.2, 0.4] {
        instances.push((format!("c_c = {c_c}"), ModelParams { c_c, ..d }));
    }
    for gamma in [0.5, 0.9, 0.95] {
        instances.push((format!("gamma = {gamma}"), ModelParams { gamma, ..d }));
    }
    for lambda_s in [0.3, 0.6, 0.8] {
        instances.push((format!("lambda_s = {lambda_s}"), ModelParams { lambda_s, ..d }));
    }
    for (label, p) in instances {
        let sol = solve(&p);
        let failed: Vec<String> = full_suite(&sol.values, &p, TOL)
            .into_iter()
            .filter(|r| !r.passed)
            .map(|r| format!("{} ({})", r.check_name, r.violations.len()))
            .collect();
        let detail = if failed.is_empty() {
            format!("{label}: all checks pass")
        } else {
            format!("{label}: failed {}", failed.join(", "))
        };
        c.check(failed.is_empty(), detail);
    }
}

fn degenerate(c: &mut Criterion) {
    let d = reference();

    let p = ModelParams { gamma: 0.0, ..d };
    let sol = solve(&p);
    let all_comm = sol.policy.cells().iter().all(|&a| a == Action::Comm);
    c.check(
        all_comm && sol.report.iterations == 2,
        format!("gamma = 0: all-Comm = {all_comm}, {} sweeps", sol.report.iterations),
    );

    let p = ModelParams {
        lambda_s: 1.0,
        lambda_c: 1.0,
        ..d
    };
    let sol = solve(&p);
    let s0 = AoIState::new(1, 1);
    let mut spreads = vec![estimate_value(&sol.policy, &p, s0, 1000, 400, 7).std_error];
    for kind in [BaselineKind::AlwaysSense, BaselineKind::AlwaysComm, BaselineKind::Alternate] {
        let pol = baseline_policy(kind, &p).unwrap();
        spreads.push(estimate_value(&pol, &p, s0, 1000, 400, 7).std_error);
    }
    c.check(
        spreads.iter().all(|&s| s == 0.0),
        format!("perfect links: std errors {spreads:?}"),
    );

    let mut worst: f64 = 0.0;
    for k in [0.0, 1.0, 37.5] {
        let v = ValueGrid::filled(d.a_max, k);
        for s in d.states() {
            worst = worst.max((delta(&v, s, &d) - (d.c_s - d.c_c)).abs());
        }
    }
    c.check(worst <= 1e-12, format!("constant V: max |delta - (c_s - c_c)| = {worst:.1e}"));
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .expect("output directory")
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn determinism(c: &mut Criterion) {
    let commands: &[&[&str]] = &[
        &["solve"],
        &["verify"],
        &["simulate", "--sim.n", "2000", "--dump", "3"],
        &["simulate", "--policy", "random:0.5", "--sim.n", "2000"],
        &["sweep", "--axis", "gamma", "--values", "0.5,0.9,0.95"],
    ];
    for args in commands {
        let tmp = tempfile::tempdir().expect("temp dir");
        let run = || {
            Command::new(env!("CARGO_BIN_EXE_aoi-isac"))
                .args(*args)
                .arg("--output.directory")
                .arg(tmp.path())
                .env_remove(aoi_isac::config::OUTPUT_DIR_ENV)
                .output()
                .expect("binary runs")
        };
        let first = run();
        let before = snapshot(tmp.path());
        let second = run();
        let after = snapshot(tmp.path());
        let same = first.stdout == second.stdout
            && first.status.code() == second.status.code()
            && before == after
            && !before.is_empty();
        c.check(
            same,
            format!("{}: {} artifacts byte-identical across runs", args.join(" "), before.len()),
        );
    }

    let p = reference();
    let sol = solve(&p);
    let meta = vec!["round trip".to_owned()];
    let csv = value_grid_to_csv(&sol.values, &meta);
    let back = value_grid_from_csv(&csv).expect("parses");
    let bitwise = back
        .cells()
        .iter()
        .zip(sol.values.cells())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    c.check(
        bitwise && value_grid_to_csv(&back, &meta) == csv,
        "value CSV export -> import -> export is lossless",
    );
}

fn main() {
    let criteria: [(&str, Run); 9] = [
        ("reference reproduction: convergence, monotone and submodular V*", reproduction),
        ("threshold certificate: single crossing, monotone tau, interior checks", switching_curve),
        ("oracle equivalence on a 3x3 grid", oracle_equivalence),
        ("policy iteration agrees with value iteration", cross_method),
        ("Monte Carlo agrees with V*(1,1)", monte_carlo),
        ("optimal policy dominates baselines", dominance),
        ("robustness sweep passes full structure suite", robustness),
        ("degenerate analytics", degenerate),
        ("determinism and lossless CSV", determinism),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let mut c = Criterion::new();
        run(&mut c);
        let ok = c.passed();
        failures += usize::from(!ok);
        println!("[{}] criterion {}: {name}", mark(ok), i + 1);
        for (part_ok, detail) in &c.parts {
            println!("       {} {detail}", mark(*part_ok));
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}

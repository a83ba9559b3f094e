//! Value iteration on the truncated grid, greedy policy and threshold
//! extraction, plus two independent reference solvers: policy iteration with
//! exact evaluation, and brute-force enumeration of every stationary
//! deterministic policy on tiny grids.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::grid::{PolicyGrid, ValueGrid};
use crate::model::{delta, q_value, stage_cost, transition, Action, ModelParams, Outcome};

/// Largest state count evaluated by a dense linear solve; above this policy
/// evaluation iterates.
pub const DIRECT_SOLVE_MAX_STATES: usize = 2_500;

/// Largest state count accepted by [`exhaustive_policy_oracle`] (2^16 policies).
pub const ORACLE_MAX_STATES: usize = 16;

/// Improvement rounds allowed before policy iteration reports a cycle.
pub const POLICY_ITERATION_MAX_ROUNDS: usize = 1_000;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Sup-norm change of the last sweep.
    pub final_sweep_delta: f64,
    /// `γ · final_sweep_delta / (1 - γ)`, a bound on `‖V - V*‖∞`.
    pub suboptimality_bound: f64,
    /// Seconds. Not serialised, so artifacts stay byte-reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub values: ValueGrid,
    pub policy: PolicyGrid,
    pub report: SolveReport,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("value iteration did not converge: sweep change {} after {} sweeps", .0.report.final_sweep_delta, .0.report.iterations)]
    NotConverged(Box<Solution>),
    #[error("invalid solver setting: {0}")]
    InvalidSetting(String),
    #[error("policy iteration did not stabilise within {0} improvement rounds")]
    PolicyCycle(usize),
    #[error("{states} states exceed the enumeration bound of {limit}")]
    TooLarge { states: usize, limit: usize },
    #[error("policy evaluation system is singular")]
    Singular,
    #[error("no enumerated policy attains the pointwise minimum")]
    NoPointwiseMinimum,
}

/// Per-row switching threshold on `alpha_s`.
///
/// `tau[b] = -1` means Comm is optimal for every `alpha_s` in row `alpha_b = b`;
/// `tau[b] = a_max` means Sense everywhere in that row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdCurve {
    pub tau: Vec<i64>,
    /// Rows (`alpha_b` values) containing a Comm→Sense switch in ascending `alpha_s`.
    pub crossing_violations: Vec<usize>,
}

impl ThresholdCurve {
    pub fn a_max(&self) -> usize {
        self.tau.len() - 1
    }
}

/// One application of the Bellman operator: `min(Q_sense, Q_comm)` at every state.
pub fn bellman_backup(values: &ValueGrid, params: &ModelParams) -> ValueGrid {
    bellman_backup_with(values, params, Execution::default())
}

/// Jacobi-style backup: every cell reads only `values`.
pub fn bellman_backup_with(values: &ValueGrid, params: &ModelParams, exec: Execution) -> ValueGrid {
    let a_max = values.a_max();
    let cells = exec.map_range(values.cells().len(), |i| {
        let s = values.state_at(i);
        q_value(values, s, Action::Sense, params).min(q_value(values, s, Action::Comm, params))
    });
    ValueGrid::from_cells(a_max, cells).expect("backup preserves grid shape")
}

/// Sense where `delta <= 0`, Comm otherwise.
pub fn extract_policy(values: &ValueGrid, params: &ModelParams) -> PolicyGrid {
    PolicyGrid::from_fn(values.a_max(), |s| {
        if delta(values, s, params) <= 0.0 {
            Action::Sense
        } else {
            Action::Comm
        }
    })
}

pub fn value_iteration(
    params: &ModelParams,
    tol: f64,
    max_iter: usize,
) -> Result<Solution, SolveError> {
    value_iteration_with(params, tol, max_iter, Execution::default())
}

/// Iterates the backup from `V ≡ 0` until the sup-norm sweep change is at
/// most `tol`. On exhaustion of `max_iter` the partial solution is returned
/// inside [`SolveError::NotConverged`].
pub fn value_iteration_with(
    params: &ModelParams,
    tol: f64,
    max_iter: usize,
    exec: Execution,
) -> Result<Solution, SolveError> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(SolveError::InvalidSetting(format!("tol must be > 0, got {tol}")));
    }
    if max_iter == 0 {
        return Err(SolveError::InvalidSetting("max_iter must be >= 1".into()));
    }
    let start = Instant::now();
    let mut values = ValueGrid::filled(params.a_max, 0.0);
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        let next = bellman_backup_with(&values, params, exec);
        change = next.sup_distance(&values);
        values = next;
        iterations += 1;
        if change <= tol {
            break;
        }
    }
    let policy = extract_policy(&values, params);
    let report = SolveReport {
        iterations,
        final_sweep_delta: change,
        suboptimality_bound: params.gamma * change / (1.0 - params.gamma),
        wall_time: start.elapsed().as_secs_f64(),
    };
    let solution = Solution {
        values,
        policy,
        report,
    };
    if change <= tol {
        Ok(solution)
    } else {
        Err(SolveError::NotConverged(Box::new(solution)))
    }
}

/// Scans each `alpha_b` row in ascending `alpha_s` and records the last Sense
/// index. The flag is false when any row switches back from Comm to Sense.
pub fn extract_thresholds(policy: &PolicyGrid) -> (ThresholdCurve, bool) {
    let side = policy.side();
    let mut tau = Vec::with_capacity(side);
    let mut crossing_violations = Vec::new();
    for b in 0..side {
        let mut last_sense = -1i64;
        let mut seen_comm = false;
        let mut violated = false;
        for a in 0..side {
            match policy.get(a, b) {
                Action::Sense => {
                    if seen_comm {
                        violated = true;
                    }
                    last_sense = a as i64;
                }
                Action::Comm => seen_comm = true,
            }
        }
        if violated {
            crossing_violations.push(b);
        }
        tau.push(last_sense);
    }
    let ok = crossing_violations.is_empty();
    (
        ThresholdCurve {
            tau,
            crossing_violations,
        },
        ok,
    )
}

/// Builds `(I - γ P_π, g_π)` for a stationary policy.
fn evaluation_system(policy: &PolicyGrid, params: &ModelParams) -> (DMatrix<f64>, DVector<f64>) {
    let n = policy.cells().len();
    let mut lhs = DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for (i, (s, &action)) in policy.iter().enumerate() {
        let p = params.success_probability(action);
        rhs[i] = stage_cost(s, action, params);
        for (outcome, w) in [(Outcome::Success, p), (Outcome::Fail, 1.0 - p)] {
            let j = policy.flat_index(transition(s, action, outcome, params));
            lhs[(i, j)] -= params.gamma * w;
        }
    }
    (lhs, rhs)
}

fn evaluate_direct(policy: &PolicyGrid, params: &ModelParams) -> Result<ValueGrid, SolveError> {
    let (lhs, rhs) = evaluation_system(policy, params);
    let solution = lhs.lu().solve(&rhs).ok_or(SolveError::Singular)?;
    Ok(ValueGrid::from_cells(policy.a_max(), solution.iter().copied().collect())
        .expect("solution length matches grid"))
}

fn evaluate_iterative(
    policy: &PolicyGrid,
    params: &ModelParams,
    warm_start: ValueGrid,
    eval_tol: f64,
) -> ValueGrid {
    let mut values = warm_start;
    loop {
        let next = ValueGrid::from_fn(policy.a_max(), |s| q_value(&values, s, policy[s], params));
        let residual = next.sup_distance(&values);
        values = next;
        if residual <= eval_tol {
            return values;
        }
    }
}

/// Exact value of a stationary policy: direct solve up to
/// [`DIRECT_SOLVE_MAX_STATES`] states, iterative evaluation above that.
pub fn evaluate_policy(
    policy: &PolicyGrid,
    params: &ModelParams,
    eval_tol: f64,
) -> Result<ValueGrid, SolveError> {
    if policy.cells().len() <= DIRECT_SOLVE_MAX_STATES {
        evaluate_direct(policy, params)
    } else {
        Ok(evaluate_iterative(
            policy,
            params,
            ValueGrid::filled(policy.a_max(), 0.0),
            eval_tol,
        ))
    }
}

/// Howard policy iteration starting from the policy greedy for `V ≡ 0`.
pub fn policy_iteration(
    params: &ModelParams,
    eval_tol: f64,
) -> Result<(ValueGrid, PolicyGrid), SolveError> {
    if eval_tol.is_nan() || eval_tol <= 0.0 {
        return Err(SolveError::InvalidSetting(format!(
            "eval_tol must be > 0, got {eval_tol}"
        )));
    }
    let side = params.side();
    let direct = side * side <= DIRECT_SOLVE_MAX_STATES;
    let mut policy = extract_policy(&ValueGrid::filled(params.a_max, 0.0), params);
    let mut values = ValueGrid::filled(params.a_max, 0.0);
    for _ in 0..POLICY_ITERATION_MAX_ROUNDS {
        values = if direct {
            evaluate_direct(&policy, params)?
        } else {
            evaluate_iterative(&policy, params, values, eval_tol)
        };
        let improved = extract_policy(&values, params);
        if improved == policy {
            return Ok((values, policy));
        }
        policy = improved;
    }
    Err(SolveError::PolicyCycle(POLICY_ITERATION_MAX_ROUNDS))
}

/// Evaluates every stationary deterministic policy exactly and returns the one
/// attaining the pointwise minimum. Policies are enumerated by bitmask over
/// the row-major states (bit set = Comm), so among exact ties the first hit
/// favours Sense on low-index states.
pub fn exhaustive_policy_oracle(params: &ModelParams) -> Result<(ValueGrid, PolicyGrid), SolveError> {
    exhaustive_policy_oracle_with(params, Execution::default())
}

pub fn exhaustive_policy_oracle_with(
    params: &ModelParams,
    exec: Execution,
) -> Result<(ValueGrid, PolicyGrid), SolveError> {
    let states = params.side() * params.side();
    if states > ORACLE_MAX_STATES {
        return Err(SolveError::TooLarge {
            states,
            limit: ORACLE_MAX_STATES,
        });
    }
    let policy_of = |mask: usize| {
        PolicyGrid::from_cells(
            params.a_max,
            (0..states)
                .map(|i| if mask >> i & 1 == 1 { Action::Comm } else { Action::Sense })
                .collect(),
        )
        .expect("mask covers grid")
    };
    let evaluated: Vec<Result<ValueGrid, SolveError>> =
        exec.map_range(1 << states, |mask| evaluate_direct(&policy_of(mask), params));
    let evaluated = evaluated.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut floor = vec![f64::INFINITY; states];
    for v in &evaluated {
        for (m, x) in floor.iter_mut().zip(v.cells()) {
            *m = m.min(*x);
        }
    }
    let attains = |v: &ValueGrid| {
        v.cells()
            .iter()
            .zip(&floor)
            .all(|(x, m)| *x <= m + 1e-9 * (1.0 + m.abs()))
    };
    let mask = evaluated
        .iter()
        .position(attains)
        .ok_or(SolveError::NoPointwiseMinimum)?;
    let values = evaluated.into_iter().nth(mask).expect("index in range");
    Ok((values, policy_of(mask)))
}

//! Seeded Monte Carlo rollouts of the AoI dynamics.
//!
//! Randomness is split per trajectory: trajectory `i` draws link outcomes
//! from ChaCha stream `2i` and policy randomisation from stream `2i + 1`,
//! both keyed by the root seed. Trajectories therefore do not depend on `n`
//! or on the number of worker threads.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{pairwise_sum, Execution};
use crate::grid::PolicyGrid;
use crate::model::{stage_cost, transition, Action, AoIState, ModelParams, Outcome};

pub type SimRng = ChaCha8Rng;

/// Anything that picks an action per slot. `rng` is the policy's own stream.
pub trait Policy: Sync {
    fn action(&self, slot: usize, state: AoIState, rng: &mut SimRng) -> Action;
}

impl Policy for PolicyGrid {
    fn action(&self, _slot: usize, state: AoIState, _rng: &mut SimRng) -> Action {
        self[state]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    AlwaysSense,
    AlwaysComm,
    /// Sense on even slots, Comm on odd.
    Alternate,
    /// Comm with probability `p` each slot.
    RandomBernoulli(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaselinePolicy {
    Stationary(PolicyGrid),
    Alternate,
    RandomBernoulli(f64),
}

impl Policy for BaselinePolicy {
    fn action(&self, slot: usize, state: AoIState, rng: &mut SimRng) -> Action {
        match self {
            BaselinePolicy::Stationary(grid) => grid[state],
            BaselinePolicy::Alternate => {
                if slot.is_multiple_of(2) {
                    Action::Sense
                } else {
                    Action::Comm
                }
            }
            BaselinePolicy::RandomBernoulli(p) => {
                if rng.gen::<f64>() < *p {
                    Action::Comm
                } else {
                    Action::Sense
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("RandomBernoulli probability must lie in [0, 1], got {0}")]
pub struct InvalidProbability(pub f64);

pub fn baseline_policy(
    kind: BaselineKind,
    params: &ModelParams,
) -> Result<BaselinePolicy, InvalidProbability> {
    Ok(match kind {
        BaselineKind::AlwaysSense => {
            BaselinePolicy::Stationary(PolicyGrid::filled(params.a_max, Action::Sense))
        }
        BaselineKind::AlwaysComm => {
            BaselinePolicy::Stationary(PolicyGrid::filled(params.a_max, Action::Comm))
        }
        BaselineKind::Alternate => BaselinePolicy::Alternate,
        BaselineKind::RandomBernoulli(p) if (0.0..=1.0).contains(&p) => {
            BaselinePolicy::RandomBernoulli(p)
        }
        BaselineKind::RandomBernoulli(p) => return Err(InvalidProbability(p)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<AoIState>,
    pub actions: Vec<Action>,
    pub outcomes: Vec<Outcome>,
    pub discounted_cost: f64,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_trajectories: usize,
    pub horizon: usize,
    /// `γ^horizon · max_stage_cost / (1 - γ)`: the ignored tail.
    pub truncation_bias_bound: f64,
}

fn streams(seed: u64, index: u64) -> (SimRng, SimRng) {
    let mut outcomes = SimRng::seed_from_u64(seed);
    outcomes.set_stream(2 * index);
    let mut policy = SimRng::seed_from_u64(seed);
    policy.set_stream(2 * index + 1);
    (outcomes, policy)
}

/// Runs one trajectory, feeding each slot `(k, state, action, outcome)` to `visit`.
/// Returns the discounted cost.
fn simulate<P: Policy + ?Sized>(
    policy: &P,
    params: &ModelParams,
    s0: AoIState,
    horizon: usize,
    seed: u64,
    index: u64,
    mut visit: impl FnMut(usize, AoIState, Action, Outcome),
) -> f64 {
    let (mut outcome_rng, mut policy_rng) = streams(seed, index);
    let mut state = s0;
    let mut discount = 1.0;
    let mut cost = 0.0;
    for k in 0..horizon {
        let action = policy.action(k, state, &mut policy_rng);
        let outcome = if outcome_rng.gen::<f64>() < params.success_probability(action) {
            Outcome::Success
        } else {
            Outcome::Fail
        };
        visit(k, state, action, outcome);
        cost += discount * stage_cost(state, action, params);
        discount *= params.gamma;
        state = transition(state, action, outcome, params);
    }
    cost
}

/// One recorded trajectory. Uses the same streams as trajectory 0 of
/// [`estimate_value`] with the same seed.
pub fn rollout<P: Policy + ?Sized>(
    policy: &P,
    params: &ModelParams,
    s0: AoIState,
    horizon: usize,
    seed: u64,
) -> Trajectory {
    rollout_indexed(policy, params, s0, horizon, seed, 0)
}

/// Trajectory `index` of the family keyed by `seed`.
pub fn rollout_indexed<P: Policy + ?Sized>(
    policy: &P,
    params: &ModelParams,
    s0: AoIState,
    horizon: usize,
    seed: u64,
    index: u64,
) -> Trajectory {
    assert!(params.contains(s0), "initial state {s0} lies outside the grid");
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut outcomes = Vec::with_capacity(horizon);
    let discounted_cost = simulate(policy, params, s0, horizon, seed, index, |_, s, a, o| {
        states.push(s);
        actions.push(a);
        outcomes.push(o);
    });
    let last = match (states.last(), actions.last(), outcomes.last()) {
        (Some(&s), Some(&a), Some(&o)) => transition(s, a, o, params),
        _ => s0,
    };
    states.push(last);
    Trajectory {
        states,
        actions,
        outcomes,
        discounted_cost,
        horizon,
    }
}

pub fn estimate_value<P: Policy + ?Sized>(
    policy: &P,
    params: &ModelParams,
    s0: AoIState,
    n: usize,
    horizon: usize,
    seed: u64,
) -> SimEstimate {
    estimate_value_with(policy, params, s0, n, horizon, seed, Execution::default())
}

/// Mean and standard error of the discounted cost over `n` trajectories.
/// Costs are collected in trajectory order and reduced by pairwise
/// summation, so the result does not depend on `exec`.
pub fn estimate_value_with<P: Policy + ?Sized>(
    policy: &P,
    params: &ModelParams,
    s0: AoIState,
    n: usize,
    horizon: usize,
    seed: u64,
    exec: Execution,
) -> SimEstimate {
    assert!(n >= 2, "need at least two trajectories, got {n}");
    assert!(params.contains(s0), "initial state {s0} lies outside the grid");
    let costs = exec.map_range(n, |i| {
        simulate(policy, params, s0, horizon, seed, i as u64, |_, _, _, _| {})
    });
    // shifted by the first sample: identical costs give exactly zero variance
    let pivot = costs[0];
    let shifted: Vec<f64> = costs.iter().map(|c| c - pivot).collect();
    let offset = pairwise_sum(&shifted) / n as f64;
    let squares: Vec<f64> = shifted.iter().map(|d| (d - offset) * (d - offset)).collect();
    let mean = pivot + offset;
    let variance = pairwise_sum(&squares) / (n - 1) as f64;
    SimEstimate {
        mean,
        std_error: (variance / n as f64).sqrt(),
        n_trajectories: n,
        horizon,
        truncation_bias_bound: params.gamma.powi(horizon as i32) * params.value_bound(),
    }
}

/// CSV dump: `k,alpha_s,alpha_b,action,outcome,stage_cost`, one row per slot.
pub fn write_trajectory_csv<W: Write>(
    out: &mut W,
    trajectory: &Trajectory,
    params: &ModelParams,
) -> io::Result<()> {
    writeln!(out, "k,alpha_s,alpha_b,action,outcome,stage_cost")?;
    for k in 0..trajectory.horizon {
        let s = trajectory.states[k];
        let a = trajectory.actions[k];
        writeln!(
            out,
            "{k},{},{},{},{},{:.16e}",
            s.alpha_s,
            s.alpha_b,
            a.name(),
            trajectory.outcomes[k].name(),
            stage_cost(s, a, params)
        )?;
    }
    Ok(())
}

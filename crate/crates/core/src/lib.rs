//! Optimal sensing/communication scheduling for status updates measured by
//! age of information (AoI).
//!
//! A base station either senses a remote source or communicates its latest
//! estimate back to it. The state is the AoI pair at the source and the base
//! station, truncated at `a_max`. This crate solves the discounted-cost MDP,
//! checks the monotone switching-curve structure of the optimal policy
//! numerically, and cross-validates by policy iteration, exhaustive
//! enumeration and Monte Carlo rollouts.

pub mod cli;
pub mod config;
pub mod exec;
pub mod grid;
pub mod io;
pub mod model;
pub mod sim;
pub mod solver;
pub mod structure;

pub use exec::Execution;
pub use grid::{Grid, PolicyGrid, ValueGrid};
pub use model::{delta, q_value, stage_cost, transition, Action, AoIState, ModelParams, Outcome, ParamError};
pub use solver::{
    bellman_backup, exhaustive_policy_oracle, extract_policy, extract_thresholds, policy_iteration,
    value_iteration, Solution, SolveError, SolveReport, ThresholdCurve,
};
pub use sim::{
    baseline_policy, estimate_value, rollout, BaselineKind, BaselinePolicy, Policy, SimEstimate,
    Trajectory,
};
pub use structure::{StructureReport, Violation, STRUCTURE_TOL};

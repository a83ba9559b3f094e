//! MDP primitives: parameters, AoI states, actions, link outcomes, the
//! saturating transition table, stage cost, action values and the
//! sense-minus-communicate difference.
//!
//! States live on the truncated grid `{0..=a_max}²`. Every `+1` in the
//! transition table saturates at `a_max`, which keeps the kernel monotone
//! and lattice-preserving on the truncated grid.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::ValueGrid;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{field} must lie in {range}, got {value}")]
    OutOfRange {
        field: &'static str,
        range: &'static str,
        value: f64,
    },
}

/// Scalar problem constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Sensing success probability.
    pub lambda_s: f64,
    /// Communication success probability.
    pub lambda_c: f64,
    /// Sensing activation cost.
    pub c_s: f64,
    /// Communication activation cost.
    pub c_c: f64,
    /// Discount factor in `[0, 1)`.
    pub gamma: f64,
    /// AoI truncation level, in slots.
    pub a_max: usize,
}

impl Default for ModelParams {
    /// The reference numerical setup: 31×31 grid, γ = 0.95.
    fn default() -> Self {
        Self {
            lambda_s: 0.6,
            lambda_c: 0.9,
            c_s: 0.2,
            c_c: 0.1,
            gamma: 0.95,
            a_max: 30,
        }
    }
}

impl ModelParams {
    pub fn new(
        lambda_s: f64,
        lambda_c: f64,
        c_s: f64,
        c_c: f64,
        gamma: f64,
        a_max: usize,
    ) -> Result<Self, ParamError> {
        let params = Self {
            lambda_s,
            lambda_c,
            c_s,
            c_c,
            gamma,
            a_max,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let prob = |field, value: f64| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(ParamError::OutOfRange {
                    field,
                    range: "[0, 1]",
                    value,
                })
            }
        };
        let cost = |field, value: f64| {
            if value >= 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(ParamError::OutOfRange {
                    field,
                    range: "[0, inf)",
                    value,
                })
            }
        };
        prob("lambda_s", self.lambda_s)?;
        prob("lambda_c", self.lambda_c)?;
        cost("c_s", self.c_s)?;
        cost("c_c", self.c_c)?;
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(ParamError::OutOfRange {
                field: "gamma",
                range: "[0, 1)",
                value: self.gamma,
            });
        }
        if self.a_max < 2 {
            return Err(ParamError::OutOfRange {
                field: "a_max",
                range: "[2, inf)",
                value: self.a_max as f64,
            });
        }
        Ok(())
    }

    /// Whether `lambda_c >= lambda_s`, the standing assumption behind the
    /// threshold-structure results. The solver does not need it.
    pub fn assumption_holds(&self) -> bool {
        self.lambda_c >= self.lambda_s
    }

    pub fn success_probability(&self, action: Action) -> f64 {
        match action {
            Action::Sense => self.lambda_s,
            Action::Comm => self.lambda_c,
        }
    }

    pub fn activation_cost(&self, action: Action) -> f64 {
        match action {
            Action::Sense => self.c_s,
            Action::Comm => self.c_c,
        }
    }

    /// Largest possible stage cost, `a_max + max(c_s, c_c)`.
    pub fn max_stage_cost(&self) -> f64 {
        self.a_max as f64 + self.c_s.max(self.c_c)
    }

    /// Upper bound on any discounted value: `max_stage_cost / (1 - γ)`.
    pub fn value_bound(&self) -> f64 {
        self.max_stage_cost() / (1.0 - self.gamma)
    }

    /// Number of grid points per axis.
    pub fn side(&self) -> usize {
        self.a_max + 1
    }

    pub fn contains(&self, state: AoIState) -> bool {
        state.alpha_s <= self.a_max && state.alpha_b <= self.a_max
    }

    /// Iterates the grid in row-major order (`alpha_s` outer, `alpha_b` inner).
    pub fn states(&self) -> impl Iterator<Item = AoIState> {
        let side = self.side();
        (0..side * side).map(move |i| AoIState::new(i / side, i % side))
    }
}

/// The AoI pair `(alpha_s, alpha_b)`: age at the source and at the base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AoIState {
    pub alpha_s: usize,
    pub alpha_b: usize,
}

impl AoIState {
    pub const fn new(alpha_s: usize, alpha_b: usize) -> Self {
        Self { alpha_s, alpha_b }
    }

    /// Coordinatewise minimum.
    pub fn meet(self, other: Self) -> Self {
        Self::new(
            self.alpha_s.min(other.alpha_s),
            self.alpha_b.min(other.alpha_b),
        )
    }

    /// Coordinatewise maximum.
    pub fn join(self, other: Self) -> Self {
        Self::new(
            self.alpha_s.max(other.alpha_s),
            self.alpha_b.max(other.alpha_b),
        )
    }

    /// Coordinatewise partial order.
    pub fn le(self, other: Self) -> bool {
        self.alpha_s <= other.alpha_s && self.alpha_b <= other.alpha_b
    }
}

impl fmt::Display for AoIState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.alpha_s, self.alpha_b)
    }
}

/// Scheduling action. `Sense` is `u = 0`, `Comm` is `u = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Sense,
    Comm,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Sense, Action::Comm];

    pub fn code(self) -> u8 {
        match self {
            Action::Sense => 0,
            Action::Comm => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Action::Sense),
            1 => Some(Action::Comm),
            _ => None,
        }
    }

    pub fn glyph(self) -> char {
        match self {
            Action::Sense => 'S',
            Action::Comm => 'C',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Sense => "sense",
            Action::Comm => "comm",
        }
    }
}

/// Link success indicator for the attempted action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Fail,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Fail => "fail",
        }
    }
}

#[inline]
fn assert_on_grid(state: AoIState, params: &ModelParams) {
    assert!(
        params.contains(state),
        "state {state} lies outside the grid {{0..={}}}²",
        params.a_max
    );
}

/// Next AoI pair after `action` with `outcome`, each coordinate saturated at `a_max`.
///
/// | action | outcome | next                      |
/// |--------|---------|---------------------------|
/// | Sense  | Success | `(α^s + 1, 1)`            |
/// | Sense  | Fail    | `(α^s + 1, α^b + 1)`      |
/// | Comm   | Success | `(α^b + 1, α^b + 1)`      |
/// | Comm   | Fail    | `(α^s + 1, α^b + 1)`      |
///
/// Panics if `state` is off the grid.
#[inline]
pub fn transition(
    state: AoIState,
    action: Action,
    outcome: Outcome,
    params: &ModelParams,
) -> AoIState {
    assert_on_grid(state, params);
    let cap = |x: usize| (x + 1).min(params.a_max);
    match (action, outcome) {
        (Action::Sense, Outcome::Success) => AoIState::new(cap(state.alpha_s), 1),
        (Action::Comm, Outcome::Success) => AoIState::new(cap(state.alpha_b), cap(state.alpha_b)),
        (_, Outcome::Fail) => AoIState::new(cap(state.alpha_s), cap(state.alpha_b)),
    }
}

/// `α^s` plus the activation cost of `action`.
#[inline]
pub fn stage_cost(state: AoIState, action: Action, params: &ModelParams) -> f64 {
    assert_on_grid(state, params);
    state.alpha_s as f64 + params.activation_cost(action)
}

/// Stage cost plus the discounted two-point expectation of `values` over the
/// successor states.
#[inline]
pub fn q_value(values: &ValueGrid, state: AoIState, action: Action, params: &ModelParams) -> f64 {
    debug_assert_eq!(values.a_max(), params.a_max);
    let p = params.success_probability(action);
    let hit = values[transition(state, action, Outcome::Success, params)];
    let miss = values[transition(state, action, Outcome::Fail, params)];
    stage_cost(state, action, params) + params.gamma * (p * hit + (1.0 - p) * miss)
}

/// `Q_sense - Q_comm`. Sensing is preferred where this is `<= 0`.
#[inline]
pub fn delta(values: &ValueGrid, state: AoIState, params: &ModelParams) -> f64 {
    q_value(values, state, Action::Sense, params) - q_value(values, state, Action::Comm, params)
}

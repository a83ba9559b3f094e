//! Dense storage over the truncated AoI grid `{0..=a_max}²`, row-major with
//! `alpha_s` as the row index.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::model::{Action, AoIState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    a_max: usize,
    cells: Vec<T>,
}

/// Real-valued function on the grid (value functions, Q-tables).
pub type ValueGrid = Grid<f64>;

/// Stationary deterministic policy.
pub type PolicyGrid = Grid<Action>;

impl<T> Grid<T> {
    pub fn from_fn(a_max: usize, mut f: impl FnMut(AoIState) -> T) -> Self {
        let side = a_max + 1;
        let cells = (0..side * side)
            .map(|i| f(AoIState::new(i / side, i % side)))
            .collect();
        Self { a_max, cells }
    }

    /// Wraps row-major cells. Returns `None` when the length is not `(a_max+1)²`.
    pub fn from_cells(a_max: usize, cells: Vec<T>) -> Option<Self> {
        (cells.len() == (a_max + 1) * (a_max + 1)).then_some(Self { a_max, cells })
    }

    pub fn a_max(&self) -> usize {
        self.a_max
    }

    pub fn side(&self) -> usize {
        self.a_max + 1
    }

    pub fn cells(&self) -> &[T] {
        &self.cells
    }

    pub fn state_at(&self, flat: usize) -> AoIState {
        AoIState::new(flat / self.side(), flat % self.side())
    }

    pub fn flat_index(&self, state: AoIState) -> usize {
        assert!(
            state.alpha_s <= self.a_max && state.alpha_b <= self.a_max,
            "state {state} lies outside the grid {{0..={}}}²",
            self.a_max
        );
        state.alpha_s * self.side() + state.alpha_b
    }

    pub fn get(&self, alpha_s: usize, alpha_b: usize) -> &T {
        &self[AoIState::new(alpha_s, alpha_b)]
    }

    /// Row `alpha_s`, indexed by `alpha_b`.
    pub fn row(&self, alpha_s: usize) -> &[T] {
        let side = self.side();
        &self.cells[alpha_s * side..(alpha_s + 1) * side]
    }

    /// `(state, value)` pairs in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (AoIState, &T)> {
        let side = self.side();
        self.cells
            .iter()
            .enumerate()
            .map(move |(i, v)| (AoIState::new(i / side, i % side), v))
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            a_max: self.a_max,
            cells: self.cells.iter().map(f).collect(),
        }
    }
}

impl<T: Clone> Grid<T> {
    pub fn filled(a_max: usize, value: T) -> Self {
        Self {
            a_max,
            cells: vec![value; (a_max + 1) * (a_max + 1)],
        }
    }
}

impl ValueGrid {
    /// `max |self - other|`. Panics on mismatched grids.
    pub fn sup_distance(&self, other: &ValueGrid) -> f64 {
        assert_eq!(self.a_max, other.a_max, "grid sizes differ");
        self.cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_value(&self) -> f64 {
        self.cells.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.cells.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn all_finite(&self) -> bool {
        self.cells.iter().all(|v| v.is_finite())
    }
}

impl<T> Index<AoIState> for Grid<T> {
    type Output = T;

    #[inline]
    fn index(&self, state: AoIState) -> &T {
        &self.cells[self.flat_index(state)]
    }
}

impl<T> IndexMut<AoIState> for Grid<T> {
    #[inline]
    fn index_mut(&mut self, state: AoIState) -> &mut T {
        let i = self.flat_index(state);
        &mut self.cells[i]
    }
}

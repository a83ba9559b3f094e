//! Data-parallel map over index ranges. With the `parallel` feature the
//! `Parallel` mode runs on the rayon pool; without it both modes run
//! sequentially. Results are always returned in index order, so the two
//! modes produce bit-identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether `Parallel` actually uses worker threads in this build.
    pub const fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    pub fn map_range<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..len).into_par_iter().map(f).collect(),
            _ => (0..len).map(f).collect(),
        }
    }
}

/// Pairwise (cascade) summation. Deterministic for a given slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let (lo, hi) = xs.split_at(xs.len() / 2);
        pairwise_sum(lo) + pairwise_sum(hi)
    }
}

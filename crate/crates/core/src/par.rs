//! Order-preserving data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) [`Parallelism::Parallel`] runs on
//! the rayon global pool. Without it, every mode runs sequentially, so
//! callers never need their own `cfg` branches.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    /// Whether parallel execution actually happens in this build.
    pub fn is_effective(self) -> bool {
        self == Parallelism::Parallel && cfg!(feature = "parallel")
    }
}

/// Maps `f` over `items`, returning results in input order.
pub fn map<T, R, F>(mode: Parallelism, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode == Parallelism::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Fallible [`map`]; returns the first error in input order.
pub fn try_map<T, R, E, F>(mode: Parallelism, items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    map(mode, items, f).into_iter().collect()
}

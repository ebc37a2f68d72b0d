//! Ordered fan-out of independent work items.
//!
//! With the `parallel` feature the work is spread over the rayon pool;
//! without it, or when [`ExecMode::Sequential`] is requested, items run in
//! order on the calling thread. Results always come back in input order, so
//! downstream reductions never depend on completion order.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

impl ExecMode {
    /// Whether this build can actually run work concurrently.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

pub fn map_ordered<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            items
                .par_iter()
                .enumerate()
                .map(|(i, item)| f(i, item))
                .collect()
        }
        _ => items.iter().enumerate().map(|(i, item)| f(i, item)).collect(),
    }
}

/// Like [`map_ordered`] but short-circuits on the first error in input order.
pub fn try_map_ordered<T, R, E, F>(mode: ExecMode, items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(usize, &T) -> Result<R, E> + Sync + Send,
{
    map_ordered(mode, items, f).into_iter().collect()
}

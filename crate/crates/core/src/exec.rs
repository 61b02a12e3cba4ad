//! Sequential / parallel execution of index-parallel work.
//!
//! Every helper returns its results in index order, so reductions performed
//! by the caller over the returned vector are bit-identical whatever the
//! thread count.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    Sequential,
    /// Uses rayon when compiled with the `parallel` feature, otherwise the
    /// same as `Sequential`.
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

/// Evaluates `f(0..n)` and collects the results in index order.
pub fn map_indexed<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Fallible variant of [`map_indexed`]; the error of the lowest failing index
/// is returned.
pub fn try_map_indexed<T, E, F>(mode: ExecMode, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(mode, n, f).into_iter().collect()
}

/// Splits `0..n` into fixed-size blocks (independent of the thread count) and
/// maps each block range.
pub fn map_blocks<T, F>(mode: ExecMode, n: usize, block: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    let block = block.max(1);
    let num_blocks = n.div_ceil(block);
    map_indexed(mode, num_blocks, |b| {
        let start = b * block;
        f(start..(start + block).min(n))
    })
}

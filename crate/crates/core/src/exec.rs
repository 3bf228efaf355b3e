//! Runtime switch between sequential and data-parallel execution.
//!
//! The parallel path uses rayon when the `parallel` feature (default) is
//! enabled and silently degrades to sequential otherwise, so callers can
//! select a mode at runtime — benchmarks compare both in a single binary —
//! without changing results: both paths preserve input order, keeping the
//! filter bit-identical across modes.

/// How independent work items (parent rankings, Monte Carlo runs) execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

/// Order-preserving map over owned items, parallel when requested and
/// compiled in.
pub fn map_ordered<T, U, F>(mode: ExecMode, items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    match mode {
        ExecMode::Sequential => items.into_iter().map(f).collect(),
        ExecMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                items.into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                items.into_iter().map(f).collect()
            }
        }
    }
}

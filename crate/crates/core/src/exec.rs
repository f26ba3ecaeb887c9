//! Parallel or sequential evaluation with identical results.

use rayon::prelude::*;

/// How independent per-channel work is scheduled. Every task has a fixed
/// internal summation order, so both modes produce bit-identical output.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    pub(crate) fn map<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            Execution::Sequential => (0..n).map(f).collect(),
        }
    }
}

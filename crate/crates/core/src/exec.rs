//! Batch execution hook.
//!
//! Core algorithms evaluate independent items (quadrature nodes, time-grid
//! nodes) through an [`Executor`]. Results are always returned in index order,
//! so reductions performed afterwards do not depend on the schedule.

use alloc::vec::Vec;

pub trait Executor: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every item on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

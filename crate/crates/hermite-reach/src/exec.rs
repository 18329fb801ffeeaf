//! Parallel [`Executor`] backed by a dedicated rayon pool.

use hermite_reach_core::Executor;
use rayon::prelude::*;

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "HHE_THREADS";

pub struct Rayon {
    pool: rayon::ThreadPool,
}

impl Rayon {
    /// A pool with `threads` workers, or rayon's default when `None`.
    pub fn new(threads: Option<usize>) -> Result<Self, rayon::ThreadPoolBuildError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            b = b.num_threads(n);
        }
        Ok(Rayon { pool: b.build()? })
    }

    /// Worker count from `HHE_THREADS`, `None` when unset or unparsable.
    pub fn threads_from_env() -> Option<usize> {
        std::env::var(THREADS_ENV)
            .ok()?
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Rayon {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        // indexed collect keeps item order whatever the schedule
        self.pool
            .install(|| (0..n).into_par_iter().map(f).collect())
    }
}

//! Execution strategy for the data-parallel loops (pair evaluation, restarts).
//!
//! With the `parallel` feature (default) work is spread over a rayon pool.
//! Without it every strategy runs sequentially. Either way results are
//! collected in input order, so outputs do not depend on the strategy.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Sequential,
    /// `workers: None` uses the global rayon pool.
    Parallel {
        workers: Option<usize>,
    },
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel { workers: None }
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// `0` selects the default pool, `1` runs sequentially, `n` uses `n` workers.
    pub fn with_workers(workers: usize) -> Self {
        match workers {
            0 => Execution::Parallel { workers: None },
            1 => Execution::Sequential,
            n => Execution::Parallel { workers: Some(n) },
        }
    }

    /// Applies `f` to every item, returning results in item order.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match *self {
            Execution::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel { workers } => {
                use rayon::prelude::*;
                let run = || items.par_iter().map(&f).collect();
                match workers {
                    None => run(),
                    Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
                        Ok(pool) => pool.install(run),
                        Err(e) => {
                            log::warn!(
                                "cannot build a {w}-thread pool ({e}); using the global pool"
                            );
                            run()
                        }
                    },
                }
            }
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel { .. } => items.iter().map(f).collect(),
        }
    }
}

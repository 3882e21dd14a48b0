//! Bounded worker pool. Results come back in task order whatever the
//! schedule, so the worker count never changes the output.

use rayon::prelude::*;

use crate::LabError;

#[derive(Debug)]
pub struct Workers {
    pool: rayon::ThreadPool,
}

impl Workers {
    pub fn new(count: usize) -> Result<Self, LabError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(count.max(1))
            .build()
            .map_err(|e| LabError::Pool(e.to_string()))?;
        Ok(Workers { pool })
    }

    pub fn count(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// `f(0), ..., f(len - 1)` in index order; the first error wins.
    pub fn map<T, F>(&self, len: usize, f: F) -> Result<Vec<T>, LabError>
    where
        T: Send,
        F: Fn(usize) -> Result<T, LabError> + Sync + Send,
    {
        self.pool.install(|| (0..len).into_par_iter().map(&f).collect())
    }
}

use homoglab_core::exec::Executor;
use rayon::prelude::*;

use crate::CliError;

pub const THREADS_VAR: &str = "HOMOGLAB_THREADS";

/// Executor backed by a dedicated rayon pool. Results keep index order.
pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    /// `None` lets rayon pick the thread count.
    pub fn new(threads: Option<usize>) -> Result<Self, CliError> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads {
            builder = builder.num_threads(t);
        }
        let pool = builder.build().map_err(|e| CliError::Failed(format!("thread pool: {e}")))?;
        Ok(Self { pool })
    }

    /// Honours `HOMOGLAB_THREADS` when set.
    pub fn from_env() -> Result<Self, CliError> {
        Self::new(threads_from(std::env::var(THREADS_VAR).ok().as_deref())?)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

/// Parses a thread cap; empty means unset.
pub fn threads_from(value: Option<&str>) -> Result<Option<usize>, CliError> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(CliError::config(format!("{THREADS_VAR} must be a positive integer, got '{v}'"))),
        },
    }
}

impl Executor for RayonExecutor {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_order() {
        let ex = RayonExecutor::new(Some(3)).unwrap();
        assert_eq!(ex.threads(), 3);
        let v = ex.map(100, |i| i * i);
        assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn thread_variable() {
        assert_eq!(threads_from(None).unwrap(), None);
        assert_eq!(threads_from(Some("4")).unwrap(), Some(4));
        assert!(threads_from(Some("0")).is_err());
        assert!(threads_from(Some("many")).is_err());
    }
}

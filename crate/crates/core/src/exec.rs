//! Execution strategy for shard-level work.
//!
//! All callers map over an indexed list of shards and receive results in
//! shard order, so parallel and sequential runs produce identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is enabled,
    /// otherwise identical to `Sequential`.
    #[default]
    Parallel,
}

impl Execution {
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }

    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Strategy for a requested worker count. One worker means sequential
    /// execution; larger counts size the global pool, which can only be
    /// done once per process.
    pub fn with_threads(threads: Option<usize>) -> crate::Result<Self> {
        match threads {
            None => Ok(Execution::Parallel),
            Some(0) => Err(crate::Error::Config("--threads must be at least 1".into())),
            Some(1) => Ok(Execution::Sequential),
            #[cfg(feature = "parallel")]
            Some(n) => {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| crate::Error::Config(format!("thread pool: {e}")))?;
                Ok(Execution::Parallel)
            }
            #[cfg(not(feature = "parallel"))]
            Some(_) => Ok(Execution::Sequential),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_preserve_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Execution::Sequential.map(&items, |x| x * x);
        let par = Execution::Parallel.map(&items, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(
            Execution::Parallel.map_range(17, |i| i),
            (0..17).collect::<Vec<_>>()
        );
    }
}

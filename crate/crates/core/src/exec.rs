//! Fan-out of independent jobs (replications, verification trials).
//!
//! With the `parallel` feature the work is spread over a rayon pool; without
//! it, or with [`Execution::Sequential`], jobs run in index order on the
//! calling thread. Results always come back in index order, so downstream
//! reductions are identical either way.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Use the current rayon pool (global unless installed otherwise).
    #[default]
    Parallel,
    /// Use a dedicated pool with this many threads.
    Threads(usize),
}

impl Execution {
    /// `PP_THREADS`: unset → default pool, `0` → sequential, `n` → `n` threads.
    pub fn from_env() -> Self {
        match std::env::var("PP_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
        {
            None => Execution::Parallel,
            Some(0) => Execution::Sequential,
            Some(n) => Execution::Threads(n),
        }
    }
}

pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        #[cfg(feature = "parallel")]
        Execution::Threads(k) => {
            use rayon::prelude::*;
            match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
                Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
                Err(_) => (0..n).map(f).collect(),
            }
        }
        #[cfg(not(feature = "parallel"))]
        _ => (0..n).map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        for exec in [
            Execution::Sequential,
            Execution::Parallel,
            Execution::Threads(2),
        ] {
            let v = map_indexed(100, exec, |i| i * i);
            assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
        }
    }
}

//! Order-preserving map over independent work items.
//!
//! Results always come back in input order and reductions are done
//! sequentially by the caller, so the parallel and sequential paths produce
//! bit-identical floating point output.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    /// Whether the parallel path is compiled in.
    pub fn available() -> bool {
        cfg!(feature = "parallel")
    }
}

pub fn map<T, R, F>(mode: Parallelism, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    match mode {
        Parallelism::Sequential => items.into_iter().map(f).collect(),
        Parallelism::Parallel => parallel_map(items, f),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    items.into_iter().map(f).collect()
}

/// Fallible variant; the first error in input order wins.
pub fn try_map<T, R, E, F>(mode: Parallelism, items: Vec<T>, f: F) -> Result<Vec<R>, E>
where
    T: Send,
    R: Send,
    E: Send,
    F: Fn(T) -> Result<R, E> + Sync + Send,
{
    map(mode, items, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_paths_agree_and_keep_order() {
        let items: Vec<u64> = (0..1000).collect();
        let a = map(Parallelism::Sequential, items.clone(), |x| (x as f64).sqrt());
        let b = map(Parallelism::Parallel, items, |x| (x as f64).sqrt());
        assert_eq!(a, b);
    }
}

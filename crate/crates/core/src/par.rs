//! Data-parallel helpers.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] runs
//! on the rayon thread pool; without it every call runs sequentially. Both
//! paths produce identical, order-preserving results.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run work in parallel.
    pub const fn available() -> bool {
        cfg!(feature = "parallel")
    }

    /// `f(0), f(1), ..., f(n-1)` collected in index order.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    /// Applies `f` to each `chunk`-sized slice of `data` (the last may be
    /// shorter), passing the chunk index.
    pub fn for_each_chunk_mut<T, F>(self, data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => data
                .par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i, c)),
            _ => data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_paths_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        assert_eq!(
            Execution::Sequential.map_range(1000, f),
            Execution::Parallel.map_range(1000, f)
        );
        let mut a = vec![0u32; 1001];
        let mut b = a.clone();
        let fill = |i: usize, c: &mut [u32]| c.iter_mut().for_each(|x| *x = i as u32);
        Execution::Sequential.for_each_chunk_mut(&mut a, 10, fill);
        Execution::Parallel.for_each_chunk_mut(&mut b, 10, fill);
        assert_eq!(a, b);
        assert_eq!(a[1000], 100);
    }
}

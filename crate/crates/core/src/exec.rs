//! Execution mode switch and deterministic reductions.
//!
//! Every data-parallel loop in the crate goes through [`Execution`]. The
//! parallel path only exists with the `parallel` feature; without it,
//! [`Execution::Parallel`] silently runs sequentially. Results never depend
//! on the mode: parallel maps collect in input order and every reduction is a
//! fixed pairwise tree over that order.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How data-parallel loops are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Whether loops will actually fan out across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Maps `f` over an index range, preserving order.
    pub fn map_range<R, F>(self, range: Range<usize>, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            return range.into_par_iter().map(f).collect();
        }
        range.map(f).collect()
    }

    /// Like [`Execution::map`], but stays sequential below `min_len` items.
    pub fn map_min<T, R, F>(self, items: &[T], min_len: usize, f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        if items.len() < min_len {
            Execution::Sequential.map(items, f)
        } else {
            self.map(items, f)
        }
    }

    /// Like [`Execution::map_range`], but stays sequential below `min_len`.
    pub fn map_range_min<R, F>(self, range: Range<usize>, min_len: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        if range.len() < min_len {
            Execution::Sequential.map_range(range, f)
        } else {
            self.map_range(range, f)
        }
    }
}

/// Pairwise (tree) summation. The reduction tree depends only on the length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_on_order() {
        let items: Vec<u64> = (0..10_000).collect();
        let a = Execution::Sequential.map(&items, |x| x * 3);
        let b = Execution::Parallel.map(&items, |x| x * 3);
        assert_eq!(a, b);
        let c = Execution::Parallel.map_range(0..100, |i| i * i);
        assert_eq!(c[99], 99 * 99);
    }

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let v: Vec<f64> = (1..=1000).map(|x| x as f64).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn pairwise_sum_beats_naive_on_many_small_terms() {
        let v = vec![0.1; 1_000_000];
        let exact = 100_000.0;
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - exact).abs() <= (naive - exact).abs());
    }
}

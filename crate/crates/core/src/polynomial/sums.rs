//! Per-attribute range sums over 1D variables.
//!
//! A flat segment tree gives every interval sum in O(log N) with a fixed
//! combination order, and the root is a pairwise sum of the leaves.

use crate::predicate::Interval;

#[derive(Debug, Clone)]
pub(crate) struct RangeSums {
    leaves: usize,
    tree: Vec<f64>,
}

impl RangeSums {
    pub fn new(values: impl ExactSizeIterator<Item = f64>) -> Self {
        let leaves = values.len().next_power_of_two().max(1);
        let mut tree = vec![0.0; 2 * leaves];
        for (slot, v) in tree[leaves..].iter_mut().zip(values) {
            *slot = v;
        }
        for i in (1..leaves).rev() {
            tree[i] = tree[2 * i] + tree[2 * i + 1];
        }
        RangeSums { leaves, tree }
    }

    pub fn total(&self) -> f64 {
        self.tree[1]
    }

    pub fn range(&self, r: Interval) -> f64 {
        let mut lo = r.lo + self.leaves;
        let mut hi = r.hi + self.leaves + 1;
        let mut left = 0.0;
        let mut right = 0.0;
        while lo < hi {
            if lo & 1 == 1 {
                left += self.tree[lo];
                lo += 1;
            }
            if hi & 1 == 1 {
                hi -= 1;
                right = self.tree[hi] + right;
            }
            lo >>= 1;
            hi >>= 1;
        }
        left + right
    }
}

/// Same structure in log space, for assignments whose sums overflow.
#[derive(Debug, Clone)]
pub(crate) struct LnRangeSums {
    leaves: usize,
    tree: Vec<f64>,
}

pub(crate) fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

impl LnRangeSums {
    pub fn new(values: impl ExactSizeIterator<Item = f64>) -> Self {
        let leaves = values.len().next_power_of_two().max(1);
        let mut tree = vec![f64::NEG_INFINITY; 2 * leaves];
        for (slot, v) in tree[leaves..].iter_mut().zip(values) {
            *slot = v.ln();
        }
        for i in (1..leaves).rev() {
            tree[i] = ln_add(tree[2 * i], tree[2 * i + 1]);
        }
        LnRangeSums { leaves, tree }
    }

    pub fn total(&self) -> f64 {
        self.tree[1]
    }

    pub fn range(&self, r: Interval) -> f64 {
        let mut lo = r.lo + self.leaves;
        let mut hi = r.hi + self.leaves + 1;
        let mut acc = f64::NEG_INFINITY;
        while lo < hi {
            if lo & 1 == 1 {
                acc = ln_add(acc, self.tree[lo]);
                lo += 1;
            }
            if hi & 1 == 1 {
                hi -= 1;
                acc = ln_add(acc, self.tree[hi]);
            }
            lo >>= 1;
            hi >>= 1;
        }
        acc
    }
}

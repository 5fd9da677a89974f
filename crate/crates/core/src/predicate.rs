//! Closed bucket-index intervals and conjunctive range predicates.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Inclusive range `[lo, hi]` over bucket indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "[usize; 2]", from = "[usize; 2]")]
pub struct Interval {
    pub lo: usize,
    pub hi: usize,
}

impl Interval {
    pub fn new(lo: usize, hi: usize) -> Self {
        debug_assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(v: usize) -> Self {
        Interval { lo: v, hi: v }
    }

    /// Number of buckets covered.
    pub fn width(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: usize) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.intersect(other).is_some()
    }

    pub fn covers(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

impl From<Interval> for [usize; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl From<[usize; 2]> for Interval {
    fn from([lo, hi]: [usize; 2]) -> Self {
        Interval { lo, hi }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_point() {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "[{}, {}]", self.lo, self.hi)
        }
    }
}

/// A conjunction of one optional range per attribute. `None` means TRUE.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RangePredicate(pub Vec<Option<Interval>>);

impl RangePredicate {
    pub fn all(m: usize) -> Self {
        RangePredicate(vec![None; m])
    }

    pub fn with(mut self, attr: usize, range: Interval) -> Self {
        self.0[attr] = Some(range);
        self
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, attr: usize) -> Option<Interval> {
        self.0[attr]
    }

    /// Attribute indices constrained by this predicate.
    pub fn dims(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.map(|_| i))
            .collect()
    }

    pub fn matches(&self, coords: &[usize]) -> bool {
        self.0
            .iter()
            .zip(coords)
            .all(|(r, &v)| r.is_none_or(|r| r.contains(v)))
    }

    /// Conjunction; `None` when the result is unsatisfiable.
    pub fn and(&self, other: &RangePredicate) -> Option<RangePredicate> {
        let mut out = Vec::with_capacity(self.0.len());
        for (a, b) in self.0.iter().zip(&other.0) {
            out.push(match (a, b) {
                (None, x) | (x, None) => *x,
                (Some(a), Some(b)) => Some(a.intersect(b)?),
            });
        }
        Some(RangePredicate(out))
    }

    pub fn disjoint(&self, other: &RangePredicate) -> bool {
        self.and(other).is_none()
    }
}

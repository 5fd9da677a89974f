//! The statistic set Φ: complete 1D statistics plus budgeted 2D rectangles.
//!
//! Statistic ids are dense and stable: every 1D statistic first, ordered by
//! (attribute, value), then the 2D statistics ordered by (pair, rectangle).
//! The id of a statistic is also the index of its model variable.

mod heuristics;
mod pairs;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetHandle;
use crate::predicate::{Interval, RangePredicate};

pub use heuristics::{composite, large, zero, Heuristic, Rect};
pub use pairs::{chi_squared, score_pairs, select_pairs, PairScore, PairStrategy};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("attribute {attr}: 1D statistics must cover every value exactly once")]
    IncompleteOneD { attr: usize },
    #[error("attribute {attr}: 1D counts sum to {sum}, expected n = {n}")]
    MarginalMismatch { attr: usize, sum: u64, n: u64 },
    #[error("statistics {a} and {b} over the same attributes overlap")]
    Overlap { a: usize, b: usize },
    #[error("statistic {id}: {reason}")]
    Invalid { id: usize, reason: String },
    #[error("unknown attribute `{0}` in exclude list")]
    UnknownAttribute(String),
}

/// One statistic `(π_j, s_j)`; its id doubles as the variable index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub id: usize,
    pub ranges: RangePredicate,
    pub s: u64,
}

impl Statistic {
    pub fn dims(&self) -> Vec<usize> {
        self.ranges.dims()
    }

    pub fn is_one_d(&self) -> bool {
        let dims = self.dims();
        dims.len() == 1 && self.ranges.0[dims[0]].unwrap().is_point()
    }
}

/// All 2D statistics over one attribute pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairGroup {
    pub pair: (usize, usize),
    pub ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatisticSet {
    sizes: Vec<usize>,
    n: u64,
    stats: Vec<Statistic>,
    one_d: Vec<Vec<usize>>,
    two_d: Vec<PairGroup>,
}

impl StatisticSet {
    /// Assembles a set from per-attribute value counts and per-pair
    /// rectangles, assigning ids in canonical order.
    pub fn new(
        sizes: Vec<usize>,
        n: u64,
        one_d_counts: &[Vec<u64>],
        pairs: &[((usize, usize), Vec<Rect>)],
    ) -> Result<Self, StatsError> {
        let m = sizes.len();
        let mut stats = Vec::new();
        let mut one_d = Vec::with_capacity(m);
        for (attr, counts) in one_d_counts.iter().enumerate() {
            if counts.len() != sizes[attr] {
                return Err(StatsError::IncompleteOneD { attr });
            }
            let mut ids = Vec::with_capacity(counts.len());
            for (v, &s) in counts.iter().enumerate() {
                ids.push(stats.len());
                stats.push(Statistic {
                    id: stats.len(),
                    ranges: RangePredicate::all(m).with(attr, Interval::point(v)),
                    s,
                });
            }
            one_d.push(ids);
        }
        if one_d.len() != m {
            return Err(StatsError::IncompleteOneD { attr: one_d.len() });
        }
        let mut two_d = Vec::with_capacity(pairs.len());
        for &((a, b), ref rects) in pairs {
            if a >= m || b >= m || a == b {
                return Err(StatsError::Invalid {
                    id: stats.len(),
                    reason: format!("bad attribute pair ({a}, {b})"),
                });
            }
            let mut ids = Vec::with_capacity(rects.len());
            for r in rects {
                ids.push(stats.len());
                stats.push(Statistic {
                    id: stats.len(),
                    ranges: RangePredicate::all(m).with(a, r.a).with(b, r.b),
                    s: r.count,
                });
            }
            let (a, b) = (a.min(b), a.max(b));
            two_d.push(PairGroup { pair: (a, b), ids });
        }
        let set = StatisticSet {
            sizes,
            n,
            stats,
            one_d,
            two_d,
        };
        set.validate()?;
        Ok(set)
    }

    /// Complete 1D statistics only.
    pub fn one_d_only(data: &DatasetHandle) -> Self {
        let counts = build_1d(data);
        StatisticSet::new(data.schema.sizes(), data.row_count(), &counts, &[])
            .expect("scanned 1D statistics are consistent")
    }

    /// Checks the structural invariants: complete 1D blocks, consistent 1D
    /// marginals, in-bounds and pairwise disjoint 2D rectangles per pair.
    pub fn validate(&self) -> Result<(), StatsError> {
        let m = self.sizes.len();
        for (attr, ids) in self.one_d.iter().enumerate() {
            if ids.len() != self.sizes[attr] {
                return Err(StatsError::IncompleteOneD { attr });
            }
            for (v, &id) in ids.iter().enumerate() {
                if self.stats[id].ranges != RangePredicate::all(m).with(attr, Interval::point(v)) {
                    return Err(StatsError::IncompleteOneD { attr });
                }
            }
            let sum: u64 = ids.iter().map(|&j| self.stats[j].s).sum();
            if sum != self.n {
                return Err(StatsError::MarginalMismatch {
                    attr,
                    sum,
                    n: self.n,
                });
            }
        }
        for group in &self.two_d {
            let (a, b) = group.pair;
            if a >= b || b >= m {
                return Err(StatsError::Invalid {
                    id: group.ids.first().copied().unwrap_or(0),
                    reason: format!("bad attribute pair ({a}, {b})"),
                });
            }
            for &id in &group.ids {
                let st = &self.stats[id];
                if st.dims() != [a, b] {
                    return Err(StatsError::Invalid {
                        id,
                        reason: "2D statistic must constrain exactly its pair".into(),
                    });
                }
                for attr in [a, b] {
                    if st.ranges.0[attr].unwrap().hi >= self.sizes[attr] {
                        return Err(StatsError::Invalid {
                            id,
                            reason: "range outside the domain".into(),
                        });
                    }
                }
                if st.s > self.n {
                    return Err(StatsError::Invalid {
                        id,
                        reason: format!("count {} exceeds n = {}", st.s, self.n),
                    });
                }
            }
            check_disjoint(&self.stats, &group.ids)?;
        }
        for (i, g) in self.two_d.iter().enumerate() {
            for h in &self.two_d[i + 1..] {
                if g.pair == h.pair {
                    let mut ids = g.ids.clone();
                    ids.extend(&h.ids);
                    check_disjoint(&self.stats, &ids)?;
                }
            }
        }
        Ok(())
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn arity(&self) -> usize {
        self.sizes.len()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    pub fn stats(&self) -> &[Statistic] {
        &self.stats
    }

    pub fn get(&self, id: usize) -> &Statistic {
        &self.stats[id]
    }

    /// Ids of the 1D statistics of attribute `attr`, indexed by value.
    pub fn one_d(&self, attr: usize) -> &[usize] {
        &self.one_d[attr]
    }

    pub fn one_d_id(&self, attr: usize, value: usize) -> usize {
        self.one_d[attr][value]
    }

    pub fn one_d_count(&self) -> usize {
        self.one_d.iter().map(Vec::len).sum()
    }

    pub fn is_one_d_id(&self, id: usize) -> bool {
        id < self.one_d_count()
    }

    /// `(attribute, value)` of a 1D id.
    pub fn one_d_position(&self, id: usize) -> Option<(usize, usize)> {
        let mut offset = 0;
        for (attr, ids) in self.one_d.iter().enumerate() {
            if id < offset + ids.len() {
                return Some((attr, id - offset));
            }
            offset += ids.len();
        }
        None
    }

    pub fn pair_groups(&self) -> &[PairGroup] {
        &self.two_d
    }

    pub fn multi_d_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.two_d.iter().flat_map(|g| g.ids.iter().copied())
    }

    /// Serializable list `{id, ranges, s}` in id order.
    pub fn export(&self) -> Vec<ExportedStatistic> {
        self.stats
            .iter()
            .map(|s| ExportedStatistic {
                id: s.id,
                ranges: s.ranges.0.clone(),
                s: s.s,
            })
            .collect()
    }

    pub fn export_json(&self) -> String {
        serde_json::to_string_pretty(&self.export()).expect("statistics serialize")
    }

    /// Rebuilds a set from its exported form, re-deriving the 1D blocks and
    /// pair groups from the canonical id order.
    pub fn from_export(
        sizes: Vec<usize>,
        n: u64,
        exported: &[ExportedStatistic],
    ) -> Result<Self, StatsError> {
        let m = sizes.len();
        for (i, e) in exported.iter().enumerate() {
            if e.id != i {
                return Err(StatsError::Invalid {
                    id: e.id,
                    reason: format!("expected id {i}"),
                });
            }
            if e.ranges.len() != m {
                return Err(StatsError::Invalid {
                    id: i,
                    reason: format!("{} ranges for {m} attributes", e.ranges.len()),
                });
            }
        }
        let one_d_total: usize = sizes.iter().sum();
        if exported.len() < one_d_total {
            return Err(StatsError::IncompleteOneD { attr: 0 });
        }
        let mut counts = Vec::with_capacity(m);
        let mut offset = 0;
        for (attr, &size) in sizes.iter().enumerate() {
            let mut c = Vec::with_capacity(size);
            for v in 0..size {
                let e = &exported[offset + v];
                if RangePredicate(e.ranges.clone())
                    != RangePredicate::all(m).with(attr, Interval::point(v))
                {
                    return Err(StatsError::IncompleteOneD { attr });
                }
                c.push(e.s);
            }
            counts.push(c);
            offset += size;
        }
        let mut pairs: Vec<((usize, usize), Vec<Rect>)> = Vec::new();
        for e in &exported[one_d_total..] {
            let pred = RangePredicate(e.ranges.clone());
            let dims = pred.dims();
            let [a, b] = dims[..] else {
                return Err(StatsError::Invalid {
                    id: e.id,
                    reason: "multi-dimensional statistics must constrain exactly two attributes"
                        .into(),
                });
            };
            let rect = Rect {
                a: pred.0[a].unwrap(),
                b: pred.0[b].unwrap(),
                count: e.s,
            };
            match pairs.last_mut() {
                Some((p, rects)) if *p == (a, b) => rects.push(rect),
                _ => pairs.push(((a, b), vec![rect])),
            }
        }
        StatisticSet::new(sizes, n, &counts, &pairs)
    }
}

fn check_disjoint(stats: &[Statistic], ids: &[usize]) -> Result<(), StatsError> {
    // sweep on the first constrained attribute keeps this near-linear for
    // KD-tree partitions
    let mut order: Vec<(Interval, usize)> = ids
        .iter()
        .map(|&id| {
            let d = stats[id].dims()[0];
            (stats[id].ranges.0[d].unwrap(), id)
        })
        .collect();
    order.sort();
    for (i, &(ri, a)) in order.iter().enumerate() {
        for &(rj, b) in &order[i + 1..] {
            if rj.lo > ri.hi {
                break;
            }
            if !stats[a].ranges.disjoint(&stats[b].ranges) {
                return Err(StatsError::Overlap {
                    a: a.min(b),
                    b: a.max(b),
                });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedStatistic {
    pub id: usize,
    pub ranges: Vec<Option<Interval>>,
    pub s: u64,
}

/// Exact per-value counts for every attribute.
pub fn build_1d(data: &DatasetHandle) -> Vec<Vec<u64>> {
    (0..data.arity()).map(|i| data.frequencies(i).to_vec()).collect()
}

/// Knobs for choosing the 2D statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Number of attribute pairs, `B_a`.
    pub pairs: usize,
    /// Statistics per pair, `B_s`.
    pub per_pair: usize,
    pub heuristic: Heuristic,
    pub strategy: PairStrategy,
    /// Attributes never used in 2D statistics.
    #[serde(default)]
    pub exclude: Vec<usize>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            pairs: 0,
            per_pair: 0,
            heuristic: Heuristic::Composite,
            strategy: PairStrategy::Cover,
            exclude: Vec::new(),
        }
    }
}

/// The full selection pipeline: 1D statistics, pair scoring, pair choice and
/// the per-pair heuristic.
pub fn select_statistics(
    data: &DatasetHandle,
    config: &SelectionConfig,
) -> Result<(StatisticSet, Vec<PairScore>), StatsError> {
    let scores = score_pairs(data, &config.exclude);
    let chosen = if config.pairs == 0 || config.per_pair == 0 {
        Vec::new()
    } else {
        select_pairs(&scores, config.pairs, config.strategy)
    };
    let pairs: Vec<((usize, usize), Vec<Rect>)> = chosen
        .iter()
        .map(|&(a, b)| {
            let table = data.contingency(a, b);
            ((a, b), config.heuristic.apply(&table, config.per_pair))
        })
        .collect();
    let set = StatisticSet::new(data.schema.sizes(), data.row_count(), &build_1d(data), &pairs)?;
    Ok((set, scores))
}

impl fmt::Display for StatisticSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} statistics ({} 1D, {} 2D over {} pairs)",
            self.len(),
            self.one_d_count(),
            self.len() - self.one_d_count(),
            self.two_d.len()
        )
    }
}

//! The compressed partition polynomial `P` and its variables.
//!
//! Every monomial of `P` holds exactly one 1D variable per attribute plus the
//! variables of the multi-dimensional statistics whose rectangle contains the
//! tuple. Expanding each multi-dimensional variable as `1 + (α − 1)` turns
//! `P` into an inclusion–exclusion sum over sets `S` of statistics with a
//! non-empty common rectangle:
//!
//! ```text
//! P = Σ_S  ∏_i (Σ_{v ∈ ρ_iS} α_{i,v}) · ∏_{j ∈ S} (α_j − 1)
//! ```
//!
//! Terms are grouped by the attribute set `I` they restrict, so the full
//! sums of the attributes outside `I` are shared by the whole group. On top
//! of that, statistics split into *blocks*: connected components of pair
//! groups that share an attribute. Sets mixing two blocks factor into a
//! product, so `P` is stored as
//!
//! ```text
//! P = ∏_{free attributes} (Σ α) · ∏_{blocks} Q_block
//! ```
//!
//! which avoids the cross product of terms between unrelated pairs.

mod eval;
mod sums;

use std::borrow::Cow;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::predicate::{Interval, RangePredicate};
use crate::statistics::{StatisticSet, StatsError};

pub use eval::PolyValue;

/// Refuse to build polynomials with more terms than this.
pub const MAX_TERMS: usize = 20_000_000;

#[derive(Debug, Error)]
pub enum PolyError {
    #[error("assignment has {got} values, polynomial has {expected} variables")]
    MissingValue { got: usize, expected: usize },
    #[error("variable {0} is not a 1D statistic")]
    NotOneD(usize),
    #[error("variable {0} does not exist")]
    UnknownVariable(usize),
    #[error("compressed polynomial would exceed {MAX_TERMS} terms")]
    TooLarge,
    #[error(transparent)]
    Statistics(#[from] StatsError),
}

/// Values `α_j`, indexed by statistic id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableStore {
    values: Vec<f64>,
}

impl VariableStore {
    pub fn filled(len: usize, value: f64) -> Self {
        VariableStore {
            values: vec![value; len],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        VariableStore { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: usize) -> f64 {
        self.values[id]
    }

    pub fn set(&mut self, id: usize, value: f64) {
        self.values[id] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

/// A store plus zeroed and overridden variables. Copies the values only
/// once something is changed.
#[derive(Debug, Clone)]
pub struct Assignment<'a> {
    values: Cow<'a, [f64]>,
}

impl<'a> Assignment<'a> {
    pub fn new(store: &'a VariableStore) -> Self {
        Assignment {
            values: Cow::Borrowed(&store.values),
        }
    }

    pub fn from_slice(values: &'a [f64]) -> Self {
        Assignment {
            values: Cow::Borrowed(values),
        }
    }

    /// Forces `α_id = 0`.
    pub fn zero(&mut self, id: usize) -> &mut Self {
        self.values.to_mut()[id] = 0.0;
        self
    }

    pub fn zero_all(&mut self, ids: impl IntoIterator<Item = usize>) -> &mut Self {
        let values = self.values.to_mut();
        for id in ids {
            values[id] = 0.0;
        }
        self
    }

    /// Forces `α_id = value`.
    pub fn set(&mut self, id: usize, value: f64) -> &mut Self {
        self.values.to_mut()[id] = value;
        self
    }

    pub fn with(mut self, id: usize, value: f64) -> Self {
        self.set(id, value);
        self
    }

    pub fn value(&self, id: usize) -> f64 {
        self.values[id]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// One summand of the inclusion–exclusion expansion: a set `S` of
/// multi-dimensional statistics and the intersected ranges `ρ_iS` of the
/// attributes in `I`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionTerm {
    stats: Vec<usize>,
    ranges: Vec<(usize, Interval)>,
}

impl CompressionTerm {
    /// The set `S`.
    pub fn stat_set(&self) -> &[usize] {
        &self.stats
    }

    /// The attribute set `I`.
    pub fn attr_set(&self) -> Vec<usize> {
        self.ranges.iter().map(|&(i, _)| i).collect()
    }

    /// `(attribute, ρ_iS)` pairs; the restricted 1D variables of attribute
    /// `i` are exactly the values in `ρ_iS`.
    pub fn restricted(&self) -> &[(usize, Interval)] {
        &self.ranges
    }

    pub fn slots(&self) -> usize {
        self.ranges.iter().map(|(_, r)| r.width()).sum()
    }
}

/// Terms sharing one attribute set `I` inside a block.
#[derive(Debug, Clone)]
struct TermGroup {
    attrs: Vec<usize>,
    outside: Vec<usize>,
    terms: Range<usize>,
}

#[derive(Debug, Clone)]
struct Block {
    groups: Vec<TermGroup>,
}

#[derive(Debug, Clone)]
pub struct CompressedPolynomial {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    var_count: usize,
    free_attrs: Vec<usize>,
    blocks: Vec<Block>,
    terms: Vec<CompressionTerm>,
    /// block of every term
    term_block: Vec<usize>,
    /// per multi-dimensional variable (id − 1D count): its block
    var_block: Vec<usize>,
    attr_sets: usize,
    exec: Execution,
}

/// Size metrics of a compressed polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeReport {
    /// Inclusion–exclusion summands, counting the base term once.
    pub term_count: usize,
    /// 1D-variable slots: every full or restricted sum contributes the
    /// number of variables it adds up.
    pub slot_count: usize,
    /// Slots plus one factor per `(α_j − 1)`.
    pub factor_count: usize,
    /// Distinct attribute sets carrying multi-dimensional statistics.
    pub attr_sets: usize,
    /// Largest number of summands for one non-empty attribute set.
    pub max_cover: usize,
    pub blocks: usize,
    /// Monomials of the uncompressed polynomial, `d`.
    pub uncompressed_terms: u128,
}

impl fmt::Display for SizeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "terms={} slots={} factors={} B_a={} R={} blocks={} uncompressed={}",
            self.term_count,
            self.slot_count,
            self.factor_count,
            self.attr_sets,
            self.max_cover,
            self.blocks,
            self.uncompressed_terms
        )
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut x = x;
        while self.0[x] != r {
            let next = self.0[x];
            self.0[x] = r;
            x = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

impl CompressedPolynomial {
    /// Builds the compressed form from a statistic set.
    pub fn build(stats: &StatisticSet) -> Result<Self, PolyError> {
        stats.validate()?;
        let sizes = stats.sizes().to_vec();
        let m = sizes.len();
        let mut offsets = Vec::with_capacity(m);
        let mut acc = 0;
        for &n in &sizes {
            offsets.push(acc);
            acc += n;
        }
        let one_d = acc;
        let var_count = stats.len();
        let groups = stats.pair_groups();

        let mut attr_sets: Vec<(usize, usize)> = groups.iter().map(|g| g.pair).collect();
        attr_sets.sort();
        attr_sets.dedup();

        // blocks: connected components of attributes linked by a pair group
        let mut uf = UnionFind((0..m).collect());
        for g in groups {
            uf.union(g.pair.0, g.pair.1);
        }
        let mut used = vec![false; m];
        for g in groups {
            used[g.pair.0] = true;
            used[g.pair.1] = true;
        }
        let free_attrs: Vec<usize> = (0..m).filter(|&i| !used[i]).collect();
        let mut roots: Vec<usize> = (0..m).filter(|&i| used[i]).map(|i| uf.find(i)).collect();
        roots.sort();
        roots.dedup();

        let mut blocks = Vec::with_capacity(roots.len());
        let mut terms = Vec::new();
        let mut term_block = Vec::new();
        let mut var_block = vec![0; var_count - one_d];
        for (b, &root) in roots.iter().enumerate() {
            let attrs: Vec<usize> = (0..m).filter(|&i| used[i] && uf.find(i) == root).collect();
            let block_groups: Vec<_> = groups.iter().filter(|g| uf.find(g.pair.0) == root).collect();
            for g in &block_groups {
                for &id in &g.ids {
                    var_block[id - one_d] = b;
                }
            }
            // every set with a non-empty common rectangle, at most one
            // statistic per pair group (same-pair rectangles are disjoint)
            let mut sets: Vec<(Vec<usize>, RangePredicate)> = vec![(Vec::new(), RangePredicate::all(m))];
            for g in &block_groups {
                let (pa, pb) = g.pair;
                let snapshot = sets.len();
                for si in 0..snapshot {
                    for &id in &g.ids {
                        let st = &stats.get(id).ranges;
                        let (ra, rb) = (st.0[pa].unwrap(), st.0[pb].unwrap());
                        let (sa, sb) = (&sets[si].1 .0[pa], &sets[si].1 .0[pb]);
                        if sa.is_some_and(|s| !s.overlaps(&ra)) || sb.is_some_and(|s| !s.overlaps(&rb)) {
                            continue;
                        }
                        let pred = sets[si].1.and(st).expect("overlap checked");
                        let mut ids = sets[si].0.clone();
                        ids.push(id);
                        sets.push((ids, pred));
                        if terms.len() + sets.len() > MAX_TERMS {
                            return Err(PolyError::TooLarge);
                        }
                    }
                }
            }
            for (ids, _) in sets.iter_mut() {
                ids.sort_unstable();
            }
            sets.sort_by(|x, y| x.0.len().cmp(&y.0.len()).then_with(|| x.0.cmp(&y.0)));

            // group by attribute set, keeping first-appearance order
            let mut keys: Vec<Vec<usize>> = Vec::new();
            let mut members: Vec<Vec<CompressionTerm>> = Vec::new();
            for (ids, pred) in sets {
                let dims = pred.dims();
                let term = CompressionTerm {
                    stats: ids,
                    ranges: dims.iter().map(|&i| (i, pred.0[i].unwrap())).collect(),
                };
                match keys.iter().position(|k| *k == dims) {
                    Some(p) => members[p].push(term),
                    None => {
                        keys.push(dims);
                        members.push(vec![term]);
                    }
                }
            }
            let mut block_term_groups = Vec::with_capacity(keys.len());
            for (key, group_terms) in keys.into_iter().zip(members) {
                let start = terms.len();
                term_block.extend(std::iter::repeat_n(b, group_terms.len()));
                terms.extend(group_terms);
                block_term_groups.push(TermGroup {
                    outside: attrs.iter().copied().filter(|i| !key.contains(i)).collect(),
                    attrs: key,
                    terms: start..terms.len(),
                });
            }
            blocks.push(Block {
                groups: block_term_groups,
            });
        }

        Ok(CompressedPolynomial {
            sizes,
            offsets,
            var_count,
            free_attrs,
            blocks,
            terms,
            term_block,
            var_block,
            attr_sets: attr_sets.len(),
            exec: Execution::default(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    pub fn var_count(&self) -> usize {
        self.var_count
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn one_d_count(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn is_one_d(&self, id: usize) -> bool {
        id < self.one_d_count()
    }

    /// Ids of the 1D variables of `attr`.
    pub fn one_d_ids(&self, attr: usize) -> Range<usize> {
        self.offsets[attr]..self.offsets[attr] + self.sizes[attr]
    }

    /// `(attribute, value)` of a 1D variable.
    pub fn one_d_position(&self, id: usize) -> Option<(usize, usize)> {
        if id >= self.one_d_count() {
            return None;
        }
        let attr = self.offsets.partition_point(|&o| o <= id) - 1;
        Some((attr, id - self.offsets[attr]))
    }

    /// Inclusion–exclusion terms, base terms of each block included.
    pub fn terms(&self) -> &[CompressionTerm] {
        &self.terms
    }

    /// Zeroes every 1D variable of `attr` whose value lies outside `keep`.
    pub fn zero_outside(&self, assign: &mut Assignment<'_>, attr: usize, keep: Interval) {
        let ids = self.one_d_ids(attr);
        let start = ids.start;
        assign.zero_all(ids.filter(|&id| !keep.contains(id - start)));
    }

    /// 1D-variable slots per attribute set, in block order: the full sums of
    /// attributes outside the set plus every restricted sum inside it.
    pub fn group_slots(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .flat_map(|b| &b.groups)
            .map(|g| {
                let outside: usize = g.outside.iter().map(|&i| self.sizes[i]).sum();
                let inner: usize = self.terms[g.terms.clone()].iter().map(CompressionTerm::slots).sum();
                outside + inner
            })
            .collect()
    }

    pub fn size_report(&self) -> SizeReport {
        let free_slots: usize = self.free_attrs.iter().map(|&i| self.sizes[i]).sum();
        let mut slot_count = free_slots;
        let mut factor_count = free_slots;
        let mut max_cover = 0;
        for block in &self.blocks {
            for g in &block.groups {
                let outside: usize = g.outside.iter().map(|&i| self.sizes[i]).sum();
                let inner: usize = self.terms[g.terms.clone()].iter().map(CompressionTerm::slots).sum();
                let deltas: usize = self.terms[g.terms.clone()].iter().map(|t| t.stats.len()).sum();
                slot_count += outside + inner;
                factor_count += outside + inner + deltas;
                if !g.attrs.is_empty() {
                    max_cover = max_cover.max(g.terms.len());
                }
            }
        }
        // block base terms multiply into the single base term
        let term_count = self.terms.len() - self.blocks.len() + 1;
        SizeReport {
            term_count,
            slot_count,
            factor_count,
            attr_sets: self.attr_sets,
            max_cover,
            blocks: self.blocks.len(),
            uncompressed_terms: self
                .sizes
                .iter()
                .fold(1u128, |acc, &n| acc.saturating_mul(n as u128)),
        }
    }

    fn check(&self, values: &[f64]) -> Result<(), PolyError> {
        if values.len() != self.var_count {
            return Err(PolyError::MissingValue {
                got: values.len(),
                expected: self.var_count,
            });
        }
        Ok(())
    }

    /// `P` at the assignment.
    pub fn evaluate(&self, assign: &Assignment<'_>) -> Result<f64, PolyError> {
        Ok(self.evaluate_value(assign)?.value())
    }

    pub fn evaluate_value(&self, assign: &Assignment<'_>) -> Result<PolyValue, PolyError> {
        self.check(assign.values())?;
        Ok(self.compute(assign.values(), None))
    }

    /// `α_j · ∂P/∂α_j` for a 1D variable: `P` with the other values of the
    /// same attribute zeroed.
    pub fn derivative_weighted(&self, assign: &Assignment<'_>, j: usize) -> Result<f64, PolyError> {
        Ok(self.derivative_weighted_value(assign, j)?.value())
    }

    pub fn derivative_weighted_value(
        &self,
        assign: &Assignment<'_>,
        j: usize,
    ) -> Result<PolyValue, PolyError> {
        self.check(assign.values())?;
        let (attr, _) = self.one_d_position(j).ok_or(PolyError::NotOneD(j))?;
        let mut a = assign.clone();
        a.zero_all(self.one_d_ids(attr).filter(|&id| id != j));
        Ok(self.compute(a.values(), None))
    }

    /// `∂P/∂α_j` for any variable.
    pub fn derivative_general(&self, assign: &Assignment<'_>, j: usize) -> Result<f64, PolyError> {
        Ok(self.derivative_general_value(assign, j)?.value())
    }

    pub fn derivative_general_value(
        &self,
        assign: &Assignment<'_>,
        j: usize,
    ) -> Result<PolyValue, PolyError> {
        self.check(assign.values())?;
        if j >= self.var_count {
            return Err(PolyError::UnknownVariable(j));
        }
        if let Some((attr, _)) = self.one_d_position(j) {
            let mut a = assign.clone();
            a.zero_all(self.one_d_ids(attr));
            a.set(j, 1.0);
            return Ok(self.compute(a.values(), None));
        }
        Ok(self.compute(assign.values(), Some(j)))
    }
}

//! Evaluation of the compressed polynomial, with a log-space fallback.

use std::cmp::Ordering;

use super::sums::{LnRangeSums, RangeSums};
use super::CompressedPolynomial;
use crate::exec::pairwise_sum;

/// Linear-space intermediates above this switch evaluation to log space.
const OVERFLOW_GUARD: f64 = 1e300;

/// Terms evaluated per parallel task.
const PARALLEL_MIN_TERMS: usize = 512;

/// A polynomial value, kept in log space when it does not fit an `f64`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolyValue {
    Plain(f64),
    Ln { ln: f64, negative: bool },
}

impl PolyValue {
    /// The value as an `f64` (infinite if it overflows).
    pub fn value(self) -> f64 {
        match self {
            PolyValue::Plain(v) => v,
            PolyValue::Ln { ln, negative } => {
                let v = ln.exp();
                if negative {
                    -v
                } else {
                    v
                }
            }
        }
    }

    /// Natural log of the absolute value.
    pub fn ln_abs(self) -> f64 {
        match self {
            PolyValue::Plain(v) => v.abs().ln(),
            PolyValue::Ln { ln, .. } => ln,
        }
    }

    pub fn is_zero(self) -> bool {
        match self {
            PolyValue::Plain(v) => v == 0.0,
            PolyValue::Ln { ln, .. } => ln == f64::NEG_INFINITY,
        }
    }

    fn negative(self) -> bool {
        match self {
            PolyValue::Plain(v) => v < 0.0,
            PolyValue::Ln { negative, .. } => negative,
        }
    }

    /// `self / other`, exact division when both are plain.
    pub fn ratio(self, other: PolyValue) -> f64 {
        match (self, other) {
            (PolyValue::Plain(a), PolyValue::Plain(b)) => a / b,
            _ => {
                if self.is_zero() {
                    return 0.0;
                }
                let v = (self.ln_abs() - other.ln_abs()).exp();
                if self.negative() != other.negative() {
                    -v
                } else {
                    v
                }
            }
        }
    }
}

fn guard(v: f64) -> Option<f64> {
    (v.abs() <= OVERFLOW_GUARD).then_some(v)
}

/// Signed log-space accumulator.
#[derive(Clone, Copy)]
struct SignedLn {
    ln: f64,
    negative: bool,
}

impl SignedLn {
    const ZERO: SignedLn = SignedLn {
        ln: f64::NEG_INFINITY,
        negative: false,
    };

    fn mul_ln(self, ln: f64) -> SignedLn {
        SignedLn {
            ln: self.ln + ln,
            negative: self.negative,
        }
    }

    fn mul(self, other: SignedLn) -> SignedLn {
        SignedLn {
            ln: self.ln + other.ln,
            negative: self.negative != other.negative,
        }
    }
}

fn signed_sum(items: &[SignedLn]) -> SignedLn {
    let max = items
        .iter()
        .map(|x| x.ln)
        .filter(|l| l.is_finite())
        .max_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let Some(max) = max else {
        return SignedLn::ZERO;
    };
    let scaled: Vec<f64> = items
        .iter()
        .map(|x| {
            let v = (x.ln - max).exp();
            if x.negative {
                -v
            } else {
                v
            }
        })
        .collect();
    let s = pairwise_sum(&scaled);
    SignedLn {
        ln: max + s.abs().ln(),
        negative: s < 0.0,
    }
}

impl CompressedPolynomial {
    /// `P` (or `∂P/∂α_skip` for a multi-dimensional `skip`) at `values`.
    pub(super) fn compute(&self, values: &[f64], skip: Option<usize>) -> PolyValue {
        match self.compute_plain(values, skip) {
            Some(v) => PolyValue::Plain(v),
            None => {
                let s = self.compute_ln(values, skip);
                PolyValue::Ln {
                    ln: s.ln,
                    negative: s.negative,
                }
            }
        }
    }

    fn one_d_values<'v>(&self, values: &'v [f64], attr: usize) -> &'v [f64] {
        &values[self.one_d_ids(attr)]
    }

    /// Under differentiation only the terms of the variable's own block that
    /// contain it survive; other blocks contribute their full factor.
    fn term_active(&self, t: usize, skip: Option<(usize, usize)>) -> bool {
        match skip {
            None => true,
            Some((j, block)) => self.term_block[t] != block || self.terms[t].stats.contains(&j),
        }
    }

    fn skip_block(&self, skip: Option<usize>) -> Option<(usize, usize)> {
        skip.map(|j| (j, self.var_block[j - self.one_d_count()]))
    }

    fn compute_plain(&self, values: &[f64], skip: Option<usize>) -> Option<f64> {
        let sums: Vec<RangeSums> = (0..self.sizes.len())
            .map(|i| RangeSums::new(self.one_d_values(values, i).iter().copied()))
            .collect();
        let skip = self.skip_block(skip);
        let term_values: Vec<f64> = self.exec.map_range_min(0..self.terms.len(), PARALLEL_MIN_TERMS, |t| {
            if !self.term_active(t, skip) {
                return 0.0;
            }
            let term = &self.terms[t];
            let mut v = 1.0;
            for &(i, r) in &term.ranges {
                v *= sums[i].range(r);
            }
            for &j in &term.stats {
                if Some(j) != skip.map(|s| s.0) {
                    v *= values[j] - 1.0;
                }
            }
            v
        });
        if term_values.iter().any(|v| guard(*v).is_none()) {
            return None;
        }
        let mut factors = Vec::with_capacity(self.free_attrs.len() + self.blocks.len());
        for &i in &self.free_attrs {
            factors.push(guard(sums[i].total())?);
        }
        for block in &self.blocks {
            let mut group_values = Vec::with_capacity(block.groups.len());
            for g in &block.groups {
                let mut outside = 1.0;
                for &i in &g.outside {
                    outside *= sums[i].total();
                }
                let inner = pairwise_sum(&term_values[g.terms.clone()]);
                group_values.push(guard(guard(outside)? * inner)?);
            }
            factors.push(guard(pairwise_sum(&group_values))?);
        }
        let mut p = 1.0;
        for f in factors {
            p = guard(p * f)?;
        }
        Some(p)
    }

    fn compute_ln(&self, values: &[f64], skip: Option<usize>) -> SignedLn {
        let sums: Vec<LnRangeSums> = (0..self.sizes.len())
            .map(|i| LnRangeSums::new(self.one_d_values(values, i).iter().copied()))
            .collect();
        let skip = self.skip_block(skip);
        let term_values: Vec<SignedLn> = self.exec.map_range_min(0..self.terms.len(), PARALLEL_MIN_TERMS, |t| {
            if !self.term_active(t, skip) {
                return SignedLn::ZERO;
            }
            let term = &self.terms[t];
            let mut acc = SignedLn {
                ln: 0.0,
                negative: false,
            };
            for &(i, r) in &term.ranges {
                acc = acc.mul_ln(sums[i].range(r));
            }
            for &j in &term.stats {
                if Some(j) != skip.map(|s| s.0) {
                    let d = values[j] - 1.0;
                    acc = acc.mul(SignedLn {
                        ln: d.abs().ln(),
                        negative: d < 0.0,
                    });
                }
            }
            acc
        });
        let mut total = SignedLn {
            ln: 0.0,
            negative: false,
        };
        for &i in &self.free_attrs {
            total = total.mul_ln(sums[i].total());
        }
        for block in &self.blocks {
            let groups: Vec<SignedLn> = block
                .groups
                .iter()
                .map(|g| {
                    let outside = g
                        .outside
                        .iter()
                        .map(|&i| sums[i].total())
                        .fold(0.0, |a, b| a + b);
                    signed_sum(&term_values[g.terms.clone()]).mul_ln(outside)
                })
                .collect();
            total = total.mul(signed_sum(&groups));
        }
        total
    }
}

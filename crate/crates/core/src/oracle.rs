//! Desk-scale ground truth: the uncompressed polynomial and brute-force
//! enumeration of possible worlds.
//!
//! Nothing here is meant to scale. Tests use these functions to check the
//! compressed polynomial, the solver and the query engine against the
//! definitions.

use thiserror::Error;

use crate::exec::pairwise_sum;
use crate::predicate::RangePredicate;
use crate::schema::TupleIndex;
use crate::statistics::StatisticSet;

/// Default cap on monomials for [`naive_expand`].
pub const DEFAULT_MONOMIAL_CAP: u128 = 100_000;
/// Default cap on enumerated instances.
pub const DEFAULT_WORLD_CAP: u128 = 1_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{what} has {size} elements, above the oracle cap of {cap}")]
    TooLarge { what: &'static str, size: u128, cap: u128 },
    #[error("assignment has {got} values, expected {expected}")]
    Assignment { got: usize, expected: usize },
}

/// One monomial: a tuple and every variable it carries (one 1D id per
/// attribute, then the multi-dimensional ids whose rectangle holds it).
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub tuple: TupleIndex,
    pub vars: Vec<usize>,
}

impl Monomial {
    pub fn value(&self, values: &[f64]) -> f64 {
        self.vars.iter().map(|&j| values[j]).product()
    }
}

/// The partition polynomial written out as a sum over all tuples.
#[derive(Debug, Clone)]
pub struct NaivePolynomial {
    sizes: Vec<usize>,
    var_count: usize,
    monomials: Vec<Monomial>,
}

pub fn naive_expand(stats: &StatisticSet) -> Result<NaivePolynomial, OracleError> {
    naive_expand_with_cap(stats, DEFAULT_MONOMIAL_CAP)
}

pub fn naive_expand_with_cap(stats: &StatisticSet, cap: u128) -> Result<NaivePolynomial, OracleError> {
    let sizes = stats.sizes().to_vec();
    let d: u128 = sizes.iter().map(|&n| n as u128).product();
    if d > cap {
        return Err(OracleError::TooLarge {
            what: "tuple space",
            size: d,
            cap,
        });
    }
    let multi: Vec<usize> = stats.multi_d_ids().collect();
    let monomials = TupleIndex::enumerate(&sizes)
        .map(|t| {
            let mut vars: Vec<usize> = t.0.iter().enumerate().map(|(i, &v)| stats.one_d_id(i, v)).collect();
            vars.extend(multi.iter().copied().filter(|&j| stats.get(j).ranges.matches(&t.0)));
            Monomial { tuple: t, vars }
        })
        .collect();
    Ok(NaivePolynomial {
        sizes,
        var_count: stats.len(),
        monomials,
    })
}

impl NaivePolynomial {
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    /// The monomial of a tuple.
    pub fn monomial(&self, coords: &[usize]) -> &Monomial {
        &self.monomials[TupleIndex::linearize(&self.sizes, coords) as usize]
    }

    fn check(&self, values: &[f64]) -> Result<(), OracleError> {
        if values.len() != self.var_count {
            return Err(OracleError::Assignment {
                got: values.len(),
                expected: self.var_count,
            });
        }
        Ok(())
    }

    /// Per-tuple monomial values, in tuple order.
    pub fn weights(&self, values: &[f64]) -> Result<Vec<f64>, OracleError> {
        self.check(values)?;
        Ok(self.monomials.iter().map(|m| m.value(values)).collect())
    }

    pub fn evaluate(&self, values: &[f64]) -> Result<f64, OracleError> {
        Ok(pairwise_sum(&self.weights(values)?))
    }

    /// Symbolic `∂P/∂α_j`: the monomials holding `j`, with `α_j` removed.
    pub fn derivative(&self, values: &[f64], j: usize) -> Result<f64, OracleError> {
        self.check(values)?;
        let terms: Vec<f64> = self
            .monomials
            .iter()
            .filter(|m| m.vars.contains(&j))
            .map(|m| m.vars.iter().filter(|&&v| v != j).map(|&v| values[v]).product())
            .collect();
        Ok(pairwise_sum(&terms))
    }

    /// `P_q` at `β`: every monomial satisfying `pred` is multiplied by `β`.
    pub fn extended(&self, values: &[f64], pred: &RangePredicate, beta: f64) -> Result<f64, OracleError> {
        self.check(values)?;
        let terms: Vec<f64> = self
            .monomials
            .iter()
            .map(|m| {
                let v = m.value(values);
                if pred.matches(&m.tuple.0) {
                    v * beta
                } else {
                    v
                }
            })
            .collect();
        Ok(pairwise_sum(&terms))
    }

    /// `n/P · ∂P_q/∂β`, the expected answer of a counting query.
    pub fn query_expectation(&self, values: &[f64], pred: &RangePredicate, n: u64) -> Result<f64, OracleError> {
        let p = self.evaluate(values)?;
        // P_q is affine in β
        let dq = self.extended(values, pred, 1.0)? - self.extended(values, pred, 0.0)?;
        Ok(n as f64 * dq / p)
    }
}

/// All ordered instances of `n` tuples drawn from the tuple space.
#[derive(Debug, Clone)]
pub struct WorldEnumeration {
    pub sizes: Vec<usize>,
    pub n: usize,
}

impl WorldEnumeration {
    pub fn new(sizes: Vec<usize>, n: usize) -> Self {
        WorldEnumeration { sizes, n }
    }

    pub fn tuple_count(&self) -> u128 {
        self.sizes.iter().map(|&s| s as u128).product()
    }

    /// `dⁿ`, saturating.
    pub fn count(&self) -> u128 {
        let d = self.tuple_count();
        (0..self.n).fold(1u128, |acc, _| acc.saturating_mul(d))
    }

    /// Instances as slot vectors of linear tuple indices.
    pub fn iter(&self) -> impl Iterator<Item = Vec<u64>> {
        let d = self.tuple_count() as u64;
        let n = self.n;
        let mut next = (d > 0 || n == 0).then(|| vec![0u64; n]);
        std::iter::from_fn(move || {
            let current = next.take()?;
            let mut succ = current.clone();
            let mut k = n;
            while k > 0 {
                k -= 1;
                succ[k] += 1;
                if succ[k] < d {
                    next = Some(succ);
                    break;
                }
                succ[k] = 0;
            }
            Some(current)
        })
    }

    fn check(&self, cap: u128) -> Result<(), OracleError> {
        let size = self.count();
        if size > cap {
            return Err(OracleError::TooLarge {
                what: "world enumeration",
                size,
                cap,
            });
        }
        Ok(())
    }
}

/// `∏_j α_j^{⟨c_j, I⟩}` for one instance.
pub fn instance_weight(naive: &NaivePolynomial, values: &[f64], instance: &[TupleIndex]) -> Result<f64, OracleError> {
    naive.check(values)?;
    Ok(instance
        .iter()
        .map(|t| naive.monomial(&t.0).value(values))
        .product())
}

/// `Pr(I) = ∏_j α_j^{⟨c_j, I⟩} / Pⁿ`.
pub fn instance_probability(
    stats: &StatisticSet,
    values: &[f64],
    instance: &[TupleIndex],
) -> Result<f64, OracleError> {
    let naive = naive_expand(stats)?;
    let p = naive.evaluate(values)?;
    Ok(instance_weight(&naive, values, instance)? / p.powi(instance.len() as i32))
}

/// `E[|σ_π(I)|]` by summing over every instance of `n` tuples.
pub fn brute_expectation(
    stats: &StatisticSet,
    values: &[f64],
    pred: &RangePredicate,
    n: usize,
) -> Result<f64, OracleError> {
    let naive = naive_expand(stats)?;
    let worlds = WorldEnumeration::new(naive.sizes.clone(), n);
    worlds.check(DEFAULT_WORLD_CAP)?;
    let weights = naive.weights(values)?;
    let hits: Vec<bool> = naive.monomials.iter().map(|m| pred.matches(&m.tuple.0)).collect();
    let z = pairwise_sum(&weights).powi(n as i32);
    let terms: Vec<f64> = worlds
        .iter()
        .map(|inst| {
            let w: f64 = inst.iter().map(|&t| weights[t as usize]).product();
            let count = inst.iter().filter(|&&t| hits[t as usize]).count();
            w * count as f64
        })
        .collect();
    Ok(pairwise_sum(&terms) / z)
}

/// Checks `Σ_I ∏_j α_j^{⟨c_j, I⟩} = Pⁿ` by direct enumeration.
pub fn verify_partition(stats: &StatisticSet, values: &[f64], n: usize) -> Result<bool, OracleError> {
    let (z, p) = partition_by_enumeration(stats, values, n)?;
    let want = p.powi(n as i32);
    Ok((z - want).abs() <= 1e-9 * want.abs().max(f64::MIN_POSITIVE))
}

/// `(Σ_I weight(I), P)`.
pub fn partition_by_enumeration(stats: &StatisticSet, values: &[f64], n: usize) -> Result<(f64, f64), OracleError> {
    let naive = naive_expand(stats)?;
    let worlds = WorldEnumeration::new(naive.sizes.clone(), n);
    worlds.check(DEFAULT_WORLD_CAP)?;
    let weights = naive.weights(values)?;
    let terms: Vec<f64> = worlds
        .iter()
        .map(|inst| inst.iter().map(|&t| weights[t as usize]).product())
        .collect();
    Ok((pairwise_sum(&terms), pairwise_sum(&weights)))
}

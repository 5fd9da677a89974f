use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CountEstimator, EvalError};
use crate::dataset::DatasetHandle;
use crate::predicate::RangePredicate;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SampleKind {
    Uniform,
    Stratified(Vec<usize>),
}

/// Rows drawn without replacement, each carrying its scale-up weight.
#[derive(Debug, Clone)]
pub struct SampleBaseline {
    pub name: String,
    pub kind: SampleKind,
    pub rate: f64,
    pub rows: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
}

fn target_size(rate: f64, population: usize) -> usize {
    ((rate * population as f64).round() as usize).clamp(1, population.max(1))
}

impl SampleBaseline {
    /// Simple random sample of `round(rate * n)` rows (at least one), each
    /// weighted `n / size`.
    pub fn uniform(data: &DatasetHandle, rate: f64, seed: u64) -> Self {
        let n = data.row_count() as usize;
        let size = target_size(rate, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picks = index::sample(&mut rng, n, size).into_vec();
        picks.sort_unstable();
        let w = n as f64 / size as f64;
        SampleBaseline {
            name: format!("uniform:{rate}"),
            kind: SampleKind::Uniform,
            rate,
            rows: picks.iter().map(|&r| data.row(r)).collect(),
            weights: vec![w; size],
        }
    }

    /// Equal allocation across the nonempty strata of `attrs`: every stratum
    /// gets `round(rate * n) / strata` rows, at least one and at most its
    /// size, and each sampled row is weighted by stratum size over stratum
    /// sample size.
    pub fn stratified(data: &DatasetHandle, attrs: &[usize], rate: f64, seed: u64) -> Self {
        let n = data.row_count() as usize;
        let mut strata: BTreeMap<Vec<u32>, Vec<usize>> = BTreeMap::new();
        for r in 0..n {
            let key = attrs.iter().map(|&a| data.column(a)[r]).collect();
            strata.entry(key).or_default().push(r);
        }
        let per = (target_size(rate, n) as f64 / strata.len() as f64).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut weights = Vec::new();
        for members in strata.values() {
            let k = per.clamp(1, members.len());
            let w = members.len() as f64 / k as f64;
            let mut picks = index::sample(&mut rng, members.len(), k).into_vec();
            picks.sort_unstable();
            for i in picks {
                rows.push(data.row(members[i]));
                weights.push(w);
            }
        }
        let names: Vec<&str> = attrs.iter().map(|&a| data.schema.attributes[a].name.as_str()).collect();
        SampleBaseline {
            name: format!("stratified:{}:{rate}", names.join(",")),
            kind: SampleKind::Stratified(attrs.to_vec()),
            rate,
            rows,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Horvitz-Thompson estimate: total weight of matching sampled rows.
    pub fn estimate(&self, pred: &RangePredicate) -> f64 {
        self.rows
            .iter()
            .zip(&self.weights)
            .filter(|(row, _)| pred.matches(row))
            .map(|(_, w)| w)
            .sum()
    }
}

impl CountEstimator for SampleBaseline {
    fn name(&self) -> &str {
        &self.name
    }

    fn estimate_count(&self, pred: &RangePredicate) -> Result<f64, EvalError> {
        Ok(self.estimate(pred))
    }
}

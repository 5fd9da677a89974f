//! Attribute-pair scoring (Pearson chi-squared) and pair selection.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetHandle;
use crate::exec::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub pair: (usize, usize),
    pub chi2: f64,
}

/// How attribute pairs are picked from the ranked scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStrategy {
    /// Highest scores first; each pair must add at least one new attribute.
    Correlation,
    /// Maximize covered attributes, then total score.
    Cover,
}

impl std::str::FromStr for PairStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "correlation" | "correlation-only" | "corr" => Ok(PairStrategy::Correlation),
            "cover" => Ok(PairStrategy::Cover),
            other => Err(format!("unknown pair strategy `{other}`")),
        }
    }
}

/// Pearson chi-squared of a contingency table, without continuity
/// correction. Rows and columns with zero marginal are ignored; a table
/// with fewer than two non-empty rows or columns scores 0.
pub fn chi_squared(table: &[Vec<u64>]) -> f64 {
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let ncols = table.first().map_or(0, Vec::len);
    let cols: Vec<f64> = (0..ncols)
        .map(|c| table.iter().map(|r| r[c]).sum::<u64>() as f64)
        .collect();
    let total: f64 = rows.iter().sum();
    let live_rows = rows.iter().filter(|&&r| r > 0.0).count();
    let live_cols = cols.iter().filter(|&&c| c > 0.0).count();
    if total == 0.0 || live_rows < 2 || live_cols < 2 {
        return 0.0;
    }
    let mut chi2 = 0.0;
    for (r, row) in table.iter().enumerate() {
        if rows[r] == 0.0 {
            continue;
        }
        for (c, &obs) in row.iter().enumerate() {
            if cols[c] == 0.0 {
                continue;
            }
            let expected = rows[r] * cols[c] / total;
            let diff = obs as f64 - expected;
            chi2 += diff * diff / expected;
        }
    }
    chi2
}

/// Scores every unordered attribute pair not touching `exclude`, sorted by
/// descending chi-squared with ties in attribute-index order.
pub fn score_pairs(data: &DatasetHandle, exclude: &[usize]) -> Vec<PairScore> {
    let m = data.arity();
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
        .filter(|(a, b)| !exclude.contains(a) && !exclude.contains(b))
        .collect();
    let mut scores = Execution::default().map(&pairs, |&(a, b)| PairScore {
        pair: (a, b),
        chi2: chi_squared(&data.contingency(a, b)),
    });
    sort_scores(&mut scores);
    scores
}

fn sort_scores(scores: &mut [PairScore]) {
    scores.sort_by(|x, y| {
        y.chi2
            .partial_cmp(&x.chi2)
            .unwrap_or(Ordering::Equal)
            .then(x.pair.cmp(&y.pair))
    });
}

/// Exhaustive search is used while the number of candidate subsets stays
/// below this bound; greedy beyond it.
const EXHAUSTIVE_LIMIT: u128 = 2_000_000;

/// Picks up to `budget` pairs from `scores` (sorted descending). Returns all
/// pairs when the budget exceeds the candidates.
pub fn select_pairs(scores: &[PairScore], budget: usize, strategy: PairStrategy) -> Vec<(usize, usize)> {
    if budget == 0 || scores.is_empty() {
        return Vec::new();
    }
    let mut ranked = scores.to_vec();
    sort_scores(&mut ranked);
    if budget >= ranked.len() {
        return ranked.iter().map(|s| s.pair).collect();
    }
    match strategy {
        PairStrategy::Correlation => by_correlation(&ranked, budget),
        PairStrategy::Cover => {
            let chosen = if binomial(ranked.len(), budget) <= EXHAUSTIVE_LIMIT {
                cover_exhaustive(&ranked, budget)
            } else {
                cover_greedy(&ranked, budget)
            };
            // never cover fewer attributes than the correlation-only choice
            let alt = by_correlation(&ranked, budget);
            if coverage(&alt) > coverage(&chosen) {
                alt
            } else {
                chosen
            }
        }
    }
}

fn by_correlation(ranked: &[PairScore], budget: usize) -> Vec<(usize, usize)> {
    let mut covered = BTreeSet::new();
    let mut out = Vec::new();
    for s in ranked {
        if out.len() == budget {
            break;
        }
        let (a, b) = s.pair;
        if !covered.contains(&a) || !covered.contains(&b) {
            covered.insert(a);
            covered.insert(b);
            out.push(s.pair);
        }
    }
    out
}

fn coverage(pairs: &[(usize, usize)]) -> usize {
    pairs
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .collect::<BTreeSet<_>>()
        .len()
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k) as u128;
    let mut acc = 1u128;
    for i in 0..k {
        acc = acc * (n as u128 - i) / (i + 1);
        if acc > EXHAUSTIVE_LIMIT {
            return acc;
        }
    }
    acc
}

/// Best subset by (attributes covered, total score); earlier-ranked pairs
/// win remaining ties.
fn cover_exhaustive(ranked: &[PairScore], budget: usize) -> Vec<(usize, usize)> {
    let mut best: Option<(usize, f64, Vec<usize>)> = None;
    let mut idx: Vec<usize> = (0..budget).collect();
    loop {
        let pairs: Vec<(usize, usize)> = idx.iter().map(|&i| ranked[i].pair).collect();
        let cov = coverage(&pairs);
        let score: f64 = idx.iter().map(|&i| ranked[i].chi2).sum();
        let better = match &best {
            None => true,
            Some((bc, bs, _)) => cov > *bc || (cov == *bc && score > *bs),
        };
        if better {
            best = Some((cov, score, idx.clone()));
        }
        // next combination in lexicographic order
        let n = ranked.len();
        let mut i = budget;
        loop {
            if i == 0 {
                let (_, _, chosen) = best.unwrap();
                return chosen.iter().map(|&i| ranked[i].pair).collect();
            }
            i -= 1;
            if idx[i] != i + n - budget {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..budget {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn cover_greedy(ranked: &[PairScore], budget: usize) -> Vec<(usize, usize)> {
    let mut covered = BTreeSet::new();
    let mut taken = vec![false; ranked.len()];
    let mut out = Vec::new();
    while out.len() < budget {
        let mut pick: Option<(usize, usize)> = None;
        for (i, s) in ranked.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let gain = [s.pair.0, s.pair.1]
                .iter()
                .filter(|a| !covered.contains(*a))
                .count();
            if pick.is_none_or(|(_, g)| gain > g) {
                pick = Some((i, gain));
            }
        }
        let Some((i, _)) = pick else { break };
        taken[i] = true;
        covered.insert(ranked[i].pair.0);
        covered.insert(ranked[i].pair.1);
        out.push(ranked[i].pair);
    }
    out
}

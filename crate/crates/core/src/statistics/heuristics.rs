//! Per-pair 2D statistic heuristics: LARGE, ZERO and COMPOSITE.
//!
//! All three read the joint histogram of the pair (`table[a][b]`) and return
//! pairwise disjoint rectangles with their exact counts.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::predicate::Interval;

/// A 2D range statistic over an attribute pair, with its exact count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub a: Interval,
    pub b: Interval,
    pub count: u64,
}

impl Rect {
    pub fn cells(&self) -> usize {
        self.a.width() * self.b.width()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heuristic {
    Large,
    Zero,
    Composite,
}

impl Heuristic {
    pub fn apply(self, table: &[Vec<u64>], budget: usize) -> Vec<Rect> {
        match self {
            Heuristic::Large => large(table, budget),
            Heuristic::Zero => zero(table, budget),
            Heuristic::Composite => composite(table, budget),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::Large => "large",
            Heuristic::Zero => "zero",
            Heuristic::Composite => "composite",
        }
    }
}

impl std::str::FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "large" => Ok(Heuristic::Large),
            "zero" => Ok(Heuristic::Zero),
            "composite" | "kd" => Ok(Heuristic::Composite),
            other => Err(format!("unknown heuristic `{other}`")),
        }
    }
}

fn cell(a: usize, b: usize, count: u64) -> Rect {
    Rect {
        a: Interval::point(a),
        b: Interval::point(b),
        count,
    }
}

fn cells_by_count(table: &[Vec<u64>]) -> Vec<(usize, usize, u64)> {
    let mut cells: Vec<(usize, usize, u64)> = table
        .iter()
        .enumerate()
        .flat_map(|(a, row)| row.iter().enumerate().map(move |(b, &c)| (a, b, c)))
        .collect();
    // stable sort keeps (row, col) order among equal counts
    cells.sort_by(|x, y| y.2.cmp(&x.2));
    cells
}

/// The `budget` most populated single cells.
pub fn large(table: &[Vec<u64>], budget: usize) -> Vec<Rect> {
    cells_by_count(table)
        .into_iter()
        .take(budget)
        .map(|(a, b, c)| cell(a, b, c))
        .collect()
}

/// Empty cells in index order; any remaining budget is filled with the most
/// populated of the other cells.
pub fn zero(table: &[Vec<u64>], budget: usize) -> Vec<Rect> {
    let mut out: Vec<Rect> = Vec::with_capacity(budget);
    let mut taken = HashSet::new();
    'scan: for (a, row) in table.iter().enumerate() {
        for (b, &c) in row.iter().enumerate() {
            if out.len() == budget {
                break 'scan;
            }
            if c == 0 {
                out.push(cell(a, b, 0));
                taken.insert((a, b));
            }
        }
    }
    if out.len() < budget {
        let rest = cells_by_count(table)
            .into_iter()
            .filter(|(a, b, _)| !taken.contains(&(*a, *b)))
            .take(budget - out.len())
            .map(|(a, b, c)| cell(a, b, c));
        out.extend(rest);
    }
    out
}

/// 2D prefix sums of counts and squared counts.
struct Moments {
    cols: usize,
    sum: Vec<u128>,
    sq: Vec<u128>,
}

impl Moments {
    fn new(table: &[Vec<u64>]) -> Self {
        let rows = table.len();
        let cols = table.first().map_or(0, Vec::len);
        let w = cols + 1;
        let mut sum = vec![0u128; (rows + 1) * w];
        let mut sq = vec![0u128; (rows + 1) * w];
        for r in 0..rows {
            for c in 0..cols {
                let v = table[r][c] as u128;
                let i = (r + 1) * w + c + 1;
                sum[i] = v + sum[i - 1] + sum[i - w] - sum[i - w - 1];
                sq[i] = v * v + sq[i - 1] + sq[i - w] - sq[i - w - 1];
            }
        }
        Moments { cols, sum, sq }
    }

    fn rect(&self, table: &[u128], a: Interval, b: Interval) -> u128 {
        let w = self.cols + 1;
        let (r0, r1, c0, c1) = (a.lo, a.hi + 1, b.lo, b.hi + 1);
        table[r1 * w + c1] + table[r0 * w + c0] - table[r0 * w + c1] - table[r1 * w + c0]
    }

    fn count(&self, a: Interval, b: Interval) -> u64 {
        self.rect(&self.sum, a, b) as u64
    }

    /// Σ (count − mean)² over the rectangle.
    fn sse(&self, a: Interval, b: Interval) -> f64 {
        let n = (a.width() * b.width()) as u128;
        let s = self.rect(&self.sum, a, b);
        let q = self.rect(&self.sq, a, b);
        // n·Σx² − (Σx)² is an exact non-negative integer
        (q * n - s * s) as f64 / n as f64
    }
}

#[derive(Debug, Clone, Copy)]
struct Leaf {
    a: Interval,
    b: Interval,
    /// 0 splits the first attribute's range next, 1 the second.
    next_dim: usize,
    sse: f64,
}

impl Leaf {
    fn cells(&self) -> usize {
        self.a.width() * self.b.width()
    }
}

/// Best boundary for splitting `range`: returns `k` such that the halves
/// are `[lo, k]` and `[k + 1, hi]`.
fn best_split(range: Interval, cost: impl Fn(Interval, Interval) -> f64) -> usize {
    let candidates: Vec<(usize, f64)> = (range.lo..range.hi)
        .map(|k| (k, cost(Interval::new(range.lo, k), Interval::new(k + 1, range.hi))))
        .collect();
    let min = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let max = candidates.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * (1.0 + max.abs());
    if max - min <= tol {
        return range.lo + (range.width() - 1) / 2;
    }
    candidates
        .iter()
        .find(|c| c.1 - min <= tol)
        .map(|c| c.0)
        .expect("non-empty candidate list")
}

/// KD-tree partition of the pair's plane into `budget` disjoint rectangles.
///
/// Leaves are refined one split at a time, always the splittable leaf with
/// the largest within-leaf SSE (ties: more cells, then creation order). A
/// split alternates dimensions starting with the first attribute and picks
/// the boundary minimizing the summed SSE of both halves. Single cells are
/// never split, so the result may have fewer leaves than `budget`.
pub fn composite(table: &[Vec<u64>], budget: usize) -> Vec<Rect> {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || budget == 0 {
        return Vec::new();
    }
    let budget = budget.min(rows * cols);
    let moments = Moments::new(table);
    let root_a = Interval::new(0, rows - 1);
    let root_b = Interval::new(0, cols - 1);
    let mut leaves = vec![Leaf {
        a: root_a,
        b: root_b,
        next_dim: 0,
        sse: moments.sse(root_a, root_b),
    }];
    while leaves.len() < budget {
        let pick = leaves
            .iter()
            .enumerate()
            .filter(|(_, l)| l.cells() > 1)
            .fold(None::<(usize, &Leaf)>, |best, (i, l)| match best {
                Some((_, b)) if b.sse > l.sse || (b.sse == l.sse && b.cells() >= l.cells()) => best,
                _ => Some((i, l)),
            });
        let Some((idx, &leaf)) = pick else { break };
        let dim = match leaf.next_dim {
            0 if leaf.a.width() > 1 => 0,
            1 if leaf.b.width() > 1 => 1,
            0 => 1,
            _ => 0,
        };
        let (left, right) = if dim == 0 {
            let k = best_split(leaf.a, |x, y| moments.sse(x, leaf.b) + moments.sse(y, leaf.b));
            (
                (Interval::new(leaf.a.lo, k), leaf.b),
                (Interval::new(k + 1, leaf.a.hi), leaf.b),
            )
        } else {
            let k = best_split(leaf.b, |x, y| moments.sse(leaf.a, x) + moments.sse(leaf.a, y));
            (
                (leaf.a, Interval::new(leaf.b.lo, k)),
                (leaf.a, Interval::new(k + 1, leaf.b.hi)),
            )
        };
        let child = |(a, b): (Interval, Interval)| Leaf {
            a,
            b,
            next_dim: 1 - dim,
            sse: moments.sse(a, b),
        };
        leaves[idx] = child(left);
        leaves.insert(idx + 1, child(right));
    }
    leaves
        .into_iter()
        .map(|l| Rect {
            a: l.a,
            b: l.b,
            count: moments.count(l.a, l.b),
        })
        .collect()
}

//! Small reference instances used by tests, benches and the `fixture`
//! subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::DatasetHandle;
use crate::predicate::Interval;
use crate::schema::{AttributeDomain, Schema};
use crate::statistics::{select_statistics, Heuristic, PairStrategy, Rect, SelectionConfig, StatisticSet};

/// Three binary attributes `A`, `B`, `C`.
pub fn binary_schema() -> Schema {
    Schema::new(vec![
        AttributeDomain::categorical("A", ["a1", "a2"]),
        AttributeDomain::categorical("B", ["b1", "b2"]),
        AttributeDomain::categorical("C", ["c1", "c2"]),
    ])
    .expect("valid schema")
}

/// Ten rows over [`binary_schema`] consistent with [`binary_one_d`] and
/// [`binary_correlated`].
pub fn binary_rows() -> Vec<Vec<usize>> {
    let mut rows = Vec::new();
    for (row, times) in [
        ([0, 0, 0], 2),
        ([1, 0, 0], 3),
        ([1, 0, 1], 3),
        ([0, 1, 0], 1),
        ([1, 1, 1], 1),
    ] {
        rows.extend(std::iter::repeat_n(row.to_vec(), times));
    }
    rows
}

pub fn binary_dataset() -> DatasetHandle {
    DatasetHandle::from_rows(binary_schema(), &binary_rows()).expect("valid rows")
}

/// 1D statistics only: `A = (3, 7)`, `B = (8, 2)`, `C = (6, 4)`, `n = 10`.
pub fn binary_one_d() -> StatisticSet {
    StatisticSet::new(vec![2, 2, 2], 10, &[vec![3, 7], vec![8, 2], vec![6, 4]], &[])
        .expect("consistent statistics")
}

/// [`binary_one_d`] plus `(a1,b1) = 2`, `(a2,b2) = 1`, `(b1,c1) = 5` and
/// `(b2,c1) = 1`. Ids 6..10 in that order.
pub fn binary_correlated() -> StatisticSet {
    let p = Interval::point;
    let ab = vec![
        Rect { a: p(0), b: p(0), count: 2 },
        Rect { a: p(1), b: p(1), count: 1 },
    ];
    let bc = vec![
        Rect { a: p(0), b: p(0), count: 5 },
        Rect { a: p(1), b: p(0), count: 1 },
    ];
    StatisticSet::new(
        vec![2, 2, 2],
        10,
        &[vec![3, 7], vec![8, 2], vec![6, 4]],
        &[((0, 1), ab), ((1, 2), bc)],
    )
    .expect("consistent statistics")
}

/// Three 1000-value attributes with one `AB` and two `BC` rectangles.
pub fn thousand_domain() -> StatisticSet {
    let n = 1000;
    let one = vec![1u64; 1000];
    let ab = vec![Rect {
        a: Interval::new(100, 199),
        b: Interval::new(500, 599),
        count: 10,
    }];
    let bc = vec![
        Rect {
            a: Interval::new(550, 649),
            b: Interval::new(800, 899),
            count: 10,
        },
        Rect {
            a: Interval::new(650, 699),
            b: Interval::new(700, 799),
            count: 10,
        },
    ];
    StatisticSet::new(
        vec![1000; 3],
        n,
        &[one.clone(), one.clone(), one],
        &[((0, 1), ab), ((1, 2), bc)],
    )
    .expect("consistent statistics")
}

/// A random dataset with `arity` attributes of sizes in `2..=max_size`,
/// with a planted dependence between consecutive attributes.
pub fn random_dataset(seed: u64, arity: usize, max_size: usize, rows: usize) -> DatasetHandle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attrs: Vec<AttributeDomain> = (0..arity)
        .map(|i| {
            let size = rng.random_range(2..=max_size.max(2));
            AttributeDomain::categorical(&format!("x{i}"), (0..size).map(|v| format!("v{v}")))
        })
        .collect();
    let schema = Schema::new(attrs).expect("valid schema");
    let sizes = schema.sizes();
    let data: Vec<Vec<usize>> = (0..rows.max(1))
        .map(|_| {
            let mut row = Vec::with_capacity(arity);
            for (i, &size) in sizes.iter().enumerate() {
                let v = if i > 0 && rng.random_bool(0.5) {
                    row[i - 1] % size
                } else {
                    rng.random_range(0..size)
                };
                row.push(v);
            }
            row
        })
        .collect();
    DatasetHandle::from_rows(schema, &data).expect("valid rows")
}

/// Statistics selected from [`random_dataset`] with random budgets and
/// heuristic.
pub fn random_statistics(seed: u64, arity: usize, max_size: usize, rows: usize) -> StatisticSet {
    let data = random_dataset(seed, arity, max_size, rows);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let heuristic = [Heuristic::Large, Heuristic::Zero, Heuristic::Composite][rng.random_range(0..3)];
    let strategy = [PairStrategy::Correlation, PairStrategy::Cover][rng.random_range(0..2)];
    let config = SelectionConfig {
        pairs: rng.random_range(0..=arity),
        per_pair: rng.random_range(1..=6),
        heuristic,
        strategy,
        exclude: Vec::new(),
    };
    select_statistics(&data, &config).expect("selected statistics are consistent").0
}

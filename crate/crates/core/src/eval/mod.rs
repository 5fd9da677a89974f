//! Heavy/light/null workloads, sampling baselines and accuracy metrics.

mod sample;
pub mod synth;

use std::collections::HashSet;
use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dataset::DatasetHandle;
use crate::exec::Execution;
use crate::predicate::{Interval, RangePredicate};
use crate::query::{self, round_estimate, QueryError};
use crate::schema::{Schema, TupleIndex};
use crate::summary::Summary;

pub use sample::{SampleBaseline, SampleKind};

/// Enumerate zero cells outright below this many possible cells; sample
/// by rejection above it.
const ENUMERATE_CELLS: u128 = 10_000_000;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("workload needs {wanted} {set} values but only {available} exist")]
    Insufficient {
        set: &'static str,
        wanted: usize,
        available: u128,
    },
    #[error("bad baseline spec `{spec}`: {reason}")]
    BaselineSpec { spec: String, reason: String },
    #[error("bad workload spec `{0}`: expected heavy=K,light=K,null=K")]
    WorkloadSpec(String),
    #[error("correlation matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("bad generator config: {0}")]
    Generator(String),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: io::Error },
}

/// Which part of the workload a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadSet {
    Heavy,
    Light,
    Null,
}

impl fmt::Display for WorkloadSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WorkloadSet::Heavy => "heavy",
            WorkloadSet::Light => "light",
            WorkloadSet::Null => "null",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkloadValue {
    /// Bucket index per template attribute.
    pub cell: Vec<usize>,
    pub labels: Vec<String>,
    pub true_count: u64,
}

/// Point queries over a fixed attribute template.
#[derive(Debug, Clone, Serialize)]
pub struct Workload {
    pub attrs: Vec<usize>,
    pub attr_names: Vec<String>,
    pub heavy: Vec<WorkloadValue>,
    pub light: Vec<WorkloadValue>,
    pub null: Vec<WorkloadValue>,
}

impl Workload {
    pub fn len(&self) -> usize {
        self.heavy.len() + self.light.len() + self.null.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> impl Iterator<Item = (WorkloadSet, &WorkloadValue)> {
        let tag = |s| move |v| (s, v);
        self.heavy
            .iter()
            .map(tag(WorkloadSet::Heavy))
            .chain(self.light.iter().map(tag(WorkloadSet::Light)))
            .chain(self.null.iter().map(tag(WorkloadSet::Null)))
    }

    /// Point predicate over the full schema for one workload value.
    pub fn predicate(&self, arity: usize, value: &WorkloadValue) -> RangePredicate {
        let mut pred = RangePredicate::all(arity);
        for (&a, &v) in self.attrs.iter().zip(&value.cell) {
            pred = pred.with(a, Interval::point(v));
        }
        pred
    }
}

/// Requested sizes of the three workload sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkloadSizes {
    pub heavy: usize,
    pub light: usize,
    pub null: usize,
}

impl Default for WorkloadSizes {
    fn default() -> Self {
        WorkloadSizes {
            heavy: 100,
            light: 100,
            null: 200,
        }
    }
}

impl FromStr for WorkloadSizes {
    type Err = EvalError;

    /// `heavy=100,light=100,null=200`; omitted keys keep their default.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EvalError::WorkloadSpec(s.to_string());
        let mut out = WorkloadSizes::default();
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(bad)?;
            let value: usize = value.trim().parse().map_err(|_| bad())?;
            match key.trim() {
                "heavy" => out.heavy = value,
                "light" => out.light = value,
                "null" => out.null = value,
                _ => return Err(bad()),
            }
        }
        Ok(out)
    }
}

/// Resolves attribute names against a schema.
pub fn resolve_attrs(schema: &Schema, names: &[impl AsRef<str>]) -> Result<Vec<usize>, EvalError> {
    names
        .iter()
        .map(|n| {
            schema
                .index_of(n.as_ref())
                .map_err(|_| EvalError::UnknownAttribute(n.as_ref().to_string()))
        })
        .collect()
}

/// Ranks the cells of `attrs` by exact count. Heavy hitters are the top
/// counts, light hitters the smallest nonzero counts not already heavy, and
/// null values a seeded random choice of zero-count cells. Ties break by
/// cell index.
pub fn build_workload(
    data: &DatasetHandle,
    attrs: &[usize],
    sizes: WorkloadSizes,
    seed: u64,
) -> Result<Workload, EvalError> {
    let schema = &data.schema;
    let dims: Vec<usize> = attrs.iter().map(|&a| schema.attributes[a].size()).collect();
    let counts = data.group_counts(attrs);
    let mut ranked: Vec<(Vec<usize>, u64)> = counts.into_iter().collect();
    let existing = ranked.len();
    if sizes.heavy + sizes.light > existing {
        return Err(EvalError::Insufficient {
            set: "heavy+light",
            wanted: sizes.heavy + sizes.light,
            available: existing as u128,
        });
    }
    let total: u128 = dims.iter().map(|&d| d as u128).product();
    let zeros = total - existing as u128;
    if sizes.null as u128 > zeros {
        return Err(EvalError::Insufficient {
            set: "null",
            wanted: sizes.null,
            available: zeros,
        });
    }

    let label = |cell: &[usize]| -> Vec<String> {
        attrs
            .iter()
            .zip(cell)
            .map(|(&a, &v)| schema.attributes[a].label(v))
            .collect()
    };
    let value = |cell: Vec<usize>, true_count| WorkloadValue {
        labels: label(&cell),
        cell,
        true_count,
    };

    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let heavy: Vec<WorkloadValue> = ranked[..sizes.heavy]
        .iter()
        .map(|(c, n)| value(c.clone(), *n))
        .collect();
    let mut rest = ranked.split_off(sizes.heavy);
    rest.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let light: Vec<WorkloadValue> = rest[..sizes.light]
        .iter()
        .map(|(c, n)| value(c.clone(), *n))
        .collect();

    let present: HashSet<u64> = ranked
        .iter()
        .chain(&rest)
        .map(|(c, _)| TupleIndex::linearize(&dims, c))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut null_ids: Vec<u64> = if total <= ENUMERATE_CELLS {
        let free: Vec<u64> = (0..total as u64).filter(|i| !present.contains(i)).collect();
        index::sample(&mut rng, free.len(), sizes.null)
            .into_iter()
            .map(|i| free[i])
            .collect()
    } else {
        let mut chosen = HashSet::new();
        while chosen.len() < sizes.null {
            let id = rng.random_range(0..total) as u64;
            if !present.contains(&id) {
                chosen.insert(id);
            }
        }
        chosen.into_iter().collect()
    };
    null_ids.sort_unstable();
    let null = null_ids
        .into_iter()
        .map(|id| value(TupleIndex::delinearize(&dims, id).0, 0))
        .collect();

    Ok(Workload {
        attrs: attrs.to_vec(),
        attr_names: attrs.iter().map(|&a| schema.attributes[a].name.clone()).collect(),
        heavy,
        light,
        null,
    })
}

/// Symmetric relative error `|t - e| / (t + e)`; `0` when both are zero.
pub fn error_metric(true_count: u64, est: f64) -> f64 {
    let t = true_count as f64;
    let est = est.max(0.0);
    if t + est == 0.0 {
        return 0.0;
    }
    (t - est).abs() / (t + est)
}

/// How well rounded estimates separate light hitters from null values.
pub fn f_measure(light: &[u64], null: &[u64]) -> f64 {
    if light.is_empty() {
        return 0.0;
    }
    let tp = light.iter().filter(|&&e| e > 0).count() as f64;
    let fp = null.iter().filter(|&&e| e > 0).count() as f64;
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = tp / light.len() as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Anything that can estimate a conjunctive range count.
pub trait CountEstimator: Sync {
    fn name(&self) -> &str;
    fn estimate_count(&self, pred: &RangePredicate) -> Result<f64, EvalError>;
}

/// A summary together with the name it is reported under.
pub struct NamedSummary {
    pub name: String,
    pub summary: Summary,
}

impl CountEstimator for NamedSummary {
    fn name(&self) -> &str {
        &self.name
    }

    fn estimate_count(&self, pred: &RangePredicate) -> Result<f64, EvalError> {
        Ok(query::estimate(&self.summary, pred)?)
    }
}

/// `uniform:RATE` or `stratified:ATTR[,ATTR..]:RATE`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSpec {
    pub strata: Option<Vec<String>>,
    pub rate: f64,
}

impl FromStr for BaselineSpec {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| EvalError::BaselineSpec {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let parts: Vec<&str> = s.split(':').collect();
        let (strata, rate) = match parts.as_slice() {
            ["uniform", rate] => (None, rate),
            ["stratified", attrs, rate] => {
                let names: Vec<String> = attrs
                    .split(',')
                    .map(|a| a.trim().to_string())
                    .filter(|a| !a.is_empty())
                    .collect();
                if names.is_empty() {
                    return Err(bad("no strata attributes"));
                }
                (Some(names), rate)
            }
            _ => return Err(bad("expected uniform:RATE or stratified:A,B:RATE")),
        };
        let rate: f64 = rate.trim().parse().map_err(|_| bad("rate is not a number"))?;
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(bad("rate must be in (0, 1]"));
        }
        Ok(BaselineSpec { strata, rate })
    }
}

impl BaselineSpec {
    pub fn draw(&self, data: &DatasetHandle, seed: u64) -> Result<SampleBaseline, EvalError> {
        match &self.strata {
            None => Ok(SampleBaseline::uniform(data, self.rate, seed)),
            Some(names) => {
                let attrs = resolve_attrs(&data.schema, names)?;
                Ok(SampleBaseline::stratified(data, &attrs, self.rate, seed))
            }
        }
    }
}

/// One (method, workload value) evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub method: String,
    pub set: WorkloadSet,
    pub values: String,
    pub true_count: u64,
    pub raw: f64,
    pub rounded: u64,
    pub error: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodMetrics {
    pub method: String,
    pub heavy_error: f64,
    pub light_error: f64,
    pub f_measure: f64,
    pub mean_wall_ms: f64,
    pub max_wall_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub attrs: Vec<String>,
    pub methods: Vec<MethodMetrics>,
    pub rows: Vec<ReportRow>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Evaluates every method on every workload value. Methods run in parallel
/// with each other; values within a method run in order.
pub fn run_comparison(
    methods: &[&dyn CountEstimator],
    arity: usize,
    workload: &Workload,
    exec: Execution,
) -> Result<MetricReport, EvalError> {
    let per_method = exec.map(methods, |m| -> Result<Vec<ReportRow>, EvalError> {
        workload
            .values()
            .map(|(set, v)| {
                let pred = workload.predicate(arity, v);
                let start = Instant::now();
                let raw = m.estimate_count(&pred)?;
                let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                Ok(ReportRow {
                    method: m.name().to_string(),
                    set,
                    values: v.labels.join("|"),
                    true_count: v.true_count,
                    raw,
                    rounded: round_estimate(raw),
                    error: error_metric(v.true_count, raw),
                    wall_ms,
                })
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(methods.len() * workload.len());
    let mut metrics = Vec::with_capacity(methods.len());
    for (m, result) in methods.iter().zip(per_method) {
        let block = result?;
        let of = |s: WorkloadSet| block.iter().filter(move |r| r.set == s);
        let light: Vec<u64> = of(WorkloadSet::Light).map(|r| r.rounded).collect();
        let null: Vec<u64> = of(WorkloadSet::Null).map(|r| r.rounded).collect();
        metrics.push(MethodMetrics {
            method: m.name().to_string(),
            heavy_error: mean(of(WorkloadSet::Heavy).map(|r| r.error)),
            light_error: mean(of(WorkloadSet::Light).map(|r| r.error)),
            f_measure: f_measure(&light, &null),
            mean_wall_ms: mean(block.iter().map(|r| r.wall_ms)),
            max_wall_ms: block.iter().map(|r| r.wall_ms).fold(0.0, f64::max),
        });
        rows.extend(block);
    }
    Ok(MetricReport {
        attrs: workload.attr_names.clone(),
        methods: metrics,
        rows,
    })
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Per-query rows as CSV.
    pub fn rows_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).expect("row serializes");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8")
    }

    /// Per-method summary table as CSV.
    pub fn methods_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for m in &self.methods {
            w.serialize(m).expect("metrics serialize");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8")
    }

    /// Writes `path` as JSON plus `<stem>.rows.csv` and `<stem>.methods.csv`
    /// next to it.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), EvalError> {
        let path = path.as_ref();
        let write = |p: &Path, body: String| {
            std::fs::write(p, body).map_err(|source| EvalError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        write(path, self.to_json())?;
        write(&path.with_extension("rows.csv"), self.rows_csv())?;
        write(&path.with_extension("methods.csv"), self.methods_csv())
    }
}

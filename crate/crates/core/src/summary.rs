//! The summary: schema, statistics and fitted variables, plus the file
//! format that stores them.
//!
//! Files are canonical JSON (sorted keys, no whitespace, shortest
//! round-trip floats) with a SHA-256 of the body. The compressed polynomial
//! is not stored; it is rebuilt from the statistics on load and the stored
//! `P` is checked against it.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::DatasetHandle;
use crate::polynomial::{Assignment, CompressedPolynomial, PolyError, PolyValue, SizeReport, VariableStore};
use crate::schema::Schema;
use crate::solver::{solve, SolverConfig, SolverError, SolverState};
use crate::statistics::{select_statistics, ExportedStatistic, PairScore, SelectionConfig, StatisticSet, StatsError};

pub const FORMAT_VERSION: u64 = 1;

/// Relative tolerance on the stored `P` at load time.
const P_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SummaryError {
    #[error("cannot read or write summary: {0}")]
    Io(#[from] std::io::Error),
    #[error("checksum mismatch: {0}")]
    Checksum(String),
    #[error("unsupported format version {found} (expected {FORMAT_VERSION})")]
    Version { found: u64 },
    #[error("malformed summary: {0}")]
    Format(String),
    #[error("summary holds {alpha} variable values for {stats} statistics")]
    AlphaCount { alpha: usize, stats: usize },
    #[error("stored P = {stored} but the statistics give {recomputed}")]
    PMismatch { stored: f64, recomputed: f64 },
    #[error(transparent)]
    Statistics(#[from] StatsError),
    #[error(transparent)]
    Polynomial(#[from] PolyError),
}

/// How the summary was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildMeta {
    pub heuristic: String,
    pub strategy: String,
    /// attribute pairs requested, `B_a`
    pub pairs: usize,
    /// statistics per pair, `B_s`
    pub per_pair: usize,
    pub chosen_pairs: Vec<(String, String)>,
    pub sweeps: usize,
    pub converged: bool,
    pub threshold: f64,
    pub initial_residual: f64,
    pub max_residual: f64,
    pub psi: f64,
    pub pinned: usize,
    pub size: SizeReport,
}

#[derive(Debug, Clone)]
pub struct Summary {
    schema: Schema,
    stats: StatisticSet,
    values: VariableStore,
    poly: CompressedPolynomial,
    p: PolyValue,
    meta: BuildMeta,
}

/// Inputs of the build pipeline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub selection: SelectionConfig,
    pub solver: SolverConfig,
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Statistics(#[from] StatsError),
    #[error(transparent)]
    Polynomial(#[from] PolyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Summary(#[from] SummaryError),
}

/// What a build produced besides the summary.
#[derive(Debug, Clone)]
pub struct BuildReport {
    pub scores: Vec<PairScore>,
    pub solver: SolverState,
}

impl Summary {
    /// Statistics, compression, fit.
    pub fn build(data: &DatasetHandle, config: &BuildConfig) -> Result<(Summary, BuildReport), BuildError> {
        let (stats, scores) = select_statistics(data, &config.selection)?;
        let (summary, solver) = Summary::fit(data.schema.clone(), stats, &config.solver, Some(&config.selection))?;
        Ok((summary, BuildReport { scores, solver }))
    }

    /// Compresses and fits a given statistic set.
    pub fn fit(
        mut schema: Schema,
        stats: StatisticSet,
        solver: &SolverConfig,
        selection: Option<&SelectionConfig>,
    ) -> Result<(Summary, SolverState), BuildError> {
        let poly = CompressedPolynomial::build(&stats)?;
        log::info!("{stats}; {}", poly.size_report());
        let state = solve(&poly, &stats, solver)?;
        let names = |i: usize| schema.attributes[i].name.clone();
        let meta = BuildMeta {
            heuristic: selection.map_or("none".into(), |s| s.heuristic.name().to_string()),
            strategy: selection.map_or("none".into(), |s| format!("{:?}", s.strategy).to_ascii_lowercase()),
            pairs: selection.map_or(0, |s| s.pairs),
            per_pair: selection.map_or(0, |s| s.per_pair),
            chosen_pairs: stats.pair_groups().iter().map(|g| (names(g.pair.0), names(g.pair.1))).collect(),
            sweeps: state.sweeps,
            converged: state.converged,
            threshold: solver.threshold,
            initial_residual: state.initial_residual,
            max_residual: state.max_residual(),
            psi: state.psi,
            pinned: state.pinned.len(),
            size: poly.size_report(),
        };
        schema.n = stats.n();
        let summary = Summary::with_polynomial(schema, stats, state.values.clone(), poly, meta)?;
        Ok((summary, state))
    }

    /// Assembles a summary from fitted values.
    pub fn new(schema: Schema, stats: StatisticSet, values: VariableStore, meta: BuildMeta) -> Result<Self, SummaryError> {
        let poly = CompressedPolynomial::build(&stats)?;
        Self::with_polynomial(schema, stats, values, poly, meta)
    }

    fn with_polynomial(
        schema: Schema,
        stats: StatisticSet,
        values: VariableStore,
        poly: CompressedPolynomial,
        meta: BuildMeta,
    ) -> Result<Self, SummaryError> {
        if values.len() != stats.len() {
            return Err(SummaryError::AlphaCount {
                alpha: values.len(),
                stats: stats.len(),
            });
        }
        if schema.sizes() != stats.sizes() {
            return Err(SummaryError::Format("schema and statistics disagree on domain sizes".into()));
        }
        let p = poly.evaluate_value(&Assignment::new(&values))?;
        if p.is_zero() || !p.ln_abs().is_finite() {
            return Err(SummaryError::Format(format!("P evaluates to {}", p.value())));
        }
        Ok(Summary {
            schema,
            stats,
            values,
            poly,
            p,
            meta,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn statistics(&self) -> &StatisticSet {
        &self.stats
    }

    pub fn values(&self) -> &VariableStore {
        &self.values
    }

    pub fn polynomial(&self) -> &CompressedPolynomial {
        &self.poly
    }

    pub fn p(&self) -> PolyValue {
        self.p
    }

    pub fn n(&self) -> u64 {
        self.stats.n()
    }

    pub fn meta(&self) -> &BuildMeta {
        &self.meta
    }

    fn body(&self) -> Value {
        let p = self.p.value();
        let mut body = Map::new();
        body.insert("format_version".into(), FORMAT_VERSION.into());
        body.insert("schema".into(), serde_json::to_value(&self.schema).expect("schema serializes"));
        body.insert("statistics".into(), serde_json::to_value(self.stats.export()).expect("statistics serialize"));
        body.insert("alpha".into(), serde_json::to_value(self.values.as_slice()).expect("floats serialize"));
        body.insert("n".into(), self.n().into());
        body.insert("P".into(), if p.is_finite() { p.into() } else { Value::Null });
        body.insert("ln_P".into(), self.p.ln_abs().into());
        body.insert("solver_meta".into(), serde_json::to_value(&self.meta).expect("metadata serializes"));
        Value::Object(body)
    }

    /// The exact bytes of the summary file.
    pub fn to_canonical_json(&self) -> String {
        let mut body = self.body();
        let digest = checksum(&body);
        if let Value::Object(map) = &mut body {
            map.insert("sha256".into(), digest.into());
        }
        canonical_string(&body)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SummaryError> {
        fs::write(path, self.to_canonical_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SummaryError> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, SummaryError> {
        let mut doc: Value = serde_json::from_str(text)
            .map_err(|e| SummaryError::Checksum(format!("file is truncated or corrupt ({e})")))?;
        let Value::Object(map) = &mut doc else {
            return Err(SummaryError::Format("top level is not an object".into()));
        };
        let Some(Value::String(stored)) = map.remove("sha256") else {
            return Err(SummaryError::Checksum("missing sha256".into()));
        };
        let actual = checksum(&doc);
        if actual != stored {
            return Err(SummaryError::Checksum(format!("stored {stored}, computed {actual}")));
        }
        let field = |name: &str| {
            doc.get(name)
                .cloned()
                .ok_or_else(|| SummaryError::Format(format!("missing field `{name}`")))
        };
        let version = field("format_version")?
            .as_u64()
            .ok_or_else(|| SummaryError::Format("format_version is not an integer".into()))?;
        if version != FORMAT_VERSION {
            return Err(SummaryError::Version { found: version });
        }
        let schema: Schema = parse("schema", field("schema")?)?;
        schema.validate().map_err(|e| SummaryError::Format(e.to_string()))?;
        let exported: Vec<ExportedStatistic> = parse("statistics", field("statistics")?)?;
        let alpha: Vec<f64> = parse("alpha", field("alpha")?)?;
        let n: u64 = parse("n", field("n")?)?;
        let ln_p: f64 = parse("ln_P", field("ln_P")?)?;
        let meta: BuildMeta = parse("solver_meta", field("solver_meta")?)?;
        let stats = StatisticSet::from_export(schema.sizes(), n, &exported)?;
        if alpha.len() != stats.len() {
            return Err(SummaryError::AlphaCount {
                alpha: alpha.len(),
                stats: stats.len(),
            });
        }
        let summary = Summary::new(schema, stats, VariableStore::from_vec(alpha), meta)?;
        let recomputed = summary.p.ln_abs();
        if (recomputed - ln_p).abs() > P_TOLERANCE {
            return Err(SummaryError::PMismatch {
                stored: ln_p.exp(),
                recomputed: summary.p.value(),
            });
        }
        Ok(summary)
    }
}

fn parse<T: serde::de::DeserializeOwned>(name: &str, v: Value) -> Result<T, SummaryError> {
    serde_json::from_value(v).map_err(|e| SummaryError::Format(format!("field `{name}`: {e}")))
}

fn checksum(body: &Value) -> String {
    hex::encode(Sha256::digest(canonical_string(body).as_bytes()))
}

/// Compact JSON with object keys sorted at every level.
pub fn canonical_string(value: &Value) -> String {
    serde_json::to_string(&sorted(value)).expect("JSON values serialize")
}

fn sorted(value: &Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let mut out = Map::new();
            for k in keys {
                out.insert(k.clone(), sorted(&map[k]));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.iter().map(sorted).collect()),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::binary_dataset;
    use crate::statistics::Heuristic;

    fn built() -> Summary {
        let config = BuildConfig {
            selection: SelectionConfig {
                pairs: 2,
                per_pair: 2,
                heuristic: Heuristic::Composite,
                ..SelectionConfig::default()
            },
            solver: SolverConfig::default(),
        };
        Summary::build(&binary_dataset(), &config).unwrap().0
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let s = built();
        let text = s.to_canonical_json();
        let back = Summary::from_json(&text).unwrap();
        assert_eq!(back.to_canonical_json(), text);
        assert_eq!(back.values().as_slice(), s.values().as_slice());
        assert_eq!(back.statistics(), s.statistics());
        assert_eq!(back.p(), s.p());
    }

    #[test]
    fn canonical_form_sorts_keys() {
        let text = built().to_canonical_json();
        assert!(!text.contains('\n') && !text.contains(": "));
        let order = ["\"P\"", "\"alpha\"", "\"format_version\"", "\"ln_P\"", "\"n\"", "\"schema\"", "\"sha256\"", "\"solver_meta\"", "\"statistics\""];
        // top-level keys appear in sorted order (nested keys may interleave)
        let first = |k: &str| text.find(&format!("{k}:")).unwrap();
        let pos: Vec<usize> = order.iter().map(|k| first(k)).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{pos:?}");
        let v = sorted(&serde_json::json!({"b": 1, "a": {"d": 2.5, "c": [1.0, 0.1]}}));
        assert_eq!(canonical_string(&v), r#"{"a":{"c":[1.0,0.1],"d":2.5},"b":1}"#);
    }

    #[test]
    fn truncated_file_fails_the_checksum() {
        let text = built().to_canonical_json();
        let cut = &text[..text.len() - 10];
        assert!(matches!(Summary::from_json(cut), Err(SummaryError::Checksum(_))));
        let tampered = text.replacen("\"n\":10", "\"n\":11", 1);
        assert!(matches!(Summary::from_json(&tampered), Err(SummaryError::Checksum(_))));
    }

    fn resealed(text: &str, edit: impl FnOnce(&mut Map<String, Value>)) -> String {
        let mut doc: Value = serde_json::from_str(text).unwrap();
        let map = doc.as_object_mut().unwrap();
        map.remove("sha256");
        edit(map);
        let digest = checksum(&doc);
        doc.as_object_mut().unwrap().insert("sha256".into(), digest.into());
        canonical_string(&doc)
    }

    #[test]
    fn alpha_count_mismatch_is_rejected() {
        let text = resealed(&built().to_canonical_json(), |m| {
            m.get_mut("alpha").unwrap().as_array_mut().unwrap().pop();
        });
        assert!(matches!(Summary::from_json(&text), Err(SummaryError::AlphaCount { .. })));
    }

    #[test]
    fn wrong_p_and_version_are_rejected() {
        let base = built().to_canonical_json();
        let text = resealed(&base, |m| {
            let ln = m["ln_P"].as_f64().unwrap();
            m.insert("ln_P".into(), (ln + 1e-3).into());
        });
        assert!(matches!(Summary::from_json(&text), Err(SummaryError::PMismatch { .. })));
        let text = resealed(&base, |m| {
            m.insert("format_version".into(), 99.into());
        });
        assert!(matches!(Summary::from_json(&text), Err(SummaryError::Version { found: 99 })));
    }

    #[test]
    fn metadata_records_the_build() {
        let s = built();
        assert_eq!(s.meta().pairs, 2);
        assert_eq!(s.meta().per_pair, 2);
        assert_eq!(s.meta().heuristic, "composite");
        assert_eq!(s.meta().strategy, "cover");
        assert!(s.meta().converged);
        assert_eq!(s.meta().chosen_pairs.len(), 2);
    }
}

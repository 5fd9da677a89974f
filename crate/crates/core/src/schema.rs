//! Attribute domains, schema documents and value bucketization.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("cannot read schema {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed schema document: {0}")]
    Malformed(String),
    #[error("duplicate attribute name `{0}`")]
    DuplicateAttribute(String),
    #[error("attribute `{0}` must have at least one bucket or value")]
    EmptyDomain(String),
    #[error("attribute `{name}`: lo ({lo}) must be below hi ({hi})")]
    BadBounds { name: String, lo: f64, hi: f64 },
    #[error("attribute `{0}` has a duplicate category label")]
    DuplicateLabel(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("attribute `{attr}` has no category `{label}`")]
    UnknownCategory { attr: String, label: String },
    #[error("attribute `{attr}`: cannot parse `{raw}` as a number")]
    NotNumeric { attr: String, raw: String },
    #[error("attribute `{0}`: NaN is not a valid value")]
    NaN(String),
}

/// Domain of one attribute after bucketization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttributeKind {
    Categorical {
        values: Vec<String>,
    },
    Numeric {
        lo: f64,
        hi: f64,
        buckets: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDomain {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttributeKind,
}

impl AttributeDomain {
    pub fn categorical<S: Into<String>>(name: &str, values: impl IntoIterator<Item = S>) -> Self {
        AttributeDomain {
            name: name.to_string(),
            kind: AttributeKind::Categorical {
                values: values.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn numeric(name: &str, lo: f64, hi: f64, buckets: usize) -> Self {
        AttributeDomain {
            name: name.to_string(),
            kind: AttributeKind::Numeric { lo, hi, buckets },
        }
    }

    /// Number of distinct values or buckets, `N_i`.
    pub fn size(&self) -> usize {
        match &self.kind {
            AttributeKind::Categorical { values } => values.len(),
            AttributeKind::Numeric { buckets, .. } => *buckets,
        }
    }

    fn validate(&self) -> Result<(), SchemaError> {
        if self.size() == 0 {
            return Err(SchemaError::EmptyDomain(self.name.clone()));
        }
        match &self.kind {
            AttributeKind::Numeric { lo, hi, .. } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(SchemaError::BadBounds {
                        name: self.name.clone(),
                        lo: *lo,
                        hi: *hi,
                    });
                }
            }
            AttributeKind::Categorical { values } => {
                let mut seen = HashSet::new();
                if !values.iter().all(|v| seen.insert(v.as_str())) {
                    return Err(SchemaError::DuplicateLabel(self.name.clone()));
                }
            }
        }
        Ok(())
    }

    /// Maps a raw value to its bucket index, reporting whether it was clamped
    /// into the domain.
    pub fn bucketize_str(&self, raw: &str) -> Result<Bucketed, SchemaError> {
        match &self.kind {
            AttributeKind::Categorical { values } => values
                .iter()
                .position(|v| v == raw)
                .map(|index| Bucketed {
                    index,
                    clamped: false,
                })
                .ok_or_else(|| SchemaError::UnknownCategory {
                    attr: self.name.clone(),
                    label: raw.to_string(),
                }),
            AttributeKind::Numeric { .. } => {
                let x: f64 = raw.trim().parse().map_err(|_| SchemaError::NotNumeric {
                    attr: self.name.clone(),
                    raw: raw.to_string(),
                })?;
                self.bucketize_f64(x)
            }
        }
    }

    pub fn bucketize_f64(&self, x: f64) -> Result<Bucketed, SchemaError> {
        let AttributeKind::Numeric { lo, hi, buckets } = &self.kind else {
            // a numeric literal against a categorical attribute is a label lookup
            return self.bucketize_str(&format_number(x));
        };
        if x.is_nan() {
            return Err(SchemaError::NaN(self.name.clone()));
        }
        let n = *buckets;
        if x < *lo {
            return Ok(Bucketed {
                index: 0,
                clamped: true,
            });
        }
        if x >= *hi {
            return Ok(Bucketed {
                index: n - 1,
                clamped: true,
            });
        }
        let width = (hi - lo) / n as f64;
        let index = (((x - lo) / width).floor() as usize).min(n - 1);
        Ok(Bucketed {
            index,
            clamped: false,
        })
    }

    /// Human-readable label of a bucket index.
    pub fn label(&self, index: usize) -> String {
        match &self.kind {
            AttributeKind::Categorical { values } => values[index].clone(),
            AttributeKind::Numeric { lo, hi, buckets } => {
                let width = (hi - lo) / *buckets as f64;
                let a = lo + width * index as f64;
                let b = if index + 1 == *buckets {
                    *hi
                } else {
                    lo + width * (index + 1) as f64
                };
                format!("[{}, {})", format_number(a), format_number(b))
            }
        }
    }
}

fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Result of mapping a raw value into a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bucketed {
    pub index: usize,
    pub clamped: bool,
}

/// Ordered attribute list plus the relation cardinality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub attributes: Vec<AttributeDomain>,
    #[serde(default)]
    pub n: u64,
}

impl Schema {
    pub fn new(attributes: Vec<AttributeDomain>) -> Result<Self, SchemaError> {
        let schema = Schema { attributes, n: 0 };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.attributes.is_empty() {
            return Err(SchemaError::Malformed("no attributes".into()));
        }
        let mut names = HashSet::new();
        for a in &self.attributes {
            if !names.insert(a.name.as_str()) {
                return Err(SchemaError::DuplicateAttribute(a.name.clone()));
            }
            a.validate()?;
        }
        Ok(())
    }

    /// Parses a schema document (`{"attributes": [...]}`).
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        #[derive(Deserialize)]
        struct Doc {
            attributes: Vec<AttributeDomain>,
        }
        let doc: Doc =
            serde_json::from_str(text).map_err(|e| SchemaError::Malformed(e.to_string()))?;
        Schema::new(doc.attributes)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SchemaError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Schema::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({ "attributes": self.attributes }))
            .expect("schema serializes")
    }

    /// Number of attributes `m`.
    pub fn arity(&self) -> usize {
        self.attributes.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.attributes.iter().map(AttributeDomain::size).collect()
    }

    /// Number of possible tuples, `d = ∏ N_i`.
    pub fn tuple_count(&self) -> u128 {
        self.attributes
            .iter()
            .map(|a| a.size() as u128)
            .fold(1u128, |acc, n| acc.saturating_mul(n))
    }

    pub fn index_of(&self, name: &str) -> Result<usize, SchemaError> {
        self.attributes
            .iter()
            .position(|a| a.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| SchemaError::UnknownAttribute(name.to_string()))
    }

    pub fn bucketize(&self, attr: usize, raw: &str) -> Result<usize, SchemaError> {
        Ok(self.attributes[attr].bucketize_str(raw)?.index)
    }

    /// Row-major linear index of a tuple.
    pub fn linear_index(&self, coords: &[usize]) -> u64 {
        TupleIndex::linearize(&self.sizes(), coords)
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .attributes
            .iter()
            .map(|a| format!("{}({})", a.name, a.size()))
            .collect();
        write!(f, "{}", parts.join(" × "))
    }
}

/// Coordinates of a tuple in `Tup`, one bucket index per attribute.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TupleIndex(pub Vec<usize>);

impl TupleIndex {
    pub fn linearize(sizes: &[usize], coords: &[usize]) -> u64 {
        let mut idx = 0u64;
        for (&n, &c) in sizes.iter().zip(coords) {
            debug_assert!(c < n);
            idx = idx * n as u64 + c as u64;
        }
        idx
    }

    pub fn delinearize(sizes: &[usize], mut linear: u64) -> TupleIndex {
        let mut coords = vec![0; sizes.len()];
        for (slot, &n) in coords.iter_mut().zip(sizes).rev() {
            *slot = (linear % n as u64) as usize;
            linear /= n as u64;
        }
        TupleIndex(coords)
    }

    /// All tuples in row-major order.
    pub fn enumerate(sizes: &[usize]) -> impl Iterator<Item = TupleIndex> + '_ {
        let d: u64 = sizes.iter().map(|&n| n as u64).product();
        (0..d).map(move |i| TupleIndex::delinearize(sizes, i))
    }
}

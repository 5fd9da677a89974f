//! CSV ingestion into bucketized columns, frequency tables and exact counts.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::exec::Execution;
use crate::predicate::RangePredicate;
use crate::schema::{Schema, SchemaError, TupleIndex};

/// Materialize the per-cell count map only up to this many possible tuples.
pub const DEFAULT_CELL_MAP_CAP: u128 = 10_000_000;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error in {path}: {message}")]
    Csv { path: String, message: String },
    #[error("column `{0}` is missing from the csv header")]
    MissingColumn(String),
    #[error("no rows left after dropping nulls")]
    Empty,
    #[error("row {row}: {source}")]
    Value { row: usize, source: SchemaError },
    #[error("row {row} has {got} coordinates, expected {expected}")]
    Arity {
        row: usize,
        got: usize,
        expected: usize,
    },
}

/// Ingested, bucketized relation. Immutable once built.
#[derive(Debug, Clone)]
pub struct DatasetHandle {
    pub schema: Schema,
    pub source: Option<PathBuf>,
    /// One column of bucket indices per attribute.
    columns: Vec<Vec<u32>>,
    frequencies: Vec<Vec<u64>>,
    cells: Option<HashMap<u64, u64>>,
    /// Number of raw values clamped into the first or last bucket.
    pub clamped_values: u64,
    pub dropped_rows: u64,
}

fn is_null(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f.eq_ignore_ascii_case("null") || f.eq_ignore_ascii_case("na") || f == "\\N"
}

impl DatasetHandle {
    /// Builds a dataset from already-bucketized rows.
    pub fn from_rows(schema: Schema, rows: &[Vec<usize>]) -> Result<Self, IngestError> {
        Self::from_rows_with_cap(schema, rows, DEFAULT_CELL_MAP_CAP)
    }

    pub fn from_rows_with_cap(
        schema: Schema,
        rows: &[Vec<usize>],
        cell_cap: u128,
    ) -> Result<Self, IngestError> {
        let m = schema.arity();
        let sizes = schema.sizes();
        let mut columns = vec![Vec::with_capacity(rows.len()); m];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(IngestError::Arity {
                    row: r,
                    got: row.len(),
                    expected: m,
                });
            }
            for (i, &v) in row.iter().enumerate() {
                if v >= sizes[i] {
                    return Err(IngestError::Value {
                        row: r,
                        source: SchemaError::Malformed(format!(
                            "bucket {v} out of range for `{}`",
                            schema.attributes[i].name
                        )),
                    });
                }
                columns[i].push(v as u32);
            }
        }
        Self::from_columns(schema, columns, None, cell_cap, 0, 0)
    }

    fn from_columns(
        mut schema: Schema,
        columns: Vec<Vec<u32>>,
        source: Option<PathBuf>,
        cell_cap: u128,
        clamped_values: u64,
        dropped_rows: u64,
    ) -> Result<Self, IngestError> {
        let rows = columns.first().map_or(0, Vec::len);
        if rows == 0 {
            return Err(IngestError::Empty);
        }
        let sizes = schema.sizes();
        let frequencies = columns
            .iter()
            .zip(&sizes)
            .map(|(col, &n)| {
                let mut f = vec![0u64; n];
                for &v in col {
                    f[v as usize] += 1;
                }
                f
            })
            .collect();
        let cells = (schema.tuple_count() <= cell_cap).then(|| {
            let mut map = HashMap::new();
            let mut coords = vec![0usize; sizes.len()];
            for r in 0..rows {
                for (i, c) in coords.iter_mut().enumerate() {
                    *c = columns[i][r] as usize;
                }
                *map.entry(TupleIndex::linearize(&sizes, &coords)).or_insert(0) += 1;
            }
            map
        });
        schema.n = rows as u64;
        Ok(DatasetHandle {
            schema,
            source,
            columns,
            frequencies,
            cells,
            clamped_values,
            dropped_rows,
        })
    }

    /// Reads a headered CSV file. Rows containing a null in any schema
    /// column are dropped.
    pub fn ingest(schema: &Schema, path: impl AsRef<Path>) -> Result<Self, IngestError> {
        Self::ingest_with_cap(schema, path, DEFAULT_CELL_MAP_CAP)
    }

    pub fn ingest_with_cap(
        schema: &Schema,
        path: impl AsRef<Path>,
        cell_cap: u128,
    ) -> Result<Self, IngestError> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
            path: display.clone(),
            source,
        })?;
        let csv_err = |e: csv::Error| IngestError::Csv {
            path: display.clone(),
            message: e.to_string(),
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(std::io::BufReader::new(file));
        let header = reader.headers().map_err(csv_err)?.clone();
        let positions = schema
            .attributes
            .iter()
            .map(|a| {
                header
                    .iter()
                    .position(|h| h.trim() == a.name)
                    .ok_or_else(|| IngestError::MissingColumn(a.name.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;

        let m = schema.arity();
        let mut columns: Vec<Vec<u32>> = vec![Vec::new(); m];
        let mut clamped = 0u64;
        let mut dropped = 0u64;
        let mut record = csv::StringRecord::new();
        let mut row = 0usize;
        let mut coords = vec![0u32; m];
        while reader.read_record(&mut record).map_err(csv_err)? {
            row += 1;
            let fields: Vec<&str> = positions.iter().map(|&p| record.get(p).unwrap_or("")).collect();
            if fields.iter().any(|f| is_null(f)) {
                dropped += 1;
                continue;
            }
            for (i, field) in fields.iter().enumerate() {
                let b = schema.attributes[i]
                    .bucketize_str(field.trim())
                    .map_err(|source| IngestError::Value { row, source })?;
                clamped += b.clamped as u64;
                coords[i] = b.index as u32;
            }
            for (col, &c) in columns.iter_mut().zip(&coords) {
                col.push(c);
            }
        }
        if clamped > 0 {
            log::warn!("{display}: {clamped} values outside their numeric range were clamped");
        }
        Self::from_columns(
            schema.clone(),
            columns,
            Some(path.to_path_buf()),
            cell_cap,
            clamped,
            dropped,
        )
    }

    pub fn row_count(&self) -> u64 {
        self.schema.n
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, attr: usize) -> &[u32] {
        &self.columns[attr]
    }

    /// Bucket coordinates of one row.
    pub fn row(&self, r: usize) -> Vec<usize> {
        self.columns.iter().map(|c| c[r] as usize).collect()
    }

    pub fn frequencies(&self, attr: usize) -> &[u64] {
        &self.frequencies[attr]
    }

    pub fn has_cell_map(&self) -> bool {
        self.cells.is_some()
    }

    /// Nonzero cells of the full joint histogram, when materialized.
    pub fn cells(&self) -> Option<&HashMap<u64, u64>> {
        self.cells.as_ref()
    }

    /// Exact count of rows satisfying the conjunction, by column scan.
    pub fn count_predicate(&self, predicate: &RangePredicate) -> u64 {
        self.count_predicate_with(predicate, Execution::default())
    }

    pub fn count_predicate_with(&self, predicate: &RangePredicate, exec: Execution) -> u64 {
        let constrained: Vec<(usize, u32, u32)> = predicate
            .0
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.map(|r| (i, r.lo as u32, r.hi as u32)))
            .collect();
        if constrained.is_empty() {
            return self.row_count();
        }
        if let [(i, lo, hi)] = constrained[..] {
            return self.frequencies[i][lo as usize..=hi as usize].iter().sum();
        }
        const CHUNK: usize = 1 << 16;
        let rows = self.row_count() as usize;
        let chunks = rows.div_ceil(CHUNK);
        exec.map_range(0..chunks, |c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(rows);
            (start..end)
                .filter(|&r| {
                    constrained.iter().all(|&(i, lo, hi)| {
                        let v = self.columns[i][r];
                        lo <= v && v <= hi
                    })
                })
                .count() as u64
        })
        .into_iter()
        .sum()
    }

    /// Same count, computed from the materialized cell map.
    pub fn count_predicate_cells(&self, predicate: &RangePredicate) -> Option<u64> {
        let sizes = self.schema.sizes();
        self.cells.as_ref().map(|cells| {
            cells
                .iter()
                .filter(|(&linear, _)| predicate.matches(&TupleIndex::delinearize(&sizes, linear).0))
                .map(|(_, &c)| c)
                .sum()
        })
    }

    /// Joint histogram of two attributes, row-major `[a][b]`.
    pub fn contingency(&self, a: usize, b: usize) -> Vec<Vec<u64>> {
        let na = self.schema.attributes[a].size();
        let nb = self.schema.attributes[b].size();
        let mut table = vec![vec![0u64; nb]; na];
        for (&x, &y) in self.columns[a].iter().zip(&self.columns[b]) {
            table[x as usize][y as usize] += 1;
        }
        table
    }

    /// Exact counts of every distinct value combination over `attrs`.
    pub fn group_counts(&self, attrs: &[usize]) -> HashMap<Vec<usize>, u64> {
        let mut out = HashMap::new();
        for r in 0..self.row_count() as usize {
            let key: Vec<usize> = attrs.iter().map(|&a| self.columns[a][r] as usize).collect();
            *out.entry(key).or_insert(0) += 1;
        }
        out
    }
}

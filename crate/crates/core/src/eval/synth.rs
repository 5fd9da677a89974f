//! Correlated categorical tables from a discretized Gaussian copula.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use super::EvalError;
use crate::dataset::DatasetHandle;
use crate::schema::{AttributeDomain, Schema};

#[derive(Debug, Clone)]
pub struct CopulaConfig {
    /// Attribute names; defaults to `a0, a1, ...`.
    pub names: Option<Vec<String>>,
    pub sizes: Vec<usize>,
    /// `(i, j, rho)` entries of the latent correlation matrix.
    pub correlations: Vec<(usize, usize, f64)>,
    /// Exponent applied to the uniform margin before bucketing. `1.0` gives
    /// uniform marginals, larger values pile mass onto low buckets.
    pub skew: f64,
    pub rows: usize,
    pub seed: u64,
}

impl CopulaConfig {
    pub fn new(sizes: Vec<usize>, rows: usize, seed: u64) -> Self {
        CopulaConfig {
            names: None,
            sizes,
            correlations: Vec::new(),
            skew: 1.0,
            rows,
            seed,
        }
    }

    pub fn correlate(mut self, i: usize, j: usize, rho: f64) -> Self {
        self.correlations.push((i, j, rho));
        self
    }

    pub fn skew(mut self, skew: f64) -> Self {
        self.skew = skew;
        self
    }

    pub fn schema(&self) -> Result<Schema, EvalError> {
        let m = self.sizes.len();
        let names: Vec<String> = match &self.names {
            Some(n) if n.len() == m => n.clone(),
            Some(n) => {
                return Err(EvalError::Generator(format!("{} names for {m} attributes", n.len())));
            }
            None => (0..m).map(|i| format!("a{i}")).collect(),
        };
        let attrs = names
            .iter()
            .zip(&self.sizes)
            .map(|(name, &size)| AttributeDomain::categorical(name, (0..size).map(|v| v.to_string())))
            .collect();
        Schema::new(attrs).map_err(|e| EvalError::Generator(e.to_string()))
    }

    fn cholesky(&self) -> Result<DMatrix<f64>, EvalError> {
        let m = self.sizes.len();
        let mut corr = DMatrix::<f64>::identity(m, m);
        for &(i, j, rho) in &self.correlations {
            if i >= m || j >= m || i == j || !(-1.0..=1.0).contains(&rho) {
                return Err(EvalError::Generator(format!("bad correlation ({i}, {j}, {rho})")));
            }
            corr[(i, j)] = rho;
            corr[(j, i)] = rho;
        }
        corr.cholesky().map(|c| c.l()).ok_or(EvalError::NotPositiveDefinite)
    }

    pub fn generate(&self) -> Result<DatasetHandle, EvalError> {
        if !(self.skew > 0.0) {
            return Err(EvalError::Generator("skew must be positive".into()));
        }
        let schema = self.schema()?;
        let l = self.cholesky()?;
        let m = self.sizes.len();
        let normal = Normal::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let rows: Vec<Vec<usize>> = (0..self.rows)
            .map(|_| {
                let z = DVector::<f64>::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
                let x = &l * z;
                x.iter()
                    .zip(&self.sizes)
                    .map(|(&xi, &size)| {
                        let u = normal.cdf(xi).powf(self.skew);
                        ((u * size as f64) as usize).min(size - 1)
                    })
                    .collect()
            })
            .collect();
        DatasetHandle::from_rows(schema, &rows).map_err(|e| EvalError::Generator(e.to_string()))
    }
}

/// Writes a dataset as CSV with bucket labels, plus its schema document.
pub fn write_csv(data: &DatasetHandle, csv_path: &Path, schema_path: &Path) -> Result<(), EvalError> {
    let io = |p: &Path| {
        let path = p.display().to_string();
        move |source| EvalError::Io { path, source }
    };
    let mut w = csv::Writer::from_path(csv_path).map_err(|e| EvalError::Io {
        path: csv_path.display().to_string(),
        source: e.into(),
    })?;
    let attrs = &data.schema.attributes;
    let header: Vec<&str> = attrs.iter().map(|a| a.name.as_str()).collect();
    let to_io = |e: csv::Error| EvalError::Io {
        path: csv_path.display().to_string(),
        source: e.into(),
    };
    w.write_record(&header).map_err(to_io)?;
    for r in 0..data.row_count() as usize {
        let row = data.row(r);
        w.write_record(attrs.iter().zip(&row).map(|(a, &v)| a.label(v))).map_err(to_io)?;
    }
    w.flush().map_err(io(csv_path))?;
    std::fs::write(schema_path, data.schema.to_json()).map_err(io(schema_path))
}

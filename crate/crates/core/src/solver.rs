//! Fitting the model: closed-form coordinate updates on the dual.
//!
//! For one variable, `P = A + α_j·D` with `A = P|α_j=0` and `D = ∂P/∂α_j`,
//! so the expected count `n·α_j·D/P` hits `s_j` exactly at
//! `α_j = s_j·A / ((n − s_j)·D)`. A sweep applies this to every active
//! variable in id order; each update raises `Ψ = Σ s_j ln α_j − n ln P`.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polynomial::{Assignment, CompressedPolynomial, PolyError, PolyValue, VariableStore};
use crate::statistics::StatisticSet;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("variable {id} diverged to {value} during sweep {sweep}")]
    Diverged { id: usize, value: f64, sweep: usize },
    #[error("polynomial evaluated to {0} at the current assignment")]
    DegenerateP(f64),
    #[error(transparent)]
    Polynomial(#[from] PolyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub threshold: f64,
    pub max_iterations: usize,
    pub init_value: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            threshold: 1e-6,
            max_iterations: 30,
            init_value: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.threshold > 0.0) {
            return Err(SolverError::Config(format!("threshold must be positive, got {}", self.threshold)));
        }
        if self.max_iterations == 0 {
            return Err(SolverError::Config("max_iterations must be at least 1".into()));
        }
        if !(self.init_value > 0.0 && self.init_value.is_finite()) {
            return Err(SolverError::Config(format!("init_value must be positive, got {}", self.init_value)));
        }
        Ok(())
    }
}

/// Why a variable is excluded from the updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PinReason {
    /// `s_j = 0`: `α_j = 0`.
    ZeroCount,
    /// `s_j = n`: implied by the cardinality, `α_j = 1`.
    FullCount,
    /// `∂P/∂α_j = 0`: no surviving monomial holds the variable.
    Unreachable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pinned {
    pub id: usize,
    pub reason: PinReason,
}

/// One line of the progress trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep: usize,
    /// max `|s_j − n·α_j·D/P|`, each measured just before its update
    pub max_residual: f64,
    /// max of the same difference just after the update
    pub max_update_gap: f64,
    pub psi: f64,
    pub wall_ms: f64,
}

/// Result of [`update_coordinate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateUpdate {
    pub before: f64,
    pub after: f64,
    /// residual before the update
    pub residual: f64,
    /// residual right after it
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverState {
    pub values: VariableStore,
    pub p: f64,
    pub ln_p: f64,
    /// `(id, |s_j − n·α_j·D/P|)` for every active statistic at the final
    /// assignment
    pub residuals: Vec<(usize, f64)>,
    pub pinned: Vec<Pinned>,
    pub trace: Vec<SweepRecord>,
    pub initial_residual: f64,
    pub psi: f64,
    pub sweeps: usize,
    pub converged: bool,
}

impl SolverState {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.1).fold(0.0, f64::max)
    }

    pub fn trace_json(&self) -> String {
        serde_json::to_string(&self.trace).expect("trace serializes")
    }
}

/// `Ψ = Σ s_j ln α_j − n ln P`, with `0·ln 0 = 0`.
pub fn dual_value(poly: &CompressedPolynomial, stats: &StatisticSet, values: &[f64]) -> Result<f64, SolverError> {
    let p = poly.evaluate_value(&Assignment::from_slice(values))?;
    Ok(dual_with(stats, values, p))
}

fn dual_with(stats: &StatisticSet, values: &[f64], p: PolyValue) -> f64 {
    let mut psi = 0.0;
    for st in stats.stats() {
        if st.s > 0 {
            psi += st.s as f64 * values[st.id].ln();
        }
    }
    psi - stats.n() as f64 * p.ln_abs()
}

/// `(A, D)` for variable `j`.
fn split(poly: &CompressedPolynomial, values: &[f64], j: usize) -> Result<(PolyValue, PolyValue), PolyError> {
    let assign = Assignment::from_slice(values);
    let a = poly.evaluate_value(&assign.clone().with(j, 0.0))?;
    let d = poly.derivative_general_value(&assign, j)?;
    Ok((a, d))
}

/// `n·α·D / (A + α·D)` from the ratio `r = A/D`.
fn expectation(n: f64, alpha: f64, r: f64) -> f64 {
    if alpha == 0.0 {
        0.0
    } else {
        n * alpha / (r + alpha)
    }
}

/// Expected count `n·α_j·D/P` of statistic `j`.
pub fn expected_count(poly: &CompressedPolynomial, n: u64, values: &[f64], j: usize) -> Result<f64, SolverError> {
    let (a, d) = split(poly, values, j)?;
    if d.is_zero() {
        return Ok(0.0);
    }
    Ok(expectation(n as f64, values[j], a.ratio(d)))
}

/// Applies the closed-form update to `α_j`.
pub fn update_coordinate(
    poly: &CompressedPolynomial,
    stats: &StatisticSet,
    values: &mut VariableStore,
    j: usize,
) -> Result<CoordinateUpdate, SolverError> {
    let n = stats.n() as f64;
    let s = stats.get(j).s as f64;
    let before = values.get(j);
    let (a, d) = split(poly, values.as_slice(), j)?;
    if d.is_zero() {
        return Ok(CoordinateUpdate {
            before,
            after: before,
            residual: s,
            gap: s,
        });
    }
    let r = a.ratio(d);
    let residual = (s - expectation(n, before, r)).abs();
    let alpha = if r == 0.0 {
        // every monomial holds α_j; its expectation is n whatever the value
        before
    } else {
        s * r / (n - s)
    };
    values.set(j, alpha);
    let gap = (s - expectation(n, alpha, r)).abs();
    Ok(CoordinateUpdate {
        before,
        after: alpha,
        residual,
        gap,
    })
}

/// Pins and initial values; returns the active ids.
fn initialize(
    poly: &CompressedPolynomial,
    stats: &StatisticSet,
    config: &SolverConfig,
) -> Result<(VariableStore, Vec<usize>, Vec<Pinned>), SolverError> {
    let n = stats.n();
    let mut values = VariableStore::filled(stats.len(), config.init_value);
    let mut pinned = Vec::new();
    let mut is_pinned = vec![false; stats.len()];
    for st in stats.stats() {
        is_pinned[st.id] = st.s == 0 || st.s >= n;
        if st.s == 0 {
            values.set(st.id, 0.0);
            pinned.push(Pinned {
                id: st.id,
                reason: PinReason::ZeroCount,
            });
        } else if st.s >= n {
            values.set(st.id, 1.0);
            pinned.push(Pinned {
                id: st.id,
                reason: PinReason::FullCount,
            });
        }
    }
    let mut active = Vec::new();
    for st in stats.stats() {
        if is_pinned[st.id] {
            continue;
        }
        let d = poly.derivative_general_value(&Assignment::new(&values), st.id)?;
        if d.is_zero() {
            pinned.push(Pinned {
                id: st.id,
                reason: PinReason::Unreachable,
            });
        } else {
            active.push(st.id);
        }
    }
    pinned.sort_by_key(|p| p.id);
    Ok((values, active, pinned))
}

fn residuals(
    poly: &CompressedPolynomial,
    stats: &StatisticSet,
    values: &[f64],
    active: &[usize],
) -> Result<Vec<(usize, f64)>, SolverError> {
    let n = stats.n();
    active
        .iter()
        .map(|&j| Ok((j, (stats.get(j).s as f64 - expected_count(poly, n, values, j)?).abs())))
        .collect()
}

/// Runs sweeps until every active residual is below the threshold or the
/// iteration budget is spent.
pub fn solve(
    poly: &CompressedPolynomial,
    stats: &StatisticSet,
    config: &SolverConfig,
) -> Result<SolverState, SolverError> {
    config.validate()?;
    let (mut values, active, pinned) = initialize(poly, stats, config)?;
    let start = Instant::now();
    let initial = residuals(poly, stats, values.as_slice(), &active)?;
    let initial_residual = initial.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut trace = Vec::new();
    let mut converged = initial_residual < config.threshold;
    let mut sweeps = 0;
    while !converged && sweeps < config.max_iterations {
        sweeps += 1;
        let mut max_residual: f64 = 0.0;
        let mut max_gap: f64 = 0.0;
        for &j in &active {
            let u = update_coordinate(poly, stats, &mut values, j)?;
            if !u.after.is_finite() || u.after < 0.0 {
                return Err(SolverError::Diverged {
                    id: j,
                    value: u.after,
                    sweep: sweeps,
                });
            }
            max_residual = max_residual.max(u.residual);
            max_gap = max_gap.max(u.gap);
        }
        let p = poly.evaluate_value(&Assignment::new(&values))?;
        if p.is_zero() || !p.ln_abs().is_finite() {
            return Err(SolverError::DegenerateP(p.value()));
        }
        let psi = dual_with(stats, values.as_slice(), p);
        let record = SweepRecord {
            sweep: sweeps,
            max_residual,
            max_update_gap: max_gap,
            psi,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        log::info!(
            "sweep {} max_residual {:.3e} update_gap {:.3e} psi {:.9} wall_ms {:.1}",
            record.sweep,
            record.max_residual,
            record.max_update_gap,
            record.psi,
            record.wall_ms
        );
        trace.push(record);
        converged = max_residual < config.threshold;
    }
    let final_residuals = residuals(poly, stats, values.as_slice(), &active)?;
    let max_final = final_residuals.iter().map(|r| r.1).fold(0.0, f64::max);
    converged = max_final < config.threshold;
    let p = poly.evaluate_value(&Assignment::new(&values))?;
    if p.is_zero() || !p.ln_abs().is_finite() {
        return Err(SolverError::DegenerateP(p.value()));
    }
    if !converged {
        log::warn!("solver stopped after {sweeps} sweeps with max residual {max_final:.3e}");
    }
    Ok(SolverState {
        psi: dual_with(stats, values.as_slice(), p),
        p: p.value(),
        ln_p: p.ln_abs(),
        values,
        residuals: final_residuals,
        pinned,
        trace,
        initial_residual,
        sweeps,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{binary_correlated, binary_one_d};

    fn fitted(stats: &StatisticSet) -> (CompressedPolynomial, SolverState) {
        let poly = CompressedPolynomial::build(stats).unwrap();
        let state = solve(&poly, stats, &SolverConfig::default()).unwrap();
        (poly, state)
    }

    #[test]
    fn symmetric_targets_stay_at_one() {
        let stats = StatisticSet::new(vec![2, 2], 10, &[vec![5, 5], vec![5, 5]], &[]).unwrap();
        let poly = CompressedPolynomial::build(&stats).unwrap();
        let mut values = VariableStore::filled(4, 1.0);
        let u = update_coordinate(&poly, &stats, &mut values, 0).unwrap();
        assert_eq!(u.after, 1.0);
        assert_eq!(u.residual, 0.0);
        let state = solve(&poly, &stats, &SolverConfig::default()).unwrap();
        assert_eq!(state.sweeps, 0);
        assert!(state.converged);
    }

    #[test]
    fn one_d_targets_are_matched() {
        let stats = binary_one_d();
        let (poly, state) = fitted(&stats);
        assert!(state.converged);
        for st in stats.stats() {
            let e = expected_count(&poly, 10, state.values.as_slice(), st.id).unwrap();
            assert!((e - st.s as f64).abs() < 1e-6);
        }
        // independent attributes: α ratios equal the count ratios
        let v = state.values.as_slice();
        assert!((v[0] / v[1] - 3.0 / 7.0).abs() < 1e-9);
    }

    #[test]
    fn correlated_targets_are_matched() {
        let stats = binary_correlated();
        let (poly, state) = fitted(&stats);
        assert!(state.converged, "residual {}", state.max_residual());
        assert!(state.sweeps <= 30);
        for st in stats.stats() {
            let e = expected_count(&poly, 10, state.values.as_slice(), st.id).unwrap();
            assert!((e - st.s as f64).abs() < 1e-6, "stat {} expected {e}", st.id);
        }
        for w in state.trace.windows(2) {
            assert!(w[1].psi >= w[0].psi - 1e-9);
        }
    }

    #[test]
    fn zero_counts_are_pinned() {
        let stats = StatisticSet::new(vec![3, 2], 6, &[vec![2, 0, 4], vec![3, 3]], &[]).unwrap();
        let (_, state) = fitted(&stats);
        assert_eq!(state.values.get(1), 0.0);
        assert_eq!(
            state.pinned,
            vec![Pinned {
                id: 1,
                reason: PinReason::ZeroCount
            }]
        );
        assert_eq!(state.residuals.len(), 4);
        assert!(state.psi.is_finite());
    }

    #[test]
    fn full_counts_are_pinned_at_one() {
        let stats = StatisticSet::new(vec![2, 2], 6, &[vec![6, 0], vec![2, 4]], &[]).unwrap();
        let (_, state) = fitted(&stats);
        assert_eq!(state.values.get(0), 1.0);
        assert_eq!(state.values.get(1), 0.0);
        assert!(state.converged);
    }

    #[test]
    fn uniform_dual_value() {
        let stats = binary_one_d();
        let poly = CompressedPolynomial::build(&stats).unwrap();
        let psi = dual_value(&poly, &stats, &[1.0; 6]).unwrap();
        assert!((psi + 10.0 * 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn each_update_raises_the_dual() {
        let stats = binary_correlated();
        let poly = CompressedPolynomial::build(&stats).unwrap();
        let mut values = VariableStore::filled(stats.len(), 1.0);
        for _ in 0..3 {
            for j in 0..stats.len() {
                let before = dual_value(&poly, &stats, values.as_slice()).unwrap();
                let u = update_coordinate(&poly, &stats, &mut values, j).unwrap();
                let after = dual_value(&poly, &stats, values.as_slice()).unwrap();
                if (u.after - u.before).abs() > 1e-9 {
                    assert!(after > before, "var {j}: {before} -> {after}");
                }
                assert!(u.gap < 1e-12 * 10.0);
            }
        }
    }

    #[test]
    fn bad_config_is_rejected() {
        let stats = binary_one_d();
        let poly = CompressedPolynomial::build(&stats).unwrap();
        let config = SolverConfig {
            threshold: 0.0,
            ..SolverConfig::default()
        };
        assert!(matches!(solve(&poly, &stats, &config), Err(SolverError::Config(_))));
    }
}

//! Process parameterization and the value types every other module consumes.
//!
//! The model is branching Brownian motion with drift `-rho`, dyadic fission
//! at unit rate, and absorption at the origin, parameterized by the
//! subcriticality `epsilon` through `rho^2/2 - 1 = epsilon`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Subcriticality and derived drift. `rho` is always derived from `epsilon`
/// at construction so no call site ever recomputes `sqrt(2 + 2*eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub epsilon: f64,
    pub rho: f64,
    pub branch_rate: f64,
}

impl ModelParams {
    /// Standard parameterization: `rho = sqrt(2 + 2*epsilon)`, unit branch rate.
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::parameter(format!(
                "epsilon must be > 0, got {epsilon}"
            )));
        }
        if !(epsilon < 1.0) {
            return Err(Error::parameter(format!(
                "epsilon must be < 1, got {epsilon}"
            )));
        }
        Ok(ModelParams {
            epsilon,
            rho: (2.0 + 2.0 * epsilon).sqrt(),
            branch_rate: 1.0,
        })
    }

    /// Same drift, nonstandard branch rate. Only tests use this (a rate-0
    /// process isolates the single-particle absorption law).
    pub fn with_branch_rate(epsilon: f64, branch_rate: f64) -> Result<Self> {
        if !(branch_rate >= 0.0) {
            return Err(Error::parameter(format!(
                "branch_rate must be >= 0, got {branch_rate}"
            )));
        }
        let mut p = Self::new(epsilon)?;
        p.branch_rate = branch_rate;
        Ok(p)
    }
}

/// Starting position of the root particle, strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub x: f64,
}

impl InitialCondition {
    pub fn new(x: f64) -> Result<Self> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::parameter(format!(
                "initial position must be finite and > 0, got {x}"
            )));
        }
        Ok(InitialCondition { x })
    }
}

/// Simulation end time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub t: f64,
}

impl Horizon {
    pub fn new(t: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::parameter(format!(
                "horizon must be finite and >= 0, got {t}"
            )));
        }
        Ok(Horizon { t })
    }
}

/// Particle positions at a fixed time. Absorbed particles are removed at
/// absorption and never stored, so every position is strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSnapshot {
    pub time: f64,
    pub positions: Vec<f64>,
}

impl PopulationSnapshot {
    pub fn new(time: f64, positions: Vec<f64>) -> Result<Self> {
        if positions.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::parameter(
                "snapshot positions must all be strictly positive",
            ));
        }
        Ok(PopulationSnapshot { time, positions })
    }

    pub fn alive(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// `log(sum_u Y_u * e^{rho Y_u})` by log-sum-exp over per-particle terms
/// `log(Y_u) + rho*Y_u`. The `e^{eps*t}` factor of the martingale V is
/// applied by callers. Empty snapshot gives `-inf` (empty sum), not an error.
///
/// `rho * Y` can exceed 700 for far-right particles, so the sum is never
/// formed in linear space.
pub fn log_v_core(snapshot: &PopulationSnapshot, params: &ModelParams) -> f64 {
    log_sum_exp(
        snapshot
            .positions
            .iter()
            .map(|&y| y.ln() + params.rho * y),
    )
}

/// Log-sum-exp over an iterator of log-terms; `-inf` for an empty iterator.
pub fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + terms.iter().map(|&t| (t - m).exp()).sum::<f64>().ln()
}

/// The martingale value `V(t) = e^{eps*t} * sum_u Y_u e^{rho Y_u}`,
/// in linear space. Zero for an extinct snapshot.
pub fn v_martingale(snapshot: &PopulationSnapshot, params: &ModelParams) -> f64 {
    let lv = log_v_core(snapshot, params);
    if lv == f64::NEG_INFINITY {
        0.0
    } else {
        (lv + params.epsilon * snapshot.time).exp()
    }
}

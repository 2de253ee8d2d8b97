//! Monte Carlo statistics, replicate orchestration, and the verification
//! battery tying the samplers to the closed-form module.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bbm::SimLimits;
use crate::error::{Error, Result};
use crate::model::{Horizon, InitialCondition, ModelParams};
use crate::rng::RngStream;
use crate::stats::{wilson_interval, z_for_ci};

/// Provenance carried by every estimate so a run can be replayed
/// bit-exactly.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub master_seed: u64,
    pub params: Option<ModelParams>,
    pub horizon: Option<f64>,
    pub notes: String,
}

/// A Monte Carlo point estimate with its normal-theory interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: f64,
    pub std_error: f64,
    pub reps: usize,
    pub ci_level: f64,
    pub half_width: f64,
    pub manifest: Manifest,
}

impl EstimateReport {
    pub fn ci(&self) -> (f64, f64) {
        (self.estimate - self.half_width, self.estimate + self.half_width)
    }

    /// Interval at a different level from the same standard error.
    pub fn half_width_at(&self, ci_level: f64) -> f64 {
        z_for_ci(ci_level) * self.std_error
    }
}

/// Sample mean with normal-quantile confidence half-width.
pub fn mc_mean_ci(samples: &[f64], ci_level: f64) -> Result<EstimateReport> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::parameter("need at least 2 samples"));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let se = (var / n as f64).sqrt();
    Ok(EstimateReport {
        estimate: mean,
        std_error: se,
        reps: n,
        ci_level,
        half_width: z_for_ci(ci_level) * se,
        manifest: Manifest::default(),
    })
}

/// Run independent replicates on the global worker pool. Each replicate
/// gets its own derived stream, and results come back in stream order, so
/// the aggregate is bitwise independent of scheduling and worker count.
pub fn run_replicates<T, F>(reps: usize, stream: &RngStream, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(RngStream) -> Result<T> + Sync,
{
    (0..reps as u64)
        .into_par_iter()
        .map(|i| f(stream.substream(i)))
        .collect()
}

/// Bernoulli survival frequency under the forward engine. Rare-event runs
/// (fewer than 10 survivors expected) get a Wilson interval in the notes,
/// since the Wald interval collapses at low counts.
pub fn survival_probability_naive(
    params: &ModelParams,
    init: &InitialCondition,
    horizon: &Horizon,
    reps: usize,
    limits: &SimLimits,
    rng: &RngStream,
) -> Result<EstimateReport> {
    if reps < 1000 {
        return Err(Error::parameter("survival estimate needs at least 1000 replicates"));
    }
    let flags = run_replicates(reps, rng, |s| {
        Ok(!crate::bbm::simulate_tree(params, init, horizon, limits, &s)?.extinct)
    })?;
    let survivors = flags.iter().filter(|&&f| f).count() as u64;
    let p = survivors as f64 / reps as f64;
    let se = (p * (1.0 - p) / reps as f64).sqrt();
    let mut notes = format!("survival x={} survivors={survivors}", init.x);
    if p < 10.0 / reps as f64 {
        let (lo, hi) = wilson_interval(survivors, reps as u64, 0.95);
        notes.push_str(&format!(" wilson95=[{lo:.6e},{hi:.6e}]"));
    }
    Ok(EstimateReport {
        estimate: p,
        std_error: se,
        reps,
        ci_level: 0.95,
        half_width: z_for_ci(0.95) * se,
        manifest: Manifest {
            master_seed: rng.master_seed,
            params: Some(*params),
            horizon: Some(horizon.t),
            notes,
        },
    })
}

/// One cell grid of the Yaglom sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub epsilons: Vec<f64>,
    pub horizons: Vec<f64>,
    pub reps_per_cell: usize,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() || self.horizons.is_empty() {
            return Err(Error::parameter("sweep grid must be nonempty"));
        }
        if self.reps_per_cell < 1000 {
            return Err(Error::parameter("sweep needs at least 1000 reps per cell"));
        }
        for &e in &self.epsilons {
            ModelParams::new(e)?;
        }
        for &t in &self.horizons {
            Horizon::new(t)?;
        }
        Ok(())
    }
}

/// One row of the sweep table. `error` is populated instead of the
/// estimates when a cell fails; the sweep continues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub t: f64,
    pub keps: Option<f64>,
    pub keps_se: Option<f64>,
    pub cond_pop_naive: Option<f64>,
    pub cond_pop_naive_se: Option<f64>,
    /// `2 / (rho^2 keps)`, the spine-implied conditional population.
    pub cond_pop_spine: Option<f64>,
    pub log_cond_pop_naive: Option<f64>,
    pub reps: usize,
    pub seed: u64,
    pub error: Option<String>,
}

/// Both estimator families on every `(epsilon, t)` cell.
pub fn yaglom_sweep(
    grid: &SweepGrid,
    init: &InitialCondition,
    limits: &SimLimits,
    rng: &RngStream,
) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &eps in &grid.epsilons {
        for &t in &grid.horizons {
            let cell_stream = rng.substream(cell.wrapping_mul(1_000_000_007));
            cell += 1;
            rows.push(sweep_cell(eps, t, grid.reps_per_cell, init, limits, &cell_stream));
        }
    }
    Ok(rows)
}

fn sweep_cell(
    eps: f64,
    t: f64,
    reps: usize,
    init: &InitialCondition,
    limits: &SimLimits,
    stream: &RngStream,
) -> SweepRow {
    let mut row = SweepRow {
        epsilon: eps,
        t,
        keps: None,
        keps_se: None,
        cond_pop_naive: None,
        cond_pop_naive_se: None,
        cond_pop_spine: None,
        log_cond_pop_naive: None,
        reps,
        seed: stream.master_seed,
        error: None,
    };
    let mut run = || -> Result<()> {
        let params = ModelParams::new(eps)?;
        let horizon = Horizon::new(t)?;
        let keps = crate::spine::keps_estimate(&params, init, &horizon, reps, limits, stream)?;
        row.keps = Some(keps.estimate);
        row.keps_se = Some(keps.std_error);
        row.cond_pop_spine = Some(2.0 / (params.rho * params.rho * keps.estimate));
        let cond = crate::bbm::conditional_population_naive(
            &params,
            init,
            &horizon,
            reps,
            limits,
            &stream.substream(reps as u64),
        )?;
        row.cond_pop_naive = Some(cond.estimate);
        row.cond_pop_naive_se = Some(cond.std_error);
        row.log_cond_pop_naive = Some(cond.estimate.ln());
        Ok(())
    };
    if let Err(e) = run() {
        row.error = Some(e.to_string());
    }
    row
}

/// CSV serialization of the sweep, header fixed.
pub fn sweep_rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "epsilon,t,keps,keps_se,cond_pop_naive,cond_pop_naive_se,cond_pop_spine,reps,seed\n",
    );
    let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.epsilon,
            r.t,
            fmt(r.keps),
            fmt(r.keps_se),
            fmt(r.cond_pop_naive),
            fmt(r.cond_pop_naive_se),
            fmt(r.cond_pop_spine),
            r.reps,
            r.seed
        ));
    }
    out
}

//! Command-line front end. Engines never touch the filesystem; this module
//! owns config validation, the worker pool, and all persistence.
//!
//! Exit codes: 0 ok, 2 validation, 3 simulation fault, 4 I/O,
//! 5 verification failure.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::battery::{lemma_battery, BatteryOptions, Verdict};
use crate::bbm::{simulate_tree, SimLimits};
use crate::error::Error;
use crate::estimator::{mc_mean_ci, run_replicates, sweep_rows_to_csv, yaglom_sweep, SweepGrid};
use crate::model::{Horizon, InitialCondition, ModelParams};
use crate::rng::RngStream;
use crate::spine::sample_q_tree;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SIMULATION: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_VERIFICATION: i32 = 5;

#[derive(Parser, Debug)]
#[command(name = "spindle", version, about = "Exact simulation and estimation for slightly subcritical branching Brownian motion with absorption")]
pub struct Cli {
    /// Worker threads (overridden by SPINDLE_WORKERS if set)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Forward-simulate absorbed BBM replicates
    Simulate(SimulateArgs),
    /// Sample spinal (Q-measure) trees and estimate the Yaglom constant
    Spine(SpineArgs),
    /// Run the closed-form/sampler verification battery
    Verify(VerifyArgs),
    /// Sweep the Yaglom estimators over an (epsilon, t) grid
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Subcriticality parameter, 0 < epsilon < 1
    #[arg(long)]
    pub epsilon: f64,
    /// Initial particle position, > 0
    #[arg(long)]
    pub x: f64,
    /// Time horizon, >= 0
    #[arg(long)]
    pub t: f64,
    /// Replicate count
    #[arg(long)]
    pub reps: usize,
    /// Master seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON Lines output path (manifest written alongside)
    #[arg(long, default_value = "simulate.jsonl")]
    pub out: PathBuf,
    /// Particle-count budget per replicate
    #[arg(long, default_value_t = 1_000_000)]
    pub max_particles: usize,
    /// Event budget per replicate
    #[arg(long, default_value_t = 100_000_000)]
    pub max_events: u64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SpineArgs {
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub x: f64,
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pin the spine terminal value (Bessel bridge instead of free Bessel-3)
    #[arg(long)]
    pub endpoint: Option<f64>,
    #[arg(long, default_value = "spine.jsonl")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_particles: usize,
    #[arg(long, default_value_t = 100_000_000)]
    pub max_events: u64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated check-name prefixes, e.g. theta,dominance,martingale
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<String>>,
    /// Scale factor on every statistical sample size
    #[arg(long, default_value_t = 1.0)]
    pub reps_scale: f64,
    /// Battery report path (JSON); stdout if omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SweepArgs {
    /// JSON config file with {epsilons, horizons, reps_per_cell}; overrides flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated epsilon values
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.6, 0.4, 0.25])]
    pub epsilons: Vec<f64>,
    /// Comma-separated horizons
    #[arg(long, value_delimiter = ',', default_values_t = vec![6.0])]
    pub horizons: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long)]
    pub x: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_particles: usize,
    #[arg(long, default_value_t = 100_000_000)]
    pub max_events: u64,
}

/// Manifest companion written next to every output file. Contains no
/// timestamps so replay is byte-identical.
#[derive(Debug, Serialize)]
struct FileManifest<C: Serialize, S: Serialize> {
    tool_version: &'static str,
    command: &'static str,
    config: C,
    master_seed: u64,
    summary: S,
}

#[derive(Debug, Serialize)]
struct SimulateRecord {
    stream_id: u64,
    alive: usize,
    extinct: bool,
    log_v_core: Option<f64>,
    branch_events: u64,
}

#[derive(Debug, Serialize)]
struct SpineRecord {
    stream_id: u64,
    branch_count: usize,
    spine_terminal: f64,
    log_v_core: f64,
    alive: usize,
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) | Error::UnknownFunctional(_) => EXIT_VALIDATION,
        Error::Explosion { .. }
        | Error::EventBudget { .. }
        | Error::SeriesDivergence { .. }
        | Error::DegenerateEstimate { .. } => EXIT_SIMULATION,
    }
}

fn manifest_path(out: &PathBuf) -> PathBuf {
    let mut p = out.as_os_str().to_owned();
    p.push(".manifest.json");
    PathBuf::from(p)
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> std::result::Result<(), i32> {
    fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|e| {
            eprintln!("error: cannot write {}: {e}", path.display());
            EXIT_IO
        })
}

/// Install the global worker pool. SPINDLE_WORKERS takes precedence over
/// `--workers`; unset means rayon's default.
fn install_pool(flag: Option<usize>) -> std::result::Result<(), i32> {
    let env = match std::env::var("SPINDLE_WORKERS") {
        Ok(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => {
                eprintln!("error: SPINDLE_WORKERS must be a positive integer, got {v:?}");
                return Err(EXIT_VALIDATION);
            }
        },
        Err(_) => None,
    };
    if let Some(n) = env.or(flag) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| {
                eprintln!("error: worker pool: {e}");
                EXIT_VALIDATION
            })?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> i32 {
    if let Err(code) = install_pool(cli.workers) {
        return code;
    }
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Spine(args) => cmd_spine(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

fn cmd_simulate(args: SimulateArgs) -> i32 {
    // validate everything before any file is created
    let setup = (|| {
        let params = ModelParams::new(args.epsilon)?;
        let init = InitialCondition::new(args.x)?;
        let horizon = Horizon::new(args.t)?;
        if args.reps == 0 {
            return Err(Error::parameter("reps must be positive"));
        }
        Ok((params, init, horizon))
    })();
    let (params, init, horizon) = match setup {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    let limits = SimLimits { max_particles: args.max_particles, max_events: args.max_events };
    let rng = RngStream::new(args.seed, 0);

    let results = run_replicates(args.reps, &rng, |s| {
        let out = simulate_tree(&params, &init, &horizon, &limits, &s)?;
        let lvc = crate::model::log_v_core(&out.snapshot, &params);
        Ok(SimulateRecord {
            stream_id: s.stream_id,
            alive: out.snapshot.alive(),
            extinct: out.extinct,
            log_v_core: if out.extinct { None } else { Some(lvc) },
            branch_events: out.branch_events,
        })
    });
    let records = match results {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };

    // summary: empirical mean of the martingale V(t)
    let v_samples: Vec<f64> = records
        .iter()
        .map(|r| match r.log_v_core {
            Some(l) => (params.epsilon * horizon.t + l).exp(),
            None => 0.0,
        })
        .collect();
    let mut summary = match mc_mean_ci(&v_samples, 0.95) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    let survivors = records.iter().filter(|r| !r.extinct).count();
    summary.manifest = crate::estimator::Manifest {
        master_seed: args.seed,
        params: Some(params),
        horizon: Some(horizon.t),
        notes: format!("mean V(t); survivors={survivors}/{}", args.reps),
    };

    let mut body = String::new();
    for r in &records {
        body.push_str(&serde_json::to_string(r).unwrap());
        body.push('\n');
    }
    if let Err(code) = write_file(&args.out, body.as_bytes()) {
        return code;
    }
    let manifest = FileManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "simulate",
        config: &args,
        master_seed: args.seed,
        summary: &summary,
    };
    let mtext = serde_json::to_string_pretty(&manifest).unwrap();
    if let Err(code) = write_file(&manifest_path(&args.out), mtext.as_bytes()) {
        return code;
    }
    println!(
        "simulate: {} replicates, mean V(t) = {:.6} +/- {:.6}, survivors {}",
        args.reps, summary.estimate, summary.half_width, survivors
    );
    EXIT_OK
}

fn cmd_spine(args: SpineArgs) -> i32 {
    let setup = (|| {
        let params = ModelParams::new(args.epsilon)?;
        let init = InitialCondition::new(args.x)?;
        let horizon = Horizon::new(args.t)?;
        if args.reps == 0 {
            return Err(Error::parameter("reps must be positive"));
        }
        if let Some(z) = args.endpoint {
            if !(z > 0.0) {
                return Err(Error::parameter(format!("endpoint must be > 0, got {z}")));
            }
        }
        if args.endpoint.is_none() && args.t <= 0.0 {
            return Err(Error::parameter("spine needs t > 0"));
        }
        Ok((params, init, horizon))
    })();
    let (params, init, horizon) = match setup {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    let limits = SimLimits { max_particles: args.max_particles, max_events: args.max_events };
    let rng = RngStream::new(args.seed, 0);

    let results = run_replicates(args.reps, &rng, |s| {
        let out = sample_q_tree(&params, &init, &horizon, &limits, &s, args.endpoint)?;
        Ok(SpineRecord {
            stream_id: s.stream_id,
            branch_count: out.spine.branch_times.len(),
            spine_terminal: out.spine.terminal(),
            log_v_core: crate::model::log_v_core(&out.merged_snapshot, &params),
            alive: out.merged_snapshot.alive(),
        })
    });
    let records = match results {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };

    // K_eps estimate from the recorded functionals (free spine only; the
    // conditioned spine is a diagnostic sampler, not an estimator)
    let prefactor = (2.0 * std::f64::consts::PI * horizon.t.powi(3)).sqrt();
    let keps_samples: Vec<f64> = records.iter().map(|r| prefactor * (-r.log_v_core).exp()).collect();
    let mut summary = match mc_mean_ci(&keps_samples, 0.95) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    summary.manifest = crate::estimator::Manifest {
        master_seed: args.seed,
        params: Some(params),
        horizon: Some(horizon.t),
        notes: match args.endpoint {
            Some(z) => format!("keps (conditioned spine, endpoint={z}; diagnostic only)"),
            None => "keps (free spine)".to_string(),
        },
    };

    let mut body = String::new();
    for r in &records {
        body.push_str(&serde_json::to_string(r).unwrap());
        body.push('\n');
    }
    if let Err(code) = write_file(&args.out, body.as_bytes()) {
        return code;
    }
    let manifest = FileManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "spine",
        config: &args,
        master_seed: args.seed,
        summary: &summary,
    };
    let mtext = serde_json::to_string_pretty(&manifest).unwrap();
    if let Err(code) = write_file(&manifest_path(&args.out), mtext.as_bytes()) {
        return code;
    }
    let (lo, hi) = summary.ci();
    println!(
        "spine: {} replicates, K_eps = {:.6} (95% CI [{:.6}, {:.6}])",
        args.reps, summary.estimate, lo, hi
    );
    EXIT_OK
}

fn cmd_verify(args: VerifyArgs) -> i32 {
    if !(args.reps_scale > 0.0) {
        eprintln!("error: reps_scale must be positive");
        return EXIT_VALIDATION;
    }
    let opts = BatteryOptions {
        reps_scale: args.reps_scale,
        only: args.only.clone(),
        theta_residual: None,
    };
    let report = lemma_battery(&RngStream::new(args.seed, 0), &opts);
    if let Some(only) = &args.only {
        if report.checks.is_empty() {
            eprintln!("error: no checks match --only {}", only.join(","));
            return EXIT_VALIDATION;
        }
    }
    let text = serde_json::to_string_pretty(&report).unwrap();
    match &args.out {
        Some(path) => {
            if let Err(code) = write_file(path, text.as_bytes()) {
                return code;
            }
        }
        None => println!("{text}"),
    }
    for c in &report.checks {
        let v = match c.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "inconclusive",
        };
        eprintln!("{:<36} {v:<12} stat={:.3e} threshold={:.3e}", c.check_name, c.statistic, c.threshold);
    }
    if report.any_failed() {
        eprintln!("verify: FAILED");
        return EXIT_VERIFICATION;
    }
    if report.any_inconclusive() {
        eprintln!("warning: some checks were inconclusive (underpowered); rerun with a larger --reps-scale");
    }
    EXIT_OK
}

#[derive(Debug, Serialize)]
struct SweepManifestSummary {
    rows: Vec<crate::estimator::SweepRow>,
    /// "ok", "inconclusive" (under-powered), or the cell error
    cell_status: Vec<String>,
}

fn cmd_sweep(args: SweepArgs) -> i32 {
    let grid = match &args.config {
        Some(path) => {
            let text = match fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", path.display());
                    return EXIT_IO;
                }
            };
            let mut de = serde_json::Deserializer::from_str(&text);
            match serde_path_to_error_free_deny(&mut de) {
                Ok(g) => g,
                Err(e) => {
                    eprintln!("error: invalid sweep config: {e}");
                    return EXIT_VALIDATION;
                }
            }
        }
        None => SweepGrid {
            epsilons: args.epsilons.clone(),
            horizons: args.horizons.clone(),
            reps_per_cell: args.reps,
        },
    };
    let setup = (|| {
        grid.validate()?;
        InitialCondition::new(args.x.unwrap_or(1.0))
    })();
    let init = match setup {
        Ok(i) => i,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    let limits = SimLimits { max_particles: args.max_particles, max_events: args.max_events };
    let rng = RngStream::new(args.seed, 0);
    let rows = match yaglom_sweep(&grid, &init, &limits, &rng) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };

    let csv = sweep_rows_to_csv(&rows);
    if let Err(code) = write_file(&args.out, csv.as_bytes()) {
        return code;
    }

    // power guard: a cell whose K_eps relative SE exceeds 10% is flagged
    // inconclusive in the manifest (the CSV row stands as-is)
    let cell_status: Vec<String> = rows
        .iter()
        .map(|r| match (&r.error, r.keps, r.keps_se) {
            (Some(e), _, _) => e.clone(),
            (None, Some(k), Some(se)) if se > 0.1 * k.abs() => "inconclusive".to_string(),
            _ => "ok".to_string(),
        })
        .collect();
    let manifest = FileManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "sweep",
        config: &args,
        master_seed: args.seed,
        summary: SweepManifestSummary { rows: rows.clone(), cell_status: cell_status.clone() },
    };
    let mtext = serde_json::to_string_pretty(&manifest).unwrap();
    if let Err(code) = write_file(&manifest_path(&args.out), mtext.as_bytes()) {
        return code;
    }

    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "sweep: {} cells, {} failed, {} inconclusive -> {}",
        rows.len(),
        failed,
        cell_status.iter().filter(|s| s.as_str() == "inconclusive").count(),
        args.out.display()
    );
    if failed == rows.len() {
        eprintln!("error: every sweep cell failed");
        return EXIT_SIMULATION;
    }
    EXIT_OK
}

/// Strict config parse: unknown keys rejected.
fn serde_path_to_error_free_deny<'de, D>(de: D) -> std::result::Result<SweepGrid, D::Error>
where
    D: serde::Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct StrictGrid {
        epsilons: Vec<f64>,
        horizons: Vec<f64>,
        reps_per_cell: usize,
    }
    let g = StrictGrid::deserialize(de)?;
    Ok(SweepGrid { epsilons: g.epsilons, horizons: g.horizons, reps_per_cell: g.reps_per_cell })
}

//! Exact samplers and densities for Brownian bridges, Bessel-3 processes
//! and bridges, plus the shared-noise squared-bridge coupling.
//!
//! All bridge samplers pin their endpoints exactly (assignment, not
//! arithmetic). Free Bessel-3 paths come from the norm of a 3-d Brownian
//! path, Bessel bridges from the three-bridge representation; both are
//! exact in distribution at grid points, with no discretization bias.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Endpoints, duration and evaluation grid for a bridge sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeSpec {
    pub start: f64,
    pub end: f64,
    pub duration: f64,
    pub grid: Vec<f64>,
}

impl BridgeSpec {
    pub fn new(start: f64, end: f64, duration: f64, grid: Vec<f64>) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(Error::parameter(format!(
                "duration must be > 0, got {duration}"
            )));
        }
        if grid.len() < 2 || grid[0] != 0.0 || *grid.last().unwrap() != duration {
            return Err(Error::parameter(
                "grid must contain both endpoints 0 and duration",
            ));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::parameter("grid must be strictly increasing"));
        }
        Ok(BridgeSpec { start, end, duration, grid })
    }

    /// Uniform grid with `n` intervals.
    pub fn uniform(start: f64, end: f64, duration: f64, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::parameter("grid needs at least one interval"));
        }
        let mut grid: Vec<f64> = (0..=n).map(|i| duration * i as f64 / n as f64).collect();
        grid[n] = duration;
        Self::new(start, end, duration, grid)
    }

    fn require_nonnegative_endpoints(&self) -> Result<()> {
        if self.start < 0.0 || self.end < 0.0 {
            return Err(Error::parameter(
                "Bessel bridge endpoints must be >= 0",
            ));
        }
        Ok(())
    }
}

/// A path observed on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl SamplePath {
    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    // Box-Muller; two uniforms per normal keeps the draw count
    // schedule-independent.
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Standard 0 -> 0 bridge over `[0, duration]` by sequential conditioning;
/// exact finite-dimensional law, terminal value exactly 0.
fn sample_standard_bridge(duration: f64, grid: &[f64], rng: &mut ChaCha12Rng) -> Vec<f64> {
    let n = grid.len();
    let mut values = vec![0.0; n];
    for i in 1..n - 1 {
        let (t_prev, t_next) = (grid[i - 1], grid[i]);
        let rem_prev = duration - t_prev;
        let rem_next = duration - t_next;
        // bridge conditional: next ~ N(v * rem_next/rem_prev, dt * rem_next/rem_prev)
        let mean = values[i - 1] * rem_next / rem_prev;
        let var = (t_next - t_prev) * rem_next / rem_prev;
        values[i] = mean + var.sqrt() * standard_normal(rng);
    }
    values
}

/// Brownian bridge `start -> end` on the grid: standard bridge plus the
/// linear interpolation of the endpoints. Endpoints exact.
pub fn sample_brownian_bridge(spec: &BridgeSpec, rng: &RngStream) -> SamplePath {
    let mut r = rng.rng();
    sample_brownian_bridge_with(spec, &mut r)
}

pub(crate) fn sample_brownian_bridge_with(spec: &BridgeSpec, rng: &mut ChaCha12Rng) -> SamplePath {
    let std = sample_standard_bridge(spec.duration, &spec.grid, rng);
    let n = spec.grid.len();
    let mut values = vec![0.0; n];
    for i in 1..n - 1 {
        let f = spec.grid[i] / spec.duration;
        values[i] = (1.0 - f) * spec.start + f * spec.end + std[i];
    }
    values[0] = spec.start;
    values[n - 1] = spec.end;
    SamplePath { grid: spec.grid.clone(), values }
}

/// `P(driftless bridge start -> end over [0, duration] hits 0) = e^{-2 start end / duration}`.
pub fn bridge_hits_zero_probability(start: f64, end: f64, duration: f64) -> Result<f64> {
    if !(start > 0.0) || !(end > 0.0) {
        return Err(Error::parameter(format!(
            "bridge endpoints must be > 0, got ({start}, {end})"
        )));
    }
    if !(duration > 0.0) {
        return Err(Error::parameter(format!(
            "duration must be > 0, got {duration}"
        )));
    }
    Ok((-2.0 * start * end / duration).exp())
}

/// Bessel-3 transition density
/// `p_t(x, y) = (y/x) (2 pi t)^{-1/2} e^{-(y-x)^2/(2t)} (1 - e^{-2xy/t})`,
/// with the `x = 0` limit `sqrt(2/(pi t^3)) y^2 e^{-y^2/(2t)}`.
pub fn bessel_transition_density(x: f64, y: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::parameter(format!("t must be > 0, got {t}")));
    }
    if !(y > 0.0) {
        return Err(Error::parameter(format!("y must be > 0, got {y}")));
    }
    if x < 0.0 {
        return Err(Error::parameter(format!("x must be >= 0, got {x}")));
    }
    let tau = 2.0 * std::f64::consts::PI * t;
    if x == 0.0 {
        return Ok((2.0 / (std::f64::consts::PI * t.powi(3))).sqrt()
            * y
            * y
            * (-y * y / (2.0 * t)).exp());
    }
    let arg = 2.0 * x * y / t;
    // 1 - e^{-arg} loses digits for tiny arg; exp_m1 keeps them
    let factor = -(-arg).exp_m1();
    Ok(y / x / tau.sqrt() * (-(y - x).powi(2) / (2.0 * t)).exp() * factor)
}

/// Bessel bridge marginal density at interior time `s`:
/// `p_s(x, y) p_{total-s}(y, z) / p_total(x, z)`.
///
/// A terminal value `z = 0` (excursion-type bridge) is handled by the
/// reduced density `lim_{z->0} p_t(., z) / z^2`, which cancels between
/// numerator and denominator.
pub fn bessel_bridge_density(x: f64, total: f64, z: f64, s: f64, y: f64) -> Result<f64> {
    if !(s > 0.0 && s < total) {
        return Err(Error::parameter(format!(
            "interior time must satisfy 0 < s < total, got s={s}, total={total}"
        )));
    }
    if z == 0.0 {
        let num = bessel_transition_density(x, y, s)? * bessel_density_to_zero(y, total - s)?;
        let den = bessel_density_to_zero(x, total)?;
        return Ok(num / den);
    }
    let num = bessel_transition_density(x, y, s)? * bessel_transition_density(y, z, total - s)?;
    let den = bessel_transition_density(x, z, total)?;
    Ok(num / den)
}

// Reduced terminal-zero density `lim_{z->0} p_t(x, z)/z^2
// = 2 e^{-x^2/(2t)} / (t sqrt(2 pi t))`, valid for all x >= 0.
fn bessel_density_to_zero(x: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::parameter(format!("t must be > 0, got {t}")));
    }
    if x < 0.0 {
        return Err(Error::parameter(format!("x must be >= 0, got {x}")));
    }
    let tau = 2.0 * std::f64::consts::PI * t;
    Ok(2.0 * (-x * x / (2.0 * t)).exp() / (t * tau.sqrt()))
}

/// Free Bessel-3 path from `start`, exact at grid points: the norm of a
/// 3-d Brownian path started at `(start, 0, 0)`.
pub fn sample_bessel3_path(start: f64, grid: &[f64], rng: &RngStream) -> Result<SamplePath> {
    if !(start >= 0.0) {
        return Err(Error::parameter(format!("start must be >= 0, got {start}")));
    }
    if grid.is_empty() || grid[0] < 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::parameter("grid must be nonempty and strictly increasing"));
    }
    let mut r = rng.rng();
    Ok(sample_bessel3_path_with(start, grid, &mut r))
}

pub(crate) fn sample_bessel3_path_with(
    start: f64,
    grid: &[f64],
    rng: &mut ChaCha12Rng,
) -> SamplePath {
    let mut w = [start, 0.0, 0.0];
    let mut values = Vec::with_capacity(grid.len());
    let mut t_prev = 0.0;
    for &t in grid {
        let dt = t - t_prev;
        if dt > 0.0 {
            let sd = dt.sqrt();
            for wi in &mut w {
                *wi += sd * standard_normal(rng);
            }
        }
        values.push((w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt());
        t_prev = t;
    }
    if grid[0] == 0.0 {
        values[0] = start;
    }
    SamplePath { grid: grid.to_vec(), values }
}

/// Bessel-3 bridge via the three-bridge representation: after rescaling to
/// unit duration, `X_r = sqrt((a(1-r) + b r + B1_r)^2 + B2_r^2 + B3_r^2)`
/// with three independent standard bridges. Endpoints exact.
pub fn sample_bessel_bridge(spec: &BridgeSpec, rng: &RngStream) -> Result<SamplePath> {
    spec.require_nonnegative_endpoints()?;
    let mut r = rng.rng();
    Ok(sample_bessel_bridge_with(spec, &mut r))
}

pub(crate) fn sample_bessel_bridge_with(spec: &BridgeSpec, rng: &mut ChaCha12Rng) -> SamplePath {
    let u = spec.duration;
    let su = u.sqrt();
    let (a, b) = (spec.start / su, spec.end / su);
    // unit-time grid for the scaled bridges
    let unit_grid: Vec<f64> = spec.grid.iter().map(|&t| t / u).collect();
    let b1 = sample_standard_bridge(1.0, &unit_grid, rng);
    let b2 = sample_standard_bridge(1.0, &unit_grid, rng);
    let b3 = sample_standard_bridge(1.0, &unit_grid, rng);
    let n = spec.grid.len();
    let mut values = vec![0.0; n];
    for i in 1..n - 1 {
        let r = unit_grid[i];
        let m = a * (1.0 - r) + b * r + b1[i];
        values[i] = su * (m * m + b2[i] * b2[i] + b3[i] * b3[i]).sqrt();
    }
    values[0] = spec.start;
    values[n - 1] = spec.end;
    SamplePath { grid: spec.grid.clone(), values }
}

/// Shared-noise Euler coupling of two squared Bessel bridges over the
/// initial `[0, 1-delta]` piece of unit-duration bridges:
/// `dY = (3 + (2 y sqrt(Y) - 2 Y)/(1 - r)) dr + 2 sqrt(Y) dB`,
/// the same Brownian increments driving both. Returns the square-rooted
/// paths.
///
/// The step is taken in the square-root variable `X = sqrt(Y)`, whose Ito
/// transform `dX = (1/X + (y - X)/(1 - r)) dr + dB` has additive noise:
/// with shared increments the Euler map is then monotone in the state
/// (up to the `1/X` regularization near 0), so pathwise ordering survives
/// discretization. Stepping `Y` directly with its `2 sqrt(Y) dB` term does
/// not have that property. `1/X` is floored at `1/sqrt(dr)` and negative
/// excursions are clamped to 0.
pub fn couple_squared_bessel_bridges(
    spec_hi: &BridgeSpec,
    spec_lo: &BridgeSpec,
    steps: usize,
    rng: &RngStream,
) -> Result<(SamplePath, SamplePath)> {
    spec_hi.require_nonnegative_endpoints()?;
    spec_lo.require_nonnegative_endpoints()?;
    if spec_hi.start < spec_lo.start || spec_hi.end < spec_lo.end {
        return Err(Error::parameter(
            "hi endpoints must dominate lo endpoints componentwise",
        ));
    }
    let t_max = spec_hi.duration;
    if !(t_max < 1.0) || spec_lo.duration != t_max {
        return Err(Error::parameter(
            "coupling runs on a common [0, 1-delta] with 1-delta < 1",
        ));
    }
    if steps < 2 {
        return Err(Error::parameter("need at least 2 Euler steps"));
    }
    let mut r = rng.rng();
    let dt = t_max / steps as f64;
    let sd = dt.sqrt();
    let mut grid = Vec::with_capacity(steps + 1);
    let mut hi = Vec::with_capacity(steps + 1);
    let mut lo = Vec::with_capacity(steps + 1);
    let mut x_hi = spec_hi.start;
    let mut x_lo = spec_lo.start;
    grid.push(0.0);
    hi.push(spec_hi.start);
    lo.push(spec_lo.start);
    for i in 0..steps {
        let t = i as f64 * dt;
        let db = sd * standard_normal(&mut r);
        x_hi = euler_step(x_hi, spec_hi.end, t, dt, db);
        x_lo = euler_step(x_lo, spec_lo.end, t, dt, db);
        grid.push((i + 1) as f64 * dt);
        hi.push(x_hi);
        lo.push(x_lo);
    }
    Ok((
        SamplePath { grid: grid.clone(), values: hi },
        SamplePath { grid, values: lo },
    ))
}

fn euler_step(x: f64, endpoint: f64, t: f64, dt: f64, db: f64) -> f64 {
    let xc = x.max(dt.sqrt());
    let drift = 1.0 / xc + (endpoint - xc) / (1.0 - t);
    (x + drift * dt + db).max(0.0)
}

/// Monte Carlo estimate of the reflected-bridge supremum law
/// `P(sup (|B^{0,1,0}_t| - a t) < b)` with its standard error.
///
/// A raw grid supremum understates the continuum supremum and biases the
/// CDF estimate upward, so each replicate is weighted by the product over
/// grid segments of the probability that the bridge crosses neither the
/// line `b + a t` nor `-(b + a t)` between its sampled values (both linear
/// boundaries, so each one-sided crossing probability is the exact
/// `e^{-2 d0 d1 / dt}`). Only same-segment double crossings are neglected;
/// their mass is `O(e^{-8 b^2 grid_size})`.
pub fn reflected_bridge_sup_mc(
    barrier: &crate::special::LineBarrier,
    grid_size: usize,
    reps: usize,
    rng: &RngStream,
) -> (f64, f64) {
    let mut r = rng.rng();
    let grid: Vec<f64> = (0..=grid_size).map(|i| i as f64 / grid_size as f64).collect();
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for _ in 0..reps {
        let path = sample_standard_bridge(1.0, &grid, &mut r);
        let mut w = 1.0;
        for i in 1..grid.len() {
            let dt = grid[i] - grid[i - 1];
            let (u0, u1) = (barrier.b + barrier.a * grid[i - 1], barrier.b + barrier.a * grid[i]);
            let (d0_up, d1_up) = (u0 - path[i - 1], u1 - path[i]);
            let (d0_dn, d1_dn) = (path[i - 1] + u0, path[i] + u1);
            if d0_up <= 0.0 || d1_up <= 0.0 || d0_dn <= 0.0 || d1_dn <= 0.0 {
                w = 0.0;
                break;
            }
            let p_cross = (-2.0 * d0_up * d1_up / dt).exp() + (-2.0 * d0_dn * d1_dn / dt).exp();
            w *= (1.0 - p_cross).max(0.0);
            if w == 0.0 {
                break;
            }
        }
        sum += w;
        sumsq += w * w;
    }
    let n = reps as f64;
    let p = sum / n;
    let var = (sumsq / n - p * p).max(0.0);
    (p, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_simpson;
    use crate::special::LineBarrier;

    #[test]
    fn brownian_bridge_endpoints_exact() {
        let spec = BridgeSpec::uniform(0.3, 1.7, 2.5, 64).unwrap();
        let path = sample_brownian_bridge(&spec, &RngStream::new(1, 0));
        assert_eq!(path.values[0].to_bits(), 0.3f64.to_bits());
        assert_eq!(path.terminal().to_bits(), 1.7f64.to_bits());
    }

    #[test]
    fn brownian_bridge_midpoint_moments() {
        // standard bridge midpoint: mean 0, variance t/4 at r = t/2
        let t = 2.0;
        let spec = BridgeSpec::uniform(0.0, 0.0, t, 2).unwrap();
        let n = 100_000;
        let mut r = RngStream::new(11, 0).rng();
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..n {
            let v = sample_brownian_bridge_with(&spec, &mut r).values[1];
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let sd = (t / 4.0f64).sqrt();
        assert!(mean.abs() < 3.0 * sd / (n as f64).sqrt(), "mean {mean}");
        // variance estimator SE ~ var * sqrt(2/n) for Gaussian samples
        let se_var = (t / 4.0) * (2.0 / n as f64).sqrt();
        assert!((var - t / 4.0).abs() < 3.0 * se_var, "var {var}");
    }

    #[test]
    fn bridge_coupling_pathwise_exact() {
        // shared standard-bridge noise: shifted paths ordered at every
        // index with zero tolerance
        let grid: Vec<f64> = (0..=128).map(|i| i as f64 / 128.0).collect();
        for stream in 0..50 {
            let mut r = RngStream::new(5, stream).rng();
            let std = sample_standard_bridge(1.0, &grid, &mut r);
            let shift = |x: f64, y: f64| -> Vec<f64> {
                grid.iter()
                    .zip(&std)
                    .map(|(&t, &b)| (1.0 - t) * x + t * y + b)
                    .collect()
            };
            let hi = shift(1.0, 2.0);
            let lo = shift(0.5, 1.5);
            assert!(hi.iter().zip(&lo).all(|(h, l)| h >= l));
        }
    }

    #[test]
    fn hit_probability_values() {
        let p = bridge_hits_zero_probability(1.0, 1.0, 2.0).unwrap();
        assert!((p - (-1.0f64).exp()).abs() < 1e-15);
        // paper's scaled instance
        let eps: f64 = 0.3;
        let (y, z) = (1.2, 0.7);
        let p = bridge_hits_zero_probability(eps.powf(0.75) * z, eps.powf(0.75) * y, 1.0).unwrap();
        assert!((p - (-2.0 * eps.powf(1.5) * y * z).exp()).abs() < 1e-15);
        assert!(bridge_hits_zero_probability(1e6, 1e6, 1e-3).unwrap() == 0.0);
        assert!(bridge_hits_zero_probability(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn transition_density_values() {
        let d = bessel_transition_density(1.0, 1.0, 1.0).unwrap();
        assert!((d - 0.34495131388824463).abs() < 1e-14);
        let d = bessel_transition_density(0.0, 1.0, 1.0).unwrap();
        assert!((d - 0.48394144903828670).abs() < 1e-14);
        assert!(bessel_transition_density(1.0, 1.0, 0.0).is_err());
        assert!(bessel_transition_density(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn transition_density_normalizes() {
        let mass = adaptive_simpson(
            &|y| {
                if y <= 0.0 {
                    0.0
                } else {
                    bessel_transition_density(1.0, y, 1.0).unwrap()
                }
            },
            1e-12,
            12.0,
            1e-11,
        );
        assert!((mass - 1.0).abs() < 1e-8, "{mass}");
    }

    #[test]
    fn bridge_density_normalizes_and_reverses() {
        let mass = adaptive_simpson(
            &|y| {
                if y <= 0.0 {
                    0.0
                } else {
                    bessel_bridge_density(1.0, 2.0, 1.0, 1.0, y).unwrap()
                }
            },
            1e-12,
            10.0,
            1e-11,
        );
        assert!((mass - 1.0).abs() < 1e-8, "{mass}");
        // time-reversal: x->z at s equals z->x at total-s
        for &y in &[0.2, 0.7, 1.3, 2.4] {
            let fwd = bessel_bridge_density(0.8, 3.0, 1.9, 1.1, y).unwrap();
            let rev = bessel_bridge_density(1.9, 3.0, 0.8, 3.0 - 1.1, y).unwrap();
            assert!(((fwd - rev) / fwd).abs() < 1e-12);
        }
        // s -> 0+ concentrates at x
        let d = bessel_bridge_density(1.0, 2.0, 1.0, 1e-6, 1.5).unwrap();
        assert!(d < 1e-30);
        assert!(bessel_bridge_density(1.0, 2.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn excursion_midpoint_density_closed_form() {
        // Brownian excursion midpoint: f(y) = 16/sqrt(2 pi) y^2 e^{-2y^2}
        let c = 16.0 / (2.0 * std::f64::consts::PI).sqrt();
        for &y in &[0.1, 0.5, 1.0, 1.7] {
            let d = bessel_bridge_density(0.0, 1.0, 0.0, 0.5, y).unwrap();
            let exact = c * y * y * (-2.0 * y * y).exp();
            assert!(((d - exact) / exact).abs() < 1e-13, "y={y}: {d} vs {exact}");
        }
        let mass = adaptive_simpson(
            &|y| {
                if y <= 0.0 {
                    0.0
                } else {
                    bessel_bridge_density(0.0, 1.0, 0.0, 0.5, y).unwrap()
                }
            },
            1e-12,
            6.0,
            1e-11,
        );
        assert!((mass - 1.0).abs() < 1e-8, "{mass}");
    }

    #[test]
    fn bessel3_path_nonnegative_and_deterministic() {
        let grid: Vec<f64> = (0..=32).map(|i| i as f64 / 8.0).collect();
        let s = RngStream::new(9, 4);
        let p1 = sample_bessel3_path(1.0, &grid, &s).unwrap();
        let p2 = sample_bessel3_path(1.0, &grid, &s).unwrap();
        assert_eq!(p1, p2);
        assert!(p1.values.iter().all(|&v| v >= 0.0));
        assert_eq!(p1.values[0], 1.0);
        // start = 0 accepted
        let p = sample_bessel3_path(0.0, &grid, &s).unwrap();
        assert!(p.values[1..].iter().all(|&v| v > 0.0));
    }

    #[test]
    fn bessel3_marginal_mean_matches_quadrature() {
        let expected = adaptive_simpson(
            &|y| y * bessel_transition_density(1.0, y.max(1e-300), 1.0).unwrap(),
            1e-12,
            14.0,
            1e-10,
        );
        let grid = [1.0];
        let n = 100_000;
        let mut r = RngStream::new(21, 0).rng();
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..n {
            let v = sample_bessel3_path_with(1.0, &grid, &mut r).values[0];
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let sd = (sumsq / n as f64 - mean * mean).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * sd / (n as f64).sqrt(),
            "mean {mean} vs {expected}"
        );
    }

    #[test]
    fn bessel_bridge_endpoints_exact() {
        let spec = BridgeSpec::uniform(0.5, 1.25, 3.0, 32).unwrap();
        let p = sample_bessel_bridge(&spec, &RngStream::new(2, 7)).unwrap();
        assert_eq!(p.values[0].to_bits(), 0.5f64.to_bits());
        assert_eq!(p.terminal().to_bits(), 1.25f64.to_bits());
        assert!(p.values.iter().all(|&v| v >= 0.0));
        assert!(sample_bessel_bridge(
            &BridgeSpec::uniform(-0.1, 1.0, 1.0, 8).unwrap(),
            &RngStream::new(2, 7)
        )
        .is_err());
    }

    #[test]
    fn coupled_sde_equal_specs_identical() {
        let hi = BridgeSpec::uniform(1.0, 1.0, 0.9, 2).unwrap();
        let lo = hi.clone();
        let (a, b) = couple_squared_bessel_bridges(&hi, &lo, 256, &RngStream::new(3, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coupled_sde_ordering_and_zero_start() {
        let hi = BridgeSpec::uniform(1.0, 1.0, 0.9, 2).unwrap();
        let lo = BridgeSpec::uniform(0.5, 0.5, 0.9, 2).unwrap();
        for stream in 0..100 {
            let (a, b) =
                couple_squared_bessel_bridges(&hi, &lo, 1 << 12, &RngStream::new(3, stream))
                    .unwrap();
            assert!(a
                .values
                .iter()
                .zip(&b.values)
                .all(|(h, l)| *h >= *l - 1e-9));
        }
        // zero lower start stays finite and nonnegative
        let lo0 = BridgeSpec::uniform(0.0, 0.5, 0.9, 2).unwrap();
        let (_, b) =
            couple_squared_bessel_bridges(&hi, &lo0, 4096, &RngStream::new(4, 0)).unwrap();
        assert!(b.values.iter().all(|v| v.is_finite() && *v >= 0.0));
        // ordering violation rejected
        assert!(couple_squared_bessel_bridges(&lo, &hi, 64, &RngStream::new(3, 0)).is_err());
    }

    #[test]
    fn reflected_sup_mc_trivial_barrier() {
        let (p, _) = reflected_bridge_sup_mc(
            &LineBarrier::new(0.0, 50.0).unwrap(),
            1 << 10,
            200,
            &RngStream::new(6, 0),
        );
        assert_eq!(p, 1.0);
    }

    #[test]
    fn spec_validation() {
        assert!(BridgeSpec::new(0.0, 0.0, 0.0, vec![0.0, 0.0]).is_err());
        assert!(BridgeSpec::new(0.0, 0.0, 1.0, vec![0.0, 0.5]).is_err());
        assert!(BridgeSpec::new(0.0, 0.0, 1.0, vec![0.0, 0.6, 0.5, 1.0]).is_err());
    }
}

//! Closed-form probabilities and bounds: the theta-series law of the
//! reflected-bridge supremum, Jacobi theta identity, Poisson concentration,
//! Gaussian tails, the Beghin-Orsingher prefix-maximum formula, the Roberts
//! front curve, and the exponential survival bound.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Switch point between the direct alternating series and the
/// theta-transformed series for the reflected-bridge supremum CDF.
/// Below ~0.1 the direct series loses all significant digits to
/// cancellation; at 0.3 both branches converge fast and agree.
pub const THETA_BRANCH_POINT: f64 = 0.3;

/// Relative truncation threshold for all theta-type series.
pub const SERIES_REL_TOL: f64 = 1e-16;

/// Hard cap on series terms before reporting divergence.
pub const SERIES_MAX_TERMS: usize = 200;

/// Roberts front-curve constant `A_c = 3^{4/3} pi^{2/3} 2^{-7/6}`.
pub const ROBERTS_A_C: f64 = 4.134216917542667;

/// Barrier line `a*t + b` for the reflected standard Brownian bridge;
/// the law depends on the line only through `q = b*(a+b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineBarrier {
    pub a: f64,
    pub b: f64,
}

impl LineBarrier {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0) {
            return Err(Error::parameter(format!("slope a must be >= 0, got {a}")));
        }
        if !(b > 0.0) {
            return Err(Error::parameter(format!("intercept b must be > 0, got {b}")));
        }
        Ok(LineBarrier { a, b })
    }

    pub fn q(&self) -> f64 {
        self.b * (self.a + self.b)
    }
}

/// Inputs for the two-sided Poisson concentration bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonBoundSpec {
    pub lambda: f64,
    pub v: f64,
}

impl PoissonBoundSpec {
    pub fn new(lambda: f64, v: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::parameter(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(v > 0.0) {
            return Err(Error::parameter(format!("deviation v must be > 0, got {v}")));
        }
        Ok(PoissonBoundSpec { lambda, v })
    }
}

/// Inputs for the prefix-maximum law of a Brownian bridge `0 -> eta` over
/// `[0, u]`, maximum taken over the initial window `[0, s]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrefixMaxSpec {
    pub beta: f64,
    pub eta: f64,
    pub u: f64,
    pub s: f64,
}

impl PrefixMaxSpec {
    pub fn new(beta: f64, eta: f64, u: f64, s: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::parameter(format!("level beta must be > 0, got {beta}")));
        }
        if !(u > 0.0) {
            return Err(Error::parameter(format!("duration u must be > 0, got {u}")));
        }
        if !(s > 0.0 && s < u) {
            return Err(Error::parameter(format!(
                "prefix length must satisfy 0 < s < u, got s={s}, u={u}"
            )));
        }
        Ok(PrefixMaxSpec { beta, eta, u, s })
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `P(sup_{0<=t<=1} (|B^{0,1,0}_t| - a t) < b)`.
///
/// Exact alternating series `sum_k (-1)^k e^{-2 k^2 q}` for `q >= 0.3`;
/// for small `q` the imaginary-transformed representation
/// `2 sqrt(pi/(2q)) e^{-pi^2/(8q)} sum_{k>=0} e^{-pi^2 k(k+1)/(2q)}`
/// avoids the catastrophic cancellation of the direct series.
pub fn reflected_bridge_sup_cdf(barrier: &LineBarrier) -> Result<f64> {
    let q = barrier.q();
    if !(q > 0.0) {
        return Err(Error::parameter(format!("q = b(a+b) must be > 0, got {q}")));
    }
    if q >= THETA_BRANCH_POINT {
        reflected_sup_direct_series(q)
    } else {
        reflected_sup_transformed_series(q)
    }
}

fn reflected_sup_direct_series(q: f64) -> Result<f64> {
    // 1 + 2 sum_{k>=1} (-1)^k e^{-2 k^2 q}
    let mut sum = 1.0;
    for k in 1..=SERIES_MAX_TERMS {
        let term = 2.0 * (-2.0 * (k * k) as f64 * q).exp();
        let signed = if k % 2 == 1 { -term } else { term };
        sum += signed;
        if term < SERIES_REL_TOL * sum.abs() {
            return Ok(sum.clamp(0.0, 1.0));
        }
    }
    Err(Error::SeriesDivergence { q, max_terms: SERIES_MAX_TERMS })
}

fn reflected_sup_transformed_series(q: f64) -> Result<f64> {
    // 2 sqrt(pi/(2q)) e^{-pi^2/(8q)} sum_{k>=0} e^{-pi^2 k(k+1)/(2q)}
    let pi = std::f64::consts::PI;
    let log_prefactor = 0.5 * (pi / (2.0 * q)).ln() + 2f64.ln() - pi * pi / (8.0 * q);
    let mut sum = 1.0; // k = 0 term
    for k in 1..=SERIES_MAX_TERMS {
        let term = (-pi * pi * (k * (k + 1)) as f64 / (2.0 * q)).exp();
        sum += term;
        if term < SERIES_REL_TOL * sum {
            return Ok((log_prefactor + sum.ln()).exp().clamp(0.0, 1.0));
        }
    }
    Err(Error::SeriesDivergence { q, max_terms: SERIES_MAX_TERMS })
}

/// Small-`q` asymptotic `sqrt(2 pi / q) e^{-pi^2/(8q)}`, evaluated in log
/// space. Valid only as `q -> 0`; for large `q` it tends to 0 while the
/// exact CDF tends to 1.
pub fn reflected_bridge_sup_asymptotic(barrier: &LineBarrier) -> Result<f64> {
    let q = barrier.q();
    if !(q > 0.0) {
        return Err(Error::parameter(format!("q = b(a+b) must be > 0, got {q}")));
    }
    let pi = std::f64::consts::PI;
    Ok((0.5 * (2.0 * pi / q).ln() - pi * pi / (8.0 * q)).exp())
}

/// Difference between the two sides of the imaginary transformation
/// `theta_4(0 | 2qi/pi) = sqrt(pi/(2q)) theta_2(0 | pi i/(2q))`, each side
/// evaluated by its defining series, measured against the O(1) scale of the
/// theta series. (For small q the alternating side cancels from O(1) terms
/// down to e.g. 2e-10, so a ratio to the tiny value would only report the
/// cancellation noise floor of f64, not the fidelity of the identity.)
pub fn jacobi_theta_identity_residual(q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::parameter(format!("q must be > 0, got {q}")));
    }
    let lhs = reflected_sup_direct_series(q)?;
    let rhs = reflected_sup_transformed_series(q)?;
    Ok((lhs - rhs).abs() / rhs.abs().max(1.0))
}

/// Chernoff-type two-sided Poisson bound `2 e^{-v^2 / (2(lambda+v))}`.
pub fn poisson_concentration_bound(spec: &PoissonBoundSpec) -> f64 {
    2.0 * (-spec.v * spec.v / (2.0 * (spec.lambda + spec.v))).exp()
}

/// Exact standard normal upper tail `P(Z >= x)`.
pub fn gaussian_upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Exact upper tail paired with the Mills bound `e^{-x^2/2}/(x sqrt(2 pi))`.
/// The bound requires `x > 0`; the exact tail always dominates from below.
pub fn gaussian_upper_tail_with_bound(x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) {
        return Err(Error::parameter(format!(
            "Mills bound requires x > 0, got {x}"
        )));
    }
    let exact = gaussian_upper_tail(x);
    let bound = (-0.5 * x * x - x.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()).exp();
    Ok((exact, bound))
}

/// `P(max_{0<=r<=s} B^{0,u,eta}_r >= beta)` for a Brownian bridge `0 -> eta`
/// over `[0, u]`, maximum over the prefix `[0, s]`:
///
/// `e^{-2 beta (beta-eta)/u} Phi((2 beta s - eta s - beta u)/d) + Phibar((beta u - eta s)/d)`
/// with `d = sqrt(u s (u-s))`.
///
/// Values are clamped to `[0,1]` only within 1e-12 of the boundary; a larger
/// excursion means the caller left the formula's domain and is an error.
pub fn prefix_max_probability(spec: &PrefixMaxSpec) -> Result<f64> {
    let PrefixMaxSpec { beta, eta, u, s } = *spec;
    let d = (u * s * (u - s)).sqrt();
    let p = (-2.0 * beta * (beta - eta) / u).exp()
        * normal_cdf((2.0 * beta * s - eta * s - beta * u) / d)
        + gaussian_upper_tail((beta * u - eta * s) / d);
    if p < -1e-12 || p > 1.0 + 1e-12 {
        return Err(Error::parameter(format!(
            "prefix-max formula left [0,1] (value {p}); arguments outside its domain"
        )));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Roberts front curve
/// `g(s) = sqrt(2) s - A_c s^{1/3} + A_c s^{1/3} / ln^2(s+e) - 1`.
pub fn roberts_curve(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::parameter(format!("s must be >= 0, got {s}")));
    }
    let cbrt = s.cbrt();
    let l = (s + std::f64::consts::E).ln();
    Ok(2f64.sqrt() * s - ROBERTS_A_C * cbrt + ROBERTS_A_C * cbrt / (l * l) - 1.0)
}

/// Survival upper bound `min(1, e^{rho x - eps t})`.
pub fn survival_upper_bound(x: f64, t: f64, params: &ModelParams) -> f64 {
    (params.rho * x - params.epsilon * t).exp().min(1.0)
}

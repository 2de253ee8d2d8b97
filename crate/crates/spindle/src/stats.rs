//! Statistical test utilities: normal quantiles, Wilson intervals,
//! Kolmogorov-Smirnov one- and two-sample tests, chi-square goodness of fit.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

/// Two-sided z for a central confidence level, e.g. 0.95 -> 1.95996.
pub fn z_for_ci(ci_level: f64) -> f64 {
    normal_quantile(0.5 + ci_level / 2.0)
}

/// Wilson score interval for a Bernoulli proportion.
pub fn wilson_interval(successes: u64, n: u64, ci_level: f64) -> (f64, f64) {
    let z = z_for_ci(ci_level);
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Kolmogorov distribution survival function `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test against a CDF. Returns `(statistic, p_value)` with
/// the asymptotic Kolmogorov p-value.
pub fn ks_one_sample(samples: &mut [f64], cdf: &dyn Fn(f64) -> f64) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 8 {
        return Err(Error::parameter("KS test needs at least 8 samples"));
    }
    samples.sort_by(f64::total_cmp);
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n as f64);
        d = d.max((i + 1) as f64 / n as f64 - f);
    }
    Ok((d, kolmogorov_sf(d * (n as f64).sqrt())))
}

/// One-sample KS against a density supported on `(lower, inf)`. The CDF is
/// accumulated by incremental quadrature between consecutive order
/// statistics — one full-range integration per test rather than one per
/// sample. Returns `(statistic, p_value)`.
pub fn ks_one_sample_density(
    samples: &mut [f64],
    density: &dyn Fn(f64) -> f64,
    lower: f64,
) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 8 {
        return Err(Error::parameter("KS test needs at least 8 samples"));
    }
    samples.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut prev = lower;
    let mut cum = 0.0;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        if x > prev {
            cum += crate::quad::adaptive_simpson(density, prev, x, 1e-11);
            prev = x;
        }
        let f = cum.clamp(0.0, 1.0);
        d = d.max(f - i as f64 / nf);
        d = d.max((i as f64 + 1.0) / nf - f);
    }
    Ok((d, kolmogorov_sf(d * nf.sqrt())))
}

/// Two-sample two-sided KS test. Returns `(statistic, p_value)`.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> Result<(f64, f64)> {
    let d = ks_two_sample_statistic(a, b, false)?;
    let n_eff = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    Ok((d, kolmogorov_sf(d * n_eff.sqrt())))
}

/// One-sided two-sample KS test of `F_a <= F_b` failing (i.e. large
/// `sup (F_a - F_b)` is evidence that sample `a` is stochastically smaller).
/// Returns `(statistic D+, p_value)` with `p = e^{-2 n_eff D+^2}`.
pub fn ks_two_sample_one_sided(a: &mut [f64], b: &mut [f64]) -> Result<(f64, f64)> {
    let d = ks_two_sample_statistic(a, b, true)?;
    let n_eff = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    Ok((d, (-2.0 * n_eff * d * d).exp().min(1.0)))
}

fn ks_two_sample_statistic(a: &mut [f64], b: &mut [f64], one_sided: bool) -> Result<f64> {
    if a.len() < 8 || b.len() < 8 {
        return Err(Error::parameter("KS test needs at least 8 samples per side"));
    }
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j) = (0usize, 0usize);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        let diff = i as f64 / na - j as f64 / nb;
        d = if one_sided { d.max(diff) } else { d.max(diff.abs()) };
    }
    Ok(d)
}

/// Chi-square goodness of fit. `expected` are cell probabilities summing
/// to 1 (the tail cell absorbs the remainder). Returns `(statistic, p_value)`.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64]) -> Result<(f64, f64)> {
    if observed.len() != expected_probs.len() || observed.len() < 2 {
        return Err(Error::parameter("need matching cell counts, at least 2 cells"));
    }
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        let e = p * n as f64;
        if e < 1e-12 {
            return Err(Error::parameter("expected cell count too small"));
        }
        stat += (o as f64 - e).powi(2) / e;
    }
    let dof = (observed.len() - 1) as f64;
    let chi = ChiSquared::new(dof).map_err(|e| Error::parameter(e.to_string()))?;
    Ok((stat, 1.0 - chi.cdf(stat)))
}

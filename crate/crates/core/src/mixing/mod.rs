//! Contraction factors of one randomized communication phase, the
//! convergence-rate helpers built on them, and Monte Carlo checks that
//! measure the same quantities on the real samplers.

mod indegree;
mod monte_carlo;
mod spectral;
mod stats;

pub use indegree::{binomial_cdf, indegree_histogram, indegree_tail, IndegreeHistogram};
pub use monte_carlo::{
    check_average_preservation, communicate_once, mc_average_variance, mc_contraction, AveragePreservation,
    AverageVariance, ContractionEstimate,
};
pub use spectral::{mixing_matrix, spectral_gap};
pub use stats::RunningStats;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::TopologyKind;

/// The two epidemic sampling variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Oracle,
    Local,
}

impl Variant {
    pub fn of(kind: TopologyKind) -> Option<Variant> {
        match kind {
            TopologyKind::ElOracle { .. } => Some(Variant::Oracle),
            TopologyKind::ElLocal { .. } => Some(Variant::Local),
            _ => None,
        }
    }

    pub fn kind(self, s: usize) -> TopologyKind {
        match self {
            Variant::Oracle => TopologyKind::ElOracle { s },
            Variant::Local => TopologyKind::ElLocal { s },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Oracle => "el-oracle",
            Variant::Local => "el-local",
        }
    }

    /// Contraction factor of the variant: `lambda_oracle` or `alpha_local`.
    pub fn contraction(self, n: usize, s: usize) -> Result<f64> {
        match self {
            Variant::Oracle => lambda_oracle(n, s),
            Variant::Local => alpha_local(n, s),
        }
    }
}

fn check_ns(n: usize, s: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidSize { n, reason: "need at least 2 nodes" });
    }
    if s == 0 || s > n - 1 {
        return Err(Error::InvalidDegree { n, s, reason: "need 1 <= s <= n-1" });
    }
    Ok(())
}

/// Expected shrink factor of the dispersion around the mean under one
/// s-regular random communication phase:
/// `(1 / (s + 1)) * (1 - s / (n - 1))`.
pub fn lambda_oracle(n: usize, s: usize) -> Result<f64> {
    check_ns(n, s)?;
    let (n, s) = (n as f64, s as f64);
    Ok((1.0 - s / (n - 1.0)) / (s + 1.0))
}

/// Expected shrink factor under one s-out push phase:
/// `(1/s) * (1 - (1 - s/(n-1))^n) - 1/(n-1)`.
/// The power is taken as `exp(n * ln_1p(-s/(n-1)))`.
pub fn alpha_local(n: usize, s: usize) -> Result<f64> {
    check_ns(n, s)?;
    if s == n - 1 {
        return Ok(0.0);
    }
    let (nf, sf) = (n as f64, s as f64);
    let q = (nf * (-sf / (nf - 1.0)).ln_1p()).exp();
    Ok((1.0 - q) / sf - 1.0 / (nf - 1.0))
}

/// The three terms of the convergence bound on the time- and node-averaged
/// squared gradient norm, with the explicit constants of the proof.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateTerms {
    /// Noise term, decays as 1/sqrt(nT).
    pub term_speedup: f64,
    /// Drift term driven by the contraction factor, decays as T^(-2/3).
    pub term_drift: f64,
    /// Initial-gap term, decays as 1/T.
    pub term_higher: f64,
    pub total: f64,
}

/// Problem constants the rate and step-size formulas consume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub smoothness: f64,
    pub sigma: f64,
    pub heterogeneity: f64,
    pub delta0: f64,
}

/// Evaluates the bound `8 sqrt(L D0 N / (nT)) + K cbrt(c L^2 D0^2 (sigma^2 + H^2) / T^2) + 80 L D0 / T`
/// where `N = sigma^2, K = 38` for the oracle variant and
/// `N = 211 sigma^2 + 332 c H^2, K = 51` for the local variant.
pub fn rate_terms(variant: Variant, n: usize, s: usize, rounds: u64, pc: &ProblemConstants) -> Result<RateTerms> {
    let c = variant.contraction(n, s)?;
    if rounds == 0 {
        return Err(Error::param("rounds", "need T >= 1"));
    }
    let (t, nf) = (rounds as f64, n as f64);
    let (l, d0, s2, h2) = (pc.smoothness, pc.delta0, pc.sigma.powi(2), pc.heterogeneity.powi(2));
    let (noise, drift_const) = match variant {
        Variant::Oracle => (s2, 38.0),
        Variant::Local => (211.0 * s2 + 332.0 * c * h2, 51.0),
    };
    let term_speedup = 8.0 * (l * d0 * noise / (nf * t)).sqrt();
    let term_drift = drift_const * (c * l * l * d0 * d0 * (s2 + h2) / (t * t)).cbrt();
    let term_higher = 80.0 * l * d0 / t;
    Ok(RateTerms { term_speedup, term_drift, term_higher, total: term_speedup + term_drift + term_higher })
}

/// Round count at which the noise term `sqrt(L D0 N / (nT))` equals the
/// drift term `cbrt(c L^2 D0^2 (sigma^2 + H^2) / T^2)`, constants dropped:
/// `T* = c^2 L D0 (sigma^2 + H^2)^2 n^3 / N^3`.
///
/// `N` is `sigma^2` for the oracle variant and `sigma^2 + c H^2` for the
/// local variant, matching the first term of each rate.
pub fn transient_crossing(
    variant: Variant,
    n: usize,
    s: usize,
    smoothness: f64,
    delta0: f64,
    sigma: f64,
    heterogeneity: f64,
) -> Result<f64> {
    let c = variant.contraction(n, s)?;
    let noise = match variant {
        Variant::Oracle => sigma * sigma,
        Variant::Local => sigma * sigma + c * heterogeneity * heterogeneity,
    };
    if sigma <= 0.0 {
        return Err(Error::ZeroNoise);
    }
    crossing(c, n, smoothness, delta0, noise, sigma * sigma + heterogeneity * heterogeneity)
}

/// `transient_crossing` at an explicit contraction factor `c`, with the
/// oracle-form noise term `sigma^2`.
pub fn transient_crossing_at(
    c: f64,
    n: usize,
    smoothness: f64,
    delta0: f64,
    sigma: f64,
    heterogeneity: f64,
) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::ZeroNoise);
    }
    crossing(c, n, smoothness, delta0, sigma * sigma, sigma * sigma + heterogeneity * heterogeneity)
}

fn crossing(c: f64, n: usize, l: f64, d0: f64, noise: f64, total_var: f64) -> Result<f64> {
    if c <= 0.0 {
        return Err(Error::param("c", "contraction factor must be positive (s < n-1)"));
    }
    let nf = n as f64;
    Ok(c * c * l * d0 * total_var * total_var * (nf * nf * nf) / (noise * noise * noise))
}

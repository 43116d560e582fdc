//! Monte Carlo measurements of one communication phase on the actual
//! samplers.
//!
//! Trials are split into a fixed number of chunks, each with its own derived
//! random stream, so results do not depend on how many worker threads run
//! them. Chunk results are merged in chunk order.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::stats::RunningStats;
use super::{alpha_local, Variant};
use crate::error::{Error, Result};
use crate::protocol::communication_phase;
use crate::rng::{stream, Purpose, StreamRng};
use crate::topology::{sample_regular_random, sample_s_out};

const CHUNKS: u64 = 64;

/// Monte Carlo estimate of a contraction factor next to its closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionEstimate {
    pub mean_ratio: f64,
    pub std_error: f64,
    pub trials: u64,
    pub target: f64,
}

impl ContractionEstimate {
    /// `|mean - target| <= k * SE`, with a round-off floor for cases where
    /// every trial gives the same value.
    pub fn agrees(&self, k: f64) -> bool {
        (self.mean_ratio - self.target).abs() <= (k * self.std_error).max(1e-12)
    }

    pub fn z_score(&self) -> f64 {
        if self.std_error == 0.0 {
            0.0
        } else {
            (self.mean_ratio - self.target) / self.std_error
        }
    }
}

/// How far the post-communication average moved from the pre-communication
/// average.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragePreservation {
    /// Largest `|| ybar - xbar ||` over all trials.
    pub max_residual: f64,
    /// `|| xbar ||`, the scale `max_residual` is judged against.
    pub reference_norm: f64,
    /// Norm of the mean of `ybar - xbar` over trials.
    pub mean_residual_vector_norm: f64,
    /// `sqrt(sum_k Var_k / trials)`: CLT scale of `mean_residual_vector_norm`
    /// under a zero-mean drift.
    pub std_error: f64,
    /// Per-coordinate mean of `ybar - xbar` over trials.
    pub mean_drift: Vec<f64>,
    /// Per-coordinate standard error of `mean_drift`.
    pub drift_std_error: Vec<f64>,
    pub trials: u64,
}

impl AveragePreservation {
    pub fn relative_max_residual(&self) -> f64 {
        if self.reference_norm > 0.0 {
            self.max_residual / self.reference_norm
        } else {
            self.max_residual
        }
    }

    /// Every coordinate of the mean drift inside its `k`-SE band around zero.
    pub fn drift_within(&self, k: f64) -> bool {
        let floor = 1e-12 * self.reference_norm.max(1.0);
        self.mean_drift.iter().zip(&self.drift_std_error).all(|(m, se)| m.abs() <= (k * se).max(floor))
    }

    /// Largest `|mean_k| / SE_k` over coordinates (0 where the SE is 0).
    pub fn max_abs_z(&self) -> f64 {
        self.mean_drift
            .iter()
            .zip(&self.drift_std_error)
            .map(|(m, se)| if *se > 0.0 { m.abs() / se } else { 0.0 })
            .fold(0.0, f64::max)
    }
}

/// Second moment of the average's movement for the push variant, next to
/// its upper bound `(alpha_s / 2n) * (1/n^2) sum_ij ||x_i - x_j||^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AverageVariance {
    pub estimate: f64,
    pub std_error: f64,
    pub bound: f64,
    pub trials: u64,
}

impl AverageVariance {
    pub fn within_bound(&self, k: f64) -> bool {
        self.estimate <= self.bound + k * self.std_error + 1e-15
    }
}

/// Samples the round graph of `variant` and runs one uncapped
/// communication phase on `halves`.
pub fn communicate_once(variant: Variant, s: usize, halves: &[Arc<[f64]>], rng: &mut StreamRng) -> Result<Vec<Vec<f64>>> {
    let n = halves.len();
    let graph = match variant {
        Variant::Oracle => sample_regular_random(n, s, rng)?,
        Variant::Local => sample_s_out(n, s, rng)?,
    };
    communication_phase(&graph, halves, 0)
}

fn mean_of(vectors: &[Vec<f64>]) -> Vec<f64> {
    let d = vectors[0].len();
    let mut m = vec![0.0; d];
    for v in vectors {
        for (a, x) in m.iter_mut().zip(v) {
            *a += x;
        }
    }
    let inv = 1.0 / vectors.len() as f64;
    m.iter_mut().for_each(|a| *a *= inv);
    m
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `(1/n) sum_i ||x_i - center||^2`.
fn dispersion(vectors: &[Vec<f64>], center: &[f64]) -> f64 {
    vectors.iter().map(|v| sq_dist(v, center)).sum::<f64>() / vectors.len() as f64
}

fn check_vectors(vectors: &[Vec<f64>]) -> Result<usize> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::InvalidSize { n, reason: "need at least 2 vectors" });
    }
    let d = vectors[0].len();
    if d == 0 {
        return Err(Error::param("vectors", "vectors must have at least one coordinate"));
    }
    if let Some(v) = vectors.iter().find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: v.len() });
    }
    Ok(d)
}

#[derive(Clone)]
struct Acc {
    ratio: RunningStats,
    avg_shift_sq: RunningStats,
    drift: Vec<RunningStats>,
    max_residual: f64,
}

impl Acc {
    fn new(d: usize) -> Self {
        Self {
            ratio: RunningStats::new(),
            avg_shift_sq: RunningStats::new(),
            drift: vec![RunningStats::new(); d],
            max_residual: 0.0,
        }
    }

    fn merge(&mut self, other: &Acc) {
        self.ratio.merge(&other.ratio);
        self.avg_shift_sq.merge(&other.avg_shift_sq);
        for (a, b) in self.drift.iter_mut().zip(&other.drift) {
            a.merge(b);
        }
        self.max_residual = self.max_residual.max(other.max_residual);
    }
}

fn run_trials(variant: Variant, s: usize, vectors: &[Vec<f64>], trials: u64, seed: u64) -> Result<Acc> {
    let d = check_vectors(vectors)?;
    if trials == 0 {
        return Err(Error::param("trials", "need at least one trial"));
    }
    variant.contraction(vectors.len(), s)?;
    let halves: Vec<Arc<[f64]>> = vectors.iter().map(|v| Arc::from(v.as_slice())).collect();
    let xbar = mean_of(vectors);
    let base = dispersion(vectors, &xbar);
    let chunks = CHUNKS.min(trials);
    let partial: Vec<Result<Acc>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = trials / chunks + u64::from(c < trials % chunks);
            let mut rng = stream(seed, Purpose::MonteCarlo, c, variant as u64);
            let mut acc = Acc::new(d);
            for _ in 0..count {
                let ys = communicate_once(variant, s, &halves, &mut rng)?;
                if base > 0.0 {
                    acc.ratio.push(dispersion(&ys, &xbar) / base);
                }
                let ybar = mean_of(&ys);
                let shift_sq = sq_dist(&ybar, &xbar);
                acc.avg_shift_sq.push(shift_sq);
                acc.max_residual = acc.max_residual.max(shift_sq.sqrt());
                for ((st, y), x) in acc.drift.iter_mut().zip(&ybar).zip(&xbar) {
                    st.push(y - x);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = Acc::new(d);
    for p in partial {
        total.merge(&p?);
    }
    Ok(total)
}

/// Estimates `E[(1/n) sum_i ||y_i - xbar||^2] / ((1/n) sum_i ||x_i - xbar||^2)`
/// where `y` is one communication phase applied to `vectors` and `xbar` is
/// the average before communication. In expectation this equals the
/// variant's contraction factor exactly.
pub fn mc_contraction(
    variant: Variant,
    s: usize,
    vectors: &[Vec<f64>],
    trials: u64,
    seed: u64,
) -> Result<ContractionEstimate> {
    check_vectors(vectors)?;
    if dispersion(vectors, &mean_of(vectors)) == 0.0 {
        return Err(Error::DegenerateInput);
    }
    let target = variant.contraction(vectors.len(), s)?;
    let acc = run_trials(variant, s, vectors, trials, seed)?;
    Ok(ContractionEstimate {
        mean_ratio: acc.ratio.mean(),
        std_error: acc.ratio.std_error(),
        trials: acc.ratio.count(),
        target,
    })
}

/// Measures how well one communication phase keeps the average of
/// `vectors`: exact for the oracle variant, in expectation only for the
/// push variant.
pub fn check_average_preservation(
    variant: Variant,
    s: usize,
    vectors: &[Vec<f64>],
    trials: u64,
    seed: u64,
) -> Result<AveragePreservation> {
    let acc = run_trials(variant, s, vectors, trials, seed)?;
    let mean_drift: f64 = acc.drift.iter().map(|st| st.mean() * st.mean()).sum::<f64>().sqrt();
    let var_sum: f64 = acc.drift.iter().map(|st| st.variance()).sum();
    let xbar = mean_of(vectors);
    Ok(AveragePreservation {
        max_residual: acc.max_residual,
        reference_norm: xbar.iter().map(|x| x * x).sum::<f64>().sqrt(),
        mean_residual_vector_norm: mean_drift,
        std_error: (var_sum / trials as f64).sqrt(),
        mean_drift: acc.drift.iter().map(|st| st.mean()).collect(),
        drift_std_error: acc.drift.iter().map(|st| st.std_error()).collect(),
        trials,
    })
}

/// Monte Carlo estimate of `E||ybar - xbar||^2` for the push variant and its
/// bound. All-equal input gives zero for both.
pub fn mc_average_variance(s: usize, vectors: &[Vec<f64>], trials: u64, seed: u64) -> Result<AverageVariance> {
    let n = check_vectors(vectors).map(|_| vectors.len())?;
    let alpha = alpha_local(n, s)?;
    let xbar = mean_of(vectors);
    // (1/n^2) sum_ij ||x_i - x_j||^2 = 2 (1/n) sum_i ||x_i - xbar||^2
    let pairwise = 2.0 * dispersion(vectors, &xbar);
    let acc = run_trials(Variant::Local, s, vectors, trials, seed)?;
    Ok(AverageVariance {
        estimate: acc.avg_shift_sq.mean(),
        std_error: acc.avg_shift_sq.std_error(),
        bound: alpha / (2.0 * n as f64) * pairwise,
        trials,
    })
}

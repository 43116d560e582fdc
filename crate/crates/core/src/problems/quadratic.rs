use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Objective;
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// `f_i(x) = 1/2 x^T diag(curvature) x - b_i^T x` with gradient noise
/// `N(0, sigma^2 / d I)`, so `E||xi||^2 = sigma^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticEnsemble {
    pub curvature: Vec<f64>,
    pub offsets: Vec<Vec<f64>>,
    pub sigma: f64,
    mean_offset: Vec<f64>,
}

impl QuadraticEnsemble {
    pub fn new(curvature: Vec<f64>, offsets: Vec<Vec<f64>>, sigma: f64) -> Result<Self> {
        let d = curvature.len();
        if d == 0 || curvature.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::param("curvature", "needs d >= 1 positive finite entries"));
        }
        if offsets.len() < 2 {
            return Err(Error::param("n", "need at least two nodes"));
        }
        if let Some(b) = offsets.iter().find(|b| b.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: b.len() });
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", "must be finite and >= 0"));
        }
        let mean_offset = mean_of(&offsets);
        Ok(Self { curvature, offsets, sigma, mean_offset })
    }

    pub fn mean_offset(&self) -> &[f64] {
        &self.mean_offset
    }

    /// `(1/n) sum_i ||b_i - b_bar||^2`, which equals the heterogeneity at any x.
    pub fn offset_dispersion(&self) -> f64 {
        self.offsets
            .iter()
            .map(|b| b.iter().zip(&self.mean_offset).map(|(a, m)| (a - m).powi(2)).sum::<f64>())
            .sum::<f64>()
            / self.offsets.len() as f64
    }
}

pub(crate) fn mean_of(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; rows[0].len()];
    for r in rows {
        m.iter_mut().zip(r).for_each(|(a, b)| *a += b);
    }
    let inv = 1.0 / rows.len() as f64;
    m.iter_mut().for_each(|a| *a *= inv);
    m
}

pub(crate) fn add_noise(g: &mut [f64], sigma: f64, rng: &mut StreamRng) {
    if sigma == 0.0 {
        return;
    }
    let std = sigma / (g.len() as f64).sqrt();
    for v in g.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v += std * z;
    }
}

/// Log-uniform curvatures in `[L/10, L]` with the largest set to exactly `L`.
pub(crate) fn draw_curvature<R: Rng + ?Sized>(d: usize, l: f64, rng: &mut R) -> Vec<f64> {
    let lo = (l / 10.0).ln();
    let hi = l.ln();
    let mut k: Vec<f64> = (0..d).map(|_| (lo + (hi - lo) * rng.random::<f64>()).exp()).collect();
    let top = (0..d).max_by(|&a, &b| k[a].total_cmp(&k[b])).unwrap_or(0);
    k[top] = l;
    k
}

pub(crate) fn check_common(n: usize, d: usize, l: f64, h: f64, sigma: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::param("n", "need at least two nodes"));
    }
    if d == 0 {
        return Err(Error::param("d", "need d >= 1"));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::param("L", "must be positive"));
    }
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::param("H", "must be finite and >= 0"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::param("sigma", "must be finite and >= 0"));
    }
    Ok(())
}

/// Draws a quadratic ensemble whose offsets have dispersion exactly
/// `h_target^2` around their mean.
pub fn make_quadratic<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    l: f64,
    h_target: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<QuadraticEnsemble> {
    check_common(n, d, l, h_target, sigma)?;
    let curvature = draw_curvature(d, l, rng);
    let raw: Vec<Vec<f64>> =
        (0..n).map(|_| (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect()).collect();
    let center = mean_of(&raw);
    let dev: Vec<Vec<f64>> = raw.iter().map(|b| b.iter().zip(&center).map(|(a, c)| a - c).collect()).collect();
    let spread = dev.iter().map(|e| e.iter().map(|x| x * x).sum::<f64>()).sum::<f64>() / n as f64;
    let scale = if spread > 0.0 { h_target / spread.sqrt() } else { 0.0 };
    let offsets = dev.iter().map(|e| e.iter().zip(&center).map(|(x, c)| c + scale * x).collect()).collect();
    QuadraticEnsemble::new(curvature, offsets, sigma)
}

impl Objective for QuadraticEnsemble {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn nodes(&self) -> usize {
        self.offsets.len()
    }

    fn dim(&self) -> usize {
        self.curvature.len()
    }

    fn local_loss(&self, i: usize, x: &[f64]) -> f64 {
        self.curvature.iter().zip(x).zip(&self.offsets[i]).map(|((k, x), b)| 0.5 * k * x * x - b * x).sum()
    }

    fn local_grad(&self, i: usize, x: &[f64]) -> Vec<f64> {
        self.curvature.iter().zip(x).zip(&self.offsets[i]).map(|((k, x), b)| k * x - b).collect()
    }

    fn stochastic_grad(&self, i: usize, x: &[f64], rng: &mut StreamRng) -> Vec<f64> {
        let mut g = self.local_grad(i, x);
        add_noise(&mut g, self.sigma, rng);
        g
    }

    fn global_loss(&self, x: &[f64]) -> f64 {
        self.curvature.iter().zip(x).zip(&self.mean_offset).map(|((k, x), b)| 0.5 * k * x * x - b * x).sum()
    }

    fn global_grad(&self, x: &[f64]) -> Vec<f64> {
        self.curvature.iter().zip(x).zip(&self.mean_offset).map(|((k, x), b)| k * x - b).collect()
    }

    fn optimum(&self) -> (Vec<f64>, f64) {
        let x: Vec<f64> = self.mean_offset.iter().zip(&self.curvature).map(|(b, k)| b / k).collect();
        let f = -0.5 * self.mean_offset.iter().zip(&self.curvature).map(|(b, k)| b * b / k).sum::<f64>();
        (x, f)
    }

    fn smoothness(&self) -> f64 {
        self.curvature.iter().cloned().fold(0.0, f64::max)
    }

    fn noise_sigma(&self) -> f64 {
        self.sigma
    }

    fn heterogeneity(&self) -> f64 {
        self.offset_dispersion().sqrt()
    }
}

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dataset::dirichlet_weights;
use super::quadratic::{add_noise, check_common, draw_curvature, mean_of};
use super::Objective;
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Node `i` holds the class-weighted sum of class quadratics
/// `f_i(x) = sum_c w_ic * 1/2 (x - mu_c)^T diag(kappa_c) (x - mu_c)`,
/// with label weights `w_i ~ Dirichlet(alpha)`. Curvature and linear term
/// both vary across nodes, so the node models disagree on the shape of the
/// loss and not only on its minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletQuadratic {
    pub weights: Vec<Vec<f64>>,
    pub sigma: f64,
    curvature: Vec<Vec<f64>>,
    linear: Vec<Vec<f64>>,
    constant: Vec<f64>,
    mean_curvature: Vec<f64>,
    mean_linear: Vec<f64>,
    mean_constant: f64,
}

impl DirichletQuadratic {
    fn assemble(weights: Vec<Vec<f64>>, kappa: &[Vec<f64>], mu: &[Vec<f64>], sigma: f64) -> Self {
        let d = kappa[0].len();
        let mut curvature = Vec::with_capacity(weights.len());
        let mut linear = Vec::with_capacity(weights.len());
        let mut constant = Vec::with_capacity(weights.len());
        for w in &weights {
            let mut k = vec![0.0; d];
            let mut b = vec![0.0; d];
            let mut c = 0.0;
            for ((wc, kc), mc) in w.iter().zip(kappa).zip(mu) {
                for j in 0..d {
                    k[j] += wc * kc[j];
                    b[j] += wc * kc[j] * mc[j];
                    c += 0.5 * wc * kc[j] * mc[j] * mc[j];
                }
            }
            curvature.push(k);
            linear.push(b);
            constant.push(c);
        }
        let mean_curvature = mean_of(&curvature);
        let mean_linear = mean_of(&linear);
        let mean_constant = constant.iter().sum::<f64>() / constant.len() as f64;
        Self { weights, sigma, curvature, linear, constant, mean_curvature, mean_linear, mean_constant }
    }

    pub fn node_curvature(&self, i: usize) -> &[f64] {
        &self.curvature[i]
    }
}

/// Draws `classes` class quadratics (curvatures log-uniform in `[L/10, L]`,
/// centers Gaussian) and per-node Dirichlet(alpha) label weights, then
/// rescales the centers so the heterogeneity at the global optimum is
/// exactly `h_target`.
#[allow(clippy::too_many_arguments)]
pub fn make_dirichlet_quadratic<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    l: f64,
    h_target: f64,
    sigma: f64,
    classes: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<DirichletQuadratic> {
    check_common(n, d, l, h_target, sigma)?;
    if classes == 0 {
        return Err(Error::param("classes", "need at least one class"));
    }
    let kappa: Vec<Vec<f64>> = (0..classes).map(|_| draw_curvature(d, l, rng)).collect();
    let mu: Vec<Vec<f64>> =
        (0..classes).map(|_| (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect()).collect();
    let weights = (0..n).map(|_| dirichlet_weights(alpha, classes, rng)).collect::<Result<Vec<_>>>()?;
    let unit = DirichletQuadratic::assemble(weights.clone(), &kappa, &mu, sigma);
    let h = unit.heterogeneity();
    let scale = if h > 0.0 { h_target / h } else { 0.0 };
    let mu: Vec<Vec<f64>> = mu.iter().map(|m| m.iter().map(|v| v * scale).collect()).collect();
    Ok(DirichletQuadratic::assemble(weights, &kappa, &mu, sigma))
}

impl Objective for DirichletQuadratic {
    fn name(&self) -> &str {
        "dirichlet-quadratic"
    }

    fn nodes(&self) -> usize {
        self.weights.len()
    }

    fn dim(&self) -> usize {
        self.mean_curvature.len()
    }

    fn local_loss(&self, i: usize, x: &[f64]) -> f64 {
        let q: f64 =
            self.curvature[i].iter().zip(x).zip(&self.linear[i]).map(|((k, x), b)| 0.5 * k * x * x - b * x).sum();
        q + self.constant[i]
    }

    fn local_grad(&self, i: usize, x: &[f64]) -> Vec<f64> {
        self.curvature[i].iter().zip(x).zip(&self.linear[i]).map(|((k, x), b)| k * x - b).collect()
    }

    fn stochastic_grad(&self, i: usize, x: &[f64], rng: &mut StreamRng) -> Vec<f64> {
        let mut g = self.local_grad(i, x);
        add_noise(&mut g, self.sigma, rng);
        g
    }

    fn global_loss(&self, x: &[f64]) -> f64 {
        let q: f64 =
            self.mean_curvature.iter().zip(x).zip(&self.mean_linear).map(|((k, x), b)| 0.5 * k * x * x - b * x).sum();
        q + self.mean_constant
    }

    fn global_grad(&self, x: &[f64]) -> Vec<f64> {
        self.mean_curvature.iter().zip(x).zip(&self.mean_linear).map(|((k, x), b)| k * x - b).collect()
    }

    fn optimum(&self) -> (Vec<f64>, f64) {
        let x: Vec<f64> = self.mean_linear.iter().zip(&self.mean_curvature).map(|(b, k)| b / k).collect();
        let f = self.mean_constant
            - 0.5 * self.mean_linear.iter().zip(&self.mean_curvature).map(|(b, k)| b * b / k).sum::<f64>();
        (x, f)
    }

    fn smoothness(&self) -> f64 {
        self.curvature.iter().flatten().cloned().fold(0.0, f64::max)
    }

    fn noise_sigma(&self) -> f64 {
        self.sigma
    }
}

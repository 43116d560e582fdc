use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use super::dataset::LabeledDataset;
use super::Objective;
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Linear classifier with squared loss on one-hot targets and a ridge term:
/// `f_i(W) = (1/m_i) sum_k 1/2 ||W a_k - e_{y_k}||^2 + ridge/2 ||W||^2`,
/// where `a_k` is the feature vector with a trailing 1. `W` is stored row
/// major as a flat vector of length `classes * (features + 1)`. Nodes that
/// received no data keep only the ridge term.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    classes: usize,
    width: usize,
    ridge: f64,
    batch: usize,
    /// Augmented features and labels held by each node.
    items: Vec<Vec<(Vec<f64>, usize)>>,
    gram: Vec<DMatrix<f64>>,
    cross: Vec<DMatrix<f64>>,
    optimum: Vec<f64>,
    optimum_value: f64,
    smoothness: f64,
    sigma: f64,
}

impl LeastSquares {
    pub fn new(data: &LabeledDataset, parts: &[Vec<usize>], ridge: f64, batch: usize) -> Result<Self> {
        if parts.len() < 2 {
            return Err(Error::param("n", "need at least two nodes"));
        }
        if !(ridge > 0.0 && ridge.is_finite()) {
            return Err(Error::param("ridge", "must be positive"));
        }
        if batch == 0 {
            return Err(Error::param("batch", "must be at least 1"));
        }
        let classes = data.classes;
        let width = data.feature_dim() + 1;
        let mut items = Vec::with_capacity(parts.len());
        let mut gram = Vec::with_capacity(parts.len());
        let mut cross = Vec::with_capacity(parts.len());
        for part in parts {
            let mut g = DMatrix::zeros(width, width);
            let mut r = DMatrix::zeros(classes, width);
            let mut held = Vec::with_capacity(part.len());
            for &k in part {
                if k >= data.len() {
                    return Err(Error::OutOfRange { id: k, n: data.len() });
                }
                let idx = k;
                let mut a = data.features[idx].clone();
                a.push(1.0);
                let av = DMatrix::from_column_slice(width, 1, &a);
                g += &av * av.transpose();
                let y = data.labels[idx];
                for j in 0..width {
                    r[(y, j)] += a[j];
                }
                held.push((a, y));
            }
            if !part.is_empty() {
                let inv = 1.0 / part.len() as f64;
                g *= inv;
                r *= inv;
            }
            items.push(held);
            gram.push(g);
            cross.push(r);
        }
        let mut out = Self {
            classes,
            width,
            ridge,
            batch,
            items,
            gram,
            cross,
            optimum: Vec::new(),
            optimum_value: 0.0,
            smoothness: 0.0,
            sigma: 0.0,
        };
        out.smoothness =
            out.gram.iter().map(|g| SymmetricEigen::new(g.clone()).eigenvalues.max()).fold(0.0, f64::max) + ridge;
        let n = out.gram.len() as f64;
        let g_bar = out.gram.iter().fold(DMatrix::zeros(width, width), |acc, g| acc + g) / n
            + DMatrix::identity(width, width) * ridge;
        let r_bar = out.cross.iter().fold(DMatrix::zeros(classes, width), |acc, r| acc + r) / n;
        let chol = g_bar.cholesky().ok_or_else(|| Error::Dataset("normal equations are singular".into()))?;
        let w_t = chol.solve(&r_bar.transpose());
        out.optimum = (0..classes).flat_map(|c| (0..width).map(move |j| (c, j))).map(|(c, j)| w_t[(j, c)]).collect();
        out.optimum_value = out.global_loss(&out.optimum);
        out.sigma = (0..out.items.len()).map(|i| out.noise_sq_at(i, &out.optimum.clone())).fold(0.0, f64::max).sqrt();
        Ok(out)
    }

    fn residual(&self, x: &[f64], a: &[f64], y: usize) -> Vec<f64> {
        (0..self.classes)
            .map(|c| {
                let row = &x[c * self.width..(c + 1) * self.width];
                row.iter().zip(a).map(|(w, v)| w * v).sum::<f64>() - if c == y { 1.0 } else { 0.0 }
            })
            .collect()
    }

    /// Variance of the minibatch gradient of node `i` at `x`.
    fn noise_sq_at(&self, i: usize, x: &[f64]) -> f64 {
        let held = &self.items[i];
        if held.is_empty() {
            return 0.0;
        }
        let m = held.len() as f64;
        let second: f64 = held
            .iter()
            .map(|(a, y)| {
                let u = self.residual(x, a, *y);
                u.iter().map(|v| v * v).sum::<f64>() * a.iter().map(|v| v * v).sum::<f64>()
            })
            .sum::<f64>()
            / m;
        let data_grad: f64 = self
            .local_grad(i, x)
            .iter()
            .zip(x)
            .map(|(g, w)| (g - self.ridge * w).powi(2))
            .sum();
        ((second - data_grad) / self.batch as f64).max(0.0)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn items_per_node(&self) -> Vec<usize> {
        self.items.iter().map(Vec::len).collect()
    }
}

impl Objective for LeastSquares {
    fn name(&self) -> &str {
        "dataset"
    }

    fn nodes(&self) -> usize {
        self.items.len()
    }

    fn dim(&self) -> usize {
        self.classes * self.width
    }

    fn local_loss(&self, i: usize, x: &[f64]) -> f64 {
        let w = DMatrix::from_row_slice(self.classes, self.width, x);
        let quad = (&w * &self.gram[i]).component_mul(&w).sum();
        let lin = w.component_mul(&self.cross[i]).sum();
        let constant = if self.items[i].is_empty() { 0.0 } else { 0.5 };
        0.5 * quad - lin + constant + 0.5 * self.ridge * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn local_grad(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let w = DMatrix::from_row_slice(self.classes, self.width, x);
        let g = &w * &self.gram[i] - &self.cross[i] + &w * self.ridge;
        (0..self.classes).flat_map(|c| (0..self.width).map(move |j| (c, j))).map(|(c, j)| g[(c, j)]).collect()
    }

    fn stochastic_grad(&self, i: usize, x: &[f64], rng: &mut StreamRng) -> Vec<f64> {
        let held = &self.items[i];
        let mut g: Vec<f64> = x.iter().map(|w| self.ridge * w).collect();
        if held.is_empty() {
            return g;
        }
        let scale = 1.0 / self.batch as f64;
        for _ in 0..self.batch {
            let (a, y) = &held[rng.random_range(0..held.len())];
            let u = self.residual(x, a, *y);
            for c in 0..self.classes {
                for j in 0..self.width {
                    g[c * self.width + j] += scale * u[c] * a[j];
                }
            }
        }
        g
    }

    fn optimum(&self) -> (Vec<f64>, f64) {
        (self.optimum.clone(), self.optimum_value)
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }

    /// Largest per-node minibatch gradient noise, evaluated at the optimum.
    fn noise_sigma(&self) -> f64 {
        self.sigma
    }
}

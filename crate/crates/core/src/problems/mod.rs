//! Synthetic objectives with known smoothness, noise, heterogeneity and
//! optimum, and the Dirichlet label partitioner.

mod dataset;
mod least_squares;
mod mixture;
mod quadratic;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use dataset::{dirichlet_partition, dirichlet_weights, LabeledDataset};
pub use least_squares::LeastSquares;
pub use mixture::{make_dirichlet_quadratic, DirichletQuadratic};
pub use quadratic::{make_quadratic, QuadraticEnsemble};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose, StreamRng};

/// The global objective `F(x) = (1/n) sum_i f_i(x)` split across `n` nodes.
pub trait Objective: Send + Sync {
    fn name(&self) -> &str;
    fn nodes(&self) -> usize;
    fn dim(&self) -> usize;

    fn local_loss(&self, i: usize, x: &[f64]) -> f64;
    fn local_grad(&self, i: usize, x: &[f64]) -> Vec<f64>;

    /// Unbiased stochastic gradient of `f_i` at `x`.
    fn stochastic_grad(&self, i: usize, x: &[f64], rng: &mut StreamRng) -> Vec<f64>;

    fn global_loss(&self, x: &[f64]) -> f64 {
        (0..self.nodes()).map(|i| self.local_loss(i, x)).sum::<f64>() / self.nodes() as f64
    }

    fn global_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for i in 0..self.nodes() {
            for (a, b) in g.iter_mut().zip(self.local_grad(i, x)) {
                *a += b;
            }
        }
        let inv = 1.0 / self.nodes() as f64;
        g.iter_mut().for_each(|a| *a *= inv);
        g
    }

    /// Minimizer of `F` and the minimum value.
    fn optimum(&self) -> (Vec<f64>, f64);

    /// Lipschitz constant of every local gradient.
    fn smoothness(&self) -> f64;

    /// Square root of the second moment of the gradient noise.
    fn noise_sigma(&self) -> f64;

    /// `(1/n) sum_i ||grad f_i(x) - grad F(x)||^2`.
    fn heterogeneity_sq(&self, x: &[f64]) -> f64 {
        let g = self.global_grad(x);
        (0..self.nodes())
            .map(|i| self.local_grad(i, x).iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum::<f64>()
            / self.nodes() as f64
    }

    /// Heterogeneity bound used by the step-size and drift formulas. Exact
    /// for objectives where the quantity does not depend on `x`.
    fn heterogeneity(&self) -> f64 {
        let (x_star, _) = self.optimum();
        self.heterogeneity_sq(&x_star).sqrt()
    }
}

fn default_classes() -> usize {
    10
}

fn default_alpha() -> f64 {
    0.1
}

fn default_ridge() -> f64 {
    1e-3
}

fn default_batch() -> usize {
    1
}

/// Where the labeled data of a dataset problem comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DataSource {
    /// CSV file with a header row; the last column is the integer label.
    Csv { path: PathBuf },
    /// Gaussian class clusters.
    Gaussian { classes: usize, per_class: usize, features: usize, separation: f64 },
}

/// Problem section of an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Shared diagonal curvature, node-specific linear terms.
    Quadratic {
        #[serde(rename = "L")]
        smoothness: f64,
        #[serde(rename = "H")]
        heterogeneity: f64,
        sigma: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Node objectives mixing class quadratics with Dirichlet label weights.
    DirichletQuadratic {
        #[serde(rename = "L")]
        smoothness: f64,
        #[serde(rename = "H")]
        heterogeneity: f64,
        sigma: f64,
        #[serde(default = "default_classes")]
        classes: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Squared-loss linear classifier on Dirichlet-partitioned data.
    Dataset {
        data: DataSource,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_ridge")]
        ridge: f64,
        #[serde(default = "default_batch")]
        batch: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
}

impl ProblemSpec {
    pub fn seed(&self) -> Option<u64> {
        match self {
            ProblemSpec::Quadratic { seed, .. }
            | ProblemSpec::DirichletQuadratic { seed, .. }
            | ProblemSpec::Dataset { seed, .. } => *seed,
        }
    }

    fn rng(&self, run_seed: u64) -> StreamRng {
        stream(self.seed().unwrap_or(run_seed), Purpose::Problem, 0, 0)
    }

    /// Instantiates the objective for `n` nodes. `d` is required for the
    /// quadratic kinds; for datasets it is derived and, if given, checked.
    pub fn build(&self, n: usize, d: Option<usize>, run_seed: u64) -> Result<Arc<dyn Objective>> {
        let mut rng = self.rng(run_seed);
        let need_d = || d.ok_or_else(|| Error::param("d", "quadratic problems need a dimension"));
        Ok(match self {
            ProblemSpec::Quadratic { smoothness, heterogeneity, sigma, .. } => {
                Arc::new(make_quadratic(n, need_d()?, *smoothness, *heterogeneity, *sigma, &mut rng)?)
            }
            ProblemSpec::DirichletQuadratic { smoothness, heterogeneity, sigma, classes, alpha, .. } => Arc::new(
                make_dirichlet_quadratic(n, need_d()?, *smoothness, *heterogeneity, *sigma, *classes, *alpha, &mut rng)?,
            ),
            ProblemSpec::Dataset { data, alpha, ridge, batch, .. } => {
                let dataset = match data {
                    DataSource::Csv { path } => LabeledDataset::from_csv_path(path)?,
                    DataSource::Gaussian { classes, per_class, features, separation } => {
                        LabeledDataset::gaussian_clusters(*classes, *per_class, *features, *separation, &mut rng)?
                    }
                };
                let parts = dirichlet_partition(&dataset, *alpha, n, &mut rng)?;
                let problem = LeastSquares::new(&dataset, &parts, *ridge, *batch)?;
                if let Some(d) = d {
                    if d != problem.dim() {
                        return Err(Error::param(
                            "d",
                            format!("dataset problem has dimension {}, config says {d}", problem.dim()),
                        ));
                    }
                }
                Arc::new(problem)
            }
        })
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::Objective;

    /// Central finite-difference check of `local_grad` against `local_loss`.
    pub fn check_gradients(obj: &dyn Objective, x: &[f64]) {
        let h = 1e-5;
        for i in 0..obj.nodes() {
            let g = obj.local_grad(i, x);
            for k in 0..obj.dim() {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[k] += h;
                xm[k] -= h;
                let fd = (obj.local_loss(i, &xp) - obj.local_loss(i, &xm)) / (2.0 * h);
                assert!((fd - g[k]).abs() <= 1e-6 * (1.0 + g[k].abs()), "node {i} coord {k}: fd {fd} vs {}", g[k]);
            }
        }
    }
}

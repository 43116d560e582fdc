//! Synchronous round loop over all nodes, with per-round metrics.
//!
//! A round is: every node takes its local stochastic gradient step(s), the
//! round's graph is drawn (or the static one reused), every node receives the
//! half-step models of its in-neighbors and averages them with its own. No
//! node aggregates before all half-step models of the round exist.

mod compare;
mod output;
mod theory;

use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use compare::{compare, Comparison, ComparisonRow, RunSummary};
pub use output::{write_metrics_csv, write_metrics_jsonl, Manifest, METRIC_COLUMNS};
pub use theory::{drift_bound, theoretical_stepsize};

use crate::error::{Error, Result};
use crate::mixing::Variant;
use crate::problems::{Objective, ProblemSpec};
use crate::protocol::{aggregate, apply_indegree_cap, inbox, local_step, ModelMessage, NodeState};
use crate::rng::{cap_rng, gradient_rng, stream, topology_rng, Purpose};
use crate::topology::{TopologyKind, TopologyRegistry, TopologySampler};

/// Topology section of a config: a registry name plus the sample size for
/// the kinds that take one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
}

impl TopologySpec {
    pub fn new(kind: TopologyKind) -> Self {
        Self { kind: kind.name().to_string(), s: kind.sample_size() }
    }

    /// The built-in kind, if the name is one.
    pub fn builtin(&self) -> Option<TopologyKind> {
        TopologyRegistry::kind_from_name(&self.kind, self.s).ok()
    }

    pub fn label(&self) -> String {
        match self.s {
            Some(s) => format!("{}(s={s})", self.kind),
            None => self.kind.clone(),
        }
    }
}

impl From<TopologyKind> for TopologySpec {
    fn from(kind: TopologyKind) -> Self {
        Self::new(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Directive {
    Theoretical,
}

/// Either an explicit step size or `"theoretical"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSize {
    Fixed(f64),
    Directive(Directive),
}

impl StepSize {
    pub const THEORETICAL: StepSize = StepSize::Directive(Directive::Theoretical);
}

/// Initial models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitSpec {
    #[default]
    Zeros,
    /// Every node starts at this point.
    Point(Vec<f64>),
    /// Node `i` starts at an independent `N(0, std^2 I)` draw.
    Gaussian { std: f64 },
}

fn default_metrics_every() -> u64 {
    1
}

fn default_steps() -> u32 {
    1
}

/// Everything a run needs. Two equal configs produce identical output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologySpec,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(alias = "T")]
    pub rounds: u64,
    pub gamma: StepSize,
    pub problem: ProblemSpec,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indegree_cap: Option<usize>,
    #[serde(default = "default_metrics_every")]
    pub metrics_every: u64,
    /// Local SGD steps per round; the protocol takes one.
    #[serde(default = "default_steps")]
    pub steps_per_round: u32,
    #[serde(default)]
    pub x0: InitSpec,
}

impl ExperimentConfig {
    /// Config with the defaults for the optional fields.
    pub fn new(
        topology: impl Into<TopologySpec>,
        n: usize,
        d: Option<usize>,
        rounds: u64,
        gamma: StepSize,
        problem: ProblemSpec,
        seed: u64,
    ) -> Self {
        Self {
            topology: topology.into(),
            n,
            d,
            rounds,
            gamma,
            problem,
            seed,
            indegree_cap: None,
            metrics_every: 1,
            steps_per_round: 1,
            x0: InitSpec::Zeros,
        }
    }

    /// Structural checks that need no problem instance.
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidSize { n: self.n, reason: "need at least 2 nodes" });
        }
        if self.rounds == 0 {
            return Err(Error::param("T", "need at least one round"));
        }
        if self.metrics_every == 0 {
            return Err(Error::param("metrics_every", "must be at least 1"));
        }
        if self.steps_per_round == 0 {
            return Err(Error::param("steps_per_round", "must be at least 1"));
        }
        if let StepSize::Fixed(g) = self.gamma {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::param("gamma", format!("must be finite and >= 0, got {g}")));
            }
        }
        if let Some(k) = self.indegree_cap {
            if k == 0 {
                return Err(Error::param("indegree_cap", "must be at least 1"));
            }
        }
        if let InitSpec::Gaussian { std } = self.x0 {
            if !(std >= 0.0 && std.is_finite()) {
                return Err(Error::param("x0", "std must be finite and >= 0"));
            }
        }
        if let Some(kind) = self.topology.builtin() {
            kind.validate(self.n)?;
        }
        Ok(())
    }

    /// Notes on settings that depart from the one-step protocol.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.steps_per_round > 1 {
            out.push(format!(
                "steps_per_round = {} takes several local steps per round; the analyzed protocol takes one",
                self.steps_per_round
            ));
        }
        out
    }
}

/// State of the whole system after one round, as reported in metric files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    /// Number of completed rounds.
    pub round: u64,
    /// `(1/n) sum_i ||grad F(x_i)||^2`.
    pub avg_grad_norm_sq: f64,
    /// `(1/n^2) sum_ij ||x_i - x_j||^2`.
    pub consensus: f64,
    /// `F(x_bar)`.
    pub loss_at_avg: f64,
    /// `F(x_bar) - F*`.
    pub gap_to_opt: f64,
    /// Models sent in this round.
    pub messages_sent: u64,
    pub bytes_sent: u64,
}

/// Constants a run resolved from its problem and topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub dim: usize,
    pub smoothness: f64,
    pub sigma: f64,
    pub heterogeneity: f64,
    pub delta0: f64,
    pub optimum_value: f64,
    pub gamma: f64,
    /// Expected contraction factor per communication phase, for kinds with
    /// a closed form.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift_bound: Option<f64>,
}

/// `(1/n^2) sum_ij ||x_i - x_j||^2`, computed as `(2/n) sum_i ||x_i - x_bar||^2`.
pub fn consensus_distance(models: &[Vec<f64>]) -> f64 {
    let avg = average(models);
    2.0 * models.iter().map(|x| x.iter().zip(&avg).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sum::<f64>()
        / models.len() as f64
}

pub fn average(models: &[Vec<f64>]) -> Vec<f64> {
    let mut avg = vec![0.0; models[0].len()];
    for x in models {
        avg.iter_mut().zip(x).for_each(|(a, b)| *a += b);
    }
    let inv = 1.0 / models.len() as f64;
    avg.iter_mut().for_each(|a| *a *= inv);
    avg
}

/// Counts of one round's traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Traffic {
    pub messages: u64,
    pub bytes: u64,
}

/// A run in progress.
pub struct Simulation {
    config: ExperimentConfig,
    objective: Arc<dyn Objective>,
    sampler: Box<dyn TopologySampler>,
    models: Vec<Vec<f64>>,
    round: u64,
    derived: DerivedConstants,
}

impl Simulation {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        Self::with_registry(config, &TopologyRegistry::default())
    }

    pub fn with_registry(config: &ExperimentConfig, registry: &TopologyRegistry) -> Result<Self> {
        config.validate()?;
        let objective = config.problem.build(config.n, config.d, config.seed)?;
        Self::with_objective(config, objective, registry)
    }

    /// Runs `config` on a caller-supplied objective; the config's problem
    /// section is then only used for comparability checks.
    pub fn with_objective(
        config: &ExperimentConfig,
        objective: Arc<dyn Objective>,
        registry: &TopologyRegistry,
    ) -> Result<Self> {
        config.validate()?;
        if objective.nodes() != config.n {
            return Err(Error::param("n", format!("config has n = {}, problem has {} nodes", config.n, objective.nodes())));
        }
        let d = objective.dim();
        if let Some(cd) = config.d {
            if cd != d {
                return Err(Error::DimensionMismatch { expected: d, got: cd });
            }
        }
        let sampler = registry.build(
            &config.topology.kind,
            config.n,
            config.topology.s,
            &mut stream(config.seed, Purpose::Topology, u64::MAX, 0),
        )?;
        let models = init_models(&config.x0, config.n, d, config.seed)?;
        let (_, optimum_value) = objective.optimum();
        let delta0 = objective.global_loss(&average(&models)) - optimum_value;
        let (smoothness, sigma, heterogeneity) =
            (objective.smoothness(), objective.noise_sigma(), objective.heterogeneity());
        let contraction = sampler.contraction();
        let gamma = match config.gamma {
            StepSize::Fixed(g) => g,
            StepSize::Directive(Directive::Theoretical) => {
                let kind = config.topology.builtin();
                let variant = kind.and_then(Variant::of).ok_or_else(|| {
                    Error::param("gamma", "\"theoretical\" needs an el-oracle or el-local topology")
                })?;
                let s = kind.and_then(|k| k.sample_size()).unwrap_or(1);
                theoretical_stepsize(variant, config.n, s, config.rounds, smoothness, sigma, heterogeneity, delta0)?
            }
        };
        let drift = match contraction {
            Some(c) if c < 1.0 && gamma > 0.0 && gamma <= 1.0 / (20.0 * smoothness) => {
                drift_bound(c, gamma, sigma, heterogeneity).ok()
            }
            _ => None,
        };
        let derived = DerivedConstants {
            dim: d,
            smoothness,
            sigma,
            heterogeneity,
            delta0,
            optimum_value,
            gamma,
            contraction,
            drift_bound: drift,
        };
        Ok(Self { config: config.clone(), objective, sampler, models, round: 0, derived })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn objective(&self) -> &Arc<dyn Objective> {
        &self.objective
    }

    pub fn derived(&self) -> &DerivedConstants {
        &self.derived
    }

    pub fn gamma(&self) -> f64 {
        self.derived.gamma
    }

    /// Rounds completed so far.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn models(&self) -> &[Vec<f64>] {
        &self.models
    }

    pub fn average(&self) -> Vec<f64> {
        average(&self.models)
    }

    /// Local phase of the current round: each node's half-step model.
    pub fn local_phase(&self) -> Result<Vec<Vec<f64>>> {
        let (seed, t, gamma) = (self.config.seed, self.round, self.derived.gamma);
        let steps = self.config.steps_per_round;
        let objective = &self.objective;
        self.models
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let mut state = NodeState { id: i, model: x.clone(), round: t };
                for step in 0..steps {
                    let mut rng = gradient_rng(seed, i, t, step);
                    let g = objective.stochastic_grad(i, &state.model, &mut rng);
                    state.model = local_step(&state, &g, gamma).map_err(|_| Error::Diverged { round: t })?;
                }
                Ok(state.model)
            })
            .collect()
    }

    /// Executes one full round.
    pub fn step(&mut self) -> Result<Traffic> {
        let t = self.round;
        let halves: Vec<Arc<[f64]>> = self.local_phase()?.into_iter().map(Arc::from).collect();
        let graph = self.sampler.graph(t, &mut topology_rng(self.config.seed, t))?;
        if graph.n() != self.config.n {
            return Err(Error::DimensionMismatch { expected: self.config.n, got: graph.n() });
        }
        let senders = graph.in_adjacency();
        let (seed, cap) = (self.config.seed, self.config.indegree_cap);
        let next: Vec<Vec<f64>> = senders
            .par_iter()
            .enumerate()
            .map(|(i, from)| {
                let mut received = inbox(from, &halves, t);
                if let Some(k) = cap {
                    received = apply_indegree_cap(received, k, &mut cap_rng(seed, i, t));
                }
                aggregate(&halves[i], t, &received)
            })
            .collect::<Result<_>>()?;
        if next.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { round: t });
        }
        self.models = next;
        self.round += 1;
        let messages = graph.message_count() as u64;
        Ok(Traffic { messages, bytes: messages * ModelMessage::encoded_len(self.derived.dim) as u64 })
    }

    /// Metrics of the current models.
    pub fn metrics(&self, traffic: Traffic) -> RoundMetrics {
        let objective = &self.objective;
        let avg_grad_norm_sq = self
            .models
            .par_iter()
            .map(|x| objective.global_grad(x).iter().map(|g| g * g).sum::<f64>())
            .sum::<f64>()
            / self.models.len() as f64;
        let loss_at_avg = objective.global_loss(&self.average());
        RoundMetrics {
            round: self.round,
            avg_grad_norm_sq,
            consensus: consensus_distance(&self.models),
            loss_at_avg,
            gap_to_opt: loss_at_avg - self.derived.optimum_value,
            messages_sent: traffic.messages,
            bytes_sent: traffic.bytes,
        }
    }

    /// Runs the remaining rounds and returns the sampled metrics.
    pub fn run_to_end(&mut self) -> Result<Vec<RoundMetrics>> {
        let mut out = Vec::with_capacity((self.config.rounds / self.config.metrics_every) as usize);
        while self.round < self.config.rounds {
            let traffic = self.step()?;
            if self.round.is_multiple_of(self.config.metrics_every) {
                out.push(self.metrics(traffic));
            }
        }
        Ok(out)
    }
}

fn init_models(x0: &InitSpec, n: usize, d: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    Ok(match x0 {
        InitSpec::Zeros => vec![vec![0.0; d]; n],
        InitSpec::Point(p) => {
            if p.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: p.len() });
            }
            vec![p.clone(); n]
        }
        InitSpec::Gaussian { std } => (0..n)
            .map(|i| {
                let mut rng = stream(seed, Purpose::Init, i as u64, 0);
                (0..d).map(|_| std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect()
            })
            .collect(),
    })
}

/// Result of a complete run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub metrics: Vec<RoundMetrics>,
    pub derived: DerivedConstants,
    pub final_average: Vec<f64>,
}

/// Runs `config` to completion with the built-in topologies.
pub fn run(config: &ExperimentConfig) -> Result<Vec<RoundMetrics>> {
    Ok(run_full(config)?.metrics)
}

pub fn run_full(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut sim = Simulation::new(config)?;
    let metrics = sim.run_to_end()?;
    Ok(RunOutput { metrics, derived: sim.derived.clone(), final_average: sim.average() })
}

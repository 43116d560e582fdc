//! Topology strategies selectable by name.
//!
//! Every topology a run can use sits behind [`TopologySampler`]. The default
//! [`TopologyRegistry`] knows the six built-in kinds; callers may register
//! further samplers under new names and select them from a config file.

use std::borrow::Cow;
use std::collections::BTreeMap;

use super::graph::RoundGraph;
use super::samplers::{build_static, sample_regular_random, sample_s_out, TopologyKind};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Produces the communication graph of each round.
pub trait TopologySampler: Send + Sync {
    fn name(&self) -> &str;

    /// Whether a fresh graph is drawn every round.
    fn is_dynamic(&self) -> bool;

    /// Graph used in `round`. Static samplers ignore `rng` and hand back the
    /// graph they were built with.
    fn graph(&self, round: u64, rng: &mut StreamRng) -> Result<Cow<'_, RoundGraph>>;

    /// Expected contraction factor of one communication phase, when a
    /// closed form is known.
    fn contraction(&self) -> Option<f64> {
        None
    }
}

struct ElOracle {
    n: usize,
    s: usize,
}

impl TopologySampler for ElOracle {
    fn name(&self) -> &str {
        "el-oracle"
    }
    fn is_dynamic(&self) -> bool {
        true
    }
    fn graph(&self, round: u64, rng: &mut StreamRng) -> Result<Cow<'_, RoundGraph>> {
        Ok(Cow::Owned(sample_regular_random(self.n, self.s, rng)?.with_round(round)))
    }
    fn contraction(&self) -> Option<f64> {
        crate::mixing::lambda_oracle(self.n, self.s).ok()
    }
}

struct ElLocal {
    n: usize,
    s: usize,
}

impl TopologySampler for ElLocal {
    fn name(&self) -> &str {
        "el-local"
    }
    fn is_dynamic(&self) -> bool {
        true
    }
    fn graph(&self, round: u64, rng: &mut StreamRng) -> Result<Cow<'_, RoundGraph>> {
        Ok(Cow::Owned(sample_s_out(self.n, self.s, rng)?.with_round(round)))
    }
    fn contraction(&self) -> Option<f64> {
        crate::mixing::alpha_local(self.n, self.s).ok()
    }
}

/// A graph fixed for the whole run.
pub struct StaticTopology {
    name: &'static str,
    graph: RoundGraph,
}

impl StaticTopology {
    pub fn new(name: &'static str, graph: RoundGraph) -> Self {
        Self { name, graph }
    }
}

impl TopologySampler for StaticTopology {
    fn name(&self) -> &str {
        self.name
    }
    fn is_dynamic(&self) -> bool {
        false
    }
    fn graph(&self, _round: u64, _rng: &mut StreamRng) -> Result<Cow<'_, RoundGraph>> {
        Ok(Cow::Borrowed(&self.graph))
    }
}

/// Builds a sampler for `n` nodes with optional sample size `s`. Static
/// topologies draw their graph from `rng`.
pub type SamplerFactory =
    Box<dyn Fn(usize, Option<usize>, &mut StreamRng) -> Result<Box<dyn TopologySampler>> + Send + Sync>;

pub struct TopologyRegistry {
    factories: BTreeMap<String, SamplerFactory>,
}

fn need_s(name: &str, s: Option<usize>) -> Result<usize> {
    s.ok_or_else(|| Error::param("s", format!("topology `{name}` needs a sample size s")))
}

impl TopologyRegistry {
    pub fn empty() -> Self {
        Self { factories: BTreeMap::new() }
    }

    pub fn register(&mut self, name: impl Into<String>, factory: SamplerFactory) {
        self.factories.insert(name.into(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn build(
        &self,
        name: &str,
        n: usize,
        s: Option<usize>,
        rng: &mut StreamRng,
    ) -> Result<Box<dyn TopologySampler>> {
        let factory = self.factories.get(name).ok_or_else(|| Error::UnknownTopology(name.to_string()))?;
        factory(n, s, rng)
    }

    /// Resolves a kind name (as written in config files) to the typed kind.
    pub fn kind_from_name(name: &str, s: Option<usize>) -> Result<TopologyKind> {
        Ok(match name {
            "el-oracle" => TopologyKind::ElOracle { s: need_s(name, s)? },
            "el-local" => TopologyKind::ElLocal { s: need_s(name, s)? },
            "static-regular" => TopologyKind::StaticRegular { s: need_s(name, s)? },
            "ring" => TopologyKind::Ring,
            "torus" => TopologyKind::Torus,
            "fully-connected" => TopologyKind::FullyConnected,
            other => return Err(Error::UnknownTopology(other.to_string())),
        })
    }

    pub fn build_kind(&self, kind: TopologyKind, n: usize, rng: &mut StreamRng) -> Result<Box<dyn TopologySampler>> {
        self.build(kind.name(), n, kind.sample_size(), rng)
    }
}

impl Default for TopologyRegistry {
    fn default() -> Self {
        let mut reg = Self::empty();
        for name in ["el-oracle", "el-local", "ring", "torus", "fully-connected", "static-regular"] {
            reg.register(
                name,
                Box::new(move |n, s, rng| {
                    let kind = TopologyRegistry::kind_from_name(name, s)?;
                    kind.validate(n)?;
                    Ok(match kind {
                        TopologyKind::ElOracle { s } => Box::new(ElOracle { n, s }) as Box<dyn TopologySampler>,
                        TopologyKind::ElLocal { s } => Box::new(ElLocal { n, s }),
                        _ => Box::new(StaticTopology::new(name, build_static(kind, n, rng)?)),
                    })
                }),
            );
        }
        reg
    }
}

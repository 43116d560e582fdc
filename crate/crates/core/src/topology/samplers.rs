use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::RoundGraph;
use crate::error::{Error, Result};

/// Communication topology of a run.
///
/// The two epidemic variants draw a fresh graph every round; the other kinds
/// are static baselines built once per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TopologyKind {
    /// Random undirected s-regular graph, redrawn every round.
    ElOracle { s: usize },
    /// Every node pushes to s uniformly chosen peers, redrawn every round.
    ElLocal { s: usize },
    Ring,
    Torus,
    FullyConnected,
    /// One s-regular draw kept for the whole run.
    StaticRegular { s: usize },
}

impl TopologyKind {
    pub fn name(&self) -> &'static str {
        match self {
            TopologyKind::ElOracle { .. } => "el-oracle",
            TopologyKind::ElLocal { .. } => "el-local",
            TopologyKind::Ring => "ring",
            TopologyKind::Torus => "torus",
            TopologyKind::FullyConnected => "fully-connected",
            TopologyKind::StaticRegular { .. } => "static-regular",
        }
    }

    /// Short label such as `el-oracle(s=7)`.
    pub fn label(&self) -> String {
        match self.sample_size() {
            Some(s) => format!("{}(s={s})", self.name()),
            None => self.name().to_string(),
        }
    }

    pub fn sample_size(&self) -> Option<usize> {
        match *self {
            TopologyKind::ElOracle { s } | TopologyKind::ElLocal { s } | TopologyKind::StaticRegular { s } => {
                Some(s)
            }
            _ => None,
        }
    }

    pub fn is_dynamic(&self) -> bool {
        matches!(self, TopologyKind::ElOracle { .. } | TopologyKind::ElLocal { .. })
    }

    /// Out-degree of every node, when it is the same for all nodes.
    pub fn out_degree(&self, n: usize) -> usize {
        match *self {
            TopologyKind::ElOracle { s } | TopologyKind::ElLocal { s } | TopologyKind::StaticRegular { s } => s,
            TopologyKind::Ring => 2,
            TopologyKind::Torus => 4,
            TopologyKind::FullyConnected => n - 1,
        }
    }

    /// Checks the size and degree constraints of the kind for `n` nodes.
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            TopologyKind::ElOracle { s } | TopologyKind::StaticRegular { s } => check_regular(n, s),
            TopologyKind::ElLocal { s } => check_s_out(n, s),
            TopologyKind::Ring if n < 3 => Err(Error::InvalidSize { n, reason: "ring needs n >= 3" }),
            TopologyKind::Torus => {
                let side = torus_side(n);
                if side.is_none() || n < 9 {
                    Err(Error::InvalidSize { n, reason: "torus needs n to be a perfect square >= 9" })
                } else {
                    Ok(())
                }
            }
            TopologyKind::FullyConnected if n < 2 => {
                Err(Error::InvalidSize { n, reason: "fully connected needs n >= 2" })
            }
            _ => Ok(()),
        }
    }
}

fn torus_side(n: usize) -> Option<usize> {
    let side = (n as f64).sqrt().round() as usize;
    (side * side == n).then_some(side)
}

fn check_s_out(n: usize, s: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidSize { n, reason: "need at least 2 nodes" });
    }
    if s == 0 || s > n - 1 {
        return Err(Error::InvalidDegree { n, s, reason: "need 1 <= s <= n-1" });
    }
    Ok(())
}

fn check_regular(n: usize, s: usize) -> Result<()> {
    check_s_out(n, s)?;
    if (n * s) % 2 == 1 {
        return Err(Error::InvalidDegree { n, s, reason: "an s-regular graph needs n*s even" });
    }
    Ok(())
}

/// Circulant s-regular graph: each node links to its floor(s/2) nearest
/// nodes on either side of the cycle, plus the antipodal node when s is odd.
fn circulant(n: usize, s: usize) -> Vec<Vec<usize>> {
    let half = s / 2;
    (0..n)
        .map(|i| {
            let mut list = Vec::with_capacity(s);
            for k in 1..=half {
                list.push((i + k) % n);
                list.push((i + n - k) % n);
            }
            if s % 2 == 1 {
                list.push((i + n / 2) % n);
            }
            list
        })
        .collect()
}

/// Draws an undirected s-regular graph whose node labels are a uniformly
/// random permutation of a circulant base graph.
///
/// Every node has degree exactly `s` and every pair `{i, j}` is an edge with
/// probability `s / (n - 1)`.
pub fn sample_regular_random<R: Rng + ?Sized>(n: usize, s: usize, rng: &mut R) -> Result<RoundGraph> {
    check_regular(n, s)?;
    let mut relabel: Vec<usize> = (0..n).collect();
    relabel.shuffle(rng);
    let base = circulant(n, s);
    let mut out_adj = vec![Vec::with_capacity(s); n];
    for (u, list) in base.iter().enumerate() {
        out_adj[relabel[u]].extend(list.iter().map(|&v| relabel[v]));
    }
    for list in &mut out_adj {
        list.sort_unstable();
    }
    Ok(RoundGraph::from_parts_unchecked(false, out_adj, 0))
}

/// Draws `s` distinct targets uniformly from `[n] \ {i}`.
pub fn sample_targets<R: Rng + ?Sized>(n: usize, s: usize, i: usize, rng: &mut R) -> Vec<usize> {
    let mut targets: Vec<usize> = index::sample(rng, n - 1, s)
        .into_iter()
        .map(|v| if v >= i { v + 1 } else { v })
        .collect();
    targets.sort_unstable();
    targets
}

/// Draws a directed s-out graph: every node independently picks `s`
/// distinct peers uniformly at random.
pub fn sample_s_out<R: Rng + ?Sized>(n: usize, s: usize, rng: &mut R) -> Result<RoundGraph> {
    check_s_out(n, s)?;
    let out_adj = (0..n).map(|i| sample_targets(n, s, i, rng)).collect();
    Ok(RoundGraph::from_parts_unchecked(true, out_adj, 0))
}

/// Builds the fixed graph of a static baseline.
pub fn build_static<R: Rng + ?Sized>(kind: TopologyKind, n: usize, rng: &mut R) -> Result<RoundGraph> {
    kind.validate(n)?;
    let adj = match kind {
        TopologyKind::StaticRegular { s } => return sample_regular_random(n, s, rng),
        TopologyKind::Ring => (0..n).map(|i| vec![(i + 1) % n, (i + n - 1) % n]).collect(),
        TopologyKind::Torus => {
            let m = torus_side(n).expect("validated");
            (0..n)
                .map(|id| {
                    let (r, c) = (id / m, id % m);
                    vec![
                        ((r + 1) % m) * m + c,
                        ((r + m - 1) % m) * m + c,
                        r * m + (c + 1) % m,
                        r * m + (c + m - 1) % m,
                    ]
                })
                .collect()
        }
        TopologyKind::FullyConnected => (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect(),
        TopologyKind::ElOracle { .. } | TopologyKind::ElLocal { .. } => {
            return Err(Error::param("kind", format!("{} is not a static topology", kind.name())))
        }
    };
    RoundGraph::new(false, adj, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn rng(seed: u64) -> crate::rng::StreamRng {
        stream(seed, Purpose::Topology, 0, 0)
    }

    fn is_complete(g: &RoundGraph) -> bool {
        let n = g.n();
        (0..n).all(|i| g.out_neighbors(i).unwrap().len() == n - 1)
    }

    #[test]
    fn regular_forced_cases() {
        let g = sample_regular_random(4, 3, &mut rng(1)).unwrap();
        assert!(is_complete(&g));
        let g = sample_regular_random(2, 1, &mut rng(1)).unwrap();
        assert_eq!(g.out_neighbors(0).unwrap(), &[1]);
        assert_eq!(g.out_neighbors(1).unwrap(), &[0]);
    }

    #[test]
    fn regular_rejects_bad_degrees() {
        let mut r = rng(0);
        assert!(matches!(sample_regular_random(5, 3, &mut r), Err(Error::InvalidDegree { .. })));
        assert!(matches!(sample_regular_random(5, 0, &mut r), Err(Error::InvalidDegree { .. })));
        assert!(matches!(sample_regular_random(5, 5, &mut r), Err(Error::InvalidDegree { .. })));
        assert!(matches!(sample_s_out(5, 5, &mut r), Err(Error::InvalidDegree { .. })));
        assert!(matches!(sample_s_out(1, 1, &mut r), Err(Error::InvalidSize { .. })));
    }

    #[test]
    fn regular_n8_s2_is_cycle_cover() {
        for seed in 0..50 {
            let g = sample_regular_random(8, 2, &mut rng(seed)).unwrap();
            // walk cycles: every node degree 2, components are cycles covering all nodes
            let mut seen = [false; 8];
            let mut covered = 0;
            for start in 0..8 {
                if seen[start] {
                    continue;
                }
                let (mut prev, mut cur) = (usize::MAX, start);
                loop {
                    seen[cur] = true;
                    covered += 1;
                    let nb = g.out_neighbors(cur).unwrap();
                    assert_eq!(nb.len(), 2);
                    let next = if nb[0] != prev { nb[0] } else { nb[1] };
                    prev = cur;
                    cur = next;
                    if cur == start {
                        break;
                    }
                    assert!(!seen[cur], "walk revisited a node before closing the cycle");
                }
            }
            assert_eq!(covered, 8);
        }
    }

    #[test]
    fn s_out_forced_case() {
        let g = sample_s_out(5, 4, &mut rng(3)).unwrap();
        assert!(g.is_directed());
        for i in 0..5 {
            let expected: Vec<usize> = (0..5).filter(|&j| j != i).collect();
            assert_eq!(g.out_neighbors(i).unwrap(), expected.as_slice());
        }
    }

    #[test]
    fn ring_and_complete() {
        let mut r = rng(0);
        let g = build_static(TopologyKind::Ring, 5, &mut r).unwrap();
        assert_eq!(g.out_neighbors(0).unwrap(), &[1, 4]);
        assert_eq!(g.out_neighbors(2).unwrap(), &[1, 3]);
        let g = build_static(TopologyKind::FullyConnected, 4, &mut r).unwrap();
        assert!(is_complete(&g));
        assert!(build_static(TopologyKind::Ring, 2, &mut r).is_err());
    }

    #[test]
    fn torus_3x3() {
        let g = build_static(TopologyKind::Torus, 9, &mut rng(0)).unwrap();
        for id in 0..9 {
            let (r, c) = (id / 3, id % 3);
            let mut expected = vec![((r + 1) % 3) * 3 + c, ((r + 2) % 3) * 3 + c, r * 3 + (c + 1) % 3, r * 3 + (c + 2) % 3];
            expected.sort_unstable();
            assert_eq!(g.out_neighbors(id).unwrap(), expected.as_slice());
        }
        assert!(matches!(build_static(TopologyKind::Torus, 8, &mut rng(0)), Err(Error::InvalidSize { .. })));
        assert!(matches!(build_static(TopologyKind::Torus, 4, &mut rng(0)), Err(Error::InvalidSize { .. })));
    }

    #[test]
    fn static_rejects_dynamic_kinds() {
        assert!(build_static(TopologyKind::ElOracle { s: 2 }, 8, &mut rng(0)).is_err());
    }

    #[test]
    fn same_seed_same_graph() {
        let a = sample_regular_random(20, 3, &mut rng(11)).unwrap();
        let b = sample_regular_random(20, 3, &mut rng(11)).unwrap();
        assert_eq!(a, b);
        let a = sample_s_out(20, 3, &mut rng(11)).unwrap();
        let b = sample_s_out(20, 3, &mut rng(11)).unwrap();
        assert_eq!(a, b);
    }
}

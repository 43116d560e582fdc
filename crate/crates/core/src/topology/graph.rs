use crate::error::{Error, Result};

/// One round's communication graph.
///
/// `out_adj[i]` lists the nodes `i` sends its half-step model to. For an
/// undirected graph the relation is symmetric and the in-neighbors of a node
/// coincide with its out-neighbors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundGraph {
    n: usize,
    directed: bool,
    out_adj: Vec<Vec<usize>>,
    round: u64,
}

impl RoundGraph {
    /// Builds a graph after checking the structural invariants: no
    /// self-loops, ids in range, no duplicate neighbors and, for undirected
    /// graphs, symmetry.
    pub fn new(directed: bool, mut out_adj: Vec<Vec<usize>>, round: u64) -> Result<Self> {
        let n = out_adj.len();
        if n < 2 {
            return Err(Error::InvalidSize { n, reason: "a round graph needs at least 2 nodes" });
        }
        for (i, list) in out_adj.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::param("out_adj", format!("duplicate neighbor of node {i}")));
            }
            if let Some(&bad) = list.iter().find(|&&j| j >= n) {
                return Err(Error::OutOfRange { id: bad, n });
            }
            if list.binary_search(&i).is_ok() {
                return Err(Error::param("out_adj", format!("self-loop at node {i}")));
            }
        }
        if !directed {
            for (i, list) in out_adj.iter().enumerate() {
                for &j in list {
                    if out_adj[j].binary_search(&i).is_err() {
                        return Err(Error::param(
                            "out_adj",
                            format!("undirected graph is not symmetric on edge {i}-{j}"),
                        ));
                    }
                }
            }
        }
        Ok(Self { n, directed, out_adj, round })
    }

    // Samplers produce sorted, valid lists by construction.
    pub(crate) fn from_parts_unchecked(directed: bool, out_adj: Vec<Vec<usize>>, round: u64) -> Self {
        debug_assert!(Self::new(directed, out_adj.clone(), round).is_ok());
        Self { n: out_adj.len(), directed, out_adj, round }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn with_round(mut self, round: u64) -> Self {
        self.round = round;
        self
    }

    pub fn out_neighbors(&self, i: usize) -> Result<&[usize]> {
        self.out_adj.get(i).map(Vec::as_slice).ok_or(Error::OutOfRange { id: i, n: self.n })
    }

    pub fn out_adjacency(&self) -> &[Vec<usize>] {
        &self.out_adj
    }

    /// The senders whose models reach node `i` this round, in increasing id
    /// order.
    pub fn in_neighbors(&self, i: usize) -> Result<Vec<usize>> {
        if i >= self.n {
            return Err(Error::OutOfRange { id: i, n: self.n });
        }
        if !self.directed {
            return Ok(self.out_adj[i].clone());
        }
        Ok((0..self.n).filter(|&j| self.out_adj[j].binary_search(&i).is_ok()).collect())
    }

    /// In-neighbor lists of every node, sorted by sender id. One pass over
    /// the edges; prefer this to calling `in_neighbors` n times.
    pub fn in_adjacency(&self) -> Vec<Vec<usize>> {
        if !self.directed {
            return self.out_adj.clone();
        }
        let mut incoming = vec![Vec::new(); self.n];
        for (j, list) in self.out_adj.iter().enumerate() {
            for &i in list {
                incoming[i].push(j);
            }
        }
        incoming
    }

    /// Number of models received by every node.
    pub fn indegrees(&self) -> Vec<usize> {
        if !self.directed {
            return self.out_adj.iter().map(Vec::len).collect();
        }
        let mut deg = vec![0; self.n];
        for list in &self.out_adj {
            for &i in list {
                deg[i] += 1;
            }
        }
        deg
    }

    /// Point-to-point messages sent in one round (each node sends its model
    /// once per out-neighbor).
    pub fn message_count(&self) -> usize {
        self.out_adj.iter().map(Vec::len).sum()
    }

    pub fn contains_edge(&self, i: usize, j: usize) -> bool {
        self.out_adj.get(i).is_some_and(|l| l.binary_search(&j).is_ok())
    }

    /// Connectivity of the underlying undirected graph.
    pub fn is_connected(&self) -> bool {
        let mut undirected = self.out_adj.clone();
        if self.directed {
            for (i, list) in self.out_adj.iter().enumerate() {
                for &j in list {
                    undirected[j].push(i);
                }
            }
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &undirected[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.n
    }
}

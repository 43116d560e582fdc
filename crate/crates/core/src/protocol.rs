//! The per-node round of the protocol: local half-step, push of the
//! half-step model to the sampled peers, and equal-weight aggregation of
//! whatever arrived.

use std::sync::Arc;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::topology::RoundGraph;

/// A node's model at the start of a round.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub id: usize,
    pub model: Vec<f64>,
    pub round: u64,
}

impl NodeState {
    pub fn new(id: usize, model: Vec<f64>) -> Self {
        Self { id, model, round: 0 }
    }
}

/// Half-step model pushed to a peer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMessage {
    pub round: u64,
    pub sender: usize,
    pub model: Arc<[f64]>,
}

impl ModelMessage {
    pub fn new(round: u64, sender: usize, model: Arc<[f64]>) -> Self {
        Self { round, sender, model }
    }

    /// Size in bytes of the canonical encoding of a `d`-dimensional model.
    pub const fn encoded_len(d: usize) -> usize {
        16 + 8 * d
    }

    /// Canonical layout: round (u64 LE), sender (u64 LE), then the model as
    /// little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::encoded_len(self.model.len()));
        out.extend_from_slice(&self.round.to_le_bytes());
        out.extend_from_slice(&(self.sender as u64).to_le_bytes());
        for v in self.model.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || !(bytes.len() - 16).is_multiple_of(8) {
            return Err(Error::param("bytes", format!("bad message length {}", bytes.len())));
        }
        let word = |at: usize| <[u8; 8]>::try_from(&bytes[at..at + 8]).expect("8 bytes");
        let round = u64::from_le_bytes(word(0));
        let sender = u64::from_le_bytes(word(8)) as usize;
        let model: Vec<f64> = (16..bytes.len()).step_by(8).map(|at| f64::from_le_bytes(word(at))).collect();
        Ok(Self { round, sender, model: model.into() })
    }
}

/// `x - gamma * grad`, the half-step model. The state itself is left alone
/// until aggregation completes the round.
pub fn local_step(state: &NodeState, grad: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if grad.len() != state.model.len() {
        return Err(Error::DimensionMismatch { expected: state.model.len(), got: grad.len() });
    }
    let half: Vec<f64> = state.model.iter().zip(grad).map(|(x, g)| x - gamma * g).collect();
    if half.iter().all(|v| v.is_finite()) {
        Ok(half)
    } else {
        Err(Error::NonFinite)
    }
}

/// Equal-weight average of the own half-step model and every received
/// model: `(own + sum received) / (|received| + 1)`.
///
/// Received models are summed in increasing sender order, so the result
/// does not depend on arrival order.
pub fn aggregate(own_half: &[f64], round: u64, received: &[ModelMessage]) -> Result<Vec<f64>> {
    let d = own_half.len();
    for msg in received {
        if msg.round != round {
            return Err(Error::RoundMismatch { expected: round, got: msg.round });
        }
        if msg.model.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: msg.model.len() });
        }
    }
    let mut order: Vec<&ModelMessage> = received.iter().collect();
    order.sort_by_key(|m| m.sender);
    let mut acc = own_half.to_vec();
    for msg in order {
        for (a, v) in acc.iter_mut().zip(msg.model.iter()) {
            *a += v;
        }
    }
    let weight = 1.0 / (received.len() + 1) as f64;
    acc.iter_mut().for_each(|a| *a *= weight);
    Ok(acc)
}

/// Keeps at most `k` of the received messages, chosen uniformly at random.
/// The surviving messages keep their relative order.
pub fn apply_indegree_cap<R: Rng + ?Sized>(received: Vec<ModelMessage>, k: usize, rng: &mut R) -> Vec<ModelMessage> {
    if received.len() <= k {
        return received;
    }
    let mut keep = index::sample(rng, received.len(), k).into_vec();
    keep.sort_unstable();
    let mut slots: Vec<Option<ModelMessage>> = received.into_iter().map(Some).collect();
    keep.into_iter().map(|i| slots[i].take().expect("distinct indices")).collect()
}

/// Messages that reach node `i` in `round`, given every node's half-step
/// model.
pub fn inbox(senders: &[usize], halves: &[Arc<[f64]>], round: u64) -> Vec<ModelMessage> {
    senders.iter().map(|&j| ModelMessage::new(round, j, halves[j].clone())).collect()
}

/// One uncapped communication phase over all nodes: every node aggregates
/// the half-step models of its in-neighbors.
pub fn communication_phase(graph: &RoundGraph, halves: &[Arc<[f64]>], round: u64) -> Result<Vec<Vec<f64>>> {
    if halves.len() != graph.n() {
        return Err(Error::DimensionMismatch { expected: graph.n(), got: halves.len() });
    }
    graph
        .in_adjacency()
        .iter()
        .enumerate()
        .map(|(i, senders)| aggregate(&halves[i], round, &inbox(senders, halves, round)))
        .collect()
}

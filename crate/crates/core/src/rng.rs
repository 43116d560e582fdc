//! Seeded random streams.
//!
//! A run owns one root seed. Every consumer of randomness (the topology of a
//! round, the gradient noise of a node in a round, the indegree-cap subsample
//! of a node in a round, ...) gets its own stream derived from the root seed
//! by hashing a purpose label together with its indices. Changing what one
//! consumer does therefore never shifts the draws seen by another, which is
//! what lets two runs with different topologies share identical gradient
//! noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Concrete generator used everywhere in the crate.
pub type StreamRng = ChaCha8Rng;

/// What a derived stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Topology,
    GradientNoise,
    IndegreeCap,
    Problem,
    Init,
    MonteCarlo,
    Partition,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Topology => 0x746f_706f,
            Purpose::GradientNoise => 0x6e6f_6973,
            Purpose::IndegreeCap => 0x6361_7070,
            Purpose::Problem => 0x7072_6f62,
            Purpose::Init => 0x696e_6974,
            Purpose::MonteCarlo => 0x6d63_7472,
            Purpose::Partition => 0x7061_7274,
        }
    }
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the 64-bit seed of the stream `(purpose, a, b)` under `root`.
pub fn derive_seed(root: u64, purpose: Purpose, a: u64, b: u64) -> u64 {
    let mut h = mix(root ^ mix(purpose.tag()));
    h = mix(h ^ a);
    mix(h ^ b.rotate_left(17))
}

/// Opens the stream `(purpose, a, b)` under `root`.
pub fn stream(root: u64, purpose: Purpose, a: u64, b: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(root, purpose, a, b))
}

/// Stream for the graph of `round`.
pub fn topology_rng(root: u64, round: u64) -> StreamRng {
    stream(root, Purpose::Topology, round, 0)
}

/// Stream for the gradient noise of `node` in `round` (local step `step`).
pub fn gradient_rng(root: u64, node: usize, round: u64, step: u32) -> StreamRng {
    stream(root, Purpose::GradientNoise, node as u64, round.wrapping_mul(1 << 16) ^ step as u64)
}

/// Stream for the indegree-cap subsample of `node` in `round`.
pub fn cap_rng(root: u64, node: usize, round: u64) -> StreamRng {
    stream(root, Purpose::IndegreeCap, node as u64, round)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let a: u64 = stream(7, Purpose::Topology, 3, 0).random();
        let b: u64 = stream(7, Purpose::Topology, 3, 0).random();
        let c: u64 = stream(7, Purpose::Topology, 4, 0).random();
        let d: u64 = stream(7, Purpose::GradientNoise, 3, 0).random();
        let e: u64 = stream(8, Purpose::Topology, 3, 0).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_ne!(a, e);
    }

    #[test]
    fn index_order_matters() {
        assert_ne!(
            derive_seed(1, Purpose::MonteCarlo, 2, 5),
            derive_seed(1, Purpose::MonteCarlo, 5, 2)
        );
    }
}

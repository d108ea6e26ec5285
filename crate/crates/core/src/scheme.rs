//! Availability schemes: which node is blocked from sending in which round.
//!
//! A blocked node sends nothing in that round; whatever it holds stays
//! buffered according to the algorithm in use. The number of blocked pairs
//! `f` is finite and enters every delivery and termination bound.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Graph, NodeId};

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("blocked round must be >= 1")]
    ZeroRound,
    #[error("requested {requested} blocked pairs but only {eligible} are eligible")]
    NotEnoughEligible { requested: usize, eligible: usize },
}

/// Finite set of `(node, round)` pairs in which the node may not send.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AvailabilityScheme {
    blocked: BTreeSet<(NodeId, u32)>,
}

impl AvailabilityScheme {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new<I: IntoIterator<Item = (NodeId, u32)>>(pairs: I) -> Result<Self, SchemeError> {
        let blocked: BTreeSet<(NodeId, u32)> = pairs.into_iter().collect();
        if blocked.iter().any(|&(_, r)| r == 0) {
            return Err(SchemeError::ZeroRound);
        }
        Ok(AvailabilityScheme { blocked })
    }

    pub fn is_available(&self, v: NodeId, round: u32) -> bool {
        !self.blocked.contains(&(v, round))
    }

    /// `f`: the number of blocked pairs.
    pub fn fault_count(&self) -> usize {
        self.blocked.len()
    }

    /// Last round with any blocked pair; 0 for the empty scheme. Beyond this
    /// round the system runs autonomously.
    pub fn max_blocked_round(&self) -> u32 {
        self.blocked.iter().map(|&(_, r)| r).max().unwrap_or(0)
    }

    pub fn blocked_pairs(&self) -> impl Iterator<Item = (NodeId, u32)> + '_ {
        self.blocked.iter().copied()
    }

    pub fn with_pair(&self, v: NodeId, round: u32) -> Self {
        let mut blocked = self.blocked.clone();
        blocked.insert((v, round));
        AvailabilityScheme { blocked }
    }
}

/// Samples a scheme with exactly `f` distinct blocked pairs, rounds in
/// `1..=max_round`, never blocking `protect` in its first round. Deterministic
/// in `seed`.
pub fn random_scheme(
    g: &Graph,
    f: usize,
    max_round: u32,
    seed: u64,
    protect: Option<(NodeId, u32)>,
) -> Result<AvailabilityScheme, SchemeError> {
    let mut eligible: Vec<(NodeId, u32)> = Vec::new();
    for v in g.nodes() {
        for r in 1..=max_round {
            if protect != Some((v, r)) {
                eligible.push((v, r));
            }
        }
    }
    if f > eligible.len() {
        return Err(SchemeError::NotEnoughEligible {
            requested: f,
            eligible: eligible.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Partial Fisher-Yates: the first f slots end up holding the sample.
    for i in 0..f {
        let j = rng.random_range(i..eligible.len());
        eligible.swap(i, j);
    }
    eligible.truncate(f);
    AvailabilityScheme::new(eligible)
}

//! Random node activation and packet loss.
//!
//! At iteration `k` node `j` wakes up with probability `p_mu(j)`; each packet
//! `j -> i` is then lost with probability `p_lambda(j -> i)`. Slot `(i, j)` is
//! updated iff `j` woke up and its packet to `i` arrived.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LossModel {
    Uniform {
        p_mu: f64,
        p_lambda: f64,
        seed: u64,
    },
    /// `p_mu` per node; `p_lambda[slot(i, j)]` is the loss probability of
    /// the packet `j -> i`.
    PerEdge {
        p_mu: Vec<f64>,
        p_lambda: Vec<f64>,
        seed: u64,
    },
}

impl LossModel {
    pub fn uniform(p_mu: f64, p_lambda: f64, seed: u64) -> Self {
        LossModel::Uniform {
            p_mu,
            p_lambda,
            seed,
        }
    }

    /// Every node active, no losses.
    pub fn lossless() -> Self {
        LossModel::uniform(1.0, 0.0, 0)
    }

    pub fn seed(&self) -> u64 {
        match self {
            LossModel::Uniform { seed, .. } | LossModel::PerEdge { seed, .. } => *seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut m = self.clone();
        match &mut m {
            LossModel::Uniform { seed: s, .. } | LossModel::PerEdge { seed: s, .. } => *s = seed,
        }
        m
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, LossModel::Uniform { .. })
    }

    pub fn p_mu(&self, node: usize) -> f64 {
        match self {
            LossModel::Uniform { p_mu, .. } => *p_mu,
            LossModel::PerEdge { p_mu, .. } => p_mu[node],
        }
    }

    pub fn p_lambda(&self, slot: usize) -> f64 {
        match self {
            LossModel::Uniform { p_lambda, .. } => *p_lambda,
            LossModel::PerEdge { p_lambda, .. } => p_lambda[slot],
        }
    }

    /// True when every slot is updated at every iteration.
    pub fn is_lossless(&self, g: &Graph) -> bool {
        (0..g.num_nodes()).all(|j| self.p_mu(j) == 1.0)
            && (0..g.num_slots()).all(|s| self.p_lambda(s) == 0.0)
    }

    pub fn validate(&self, g: &Graph) -> Result<()> {
        if let LossModel::PerEdge { p_mu, p_lambda, .. } = self {
            if p_mu.len() != g.num_nodes() || p_lambda.len() != g.num_slots() {
                return Err(Error::DimensionMismatch(format!(
                    "per-edge loss model has {} node and {} slot probabilities, graph has {} and {}",
                    p_mu.len(),
                    p_lambda.len(),
                    g.num_nodes(),
                    g.num_slots()
                )));
            }
        }
        for j in 0..g.num_nodes() {
            let p = self.p_mu(j);
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidParams(format!(
                    "p_mu({j}) = {p} outside (0, 1]"
                )));
            }
        }
        for s in 0..g.num_slots() {
            let p = self.p_lambda(s);
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidParams(format!(
                    "p_lambda(slot {s}) = {p} outside [0, 1)"
                )));
            }
        }
        Ok(())
    }
}

/// Realized events of one iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventDraw {
    pub k: u64,
    /// Per node.
    pub active: Vec<bool>,
    /// `delivered[slot(i, j)]`: the packet `j -> i` arrived.
    pub delivered: Vec<bool>,
    /// `beta[slot(i, j)] = active[j] && delivered[slot(i, j)]`.
    pub beta: Vec<bool>,
}

/// Events of iteration `k`. The generator is keyed by `(seed, k)`, so any
/// iteration can be replayed without drawing the earlier ones.
pub fn draw_events(model: &LossModel, g: &Graph, k: u64) -> EventDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed());
    rng.set_stream(k);
    let active: Vec<bool> = (0..g.num_nodes())
        .map(|j| rng.random::<f64>() < model.p_mu(j))
        .collect();
    let delivered: Vec<bool> = (0..g.num_slots())
        .map(|s| rng.random::<f64>() >= model.p_lambda(s))
        .collect();
    let beta = (0..g.num_slots())
        .map(|s| active[g.slot_pair(s).1] && delivered[s])
        .collect();
    EventDraw {
        k,
        active,
        delivered,
        beta,
    }
}

/// `P[beta(slot) = 1] = p_mu(j) (1 - p_lambda(j -> i))` for slot `(i, j)`.
pub fn effective_beta_probability(model: &LossModel, g: &Graph, slot: usize) -> f64 {
    let (_, j) = g.slot_pair(slot);
    model.p_mu(j) * (1.0 - model.p_lambda(slot))
}

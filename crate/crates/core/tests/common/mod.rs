//! Random instances shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DVector;
use radmm::{
    build_rate_model, centralized_solve, Graph, Params, QuadraticCost, RateModel, SharedCost,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub struct Case {
    pub graph: Graph,
    pub costs: Vec<SharedCost>,
    pub x_star: DVector<f64>,
    pub params: Params,
    pub n: usize,
}

impl Case {
    pub fn model(&self) -> RateModel {
        build_rate_model(&self.graph, &self.costs, &self.params, &self.x_star).unwrap()
    }

    /// `x*` repeated at every node.
    pub fn stacked_optimum(&self) -> DVector<f64> {
        DVector::from_fn(self.n * self.graph.num_nodes(), |r, _| {
            self.x_star[r % self.n]
        })
    }

    pub fn slots_dim(&self) -> usize {
        self.n * self.graph.num_slots()
    }
}

/// Random spanning tree plus `extra` distinct chords.
pub fn random_graph(num_nodes: usize, extra: usize, rng: &mut impl Rng) -> Graph {
    let mut edges: Vec<(usize, usize)> = (1..num_nodes)
        .map(|i| (rng.random_range(0..i), i))
        .collect();
    let mut free: Vec<(usize, usize)> = (0..num_nodes)
        .flat_map(|i| (i + 1..num_nodes).map(move |j| (i, j)))
        .filter(|e| !edges.contains(e))
        .collect();
    for _ in 0..extra.min(free.len()) {
        edges.push(free.swap_remove(rng.random_range(0..free.len())));
    }
    Graph::new(num_nodes, &edges).unwrap()
}

/// Random connected graph whose edge density is itself random.
pub fn random_dense_graph(num_nodes: usize, rng: &mut impl Rng) -> Graph {
    let max_extra = num_nodes * (num_nodes - 1) / 2 - (num_nodes - 1);
    let extra = rng.random_range(0..=max_extra);
    random_graph(num_nodes, extra, rng)
}

pub fn random_costs(num_nodes: usize, n: usize, rng: &mut impl Rng) -> Vec<SharedCost> {
    (0..num_nodes)
        .map(|_| {
            let cond = rng.random_range(1.0..20.0);
            Arc::new(QuadraticCost::random(n, cond, rng.random()).unwrap()) as SharedCost
        })
        .collect()
}

/// `alpha` uniform in (0, 1), `rho` log-uniform in [0.1, 10].
pub fn random_params(rng: &mut impl Rng) -> Params {
    let alpha = rng.random_range(0.01..0.99);
    let rho = 10f64.powf(rng.random_range(-1.0..=1.0));
    Params::new(alpha, rho).unwrap()
}

pub fn case_from(graph: Graph, n: usize, rng: &mut impl Rng) -> Case {
    let costs = random_costs(graph.num_nodes(), n, rng);
    let x_star = centralized_solve(&costs).unwrap();
    Case {
        graph,
        costs,
        x_star,
        params: random_params(rng),
        n,
    }
}

/// Graph with 3 to 10 nodes, `n` in {1, 2}, random costs and parameters.
pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_nodes = rng.random_range(3..=10);
    let n = rng.random_range(1..=2);
    let graph = random_dense_graph(num_nodes, &mut rng);
    case_from(graph, n, &mut rng)
}

pub fn gaussian(len: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// `(active, beta)` with origin activity and delivery drawn independently.
pub fn random_masks(
    g: &Graph,
    p_active: f64,
    p_deliver: f64,
    rng: &mut impl Rng,
) -> (Vec<bool>, Vec<bool>) {
    let active: Vec<bool> = (0..g.num_nodes())
        .map(|_| rng.random::<f64>() < p_active)
        .collect();
    let beta = (0..g.num_slots())
        .map(|s| active[g.slot_pair(s).1] && rng.random::<f64>() < p_deliver)
        .collect();
    (active, beta)
}

//! Undirected communication topology and the structural matrices of the
//! edge-based formulation.
//!
//! Every per-edge quantity in the crate (auxiliary variables, bridge
//! variables, loss masks) is indexed by a *slot*: one slot per ordered pair
//! `(i, j)` of adjacent nodes. Slots are sorted by owner `i`, then by neighbor
//! `j`, so the slots owned by a node form a contiguous block.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of point sets drawn by [`random_geometric_graph`].
pub const MAX_CONNECTIVITY_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    /// Normalized edge list: `i < j`, sorted.
    edges: Vec<(usize, usize)>,
    /// Sorted neighbor lists.
    neighbors: Vec<Vec<usize>>,
    /// `offsets[i]` is the first slot owned by node `i`; `offsets[N] = M`.
    offsets: Vec<usize>,
    /// `slots[s] = (owner, neighbor)`.
    slots: Vec<(usize, usize)>,
    /// `reverse[s]` is the slot of the swapped pair.
    reverse: Vec<usize>,
}

impl Graph {
    pub fn new(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if num_nodes < 2 {
            return Err(Error::InvalidGraph(format!(
                "need at least 2 nodes, got {num_nodes}"
            )));
        }
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) references a node outside 0..{num_nodes}"
                )));
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            let e = (a.min(b), a.max(b));
            if !set.insert(e) {
                return Err(Error::DuplicateEdge(e.0, e.1));
            }
        }

        let mut dsu = DisjointSet::new(num_nodes);
        for &(a, b) in &set {
            dsu.union(a, b);
        }
        if dsu.components() != 1 {
            return Err(Error::Disconnected);
        }

        let edges: Vec<_> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); num_nodes];
        for &(a, b) in &edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }

        let mut offsets = Vec::with_capacity(num_nodes + 1);
        let mut slots = Vec::with_capacity(2 * edges.len());
        for (i, nb) in neighbors.iter().enumerate() {
            offsets.push(slots.len());
            slots.extend(nb.iter().map(|&j| (i, j)));
        }
        offsets.push(slots.len());

        let mut g = Graph {
            num_nodes,
            edges,
            neighbors,
            offsets,
            slots,
            reverse: Vec::new(),
        };
        g.reverse = (0..g.slots.len())
            .map(|s| {
                let (i, j) = g.slots[s];
                g.slot(j, i).expect("adjacency is symmetric")
            })
            .collect();
        Ok(g)
    }

    /// Complete graph on `num_nodes` nodes.
    pub fn complete(num_nodes: usize) -> Result<Self> {
        let edges: Vec<_> = (0..num_nodes)
            .flat_map(|i| (i + 1..num_nodes).map(move |j| (i, j)))
            .collect();
        Graph::new(num_nodes, &edges)
    }

    /// Path `0 - 1 - ... - (N-1)`.
    pub fn path(num_nodes: usize) -> Result<Self> {
        let edges: Vec<_> = (1..num_nodes).map(|i| (i - 1, i)).collect();
        Graph::new(num_nodes, &edges)
    }

    /// Cycle `0 - 1 - ... - (N-1) - 0`.
    pub fn cycle(num_nodes: usize) -> Result<Self> {
        let mut edges: Vec<_> = (1..num_nodes).map(|i| (i - 1, i)).collect();
        edges.push((0, num_nodes - 1));
        Graph::new(num_nodes, &edges)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of directed slots, twice the number of edges.
    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    /// Slot index of the ordered pair `(owner, neighbor)`, if adjacent.
    pub fn slot(&self, owner: usize, neighbor: usize) -> Option<usize> {
        let nb = self.neighbors.get(owner)?;
        nb.binary_search(&neighbor)
            .ok()
            .map(|pos| self.offsets[owner] + pos)
    }

    /// `(owner, neighbor)` of a slot.
    pub fn slot_pair(&self, slot: usize) -> (usize, usize) {
        self.slots[slot]
    }

    /// The slot holding the swapped pair.
    pub fn reverse_slot(&self, slot: usize) -> usize {
        self.reverse[slot]
    }

    /// Slots owned by node `i`, a contiguous range.
    pub fn owned_slots(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Dimension of the cycle space, `|E| - N + 1`.
    pub fn cycle_rank(&self) -> usize {
        self.edges.len() + 1 - self.num_nodes
    }

    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            n_nodes: self.num_nodes,
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
        }
    }

    pub fn from_spec(spec: &GraphSpec) -> Result<Self> {
        let edges: Vec<_> = spec.edges.iter().map(|e| (e[0], e[1])).collect();
        Graph::new(spec.n_nodes, &edges)
    }

    /// `A` (nM x nN) and `P` (nM x nM) for per-node dimension `n`.
    pub fn matrices(&self, n: usize) -> TopologyMatrices {
        assert!(n >= 1, "per-node dimension must be positive");
        let m = self.num_slots();
        let nn = self.num_nodes;
        let mut a = DMatrix::zeros(n * m, n * nn);
        let mut p = DMatrix::zeros(n * m, n * m);
        for s in 0..m {
            let (i, _) = self.slots[s];
            let r = self.reverse[s];
            for c in 0..n {
                a[(s * n + c, i * n + c)] = 1.0;
                p[(s * n + c, r * n + c)] = 1.0;
            }
        }
        TopologyMatrices { a, p, n }
    }
}

/// JSON form of a graph: `{"n_nodes": N, "edges": [[i, j], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub n_nodes: usize,
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone)]
pub struct TopologyMatrices {
    /// Selects each slot's owner copy: row block `s` is `I_n` in column block `owner(s)`.
    pub a: DMatrix<f64>,
    /// Swaps slot `(i, j)` with slot `(j, i)`.
    pub p: DMatrix<f64>,
    pub n: usize,
}

/// Uniform points in the unit square, edge iff distance <= radius. Redraws
/// until the graph is connected, at most [`MAX_CONNECTIVITY_ATTEMPTS`] times.
pub fn random_geometric_graph(num_nodes: usize, radius: f64, seed: u64) -> Result<Graph> {
    if !(radius > 0.0 && radius <= std::f64::consts::SQRT_2) {
        return Err(Error::InvalidGraph(format!(
            "radius {radius} outside (0, sqrt(2)]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_CONNECTIVITY_ATTEMPTS {
        let pts: Vec<(f64, f64)> = (0..num_nodes)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let mut edges = Vec::new();
        for i in 0..num_nodes {
            for j in i + 1..num_nodes {
                let dx = pts[i].0 - pts[j].0;
                let dy = pts[i].1 - pts[j].1;
                if (dx * dx + dy * dy).sqrt() <= radius {
                    edges.push((i, j));
                }
            }
        }
        match Graph::new(num_nodes, &edges) {
            Ok(g) => return Ok(g),
            Err(Error::Disconnected) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::ConnectivityRetriesExceeded(
        MAX_CONNECTIVITY_ATTEMPTS,
    ))
}

struct DisjointSet {
    parent: Vec<usize>,
    count: usize,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            count: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
            self.count -= 1;
        }
    }

    fn components(&self) -> usize {
        self.count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn two_node_graph() {
        let g = Graph::new(2, &[(0, 1)]).unwrap();
        assert_eq!(g.num_slots(), 2);
        assert_eq!(g.degrees(), vec![1, 1]);
        assert_eq!(g.slot(0, 1), Some(0));
        assert_eq!(g.slot(1, 0), Some(1));
    }

    #[test]
    fn three_node_path_slot_order() {
        let g = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.num_slots(), 4);
        assert_eq!(g.degrees(), vec![1, 2, 1]);
        let order: Vec<_> = (0..4).map(|s| g.slot_pair(s)).collect();
        assert_eq!(order, vec![(0, 1), (1, 0), (1, 2), (2, 1)]);
    }

    #[test]
    fn rejects_bad_graphs() {
        assert_eq!(Graph::new(3, &[(0, 1)]), Err(Error::Disconnected));
        assert_eq!(Graph::new(2, &[(0, 0), (0, 1)]), Err(Error::SelfLoop(0)));
        assert_eq!(
            Graph::new(2, &[(0, 1), (1, 0)]),
            Err(Error::DuplicateEdge(0, 1))
        );
        assert!(matches!(Graph::new(1, &[]), Err(Error::InvalidGraph(_))));
        assert!(matches!(
            Graph::new(2, &[(0, 2)]),
            Err(Error::InvalidGraph(_))
        ));
    }

    #[test]
    fn two_node_matrices() {
        let t = Graph::new(2, &[(0, 1)]).unwrap().matrices(1);
        assert_eq!(t.a, DMatrix::identity(2, 2));
        assert_eq!(t.p, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn three_node_path_matrices() {
        let t = Graph::path(3).unwrap().matrices(1);
        let a = DMatrix::from_row_slice(4, 3, &[1., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 1.]);
        assert_eq!(t.a, a);
        let p = DMatrix::from_row_slice(
            4,
            4,
            &[
                0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.,
            ],
        );
        assert_eq!(t.p, p);
    }

    #[test]
    fn geometric_graph_cases() {
        let g = random_geometric_graph(2, std::f64::consts::SQRT_2, 99).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);

        let a = random_geometric_graph(25, 0.4, 7).unwrap();
        let b = random_geometric_graph(25, 0.4, 7).unwrap();
        assert_eq!(a, b);

        assert_eq!(
            random_geometric_graph(5, 1e-9, 1),
            Err(Error::ConnectivityRetriesExceeded(
                MAX_CONNECTIVITY_ATTEMPTS
            ))
        );
    }

    #[test]
    fn spec_round_trip_normalizes() {
        let spec = GraphSpec {
            n_nodes: 3,
            edges: vec![[2, 1], [1, 0]],
        };
        let g = Graph::from_spec(&spec).unwrap();
        let json = serde_json::to_string(&g.to_spec()).unwrap();
        assert_eq!(json, r#"{"n_nodes":3,"edges":[[0,1],[1,2]]}"#);
    }

    fn arb_connected() -> impl Strategy<Value = Graph> {
        (3usize..9, any::<u64>(), 0.0f64..1.0).prop_map(|(n, seed, density)| {
            // random spanning tree plus extra edges
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut edges = Vec::new();
            for i in 1..n {
                edges.push((rng.random_range(0..i), i));
            }
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random::<f64>() < density * 0.5 && !edges.contains(&(i, j)) {
                        edges.push((i, j));
                    }
                }
            }
            Graph::new(n, &edges).unwrap()
        })
    }

    proptest! {
        #[test]
        fn slot_table_invariants(g in arb_connected()) {
            let d = g.degrees();
            prop_assert_eq!(d.iter().sum::<usize>(), g.num_slots());
            let mut seen = vec![false; g.num_slots()];
            for i in 0..g.num_nodes() {
                let r = g.owned_slots(i);
                prop_assert_eq!(r.start, d[..i].iter().sum::<usize>());
                prop_assert_eq!(r.len(), d[i]);
                for &j in g.neighbors(i) {
                    let s = g.slot(i, j).unwrap();
                    prop_assert!(r.contains(&s));
                    prop_assert!(!seen[s]);
                    seen[s] = true;
                    prop_assert!(g.slot(j, i).is_some());
                    prop_assert_eq!(g.reverse_slot(g.reverse_slot(s)), s);
                }
            }
            prop_assert!(seen.into_iter().all(|b| b));
        }

        #[test]
        fn structural_matrix_identities(g in arb_connected(), n in 1usize..4) {
            let t = g.matrices(n);
            let pp = &t.p * &t.p;
            prop_assert_eq!(pp, DMatrix::identity(n * g.num_slots(), n * g.num_slots()));
            let ata = t.a.transpose() * &t.a;
            let mut expected = DMatrix::zeros(n * g.num_nodes(), n * g.num_nodes());
            for i in 0..g.num_nodes() {
                for c in 0..n {
                    expected[(i * n + c, i * n + c)] = g.degree(i) as f64;
                }
            }
            prop_assert_eq!(ata, expected);
            for row in t.a.row_iter() {
                let nz: Vec<f64> = row.iter().copied().filter(|v| *v != 0.0).collect();
                prop_assert_eq!(nz, vec![1.0]);
            }
        }
    }
}

//! Edge-based relaxed ADMM: primal update, packet exchange, synchronous and
//! masked asynchronous steps.
//!
//! Slot vectors are stacked in the graph's slot order, `n` entries per slot.

use nalgebra::{DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::cost::{LocalCost, SharedCost};
use crate::error::{Error, Result};
use crate::graph::{Graph, TopologyMatrices};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Relaxation. Values in (0,1) are the nominal range; larger ones are
    /// accepted for stability scans.
    pub alpha: f64,
    /// Penalty.
    pub rho: f64,
}

impl Params {
    pub fn new(alpha: f64, rho: f64) -> Result<Self> {
        let p = Params { alpha, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "rho must be > 0, got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// Stacked primal iterates, `n` per node.
    pub x: DVector<f64>,
    /// Stacked auxiliary variables, `n` per slot.
    pub z: DVector<f64>,
    pub k: usize,
    pub n: usize,
}

impl SolverState {
    pub fn zeros(g: &Graph, n: usize) -> Self {
        SolverState {
            x: DVector::zeros(n * g.num_nodes()),
            z: DVector::zeros(n * g.num_slots()),
            k: 0,
            n,
        }
    }

    pub fn with_z(g: &Graph, n: usize, z: DVector<f64>) -> Result<Self> {
        let s = SolverState {
            x: DVector::zeros(n * g.num_nodes()),
            z,
            k: 0,
            n,
        };
        s.check(g)?;
        Ok(s)
    }

    pub fn check(&self, g: &Graph) -> Result<()> {
        if self.x.len() != self.n * g.num_nodes() || self.z.len() != self.n * g.num_slots() {
            return Err(Error::DimensionMismatch(format!(
                "state has |x|={} |z|={}, graph needs {} and {} (n={})",
                self.x.len(),
                self.z.len(),
                self.n * g.num_nodes(),
                self.n * g.num_slots(),
                self.n
            )));
        }
        Ok(())
    }

    pub fn x_node(&self, i: usize) -> DVectorView<'_, f64> {
        self.x.rows(i * self.n, self.n)
    }

    pub fn z_slot(&self, slot: usize) -> DVectorView<'_, f64> {
        self.z.rows(slot * self.n, self.n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub origin: usize,
    pub destination: usize,
    pub payload: DVector<f64>,
}

/// `sum_{j in N_i} z_ij`.
pub fn slot_sum(g: &Graph, z: &DVector<f64>, i: usize, n: usize) -> DVector<f64> {
    let mut acc = DVector::zeros(n);
    for s in g.owned_slots(i) {
        acc += z.rows(s * n, n);
    }
    acc
}

/// Copies each node's block to every slot it owns.
pub fn lift_to_slots(g: &Graph, x: &DVector<f64>, n: usize) -> DVector<f64> {
    let mut out = DVector::zeros(n * g.num_slots());
    for s in 0..g.num_slots() {
        let (owner, _) = g.slot_pair(s);
        out.rows_mut(s * n, n).copy_from(&x.rows(owner * n, n));
    }
    out
}

/// `argmin_x f_i(x) - <sum_j z_ij, x> + (rho d_i / 2)||x||^2`, computed as a
/// prox with penalty `rho d_i`.
pub fn primal_update(
    i: usize,
    z: &DVector<f64>,
    g: &Graph,
    cost: &dyn LocalCost,
    p: &Params,
) -> Result<DVector<f64>> {
    if i >= g.num_nodes() {
        return Err(Error::InvalidGraph(format!("node {i} out of range")));
    }
    let n = cost.dim();
    let sigma = p.rho * g.degree(i) as f64;
    cost.prox(sigma, &(slot_sum(g, z, i, n) / sigma))
}

/// Packet from `j` to neighbor `i`: `-z_ji + 2 rho x_j`, with `x_j` already
/// advanced.
pub fn make_packet(
    j: usize,
    i: usize,
    state: &SolverState,
    g: &Graph,
    p: &Params,
) -> Result<Packet> {
    let s = g.slot(j, i).ok_or(Error::NotNeighbors(j, i))?;
    let payload = state.x_node(j) * (2.0 * p.rho) - state.z_slot(s);
    Ok(Packet {
        origin: j,
        destination: i,
        payload,
    })
}

/// `(1 - alpha) z_ij + alpha q`.
pub fn apply_packet(z_ij: DVectorView<'_, f64>, q: &DVector<f64>, alpha: f64) -> DVector<f64> {
    z_ij * (1.0 - alpha) + q * alpha
}

pub(crate) fn check_costs(costs: &[SharedCost], g: &Graph, n: usize) -> Result<()> {
    if costs.len() != g.num_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "{} costs for {} nodes",
            costs.len(),
            g.num_nodes()
        )));
    }
    if let Some(c) = costs.iter().find(|c| c.dim() != n) {
        return Err(Error::DimensionMismatch(format!(
            "cost of dim {} in an n={n} problem",
            c.dim()
        )));
    }
    Ok(())
}

/// One synchronous iteration: every node updates, every packet arrives.
pub fn sync_step(
    state: &SolverState,
    costs: &[SharedCost],
    g: &Graph,
    p: &Params,
) -> Result<SolverState> {
    let all_nodes = vec![true; g.num_nodes()];
    let all_slots = vec![true; g.num_slots()];
    async_step(state, costs, g, p, &all_slots, &all_nodes)
}

/// One asynchronous iteration. Active nodes recompute their primal block;
/// slot `(i, j)` takes the packet from `j` iff `beta[slot(i, j)]`.
pub fn async_step(
    state: &SolverState,
    costs: &[SharedCost],
    g: &Graph,
    p: &Params,
    beta: &[bool],
    active: &[bool],
) -> Result<SolverState> {
    let n = state.n;
    state.check(g)?;
    check_costs(costs, g, n)?;
    if beta.len() != g.num_slots() || active.len() != g.num_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "masks have {} slots and {} nodes, graph has {} and {}",
            beta.len(),
            active.len(),
            g.num_slots(),
            g.num_nodes()
        )));
    }
    for (s, &b) in beta.iter().enumerate() {
        let (_, origin) = g.slot_pair(s);
        if b && !active[origin] {
            return Err(Error::MaskInconsistent { slot: s, origin });
        }
    }

    let mut next = state.clone();
    for i in (0..g.num_nodes()).filter(|&i| active[i]) {
        let xi = primal_update(i, &state.z, g, costs[i].as_ref(), p)?;
        next.x.rows_mut(i * n, n).copy_from(&xi);
    }
    // packets carry the origin's fresh x and its old slot z_ji
    let sent = SolverState {
        x: next.x.clone(),
        z: state.z.clone(),
        k: state.k,
        n,
    };
    for (s, _) in beta.iter().enumerate().filter(|(_, &b)| b) {
        let (i, j) = g.slot_pair(s);
        let packet = make_packet(j, i, &sent, g, p)?;
        let updated = apply_packet(state.z_slot(s), &packet.payload, p.alpha);
        next.z.rows_mut(s * n, n).copy_from(&updated);
    }
    next.k = state.k + 1;
    Ok(next)
}

/// Matrix form of the auxiliary update given the new primal vector:
/// `(1 - alpha) z - alpha P z + 2 alpha rho P A x`.
pub fn auxiliary_update_matrix(
    z: &DVector<f64>,
    x_next: &DVector<f64>,
    m: &TopologyMatrices,
    p: &Params,
) -> DVector<f64> {
    let pz = &m.p * z;
    let pax = &m.p * (&m.a * x_next);
    z * (1.0 - p.alpha) - pz * p.alpha + pax * (2.0 * p.alpha * p.rho)
}

/// `||z_after_sync_step - z||_inf`.
pub fn fixed_point_residual(
    state: &SolverState,
    costs: &[SharedCost],
    g: &Graph,
    p: &Params,
) -> Result<f64> {
    let next = sync_step(state, costs, g, p)?;
    Ok((next.z - &state.z).amax())
}

/// `(max_i ||x_i - x*||, ||x - 1 (x) x*||_2)`.
pub fn consensus_error(x: &DVector<f64>, x_star: &DVector<f64>) -> (f64, f64) {
    let n = x_star.len();
    let mut inf: f64 = 0.0;
    let mut sq = 0.0;
    for i in 0..x.len() / n {
        let d = (x.rows(i * n, n) - x_star).norm_squared();
        inf = inf.max(d.sqrt());
        sq += d;
    }
    (inf, sq.sqrt())
}

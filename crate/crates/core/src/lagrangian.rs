//! Augmented-Lagrangian form of the relaxed iteration, with explicit dual
//! variables `w` and bridge variables `y` per slot. Used as an independent
//! check on the operator form in `solver`.

use nalgebra::DVector;

use crate::cost::SharedCost;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::solver::{check_costs, lift_to_slots, Params};

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianState {
    pub x: DVector<f64>,
    pub w: DVector<f64>,
    pub y: DVector<f64>,
    pub k: usize,
    pub n: usize,
}

impl LagrangianState {
    pub fn zeros(g: &Graph, n: usize) -> Self {
        LagrangianState {
            x: DVector::zeros(n * g.num_nodes()),
            w: DVector::zeros(n * g.num_slots()),
            y: DVector::zeros(n * g.num_slots()),
            k: 0,
            n,
        }
    }

    fn check(&self, g: &Graph) -> Result<()> {
        let (nx, ns) = (self.n * g.num_nodes(), self.n * g.num_slots());
        if self.x.len() != nx || self.w.len() != ns || self.y.len() != ns {
            return Err(Error::DimensionMismatch(format!(
                "lagrangian state sizes ({}, {}, {}) vs expected ({nx}, {ns}, {ns})",
                self.x.len(),
                self.w.len(),
                self.y.len()
            )));
        }
        Ok(())
    }

    /// Auxiliary vector of the operator form that generates the same
    /// primal trajectory: `w - rho(2 alpha - 1)(A x - y) + rho y`.
    pub fn operator_z(&self, g: &Graph, p: &Params) -> DVector<f64> {
        let ax = lift_to_slots(g, &self.x, self.n);
        &self.w - (ax - &self.y) * (p.rho * (2.0 * p.alpha - 1.0)) + &self.y * p.rho
    }

    /// Largest `|y_ij - y_ji|`.
    pub fn bridge_asymmetry(&self, g: &Graph) -> f64 {
        let n = self.n;
        (0..g.num_slots())
            .map(|s| (self.y.rows(s * n, n) - self.y.rows(g.reverse_slot(s) * n, n)).amax())
            .fold(0.0, f64::max)
    }
}

pub fn lagrangian_step(
    state: &LagrangianState,
    costs: &[SharedCost],
    g: &Graph,
    p: &Params,
) -> Result<LagrangianState> {
    state.check(g)?;
    let n = state.n;
    check_costs(costs, g, n)?;
    let (alpha, rho) = (p.alpha, p.rho);
    let corr = rho * (2.0 * alpha - 1.0);

    let mut x = state.x.clone();
    for (i, cost) in costs.iter().enumerate() {
        let xi_old = state.x.rows(i * n, n);
        let mut lin = DVector::zeros(n);
        for s in g.owned_slots(i) {
            lin += state.w.rows(s * n, n) + state.y.rows(s * n, n) * (2.0 * alpha * rho)
                - xi_old * corr;
        }
        let sigma = rho * g.degree(i) as f64;
        let xi = cost.prox(sigma, &(lin / sigma))?;
        x.rows_mut(i * n, n).copy_from(&xi);
    }

    let mut w = state.w.clone();
    for s in 0..g.num_slots() {
        let (i, _) = g.slot_pair(s);
        let y_old = state.y.rows(s * n, n);
        let step = (state.x.rows(i * n, n) - y_old) * corr + (x.rows(i * n, n) - y_old) * rho;
        let ws = state.w.rows(s * n, n) - step;
        w.rows_mut(s * n, n).copy_from(&ws);
    }

    let mut y = DVector::zeros(n * g.num_slots());
    for s in 0..g.num_slots() {
        let (i, j) = g.slot_pair(s);
        let r = g.reverse_slot(s);
        let ys = (x.rows(i * n, n) + x.rows(j * n, n)) * 0.5
            - (w.rows(s * n, n) + w.rows(r * n, n)) / (2.0 * rho);
        y.rows_mut(s * n, n).copy_from(&ys);
    }

    Ok(LagrangianState {
        x,
        w,
        y,
        k: state.k + 1,
        n,
    })
}

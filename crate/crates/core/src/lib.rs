//! Relaxed ADMM for consensus optimization over lossy, asynchronous
//! peer-to-peer networks, with the spectral machinery that predicts its
//! convergence rate.
//!
//! Each node `i` holds a local cost `f_i` and one auxiliary vector per
//! neighbor. Nodes exchange single packets per iteration; packets may be
//! lost and nodes may sleep. The `rate` module builds the affine model of
//! the iteration around the optimum and the lifted operator whose spectrum
//! bounds the mean-square rate under random losses.

// `!(x > 0.0)` forms deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod lagrangian;
pub mod network;
pub mod rate;
pub mod solver;

pub use cost::{centralized_solve, CostSpec, LocalCost, QuadraticCost, QuarticCost, SharedCost};
pub use error::{Error, Result};
pub use experiment::{
    compare_rates, fit_rate, preset, rate_reports, run_quartic, run_trajectories, run_trial,
    run_trial_until, stability_scan, ExperimentConfig, Instance, RateFit,
};
pub use graph::{random_geometric_graph, Graph, GraphSpec, TopologyMatrices};
pub use lagrangian::{lagrangian_step, LagrangianState};
pub use network::{draw_events, effective_beta_probability, EventDraw, LossModel};
pub use rate::{
    build_l, build_rate_model, check_spectrum, expected_b, expected_b_kron, randomized_rate_model,
    RandomizedRateModel, RateModel, RateReport, SpectralCheck,
};
pub use solver::{
    async_step, consensus_error, fixed_point_residual, sync_step, Params, SolverState,
};

//! Monte Carlo experiment driver: error trajectories, rate fits, stability
//! scans and empirical-vs-predicted rate comparisons.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{centralized_solve, CostSpec, QuarticCost, SharedCost};
use crate::error::{Error, Result};
use crate::graph::{random_geometric_graph, Graph, GraphSpec};
use crate::network::{draw_events, LossModel};
use crate::rate::{build_rate_model, randomized_rate_model, RateReport};
use crate::solver::{
    async_step, consensus_error, fixed_point_residual, sync_step, Params, SolverState,
};

/// Trials whose error exceeds this are stopped and counted as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;
pub const FIT_FLOOR: f64 = 1e-10;
pub const FIT_CEILING: f64 = 1e-3;
pub const MIN_FIT_POINTS: usize = 20;
/// Final error a trial must stay below to count as convergent in a scan.
pub const STABLE_FINAL_ERROR: f64 = 1e-2;
/// Iterations skipped before measuring the slope of a whole curve.
pub const BURN_IN: usize = 50;
/// Largest `nM` for which the lifted operator is assembled in sweeps.
pub const MAX_LIFTED_DIM: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GeneratedGraph {
    RandomGeometric {
        n_nodes: usize,
        radius: f64,
        seed: u64,
    },
    Complete {
        n_nodes: usize,
    },
    Path {
        n_nodes: usize,
    },
    Cycle {
        n_nodes: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphConfig {
    Generated(GeneratedGraph),
    Explicit(GraphSpec),
}

impl GraphConfig {
    pub fn build(&self) -> Result<Graph> {
        match self {
            GraphConfig::Explicit(spec) => Graph::from_spec(spec),
            GraphConfig::Generated(GeneratedGraph::RandomGeometric {
                n_nodes,
                radius,
                seed,
            }) => random_geometric_graph(*n_nodes, *radius, *seed),
            GraphConfig::Generated(GeneratedGraph::Complete { n_nodes }) => {
                Graph::complete(*n_nodes)
            }
            GraphConfig::Generated(GeneratedGraph::Path { n_nodes }) => Graph::path(*n_nodes),
            GraphConfig::Generated(GeneratedGraph::Cycle { n_nodes }) => Graph::cycle(*n_nodes),
        }
    }
}

/// Initial auxiliary vector of each trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitConfig {
    #[default]
    Zero,
    /// Independent `N(0, scale^2)` entries, drawn per trial.
    Gaussian { scale: f64 },
    /// Minimum-norm fixed point of the linearized iteration plus
    /// independent `N(0, scale^2)` entries.
    PerturbedFixedPoint { scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSweepConfig {
    pub sizes: Vec<usize>,
    /// Overrides the experiment cost.
    #[serde(default)]
    pub cost: Option<CostSpec>,
    pub alpha: f64,
    pub rho: f64,
    pub p_mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub graph: GraphConfig,
    pub cost: CostSpec,
    /// Same cost at every node; otherwise random families are reseeded per
    /// node.
    pub identical_costs: bool,
    pub alpha: Vec<f64>,
    pub rho: Vec<f64>,
    pub loss: LossModel,
    /// Sweep over the uniform loss probability, overriding `loss`.
    pub p_lambda: Option<Vec<f64>>,
    /// Complete-graph sweep of `compare`, over the `p_lambda` list.
    pub size_sweep: Option<SizeSweepConfig>,
    /// Curvatures for `quartic`.
    pub q: Option<Vec<f64>>,
    pub trials: usize,
    /// Iteration budget per trial.
    pub iterations: usize,
    /// Stop a trial early once its fixed-point residual is at most this.
    pub stop_residual: Option<f64>,
    pub seed: u64,
    pub init: InitConfig,
    pub out: Option<PathBuf>,
    /// Write one CSV per trial in `run`.
    pub trial_logs: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            graph: GraphConfig::Generated(GeneratedGraph::RandomGeometric {
                n_nodes: 25,
                radius: 0.4,
                seed: 7,
            }),
            cost: CostSpec::RandomQuadratic {
                n: 5,
                cond: 10.0,
                seed: 3,
                min_curvature: 1.0,
            },
            identical_costs: false,
            alpha: vec![0.3, 0.5, 0.75, 1.0],
            rho: vec![1.0],
            loss: LossModel::uniform(0.8, 0.4, 42),
            p_lambda: None,
            size_sweep: None,
            q: None,
            trials: 100,
            iterations: 500,
            stop_residual: None,
            seed: 1,
            init: InitConfig::Zero,
            out: None,
            trial_logs: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        ExperimentConfig::from_json_file_over(path, &ExperimentConfig::default())
    }

    /// Top-level keys of the file replace those of `base`.
    pub fn from_json_file_over(path: &Path, base: &ExperimentConfig) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        ExperimentConfig::from_json_str_over(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            e => e,
        })
    }

    /// Top-level keys of the JSON object `text` replace those of `base`.
    pub fn from_json_str_over(text: &str, base: &ExperimentConfig) -> Result<Self> {
        let patch: serde_json::Value = serde_json::from_str(text)?;
        let serde_json::Value::Object(patch) = patch else {
            return Err(Error::Config("config is not a JSON object".into()));
        };
        let mut merged = serde_json::to_value(base)?;
        if let serde_json::Value::Object(m) = &mut merged {
            m.extend(patch);
        }
        let cfg: ExperimentConfig = serde_json::from_value(merged)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.iterations == 0 {
            return Err(Error::Config(
                "trials and iterations must be at least 1".into(),
            ));
        }
        if self.alpha.is_empty() || self.rho.is_empty() {
            return Err(Error::Config(
                "alpha and rho grids must be non-empty".into(),
            ));
        }
        for &a in &self.alpha {
            for &r in &self.rho {
                Params::new(a, r)?;
            }
        }
        if matches!(self.stop_residual, Some(t) if !(t >= 0.0)) {
            return Err(Error::Config("stop_residual must be >= 0".into()));
        }
        if let Some(pl) = &self.p_lambda {
            if pl.is_empty() {
                return Err(Error::Config("p_lambda sweep is empty".into()));
            }
            if !self.loss.is_uniform() {
                return Err(Error::Config(
                    "p_lambda sweep needs a uniform loss model".into(),
                ));
            }
        }
        if let Some(sw) = &self.size_sweep {
            Params::new(sw.alpha, sw.rho)?;
            if !self.loss.is_uniform() {
                return Err(Error::Config(
                    "size sweep needs a uniform loss model".into(),
                ));
            }
            if sw.sizes.iter().any(|&n| n < 2) {
                return Err(Error::Config(
                    "size sweep needs graphs of at least 2 nodes".into(),
                ));
            }
            if !(sw.p_mu > 0.0 && sw.p_mu <= 1.0) {
                return Err(Error::Config(format!(
                    "size sweep p_mu {} outside (0, 1]",
                    sw.p_mu
                )));
            }
        }
        if matches!(&self.size_sweep, Some(s) if s.sizes.is_empty())
            || matches!(&self.q, Some(q) if q.is_empty())
        {
            return Err(Error::Config("sweep lists must be non-empty".into()));
        }
        if let InitConfig::Gaussian { scale } | InitConfig::PerturbedFixedPoint { scale } =
            self.init
        {
            if !(scale >= 0.0 && scale.is_finite()) {
                return Err(Error::Config(format!(
                    "init scale {scale} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }

    /// Loss models of the sweep, in order.
    pub fn loss_models(&self) -> Vec<LossModel> {
        match (&self.p_lambda, &self.loss) {
            (Some(list), LossModel::Uniform { p_mu, seed, .. }) => list
                .iter()
                .map(|&pl| LossModel::uniform(*p_mu, pl, *seed))
                .collect(),
            _ => vec![self.loss.clone()],
        }
    }

    /// `(alpha, rho, loss)` grid, loss outermost.
    pub fn grid(&self) -> Vec<(Params, LossModel)> {
        let mut out = Vec::new();
        for loss in self.loss_models() {
            for &alpha in &self.alpha {
                for &rho in &self.rho {
                    out.push((Params { alpha, rho }, loss.clone()));
                }
            }
        }
        out
    }

    pub fn instance(&self) -> Result<Instance> {
        let graph = self.graph.build()?;
        Instance::new(graph, &self.cost, self.identical_costs)
    }
}

/// Built-in setups, one per subcommand.
pub fn preset(command: &str) -> Option<ExperimentConfig> {
    let base = ExperimentConfig::default();
    Some(match command {
        "run" => base,
        "rate" | "compare" => ExperimentConfig {
            graph: GraphConfig::Generated(GeneratedGraph::RandomGeometric {
                n_nodes: 5,
                radius: 0.6,
                seed: 4,
            }),
            cost: CostSpec::RandomQuadratic {
                n: 2,
                cond: 10.0,
                seed: 3,
                min_curvature: 1.0,
            },
            identical_costs: true,
            alpha: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95],
            rho: vec![0.5, 1.0, 2.0, 5.0, 10.0],
            loss: LossModel::uniform(1.0, 0.0, 42),
            p_lambda: Some(vec![0.0, 0.2, 0.4, 0.6]),
            size_sweep: (command == "compare").then(|| SizeSweepConfig {
                sizes: (3..=10).collect(),
                cost: None,
                alpha: 0.95,
                rho: 0.5,
                p_mu: 0.8,
            }),
            trials: 100,
            iterations: 1000,
            init: InitConfig::Gaussian { scale: 1.0 },
            ..base
        },
        "scan" => ExperimentConfig {
            graph: GraphConfig::Generated(GeneratedGraph::RandomGeometric {
                n_nodes: 10,
                radius: 0.5,
                seed: 7,
            }),
            cost: CostSpec::RandomQuadratic {
                n: 2,
                cond: 10.0,
                seed: 3,
                min_curvature: 1.0,
            },
            alpha: (1..=25).map(|a| a as f64 * 0.1).collect(),
            rho: vec![0.5, 1.0, 2.0, 5.0],
            loss: LossModel::uniform(1.0, 0.0, 42),
            p_lambda: Some(vec![0.0, 0.2, 0.4, 0.6]),
            trials: 20,
            iterations: 500,
            ..base
        },
        "quartic" => ExperimentConfig {
            graph: GraphConfig::Generated(GeneratedGraph::RandomGeometric {
                n_nodes: 10,
                radius: 0.5,
                seed: 7,
            }),
            cost: CostSpec::Quartic { q: 1.0 },
            identical_costs: true,
            alpha: vec![0.95],
            rho: vec![0.5],
            loss: LossModel::uniform(0.8, 0.5, 42),
            q: Some(vec![0.1, 1.0, 10.0]),
            trials: 100,
            iterations: 500,
            init: InitConfig::Gaussian { scale: 1.0 },
            ..base
        },
        _ => return None,
    })
}

/// A graph with one cost per node and the optimum of their sum.
#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: Graph,
    pub costs: Vec<SharedCost>,
    pub x_star: DVector<f64>,
}

impl Instance {
    pub fn new(graph: Graph, cost: &CostSpec, identical: bool) -> Result<Self> {
        let costs: Vec<SharedCost> = if identical {
            let c = cost.build()?;
            vec![c; graph.num_nodes()]
        } else {
            (0..graph.num_nodes())
                .map(|i| cost.with_seed_offset(i as u64).build())
                .collect::<Result<_>>()?
        };
        Instance::from_costs(graph, costs)
    }

    pub fn from_costs(graph: Graph, costs: Vec<SharedCost>) -> Result<Self> {
        let x_star = centralized_solve(&costs)?;
        Ok(Instance {
            graph,
            costs,
            x_star,
        })
    }

    pub fn n(&self) -> usize {
        self.x_star.len()
    }

    pub fn all_quadratic(&self) -> bool {
        self.costs.iter().all(|c| c.as_quadratic().is_some())
    }
}

/// Seed of trial `t` given the experiment and loss seeds.
pub fn trial_seed(base: u64, loss_seed: u64, trial: usize) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut x =
        base ^ loss_seed.rotate_left(32) ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Noise part of the initial auxiliary vector; `PerturbedFixedPoint` adds
/// the fixed point in `run_trials`.
pub fn initial_z(init: InitConfig, len: usize, seed: u64) -> DVector<f64> {
    match init {
        InitConfig::Zero => DVector::zeros(len),
        InitConfig::Gaussian { scale } | InitConfig::PerturbedFixedPoint { scale } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(u64::MAX);
            DVector::from_fn(len, |_, _| {
                let v: f64 = StandardNormal.sample(&mut rng);
                scale * v
            })
        }
    }
}

/// Per-iteration errors of one trial; entry `k` describes `x(k)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub err_inf: Vec<f64>,
    pub err_2: Vec<f64>,
    /// `max |z(k) - z(k-1)|`; 0 at `k = 0`.
    pub z_residual: Vec<f64>,
    pub diverged: bool,
}

impl Trajectory {
    pub fn final_err(&self) -> f64 {
        *self.err_2.last().unwrap_or(&f64::NAN)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["k", "err_inf", "err_2", "z_residual"])?;
        for k in 0..self.err_2.len() {
            w.serialize((k, self.err_inf[k], self.err_2[k], self.z_residual[k]))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `iterations` steps from `z0` under `loss` (seeded per trial).
/// Lossless models take the synchronous path.
pub fn run_trial(
    inst: &Instance,
    p: &Params,
    loss: &LossModel,
    iterations: usize,
    z0: DVector<f64>,
) -> Result<Trajectory> {
    run_trial_until(inst, p, loss, iterations, z0, None)
}

/// As `run_trial`, stopping once `fixed_point_residual <= stop_residual`.
pub fn run_trial_until(
    inst: &Instance,
    p: &Params,
    loss: &LossModel,
    iterations: usize,
    z0: DVector<f64>,
    stop_residual: Option<f64>,
) -> Result<Trajectory> {
    let g = &inst.graph;
    let mut state = SolverState::with_z(g, inst.n(), z0)?;
    let lossless = loss.is_lossless(g);
    let mut traj = Trajectory::default();
    let (e_inf, e_2) = consensus_error(&state.x, &inst.x_star);
    traj.err_inf.push(e_inf);
    traj.err_2.push(e_2);
    traj.z_residual.push(0.0);
    for k in 0..iterations {
        let next = if lossless {
            sync_step(&state, &inst.costs, g, p)?
        } else {
            let ev = draw_events(loss, g, k as u64);
            async_step(&state, &inst.costs, g, p, &ev.beta, &ev.active)?
        };
        let (e_inf, e_2) = consensus_error(&next.x, &inst.x_star);
        traj.z_residual.push((&next.z - &state.z).amax());
        traj.err_inf.push(e_inf);
        traj.err_2.push(e_2);
        state = next;
        if !(e_2 <= DIVERGENCE_THRESHOLD) {
            traj.diverged = true;
            break;
        }
        if let Some(tol) = stop_residual {
            if fixed_point_residual(&state, &inst.costs, g, p)? <= tol {
                break;
            }
        }
    }
    Ok(traj)
}

/// All trials of one grid point, in trial order.
pub fn run_trials(
    inst: &Instance,
    p: &Params,
    loss: &LossModel,
    cfg: &ExperimentConfig,
) -> Result<Vec<Trajectory>> {
    let center = init_center(inst, p, cfg.init)?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(cfg.seed, loss.seed(), t);
            let z0 = trial_z0(inst, cfg.init, &center, seed);
            run_trial_until(
                inst,
                p,
                &loss.with_seed(seed),
                cfg.iterations,
                z0,
                cfg.stop_residual,
            )
        })
        .collect()
}

fn init_center(inst: &Instance, p: &Params, init: InitConfig) -> Result<DVector<f64>> {
    let len = inst.n() * inst.graph.num_slots();
    match init {
        InitConfig::PerturbedFixedPoint { .. } => {
            build_rate_model(&inst.graph, &inst.costs, p, &inst.x_star)?.fixed_point_z()
        }
        _ => Ok(DVector::zeros(len)),
    }
}

fn trial_z0(inst: &Instance, init: InitConfig, center: &DVector<f64>, seed: u64) -> DVector<f64> {
    center + initial_z(init, inst.n() * inst.graph.num_slots(), seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub gamma_hat: f64,
    /// Log-slope of the fitted window.
    pub slope: f64,
    pub k0: usize,
    pub k1: usize,
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
    pub r_squared: f64,
}

/// Least-squares slope of `log err` over the longest run of consecutive
/// iterations with `err` in `[FIT_FLOOR, FIT_CEILING]`.
pub fn fit_rate(err: &[f64]) -> Result<RateFit> {
    fit_rate_window(err, FIT_FLOOR, FIT_CEILING)
}

pub fn fit_rate_window(err: &[f64], floor: f64, ceiling: f64) -> Result<RateFit> {
    let mut best = (0, 0);
    let mut start = None;
    for (k, &e) in err
        .iter()
        .enumerate()
        .chain(std::iter::once((err.len(), &f64::NAN)))
    {
        let inside = e >= floor && e <= ceiling;
        match (inside, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                if k - s > best.1 - best.0 {
                    best = (s, k);
                }
                start = None;
            }
            _ => {}
        }
    }
    let (k0, k1) = best;
    let count = k1 - k0;
    if count < MIN_FIT_POINTS {
        return Err(Error::WindowTooShort(count));
    }
    let xs: Vec<f64> = (k0..k1).map(|k| k as f64).collect();
    let ys: Vec<f64> = err[k0..k1].iter().map(|e| e.ln()).collect();
    let nf = count as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    Ok(RateFit {
        gamma_hat: slope.exp(),
        slope,
        k0,
        k1: k1 - 1,
        residual: (sse / nf).sqrt(),
        r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 },
    })
}

/// Aggregate curves over the non-diverged trials of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveStats {
    /// Mean over trials of `log err_2(k)`.
    pub mean_log_err: Vec<f64>,
    pub std_log_err: Vec<f64>,
    /// Mean over trials of `err_2(k)`.
    pub mean_err: Vec<f64>,
    /// Mean over trials of `err_2(k)^2`.
    pub mean_sq_err: Vec<f64>,
    pub mean_err_inf: Vec<f64>,
    pub diverged: usize,
    pub trials: usize,
}

pub fn aggregate(trajs: &[Trajectory]) -> CurveStats {
    let kept: Vec<&Trajectory> = trajs.iter().filter(|t| !t.diverged).collect();
    let len = kept.iter().map(|t| t.err_2.len()).min().unwrap_or(0);
    let m = kept.len() as f64;
    let mut s = CurveStats {
        mean_log_err: vec![0.0; len],
        std_log_err: vec![0.0; len],
        mean_err: vec![0.0; len],
        mean_sq_err: vec![0.0; len],
        mean_err_inf: vec![0.0; len],
        diverged: trajs.len() - kept.len(),
        trials: trajs.len(),
    };
    for k in 0..len {
        let logs: Vec<f64> = kept
            .iter()
            .map(|t| t.err_2[k].max(f64::MIN_POSITIVE).ln())
            .collect();
        let ml = logs.iter().sum::<f64>() / m;
        s.mean_log_err[k] = ml;
        s.std_log_err[k] = if kept.len() > 1 {
            (logs.iter().map(|l| (l - ml).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        } else {
            0.0
        };
        s.mean_err[k] = kept.iter().map(|t| t.err_2[k]).sum::<f64>() / m;
        s.mean_sq_err[k] = kept.iter().map(|t| t.err_2[k].powi(2)).sum::<f64>() / m;
        s.mean_err_inf[k] = kept.iter().map(|t| t.err_inf[k]).sum::<f64>() / m;
    }
    s
}

impl CurveStats {
    /// `exp(mean log err)`, the curve whose log is plotted.
    pub fn geometric_mean_err(&self) -> Vec<f64> {
        self.mean_log_err.iter().map(|l| l.exp()).collect()
    }
}

fn fit_or_none(err: &[f64]) -> Option<RateFit> {
    fit_rate(err).ok()
}

/// Log-linear fit of a curve after `BURN_IN`, down to `FIT_FLOOR`.
pub fn tail_fit(err: &[f64]) -> Option<RateFit> {
    let mut f = fit_rate_window(err.get(BURN_IN..)?, FIT_FLOOR, f64::INFINITY).ok()?;
    f.k0 += BURN_IN;
    f.k1 += BURN_IN;
    Some(f)
}

fn out_dir(cfg: &ExperimentConfig) -> Option<&Path> {
    cfg.out.as_deref()
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn loss_probs(loss: &LossModel) -> (f64, f64) {
    match loss {
        LossModel::Uniform { p_mu, p_lambda, .. } => (*p_mu, *p_lambda),
        LossModel::PerEdge { .. } => (f64::NAN, f64::NAN),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub alpha: f64,
    pub rho: f64,
    pub p_mu: f64,
    pub p_lambda: f64,
    pub trials: usize,
    pub diverged: usize,
    /// Rate fitted to the geometric-mean error curve.
    pub fit: Option<RateFit>,
    /// Same curve, fitted over everything after the burn-in.
    pub tail: Option<RateFit>,
    pub final_mean_log_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub command: String,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub dim: usize,
    pub trials: usize,
    pub iterations: usize,
    pub seed: u64,
    pub curves: Vec<CurveSummary>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub stats: Vec<CurveStats>,
}

/// Mean log-error curves for every grid point.
pub fn run_trajectories(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let inst = cfg.instance()?;
    let mut curves = Vec::new();
    let mut stats = Vec::new();
    let dir = out_dir(cfg);
    if let Some(d) = dir {
        ensure_dir(d)?;
    }
    for (gi, (p, loss)) in cfg.grid().into_iter().enumerate() {
        let trajs = run_trials(&inst, &p, &loss, cfg)?;
        if let (Some(d), true) = (dir, cfg.trial_logs) {
            let td = d.join("trials");
            ensure_dir(&td)?;
            for (t, tr) in trajs.iter().enumerate() {
                tr.write_csv(&td.join(format!("grid{gi:03}_trial{t:04}.csv")))?;
            }
        }
        let st = aggregate(&trajs);
        let (p_mu, p_lambda) = loss_probs(&loss);
        curves.push(CurveSummary {
            alpha: p.alpha,
            rho: p.rho,
            p_mu,
            p_lambda,
            trials: st.trials,
            diverged: st.diverged,
            fit: fit_or_none(&st.geometric_mean_err()),
            tail: tail_fit(&st.geometric_mean_err()),
            final_mean_log_err: st.mean_log_err.last().copied().unwrap_or(f64::NAN),
        });
        stats.push(st);
    }
    let summary = RunSummary {
        command: "run".into(),
        n_nodes: inst.graph.num_nodes(),
        n_edges: inst.graph.edges().len(),
        dim: inst.n(),
        trials: cfg.trials,
        iterations: cfg.iterations,
        seed: cfg.seed,
        curves,
    };
    if let Some(d) = dir {
        let mut w = csv::Writer::from_path(d.join("trajectories.csv"))?;
        w.write_record([
            "alpha",
            "rho",
            "p_mu",
            "p_lambda",
            "k",
            "mean_log_err",
            "std_log_err",
            "mean_err",
            "mean_err_inf",
        ])?;
        for (c, st) in summary.curves.iter().zip(&stats) {
            for k in 0..st.mean_log_err.len() {
                w.serialize((
                    c.alpha,
                    c.rho,
                    c.p_mu,
                    c.p_lambda,
                    k,
                    st.mean_log_err[k],
                    st.std_log_err[k],
                    st.mean_err[k],
                    st.mean_err_inf[k],
                ))?;
            }
        }
        w.flush()?;
        write_json(&d.join("summary.json"), &summary)?;
    }
    Ok(RunOutput { summary, stats })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEntry {
    pub alpha: f64,
    pub rho: f64,
    pub p_mu: f64,
    pub p_lambda: f64,
    #[serde(flatten)]
    pub report: RateReport,
}

/// Spectral report for every grid point; no simulation.
pub fn rate_reports(cfg: &ExperimentConfig) -> Result<Vec<RateEntry>> {
    cfg.validate()?;
    let inst = cfg.instance()?;
    let mut out = Vec::new();
    for (p, loss) in cfg.grid() {
        let model = build_rate_model(&inst.graph, &inst.costs, &p, &inst.x_star)?;
        let randomized = randomized_rate_model(&model, &loss, &inst.graph)?;
        let (p_mu, p_lambda) = loss_probs(&loss);
        out.push(RateEntry {
            alpha: p.alpha,
            rho: p.rho,
            p_mu,
            p_lambda,
            report: RateReport::new(&model, &randomized),
        });
    }
    if let Some(d) = out_dir(cfg) {
        ensure_dir(d)?;
        let mut w = csv::Writer::from_path(d.join("spectrum_T.csv"))?;
        w.write_record(["alpha", "rho", "p_lambda", "index", "re", "im", "modulus"])?;
        for e in &out {
            for (i, [re, im]) in e.report.spectrum_t.iter().enumerate() {
                w.serialize((e.alpha, e.rho, e.p_lambda, i, re, im, re.hypot(*im)))?;
            }
        }
        w.flush()?;
        write_json(&d.join("rate.json"), &out)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityPoint {
    pub p_lambda: f64,
    pub rho: f64,
    pub alpha: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub p_lambda: f64,
    pub rho: f64,
    /// Largest stable alpha of the grid, if any.
    pub max_stable_alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub points: Vec<StabilityPoint>,
    pub boundary: Vec<BoundaryPoint>,
}

/// Stable iff every trial ends below its starting error and below
/// `STABLE_FINAL_ERROR` without diverging.
pub fn is_stable(trajs: &[Trajectory]) -> bool {
    trajs.iter().all(|t| {
        let f = t.final_err();
        !t.diverged && f < t.err_2[0] && f < STABLE_FINAL_ERROR
    })
}

pub fn stability_scan(cfg: &ExperimentConfig) -> Result<StabilitySummary> {
    cfg.validate()?;
    let inst = cfg.instance()?;
    let mut points = Vec::new();
    let mut boundary = Vec::new();
    for loss in cfg.loss_models() {
        let (_, p_lambda) = loss_probs(&loss);
        for &rho in &cfg.rho {
            let mut best: Option<f64> = None;
            for &alpha in &cfg.alpha {
                let p = Params { alpha, rho };
                let stable = stable_point(&inst, &p, &loss, cfg)?;
                if stable {
                    best = Some(best.map_or(alpha, |b: f64| b.max(alpha)));
                }
                points.push(StabilityPoint {
                    p_lambda,
                    rho,
                    alpha,
                    stable,
                });
            }
            boundary.push(BoundaryPoint {
                p_lambda,
                rho,
                max_stable_alpha: best,
            });
        }
    }
    let summary = StabilitySummary { points, boundary };
    if let Some(d) = out_dir(cfg) {
        ensure_dir(d)?;
        let mut w = csv::Writer::from_path(d.join("stability.csv"))?;
        for pt in &summary.points {
            w.serialize(pt)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(d.join("stability_boundary.csv"))?;
        w.write_record(["p_lambda", "rho", "max_stable_alpha"])?;
        for b in &summary.boundary {
            w.serialize((b.p_lambda, b.rho, b.max_stable_alpha.unwrap_or(f64::NAN)))?;
        }
        w.flush()?;
        write_json(&d.join("summary.json"), &summary)?;
    }
    Ok(summary)
}

// Trials run in order and stop at the first failure; the verdict does not
// depend on how many are evaluated.
fn stable_point(
    inst: &Instance,
    p: &Params,
    loss: &LossModel,
    cfg: &ExperimentConfig,
) -> Result<bool> {
    let center = init_center(inst, p, cfg.init)?;
    for t in 0..cfg.trials {
        let seed = trial_seed(cfg.seed, loss.seed(), t);
        let z0 = trial_z0(inst, cfg.init, &center, seed);
        let tr = run_trial_until(
            inst,
            p,
            &loss.with_seed(seed),
            cfg.iterations,
            z0,
            cfg.stop_residual,
        )?;
        if !is_stable(std::slice::from_ref(&tr)) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateComparison {
    pub alpha: f64,
    pub rho: f64,
    pub p_mu: f64,
    pub p_lambda: f64,
    /// Fitted to the mean over trials of `||x - x*||`.
    pub gamma_hat: Option<f64>,
    /// Fitted to the mean over trials of `||x - x*||^2`.
    pub gamma_hat_sq: Option<f64>,
    pub gamma_m: f64,
    pub bar_gamma_m: f64,
    pub sqrt_bar_gamma_m: f64,
    /// `|gamma_hat - bar_gamma_m| / bar_gamma_m`.
    pub rel_diff: Option<f64>,
    pub rel_diff_sqrt: Option<f64>,
    pub rel_diff_sq: Option<f64>,
    pub eig_one_count: usize,
    pub diverged: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Stats {
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            mean,
            std: var.sqrt(),
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub rows: Vec<RateComparison>,
    /// Over grid points with a fit; `None` if no point could be fitted.
    pub rel_diff: Option<Stats>,
    pub rel_diff_sqrt: Option<Stats>,
    pub rel_diff_sq: Option<Stats>,
    /// Grid points without a usable fit window.
    pub unfitted: usize,
    pub size_sweep: Vec<SizeSweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSweepRow {
    pub n_nodes: usize,
    pub p_lambda: f64,
    pub alpha: f64,
    pub rho: f64,
    pub gamma_hat: Option<f64>,
    /// Fitted after the burn-in, for curves that never enter the window.
    pub tail_gamma_hat: Option<f64>,
    /// Only for graphs with `nM <= MAX_LIFTED_DIM`.
    pub bar_gamma_m: Option<f64>,
}

fn compare_point(
    inst: &Instance,
    p: &Params,
    loss: &LossModel,
    cfg: &ExperimentConfig,
) -> Result<RateComparison> {
    let model = build_rate_model(&inst.graph, &inst.costs, p, &inst.x_star)?;
    let randomized = randomized_rate_model(&model, loss, &inst.graph)?;
    let trajs = run_trials(inst, p, loss, cfg)?;
    let st = aggregate(&trajs);
    let gamma_hat = fit_or_none(&st.mean_err).map(|f| f.gamma_hat);
    let gamma_hat_sq = fit_or_none(&st.mean_sq_err).map(|f| f.gamma_hat);
    let bg = randomized.bar_gamma_m;
    let rel = |g: Option<f64>, target: f64| g.map(|g| (g - target).abs() / target);
    let (p_mu, p_lambda) = loss_probs(loss);
    Ok(RateComparison {
        alpha: p.alpha,
        rho: p.rho,
        p_mu,
        p_lambda,
        gamma_hat,
        gamma_hat_sq,
        gamma_m: model.gamma_m,
        bar_gamma_m: bg,
        sqrt_bar_gamma_m: bg.sqrt(),
        rel_diff: rel(gamma_hat, bg),
        rel_diff_sqrt: rel(gamma_hat, bg.sqrt()),
        rel_diff_sq: rel(gamma_hat_sq, bg),
        eig_one_count: model.eig_one_count,
        diverged: st.diverged,
    })
}

/// Empirical rates against the mean-square prediction over the grid, and
/// optionally over complete graphs of the configured sizes.
pub fn compare_rates(cfg: &ExperimentConfig) -> Result<CompareSummary> {
    cfg.validate()?;
    let inst = cfg.instance()?;
    if !inst.all_quadratic() {
        return Err(Error::Config("compare needs quadratic costs".into()));
    }
    let mut rows = Vec::new();
    for (p, loss) in cfg.grid() {
        rows.push(compare_point(&inst, &p, &loss, cfg)?);
    }
    let collect =
        |f: fn(&RateComparison) -> Option<f64>| rows.iter().filter_map(f).collect::<Vec<f64>>();
    let rel = collect(|r| r.rel_diff);
    let summary_rel = Stats::of(&rel);
    let size_sweep = match &cfg.size_sweep {
        Some(sw) => size_sweep(cfg, sw)?,
        None => Vec::new(),
    };
    let summary = CompareSummary {
        unfitted: rows.len() - rel.len(),
        rel_diff: summary_rel,
        rel_diff_sqrt: Stats::of(&collect(|r| r.rel_diff_sqrt)),
        rel_diff_sq: Stats::of(&collect(|r| r.rel_diff_sq)),
        rows,
        size_sweep,
    };
    if let Some(d) = out_dir(cfg) {
        ensure_dir(d)?;
        let mut w = csv::Writer::from_path(d.join("compare.csv"))?;
        for r in &summary.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        if !summary.size_sweep.is_empty() {
            let mut w = csv::Writer::from_path(d.join("size_sweep.csv"))?;
            for r in &summary.size_sweep {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        write_json(&d.join("summary.json"), &summary)?;
    }
    Ok(summary)
}

fn size_sweep(cfg: &ExperimentConfig, sw: &SizeSweepConfig) -> Result<Vec<SizeSweepRow>> {
    let p = Params::new(sw.alpha, sw.rho)?;
    let seed = cfg.loss.seed();
    let losses: Vec<LossModel> = match &cfg.p_lambda {
        Some(list) => list
            .iter()
            .map(|&pl| LossModel::uniform(sw.p_mu, pl, seed))
            .collect(),
        None => vec![LossModel::uniform(sw.p_mu, loss_probs(&cfg.loss).1, seed)],
    };
    let mut rows = Vec::new();
    for &n_nodes in &sw.sizes {
        let inst = Instance::new(
            Graph::complete(n_nodes)?,
            sw.cost.as_ref().unwrap_or(&cfg.cost),
            cfg.identical_costs,
        )?;
        for loss in losses.iter() {
            let bar_gamma_m = if inst.n() * inst.graph.num_slots() <= MAX_LIFTED_DIM {
                let model = build_rate_model(&inst.graph, &inst.costs, &p, &inst.x_star)?;
                Some(randomized_rate_model(&model, loss, &inst.graph)?.bar_gamma_m)
            } else {
                None
            };
            let st = aggregate(&run_trials(&inst, &p, loss, cfg)?);
            rows.push(SizeSweepRow {
                n_nodes,
                p_lambda: loss_probs(loss).1,
                alpha: p.alpha,
                rho: p.rho,
                gamma_hat: fit_or_none(&st.mean_err).map(|f| f.gamma_hat),
                tail_gamma_hat: tail_fit(&st.mean_err).map(|f| f.gamma_hat),
                bar_gamma_m,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarticCurve {
    pub q: f64,
    pub alpha: f64,
    pub rho: f64,
    pub fit: Option<RateFit>,
    pub tail: Option<RateFit>,
    /// Mean-square prediction from the model linearized at the optimum.
    pub bar_gamma_m: Option<f64>,
    pub diverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarticSummary {
    pub curves: Vec<QuarticCurve>,
}

/// Trajectories with `f_i(x) = x^4/12 + q x^2/2` at every node, per `q`.
pub fn run_quartic(cfg: &ExperimentConfig) -> Result<(QuarticSummary, Vec<CurveStats>)> {
    cfg.validate()?;
    let graph = cfg.graph.build()?;
    let qs = cfg
        .q
        .clone()
        .ok_or_else(|| Error::Config("quartic needs a q list".into()))?;
    let mut curves = Vec::new();
    let mut stats = Vec::new();
    for &q in &qs {
        let cost: SharedCost = Arc::new(QuarticCost::new(q)?);
        let inst = Instance::from_costs(graph.clone(), vec![cost; graph.num_nodes()])?;
        for (p, loss) in cfg.grid() {
            let bar_gamma_m = if graph.num_slots() <= MAX_LIFTED_DIM {
                let model = build_rate_model(&inst.graph, &inst.costs, &p, &inst.x_star)?;
                Some(randomized_rate_model(&model, &loss, &inst.graph)?.bar_gamma_m)
            } else {
                None
            };
            let st = aggregate(&run_trials(&inst, &p, &loss, cfg)?);
            let geo = st.geometric_mean_err();
            curves.push(QuarticCurve {
                q,
                alpha: p.alpha,
                rho: p.rho,
                fit: fit_or_none(&geo),
                tail: tail_fit(&geo),
                bar_gamma_m,
                diverged: st.diverged,
            });
            stats.push(st);
        }
    }
    let summary = QuarticSummary { curves };
    if let Some(d) = out_dir(cfg) {
        ensure_dir(d)?;
        let mut w = csv::Writer::from_path(d.join("quartic.csv"))?;
        w.write_record(["q", "alpha", "rho", "k", "mean_log_err", "std_log_err"])?;
        for (c, st) in summary.curves.iter().zip(&stats) {
            for k in 0..st.mean_log_err.len() {
                w.serialize((
                    c.q,
                    c.alpha,
                    c.rho,
                    k,
                    st.mean_log_err[k],
                    st.std_log_err[k],
                ))?;
            }
        }
        w.flush()?;
        write_json(&d.join("summary.json"), &summary)?;
    }
    Ok((summary, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fit_exact_geometric() {
        let err: Vec<f64> = (0..400).map(|k| 0.9f64.powi(k)).collect();
        let f = fit_rate(&err).unwrap();
        assert_abs_diff_eq!(f.gamma_hat, 0.9, epsilon = 1e-12);
        let scaled: Vec<f64> = (0..100).map(|k| 1e6 * 0.5f64.powi(k)).collect();
        assert_abs_diff_eq!(fit_rate(&scaled).unwrap().gamma_hat, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn fit_window_bounds() {
        let err: Vec<f64> = (0..400).map(|k| 0.9f64.powi(k)).collect();
        let f = fit_rate(&err).unwrap();
        assert!(err[f.k0] <= FIT_CEILING && err[f.k0 - 1] > FIT_CEILING);
        assert!(err[f.k1] >= FIT_FLOOR && err[f.k1 + 1] < FIT_FLOOR);
        assert!(f.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn fit_rejects_short_window() {
        let err: Vec<f64> = (0..50).map(|k| 0.1f64.powi(k)).collect();
        assert!(matches!(fit_rate(&err), Err(Error::WindowTooShort(_))));
        assert!(matches!(
            fit_rate(&[1.0; 30]),
            Err(Error::WindowTooShort(0))
        ));
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let seeds: std::collections::BTreeSet<u64> =
            (0..1000).map(|t| trial_seed(1, 42, t)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"graph":{"n_nodes":3,"edges":[[1,0],[1,2]]},"alpha":[0.5],"rho":[1.0],
                "loss":{"type":"uniform","p_mu":0.8,"p_lambda":0.4,"seed":42},
                "p_lambda":[0.0,0.2],"trials":2,"iterations":10}"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.instance().unwrap().graph.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(cfg.grid().len(), 2);
        let bad = ExperimentConfig {
            trials: 0,
            ..ExperimentConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig {
            alpha: vec![],
            ..ExperimentConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            graph: GraphConfig::Generated(GeneratedGraph::Cycle { n_nodes: 4 }),
            cost: CostSpec::RandomQuadratic {
                n: 2,
                cond: 5.0,
                seed: 9,
                min_curvature: 1.0,
            },
            alpha: vec![0.6],
            rho: vec![1.0],
            loss: LossModel::uniform(0.8, 0.3, 5),
            trials: 6,
            iterations: 300,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = small_cfg();
        let a = run_trajectories(&cfg).unwrap();
        let b = run_trajectories(&cfg).unwrap();
        assert_eq!(a.stats, b.stats);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn lossless_fit_within_model_rate() {
        let cfg = ExperimentConfig {
            loss: LossModel::lossless(),
            trials: 1,
            iterations: 600,
            ..small_cfg()
        };
        let out = run_trajectories(&cfg).unwrap();
        let inst = cfg.instance().unwrap();
        let m = build_rate_model(
            &inst.graph,
            &inst.costs,
            &Params::new(0.6, 1.0).unwrap(),
            &inst.x_star,
        )
        .unwrap();
        let g = out.summary.curves[0].fit.unwrap().gamma_hat;
        assert!(g <= m.gamma_m + 1e-3, "{g} vs {}", m.gamma_m);
    }

    #[test]
    fn stability_predicate() {
        let good = Trajectory {
            err_inf: vec![1.0, 1e-5],
            err_2: vec![1.0, 1e-5],
            z_residual: vec![0.0, 0.0],
            diverged: false,
        };
        let mut bad = good.clone();
        bad.err_2[1] = 2.0;
        assert!(is_stable(std::slice::from_ref(&good)));
        assert!(!is_stable(&[good.clone(), bad]));
        let mut div = good;
        div.diverged = true;
        assert!(!is_stable(&[div]));
    }

    #[test]
    fn scan_marks_known_points() {
        let cfg = ExperimentConfig {
            alpha: vec![0.5, 3.0],
            rho: vec![1.0],
            loss: LossModel::lossless(),
            trials: 3,
            iterations: 400,
            ..small_cfg()
        };
        let s = stability_scan(&cfg).unwrap();
        assert!(s.points[0].stable);
        assert!(!s.points[1].stable);
        assert_eq!(s.boundary[0].max_stable_alpha, Some(0.5));
    }

    #[test]
    fn stats_summary() {
        let s = Stats::of(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.max, s.min, s.mean, s.count), (3.0, 1.0, 2.0, 3));
        assert_abs_diff_eq!(s.std, 1.0, epsilon = 1e-15);
        assert!(Stats::of(&[]).is_none());
    }

    #[test]
    fn writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            trials: 2,
            iterations: 30,
            trial_logs: true,
            out: Some(dir.path().to_path_buf()),
            ..small_cfg()
        };
        run_trajectories(&cfg).unwrap();
        assert!(dir.path().join("summary.json").exists());
        let text = fs::read_to_string(dir.path().join("trials/grid000_trial0000.csv")).unwrap();
        assert!(text.starts_with("k,err_inf,err_2,z_residual\n"));
        assert_eq!(text.lines().count(), 32);
    }
}

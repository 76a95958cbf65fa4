//! Python bindings. Structured values cross the boundary as JSON so the
//! Python side receives plain dicts and lists.

use nalgebra::DVector;
use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use radmm::experiment::{self, initial_z, InitConfig};
use radmm::{
    async_step, build_rate_model, consensus_error, draw_events, fixed_point_residual,
    randomized_rate_model, sync_step, CostSpec, ExperimentConfig, Graph, Instance, LossModel,
    Params, RateReport, SharedCost, SolverState,
};

fn err(e: radmm::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dumps(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    obj.py()
        .import("json")?
        .call_method1("dumps", (obj,))?
        .extract()
}

fn loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    loads(py, &serde_json::to_string(value).map_err(json_err)?)
}

/// One cost dict for every node (seeds offset by node index unless
/// `identical`), or a list with one dict per node.
fn build_costs(
    graph: &Graph,
    cost: &Bound<'_, PyAny>,
    identical: bool,
) -> PyResult<Vec<SharedCost>> {
    let text = dumps(cost)?;
    if let Ok(list) = serde_json::from_str::<Vec<CostSpec>>(&text) {
        if list.len() != graph.num_nodes() {
            return Err(PyValueError::new_err(format!(
                "expected {} costs, got {}",
                graph.num_nodes(),
                list.len()
            )));
        }
        return list.iter().map(|c| c.build().map_err(err)).collect();
    }
    let spec: CostSpec = serde_json::from_str(&text).map_err(json_err)?;
    Ok(Instance::new(graph.clone(), &spec, identical)
        .map_err(err)?
        .costs)
}

fn dvec(values: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(values)
}

#[pyclass(name = "Graph", module = "radmm_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: Graph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(num_nodes: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(PyGraph {
            inner: Graph::new(num_nodes, &edges).map_err(err)?,
        })
    }

    #[staticmethod]
    fn complete(num_nodes: usize) -> PyResult<Self> {
        Ok(PyGraph {
            inner: Graph::complete(num_nodes).map_err(err)?,
        })
    }

    #[staticmethod]
    fn cycle(num_nodes: usize) -> PyResult<Self> {
        Ok(PyGraph {
            inner: Graph::cycle(num_nodes).map_err(err)?,
        })
    }

    #[staticmethod]
    fn path(num_nodes: usize) -> PyResult<Self> {
        Ok(PyGraph {
            inner: Graph::path(num_nodes).map_err(err)?,
        })
    }

    #[staticmethod]
    fn random_geometric(num_nodes: usize, radius: f64, seed: u64) -> PyResult<Self> {
        Ok(PyGraph {
            inner: radmm::random_geometric_graph(num_nodes, radius, seed).map_err(err)?,
        })
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn num_slots(&self) -> usize {
        self.inner.num_slots()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    #[getter]
    fn cycle_rank(&self) -> usize {
        self.inner.cycle_rank()
    }

    fn neighbors(&self, node: usize) -> PyResult<Vec<usize>> {
        if node >= self.inner.num_nodes() {
            return Err(PyIndexError::new_err(format!("node {node} out of range")));
        }
        Ok(self.inner.neighbors(node).to_vec())
    }

    /// Slot index of the auxiliary vector `node` keeps for `neighbor`.
    fn slot(&self, node: usize, neighbor: usize) -> Option<usize> {
        self.inner.slot(node, neighbor)
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(num_nodes={}, edges={})",
            self.inner.num_nodes(),
            self.inner.edges().len()
        )
    }
}

/// Solver state over a fixed instance. Each `step` draws the events of the
/// current iteration from the loss model; a lossless model steps
/// synchronously.
#[pyclass(name = "Solver", module = "radmm_py")]
struct PySolver {
    inst: Instance,
    params: Params,
    loss: LossModel,
    state: SolverState,
}

#[pymethods]
impl PySolver {
    #[new]
    #[pyo3(signature = (graph, cost, alpha, rho, p_mu=1.0, p_lambda=0.0, seed=0, identical=false, z0=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        graph: &PyGraph,
        cost: &Bound<'_, PyAny>,
        alpha: f64,
        rho: f64,
        p_mu: f64,
        p_lambda: f64,
        seed: u64,
        identical: bool,
        z0: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let g = graph.inner.clone();
        let costs = build_costs(&g, cost, identical)?;
        let inst = Instance::from_costs(g, costs).map_err(err)?;
        let params = Params::new(alpha, rho).map_err(err)?;
        let loss = LossModel::uniform(p_mu, p_lambda, seed);
        loss.validate(&inst.graph).map_err(err)?;
        let state = match z0 {
            Some(z) => SolverState::with_z(&inst.graph, inst.n(), dvec(z)).map_err(err)?,
            None => SolverState::zeros(&inst.graph, inst.n()),
        };
        Ok(PySolver {
            inst,
            params,
            loss,
            state,
        })
    }

    /// Runs `count` iterations and returns the iteration counter.
    #[pyo3(signature = (count=1))]
    fn step(&mut self, count: usize) -> PyResult<usize> {
        let g = &self.inst.graph;
        for _ in 0..count {
            self.state = if self.loss.is_lossless(g) {
                sync_step(&self.state, &self.inst.costs, g, &self.params)
            } else {
                let ev = draw_events(&self.loss, g, self.state.k as u64);
                async_step(
                    &self.state,
                    &self.inst.costs,
                    g,
                    &self.params,
                    &ev.beta,
                    &ev.active,
                )
            }
            .map_err(err)?;
        }
        Ok(self.state.k)
    }

    #[getter]
    fn k(&self) -> usize {
        self.state.k
    }

    /// Stacked primal iterates, node-major.
    #[getter]
    fn x(&self) -> Vec<f64> {
        self.state.x.as_slice().to_vec()
    }

    /// Stacked auxiliary vectors in slot order.
    #[getter]
    fn z(&self) -> Vec<f64> {
        self.state.z.as_slice().to_vec()
    }

    #[getter]
    fn x_star(&self) -> Vec<f64> {
        self.inst.x_star.as_slice().to_vec()
    }

    /// `(max-norm, 2-norm)` distance of the iterates to the optimum.
    fn error(&self) -> (f64, f64) {
        consensus_error(&self.state.x, &self.inst.x_star)
    }

    /// Max-norm change of `z` under one synchronous step.
    fn residual(&self) -> PyResult<f64> {
        fixed_point_residual(
            &self.state,
            &self.inst.costs,
            &self.inst.graph,
            &self.params,
        )
        .map_err(err)
    }
}

/// Spectral rate report for quadratic costs as a dict.
#[pyfunction]
#[pyo3(signature = (graph, cost, alpha, rho, p_mu=1.0, p_lambda=0.0, seed=0, identical=false))]
#[allow(clippy::too_many_arguments)]
fn rate_report<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    cost: &Bound<'py, PyAny>,
    alpha: f64,
    rho: f64,
    p_mu: f64,
    p_lambda: f64,
    seed: u64,
    identical: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let g = &graph.inner;
    let inst = Instance::from_costs(g.clone(), build_costs(g, cost, identical)?).map_err(err)?;
    let params = Params::new(alpha, rho).map_err(err)?;
    let loss = LossModel::uniform(p_mu, p_lambda, seed);
    loss.validate(g).map_err(err)?;
    let model = build_rate_model(g, &inst.costs, &params, &inst.x_star).map_err(err)?;
    let randomized = randomized_rate_model(&model, &loss, g).map_err(err)?;
    to_py(py, &RateReport::new(&model, &randomized))
}

/// Default configuration of a CLI subcommand as a dict.
#[pyfunction]
fn preset_config<'py>(py: Python<'py>, command: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = experiment::preset(command)
        .ok_or_else(|| PyValueError::new_err(format!("unknown command {command}")))?;
    to_py(py, &cfg)
}

/// Runs a CLI experiment in memory and returns its summary dict. `config`
/// keys replace those of the command's preset.
#[pyfunction]
#[pyo3(signature = (command, config=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    command: &str,
    config: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let base = experiment::preset(command)
        .ok_or_else(|| PyValueError::new_err(format!("unknown command {command}")))?;
    let cfg = match config {
        Some(c) => ExperimentConfig::from_json_str_over(&dumps(c)?, &base).map_err(err)?,
        None => base,
    };
    let json = py.detach(|| -> radmm::Result<serde_json::Value> {
        Ok(match command {
            "run" => serde_json::to_value(experiment::run_trajectories(&cfg)?.summary)?,
            "rate" => serde_json::to_value(experiment::rate_reports(&cfg)?)?,
            "scan" => serde_json::to_value(experiment::stability_scan(&cfg)?)?,
            "compare" => serde_json::to_value(experiment::compare_rates(&cfg)?)?,
            _ => serde_json::to_value(experiment::run_quartic(&cfg)?.0)?,
        })
    });
    to_py(py, &json.map_err(err)?)
}

/// Initial auxiliary vector of the given length: zeros, or Gaussian entries
/// with the given scale.
#[pyfunction]
#[pyo3(signature = (length, seed, scale=None))]
fn initial_vector(length: usize, seed: u64, scale: Option<f64>) -> Vec<f64> {
    let init = match scale {
        Some(scale) => InitConfig::Gaussian { scale },
        None => InitConfig::Zero,
    };
    initial_z(init, length, seed).as_slice().to_vec()
}

#[pymodule]
fn radmm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PySolver>()?;
    m.add_function(wrap_pyfunction!(rate_report, m)?)?;
    m.add_function(wrap_pyfunction!(preset_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(initial_vector, m)?)?;
    Ok(())
}

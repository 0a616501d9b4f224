//! Python bindings: networks and demand from TNTP, the three solver modes,
//! link cost functions and the built-in self-check.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use twostage::demand::DemandSpec;
use twostage::solver::{self, Mode, SolverConfig};
use twostage::{fixtures, selfcheck, tntp};

fn to_py(e: twostage::Error) -> PyErr {
    match e {
        twostage::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn read(path: PathBuf) -> PyResult<String> {
    std::fs::read_to_string(&path)
        .map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))
}

/// BPR link: `t(f) = t0 * (1 + kappa * (f / capacity)^power)`.
#[pyclass(name = "LinkCost", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLinkCost(twostage::LinkParams);

#[pymethods]
impl PyLinkCost {
    #[new]
    #[pyo3(signature = (free_flow_time, capacity, kappa = 0.15, power = 4.0))]
    fn new(free_flow_time: f64, capacity: f64, kappa: f64, power: f64) -> PyResult<Self> {
        twostage::LinkParams::new(free_flow_time, capacity, kappa, power)
            .map(Self)
            .map_err(to_py)
    }

    fn time(&self, flow: f64) -> PyResult<f64> {
        self.0.time(flow).map_err(to_py)
    }

    fn inverse(&self, time: f64) -> PyResult<f64> {
        self.0.inverse(time).map_err(to_py)
    }

    /// Integral of the cost from 0 to `flow`.
    fn sigma(&self, flow: f64) -> PyResult<f64> {
        self.0.sigma(flow).map_err(to_py)
    }

    /// Convex conjugate of `sigma`.
    fn sigma_conj(&self, time: f64) -> PyResult<f64> {
        self.0.sigma_conj(time).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let p = &self.0;
        format!(
            "LinkCost(free_flow_time={}, capacity={}, kappa={}, power={})",
            p.free_flow_time, p.capacity, p.kappa, p.power
        )
    }
}

#[pyclass(name = "Network", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyNetwork(twostage::Network);

#[pymethods]
impl PyNetwork {
    #[staticmethod]
    fn from_tntp(text: &str) -> PyResult<Self> {
        tntp::parse_net(text).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Self::from_tntp(&read(path)?)
    }

    fn to_tntp(&self) -> String {
        tntp::write_net(&self.0)
    }

    /// Copy with every link's kappa and/or power replaced.
    #[pyo3(signature = (kappa = None, power = None))]
    fn with_overrides(&self, kappa: Option<f64>, power: Option<f64>) -> PyResult<Self> {
        self.0
            .clone()
            .with_overrides(kappa, power)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.0.node_count
    }

    #[getter]
    fn link_count(&self) -> usize {
        self.0.link_count()
    }

    #[getter]
    fn zone_count(&self) -> usize {
        self.0.zone_count
    }

    /// `(tail, head, cost)` per link, node ids 1-based.
    fn links(&self) -> Vec<(usize, usize, PyLinkCost)> {
        self.0
            .links
            .iter()
            .map(|l| (l.tail + 1, l.head + 1, PyLinkCost(l.params)))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(nodes={}, links={})",
            self.0.node_count,
            self.0.link_count()
        )
    }
}

#[pyclass(name = "Demand", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDemand(DemandSpec);

#[pymethods]
impl PyDemand {
    /// Zone totals and pair set from a TNTP trips file.
    #[staticmethod]
    fn from_tntp(text: &str) -> PyResult<Self> {
        let trips = tntp::parse_trips(text).map_err(to_py)?;
        DemandSpec::from_trips(&trips).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Self::from_tntp(&read(path)?)
    }

    #[getter]
    fn total(&self) -> f64 {
        self.0.total
    }

    /// `(origin, destination)` per pair, node ids 1-based.
    fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.0.pairs.len())
            .map(|k| {
                let (o, d) = self.0.pair_nodes(k);
                (o + 1, d + 1)
            })
            .collect()
    }

    /// Observed trips per pair, if the demand came from a trip table.
    fn observed(&self) -> Option<Vec<f64>> {
        self.0.reference.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "Demand(pairs={}, total={})",
            self.0.pairs.len(),
            self.0.total
        )
    }
}

#[pyclass(name = "Result", frozen)]
struct PyEquilibrium(solver::EquilibriumResult);

#[pymethods]
impl PyEquilibrium {
    #[getter]
    fn mode(&self) -> String {
        self.0.mode.to_string()
    }

    #[getter]
    fn status(&self) -> String {
        self.0.status.to_string()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times.clone()
    }

    #[getter]
    fn flows(&self) -> Vec<f64> {
        self.0.flows.clone()
    }

    #[getter]
    fn dual_flows(&self) -> Vec<f64> {
        self.0.dual_flows.clone()
    }

    #[getter]
    fn demand(&self) -> Vec<f64> {
        self.0.demand.clone()
    }

    #[getter]
    fn trips(&self) -> Vec<f64> {
        self.0.trips.clone()
    }

    #[getter]
    fn od_costs(&self) -> Vec<f64> {
        self.0.od_costs.clone()
    }

    #[getter]
    fn objective(&self) -> f64 {
        self.0.objective
    }

    #[getter]
    fn gap(&self) -> f64 {
        self.0.gap
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.0.eps
    }

    #[getter]
    fn gamma(&self) -> Option<f64> {
        self.0.gamma
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.iterations
    }

    fn fixed_point_residual(&self) -> f64 {
        self.0.fixed_point_residual()
    }

    /// `(iter, objective, gap or None)` per recorded iteration.
    fn history(&self) -> Vec<(usize, f64, Option<f64>)> {
        self.0
            .history
            .records
            .iter()
            .map(|r| (r.iter, r.value, r.gap))
            .collect()
    }

    /// Least-squares slope of log gap against log iteration over `[start, end]`.
    fn gap_rate(&self, start: usize, end: usize) -> Option<f64> {
        self.0.history.gap_rate(start, end)
    }

    fn __repr__(&self) -> String {
        format!(
            "Result(mode={}, status={}, iterations={}, objective={}, gap={})",
            self.0.mode, self.0.status, self.0.iterations, self.0.objective, self.0.gap
        )
    }
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    match mode {
        "two_stage" | "solve" => Ok(Mode::TwoStage),
        "fixed_demand" | "assign" => Ok(Mode::FixedDemand),
        "baseline" => Ok(Mode::Baseline),
        other => Err(PyValueError::new_err(format!(
            "unknown mode {other:?}; expected two_stage, fixed_demand or baseline"
        ))),
    }
}

/// Runs one of the solver modes and returns the equilibrium. Fixed-demand
/// mode routes `trips` (one value per pair) or else the observed trip table.
#[pyfunction]
#[pyo3(signature = (
    network, demand, mode = "two_stage", *, gamma = None, eps = None, max_iter = 3000,
    gap_every = 10, stop_on_gap = true, restart = false, initial_lipschitz = None,
    max_passes = 50, record_timing = true, trips = None
))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    network: &PyNetwork,
    demand: &PyDemand,
    mode: &str,
    gamma: Option<f64>,
    eps: Option<f64>,
    max_iter: usize,
    gap_every: usize,
    stop_on_gap: bool,
    restart: bool,
    initial_lipschitz: Option<f64>,
    max_passes: usize,
    record_timing: bool,
    trips: Option<Vec<f64>>,
) -> PyResult<PyEquilibrium> {
    let mode = parse_mode(mode)?;
    let cfg = SolverConfig {
        gamma,
        eps,
        max_iter,
        gap_every,
        stop_on_gap,
        restart,
        initial_lipschitz,
        baseline_max_passes: max_passes,
        record_timing,
        ..SolverConfig::default()
    };
    let (net, dem) = (&network.0, &demand.0);
    py.detach(|| match (mode, trips) {
        (Mode::FixedDemand, Some(trips)) => solver::solve_fixed_demand(net, dem, &trips, &cfg),
        (_, None) => solver::solve(mode, net, dem, &cfg),
        (_, Some(_)) => Err(twostage::Error::Invalid(
            "trips only apply to fixed_demand mode".into(),
        )),
    })
    .map(PyEquilibrium)
    .map_err(to_py)
}

/// Built-in fixture by name, as `(network, demand)`.
#[pyfunction]
fn fixture(name: &str) -> PyResult<(PyNetwork, PyDemand)> {
    fixtures::all()
        .into_iter()
        .chain([fixtures::two_parallel_uniform_kappa()])
        .find(|f| f.name == name)
        .map(|f| (PyNetwork(f.network), PyDemand(f.demand)))
        .ok_or_else(|| PyValueError::new_err(format!("no fixture named {name:?}")))
}

/// Runs the closed-form and brute-force checks; `(name, passed, detail)` each.
#[pyfunction]
fn run_selfcheck(py: Python<'_>) -> Vec<(String, bool, String)> {
    py.detach(selfcheck::run)
        .into_iter()
        .map(|c| (c.name, c.passed, c.detail))
        .collect()
}

#[pymodule]
fn pytwostage(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLinkCost>()?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyDemand>()?;
    m.add_class::<PyEquilibrium>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(fixture, m)?)?;
    m.add_function(wrap_pyfunction!(run_selfcheck, m)?)?;
    Ok(())
}

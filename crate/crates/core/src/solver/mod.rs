//! Equilibrium solvers: the two-stage dual minimisation, fixed-demand
//! assignment, the naive alternation baseline, and a brute-force primal oracle.

mod baseline;
pub mod brute_force;
mod gap;
mod history;
pub mod oracle;
mod primal;
mod ustm;

use std::fmt;

pub use baseline::{baseline_alternation, BaselinePass};
pub use brute_force::{brute_force_oracle, BruteForceSolution};
pub use gap::duality_gap;
pub use history::{ConvergenceHistory, IterationRecord, Status};
pub use oracle::{DualOracle, FixedDemandOracle, InnerTolerance, OracleSample, TwoStageOracle};
pub use primal::{entropy_term, primal_value};
pub use ustm::{umst_minimize, Domain, UstmOptions, UstmOutcome};

use crate::demand::DemandSpec;
use crate::entropy::{Potentials, SanitizeOptions};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::shortest_paths::{cost_matrix, RoadGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    TwoStage,
    FixedDemand,
    Baseline,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::TwoStage => "two_stage",
            Mode::FixedDemand => "fixed_demand",
            Mode::Baseline => "baseline",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Entropy temperature; `None` uses 5% of the mean free-flow OD cost.
    pub gamma: Option<f64>,
    /// Target gap; `None` uses `1e-3 * total demand * mean free-flow time`.
    pub eps: Option<f64>,
    pub max_iter: usize,
    /// `None` derives it from the gradient at the start point.
    pub initial_lipschitz: Option<f64>,
    pub inner_tolerance: InnerTolerance,
    pub sinkhorn_max_iter: usize,
    pub gap_every: usize,
    /// Stop as soon as the gap estimate drops below `eps`.
    pub stop_on_gap: bool,
    /// Restart the accelerated method with a halved target whenever the gap
    /// meets the current one.
    pub restart: bool,
    pub warm_start: bool,
    pub sanitize: SanitizeOptions,
    pub baseline_max_passes: usize,
    /// Relative l1 change of demand and flows that ends the baseline loop.
    pub baseline_tol: f64,
    pub record_timing: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: None,
            eps: None,
            max_iter: 3000,
            initial_lipschitz: None,
            inner_tolerance: InnerTolerance::default(),
            sinkhorn_max_iter: 100_000,
            gap_every: 10,
            stop_on_gap: true,
            restart: false,
            warm_start: true,
            sanitize: SanitizeOptions::default(),
            baseline_max_passes: 50,
            baseline_tol: 1e-4,
            record_timing: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Invalid(format!("{name} must be positive, got {v}")))
            }
        };
        if let Some(g) = self.gamma {
            positive("gamma", g)?;
        }
        if let Some(e) = self.eps {
            positive("eps", e)?;
        }
        if let Some(l) = self.initial_lipschitz {
            positive("initial Lipschitz estimate", l)?;
        }
        positive("inner tolerance", self.inner_tolerance.min)?;
        if self.gap_every == 0 {
            return Err(Error::Invalid("gap period must be at least 1".into()));
        }
        Ok(())
    }

    pub fn ustm_options(&self, eps: f64) -> UstmOptions {
        UstmOptions {
            eps,
            max_iter: self.max_iter,
            initial_lipschitz: self.initial_lipschitz,
            gap_every: self.gap_every,
            stop_on_gap: self.stop_on_gap,
            restart: self.restart,
            record_timing: self.record_timing,
        }
    }
}

/// 5% of the mean finite OD cost at free flow.
pub fn default_gamma(net: &Network, demand: &DemandSpec) -> f64 {
    let graph = RoadGraph::new(net);
    let cm = cost_matrix(&graph, &net.free_flow_times(), demand);
    let finite: Vec<f64> = cm
        .values
        .iter()
        .copied()
        .filter(|c| c.is_finite())
        .collect();
    let mean = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
    if mean > 0.0 {
        0.05 * mean
    } else {
        1.0
    }
}

pub fn default_eps(net: &Network, total_demand: f64) -> f64 {
    1e-3 * total_demand.max(1.0) * net.mean_free_flow_time()
}

/// Box `t >= free-flow time`; constant-cost links are pinned there.
pub fn dual_domain(net: &Network) -> Domain {
    Domain {
        lower: net.free_flow_times(),
        pinned: net.links.iter().map(|l| l.params.is_constant()).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub mode: Mode,
    pub status: Status,
    /// Link times `t*`.
    pub times: Vec<f64>,
    /// Link flows: the weighted average of the all-or-nothing loadings seen
    /// by the method. Always satisfies flow conservation for the final demand.
    pub flows: Vec<f64>,
    /// Inverse link cost at `t*` (the flows on constant-cost links). Poorly
    /// conditioned where the cost curve is flat, so it is only a cross-check.
    pub dual_flows: Vec<f64>,
    /// Demand per OD pair, normalised to unit mass.
    pub demand: Vec<f64>,
    /// Demand per OD pair in vehicles.
    pub trips: Vec<f64>,
    /// Shortest-path costs per OD pair at `t*`.
    pub od_costs: Vec<f64>,
    pub potentials: Option<Potentials>,
    pub objective: f64,
    pub gap: f64,
    pub gamma: Option<f64>,
    pub eps: f64,
    pub total_demand: f64,
    pub iterations: usize,
    /// Smoothness estimate the method started from.
    pub initial_lipschitz: f64,
    pub history: ConvergenceHistory,
    pub baseline_passes: Vec<BaselinePass>,
}

impl EquilibriumResult {
    /// `||dual_flows - flows||_2 / max(1, ||flows||_2)`.
    pub fn fixed_point_residual(&self) -> f64 {
        let diff: f64 = self
            .dual_flows
            .iter()
            .zip(&self.flows)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = self.flows.iter().map(|x| x * x).sum::<f64>().sqrt();
        diff / scale.max(1.0)
    }
}

fn recover_flows(net: &Network, times: &[f64], primal: &[f64]) -> Vec<f64> {
    net.links
        .iter()
        .zip(times)
        .zip(primal)
        .map(|((l, &t), &p)| {
            if l.params.is_constant() {
                p
            } else {
                l.params.inverse_at(t)
            }
        })
        .collect()
}

/// Two-stage equilibrium by minimising `F(t)` from `t = free-flow times`.
pub fn solve_two_stage(
    net: &Network,
    demand: &DemandSpec,
    cfg: &SolverConfig,
) -> Result<EquilibriumResult> {
    cfg.validate()?;
    let gamma = cfg.gamma.unwrap_or_else(|| default_gamma(net, demand));
    let eps = cfg.eps.unwrap_or_else(|| default_eps(net, demand.total));
    let mut oracle = TwoStageOracle::new(net, demand, gamma);
    oracle.sanitize = cfg.sanitize;
    oracle.tolerance = cfg.inner_tolerance;
    oracle.sinkhorn_max_iter = cfg.sinkhorn_max_iter;
    oracle.warm_start = cfg.warm_start;

    let domain = dual_domain(net);
    let out = umst_minimize(&mut oracle, &domain.lower, &domain, cfg.ustm_options(eps))?;

    let sample = oracle.evaluate_with_tolerance(&out.point, cfg.inner_tolerance.min)?;
    let state = oracle.last.take().expect("oracle state after evaluation");
    let flows: Vec<f64> = out.aggregated_grad.iter().map(|g| -g).collect();
    let dual_flows = recover_flows(net, &out.point, &flows);
    let trips = state.demand.iter().map(|d| d * demand.total).collect();
    Ok(EquilibriumResult {
        mode: Mode::TwoStage,
        status: out.status,
        times: out.point,
        flows,
        dual_flows,
        demand: state.demand,
        trips,
        od_costs: state.costs.values,
        potentials: Some(state.potentials),
        objective: sample.value,
        gap: out.gap,
        gamma: Some(gamma),
        eps,
        total_demand: demand.total,
        iterations: out.iterations,
        initial_lipschitz: out.initial_lipschitz,
        history: out.history,
        baseline_passes: Vec::new(),
    })
}

/// Wardrop assignment of fixed vehicle trips per OD pair (Beckmann dual).
pub fn solve_fixed_demand(
    net: &Network,
    demand: &DemandSpec,
    trips: &[f64],
    cfg: &SolverConfig,
) -> Result<EquilibriumResult> {
    solve_fixed_demand_from(net, demand, trips, &net.free_flow_times(), cfg)
}

pub fn solve_fixed_demand_from(
    net: &Network,
    demand: &DemandSpec,
    trips: &[f64],
    start: &[f64],
    cfg: &SolverConfig,
) -> Result<EquilibriumResult> {
    cfg.validate()?;
    if trips.len() != demand.pairs.len() {
        return Err(Error::Invalid(format!(
            "{} trip values for {} OD pairs",
            trips.len(),
            demand.pairs.len()
        )));
    }
    if trips.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::Invalid(
            "trips must be finite and non-negative".into(),
        ));
    }
    let total: f64 = trips.iter().sum();
    let eps = cfg.eps.unwrap_or_else(|| default_eps(net, total));
    let mut oracle = FixedDemandOracle::new(net, demand, trips.to_vec());
    let domain = dual_domain(net);
    let out = umst_minimize(&mut oracle, start, &domain, cfg.ustm_options(eps))?;

    let graph = RoadGraph::new(net);
    let cm = cost_matrix(&graph, &out.point, demand);
    let flows: Vec<f64> = out.aggregated_grad.iter().map(|g| -g).collect();
    let dual_flows = recover_flows(net, &out.point, &flows);
    let normalised = if total > 0.0 {
        trips.iter().map(|x| x / total).collect()
    } else {
        vec![0.0; trips.len()]
    };
    Ok(EquilibriumResult {
        mode: Mode::FixedDemand,
        status: out.status,
        times: out.point,
        flows,
        dual_flows,
        demand: normalised,
        trips: trips.to_vec(),
        od_costs: cm.values,
        potentials: None,
        objective: out.sample.value,
        gap: out.gap,
        gamma: None,
        eps,
        total_demand: total,
        iterations: out.iterations,
        initial_lipschitz: out.initial_lipschitz,
        history: out.history,
        baseline_passes: Vec::new(),
    })
}

/// Runs the requested mode. Fixed-demand mode routes the observed trip table.
pub fn solve(
    mode: Mode,
    net: &Network,
    demand: &DemandSpec,
    cfg: &SolverConfig,
) -> Result<EquilibriumResult> {
    match mode {
        Mode::TwoStage => solve_two_stage(net, demand, cfg),
        Mode::Baseline => baseline_alternation(net, demand, cfg),
        Mode::FixedDemand => {
            let trips = demand.reference.clone().ok_or_else(|| {
                Error::Invalid("fixed-demand assignment needs an observed trip table".into())
            })?;
            solve_fixed_demand(net, demand, &trips, cfg)
        }
    }
}

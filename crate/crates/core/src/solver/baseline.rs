//! Naive two-block alternation: distribute demand on current costs, then
//! assign that demand to equilibrium, and repeat.

use std::time::Instant;

use super::history::{ConvergenceHistory, IterationRecord, Status};
use super::oracle::TwoStageOracle;
use super::{
    default_eps, default_gamma, solve_fixed_demand_from, EquilibriumResult, Mode, SolverConfig,
};
use crate::demand::DemandSpec;
use crate::entropy::{demand_from_potentials, sanitize, sinkhorn, Potentials, SinkhornOptions};
use crate::error::Result;
use crate::network::Network;
use crate::shortest_paths::{cost_matrix, RoadGraph};

/// Window over which the demand change must shrink.
const STALL_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselinePass {
    pub pass: usize,
    /// `||d - d_prev||_1` on the normalised demand; infinite on the first pass.
    pub demand_change: f64,
    /// `||f - f_prev||_1 / max(1, ||f||_1)`; infinite on the first pass.
    pub flow_change: f64,
    pub assignment_iterations: usize,
    pub assignment_status: Status,
    pub sinkhorn_sweeps: usize,
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn baseline_alternation(
    net: &Network,
    demand: &DemandSpec,
    cfg: &SolverConfig,
) -> Result<EquilibriumResult> {
    cfg.validate()?;
    let clock = Instant::now();
    let gamma = cfg.gamma.unwrap_or_else(|| default_gamma(net, demand));
    let eps = cfg.eps.unwrap_or_else(|| default_eps(net, demand.total));
    let inner_cfg = SolverConfig {
        gamma: Some(gamma),
        eps: Some(eps),
        ..cfg.clone()
    };
    let graph = RoadGraph::new(net);
    let tol = cfg.baseline_tol;

    let mut times = net.free_flow_times();
    let mut warm: Option<Potentials> = None;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut passes: Vec<BaselinePass> = Vec::new();
    let mut history = ConvergenceHistory::default();
    let mut status = Status::IterationCap;
    let mut last = None;
    let mut oracle = TwoStageOracle::new(net, demand, gamma);
    oracle.sanitize = cfg.sanitize;
    oracle.sinkhorn_max_iter = cfg.sinkhorn_max_iter;

    for pass in 1..=cfg.baseline_max_passes {
        let costs = cost_matrix(&graph, &times, demand);
        let clean = sanitize(demand, &costs.values, cfg.sanitize);
        let inner = sinkhorn(
            &demand.pairs,
            &clean.costs,
            &clean.origin_mass,
            &clean.destination_mass,
            SinkhornOptions {
                gamma,
                tol: cfg.inner_tolerance.min,
                max_iter: cfg.sinkhorn_max_iter,
            },
            warm.as_ref(),
        );
        let d = demand_from_potentials(&demand.pairs, &clean.costs, &inner.potentials, gamma);
        let trips: Vec<f64> = d
            .iter()
            .zip(&costs.values)
            .map(|(&x, c)| if c.is_finite() { demand.total * x } else { 0.0 })
            .collect();
        warm = Some(inner.potentials);

        let assigned = solve_fixed_demand_from(net, demand, &trips, &times, &inner_cfg)?;
        times = assigned.times.clone();

        let (demand_change, flow_change) = match &prev {
            None => (f64::INFINITY, f64::INFINITY),
            Some((d_prev, f_prev)) => {
                let scale = assigned.flows.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
                (l1(&d, d_prev), l1(&assigned.flows, f_prev) / scale)
            }
        };
        log::info!(
            "baseline pass {pass}: demand change {demand_change:.3e}, flow change {flow_change:.3e}"
        );
        passes.push(BaselinePass {
            pass,
            demand_change,
            flow_change,
            assignment_iterations: assigned.iterations,
            assignment_status: assigned.status,
            sinkhorn_sweeps: inner.sweeps,
        });
        let value = oracle
            .evaluate_with_tolerance(&times, cfg.inner_tolerance.min)?
            .value;
        history.records.push(IterationRecord {
            iter: pass,
            value,
            gap: Some(assigned.gap),
            lipschitz: assigned.history.records.last().map_or(0.0, |r| r.lipschitz),
            inner_sweeps: inner.sweeps,
            elapsed_ms: if cfg.record_timing {
                clock.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            },
        });
        prev = Some((d.clone(), assigned.flows.clone()));
        last = Some((d, trips, assigned, value));

        if demand_change <= tol && flow_change <= tol {
            status = Status::Converged;
            break;
        }
        if pass > STALL_WINDOW
            && demand_change > tol
            && demand_change >= passes[pass - 1 - STALL_WINDOW].demand_change
        {
            status = Status::Diverged;
            break;
        }
    }

    let (d, trips, assigned, value) = match last {
        Some(x) => x,
        None => {
            // Zero passes requested: report the free-flow state.
            let trips = vec![0.0; demand.pairs.len()];
            let assigned = solve_fixed_demand_from(net, demand, &trips, &times, &inner_cfg)?;
            let value = oracle
                .evaluate_with_tolerance(&times, cfg.inner_tolerance.min)?
                .value;
            (vec![0.0; demand.pairs.len()], trips, assigned, value)
        }
    };
    let potentials = warm;
    Ok(EquilibriumResult {
        mode: Mode::Baseline,
        status,
        times: assigned.times,
        flows: assigned.flows,
        dual_flows: assigned.dual_flows,
        demand: d,
        trips,
        od_costs: assigned.od_costs,
        potentials,
        objective: value,
        gap: assigned.gap,
        gamma: Some(gamma),
        eps,
        total_demand: demand.total,
        iterations: passes.len(),
        initial_lipschitz: assigned.initial_lipschitz,
        history,
        baseline_passes: passes,
    })
}

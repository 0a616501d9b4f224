//! First-order oracles for the dual objective `F(t)`.
//!
//! Every objective here splits as `F = phi + psi`, where
//! `phi(t) = sum_e sigma_e*(t_e)` is separable and known in closed form and
//! `psi` is the non-smooth part built from shortest paths. The accelerated
//! method aggregates gradients of `psi` only, which is what the gap estimate
//! and the primal flow recovery use.

use crate::demand::DemandSpec;
use crate::entropy::{
    demand_from_potentials, entropy_dual, marginal_error, sanitize, sinkhorn, Potentials,
    SanitizeOptions, Sanitized, SinkhornOptions,
};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::shortest_paths::{aon_assign, cost_matrix, CostMatrix, RoadGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSample {
    pub value: f64,
    pub grad: Vec<f64>,
    /// The separable part `phi(t)`.
    pub separable: f64,
    /// Gradient of the separable part.
    pub separable_grad: Vec<f64>,
    pub inner_sweeps: usize,
    pub inexact: bool,
}

impl OracleSample {
    /// Plain smooth objective: everything is treated as separable.
    pub fn smooth(value: f64, grad: Vec<f64>) -> Self {
        OracleSample {
            value,
            separable: value,
            separable_grad: grad.clone(),
            grad,
            inner_sweeps: 0,
            inexact: false,
        }
    }

    pub fn nonseparable(&self) -> f64 {
        self.value - self.separable
    }

    pub fn nonseparable_grad(&self) -> Vec<f64> {
        self.grad
            .iter()
            .zip(&self.separable_grad)
            .map(|(g, s)| g - s)
            .collect()
    }

    pub fn check_finite(&self) -> Result<()> {
        if !self.value.is_finite() {
            return Err(Error::NonFinite(format!("objective value {}", self.value)));
        }
        if let Some(e) = self.grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient component {}", e + 1)));
        }
        Ok(())
    }
}

pub trait DualOracle {
    /// Evaluates at `t`; `iteration` drives inner tolerance schedules.
    fn evaluate(&mut self, t: &[f64], iteration: usize) -> Result<OracleSample>;
}

impl<F> DualOracle for F
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    fn evaluate(&mut self, t: &[f64], _iteration: usize) -> Result<OracleSample> {
        let (v, g) = self(t);
        Ok(OracleSample::smooth(v, g))
    }
}

fn separable_part(net: &Network, t: &[f64]) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let grad = net
        .links
        .iter()
        .zip(t)
        .map(|(l, &te)| {
            value += l.params.sigma_conj_at(te);
            l.params.inverse_at(te)
        })
        .collect();
    (value, grad)
}

/// Inner tolerance schedule `max(tol_min, c0 / (k + 1)^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerTolerance {
    pub min: f64,
    pub scale: f64,
}

impl InnerTolerance {
    pub fn at(&self, iteration: usize) -> f64 {
        let k = iteration as f64 + 1.0;
        self.min.max(self.scale / (k * k))
    }
}

impl Default for InnerTolerance {
    fn default() -> Self {
        InnerTolerance {
            min: 1e-9,
            scale: 1e-3,
        }
    }
}

/// Inner state of the last two-stage evaluation.
#[derive(Debug, Clone)]
pub struct EntropyState {
    pub costs: CostMatrix,
    pub sanitized: Sanitized,
    pub potentials: Potentials,
    /// Normalised demand per pair.
    pub demand: Vec<f64>,
    /// Link flows of the all-or-nothing loading of `total * demand`.
    pub aon_flows: Vec<f64>,
    pub marginal_error: f64,
}

/// `F(t) = total * D(t, lambda(t), mu(t)) + sum_e sigma_e*(t_e)`.
pub struct TwoStageOracle<'a> {
    net: &'a Network,
    graph: RoadGraph,
    demand: &'a DemandSpec,
    pub gamma: f64,
    pub sanitize: SanitizeOptions,
    pub tolerance: InnerTolerance,
    pub sinkhorn_max_iter: usize,
    pub warm_start: bool,
    warm: Option<Potentials>,
    pub last: Option<EntropyState>,
}

impl<'a> TwoStageOracle<'a> {
    pub fn new(net: &'a Network, demand: &'a DemandSpec, gamma: f64) -> Self {
        TwoStageOracle {
            net,
            graph: RoadGraph::new(net),
            demand,
            gamma,
            sanitize: SanitizeOptions::default(),
            tolerance: InnerTolerance::default(),
            sinkhorn_max_iter: 100_000,
            warm_start: true,
            warm: None,
            last: None,
        }
    }

    pub fn graph(&self) -> &RoadGraph {
        &self.graph
    }

    /// Objective and gradient for given potentials, without balancing.
    pub fn assemble(
        &self,
        t: &[f64],
        costs: &CostMatrix,
        sanitized: &Sanitized,
        potentials: &Potentials,
    ) -> Result<(OracleSample, Vec<f64>, Vec<f64>)> {
        let pairs = &self.demand.pairs;
        let d = demand_from_potentials(pairs, &sanitized.costs, potentials, self.gamma);
        let dual = entropy_dual(
            pairs,
            &sanitized.costs,
            potentials,
            self.gamma,
            &sanitized.origin_mass,
            &sanitized.destination_mass,
        );
        // Unreachable pairs travel on an artificial route that no link carries.
        let trips: Vec<f64> = d
            .iter()
            .zip(&costs.values)
            .map(|(&x, c)| {
                if c.is_finite() {
                    self.demand.total * x
                } else {
                    0.0
                }
            })
            .collect();
        let aon = aon_assign(&self.graph, &costs.trees, self.demand, &trips)?;
        let (separable, separable_grad) = separable_part(self.net, t);
        let grad = separable_grad
            .iter()
            .zip(&aon)
            .map(|(s, f)| s - f)
            .collect();
        let sample = OracleSample {
            value: self.demand.total * dual + separable,
            grad,
            separable,
            separable_grad,
            inner_sweeps: 0,
            inexact: false,
        };
        Ok((sample, d, aon))
    }

    pub fn evaluate_with_tolerance(&mut self, t: &[f64], tol: f64) -> Result<OracleSample> {
        let costs = cost_matrix(&self.graph, t, self.demand);
        let sanitized = sanitize(self.demand, &costs.values, self.sanitize);
        let opts = SinkhornOptions {
            gamma: self.gamma,
            tol,
            max_iter: self.sinkhorn_max_iter,
        };
        let warm = if self.warm_start {
            self.warm.as_ref()
        } else {
            None
        };
        let out = sinkhorn(
            &self.demand.pairs,
            &sanitized.costs,
            &sanitized.origin_mass,
            &sanitized.destination_mass,
            opts,
            warm,
        );
        let (mut sample, d, aon) = self.assemble(t, &costs, &sanitized, &out.potentials)?;
        sample.inner_sweeps = out.sweeps;
        sample.inexact = !out.converged;
        if !out.converged {
            log::debug!("sinkhorn stopped at error {:.3e} > {:.3e}", out.error, tol);
        }
        let err = marginal_error(
            &self.demand.pairs,
            &d,
            &sanitized.origin_mass,
            &sanitized.destination_mass,
        );
        self.warm = Some(out.potentials.clone());
        self.last = Some(EntropyState {
            costs,
            sanitized,
            potentials: out.potentials,
            demand: d,
            aon_flows: aon,
            marginal_error: err,
        });
        Ok(sample)
    }
}

impl DualOracle for TwoStageOracle<'_> {
    fn evaluate(&mut self, t: &[f64], iteration: usize) -> Result<OracleSample> {
        let tol = self.tolerance.at(iteration);
        self.evaluate_with_tolerance(t, tol)
    }
}

/// Beckmann dual for fixed vehicle trips: `sum sigma* (t) - sum_ij trips_ij T_ij(t)`.
pub struct FixedDemandOracle<'a> {
    net: &'a Network,
    graph: RoadGraph,
    demand: &'a DemandSpec,
    trips: Vec<f64>,
    pub last_aon: Vec<f64>,
}

impl<'a> FixedDemandOracle<'a> {
    pub fn new(net: &'a Network, demand: &'a DemandSpec, trips: Vec<f64>) -> Self {
        FixedDemandOracle {
            net,
            graph: RoadGraph::new(net),
            demand,
            trips,
            last_aon: Vec::new(),
        }
    }
}

impl DualOracle for FixedDemandOracle<'_> {
    fn evaluate(&mut self, t: &[f64], _iteration: usize) -> Result<OracleSample> {
        let costs = cost_matrix(&self.graph, t, self.demand);
        let aon = aon_assign(&self.graph, &costs.trees, self.demand, &self.trips)?;
        let routed: f64 = self
            .trips
            .iter()
            .zip(&costs.values)
            .filter(|(&x, _)| x != 0.0)
            .map(|(x, c)| x * c)
            .sum();
        let (separable, separable_grad) = separable_part(self.net, t);
        let grad = separable_grad
            .iter()
            .zip(&aon)
            .map(|(s, f)| s - f)
            .collect();
        self.last_aon = aon;
        Ok(OracleSample {
            value: separable - routed,
            grad,
            separable,
            separable_grad,
            inner_sweeps: 0,
            inexact: false,
        })
    }
}

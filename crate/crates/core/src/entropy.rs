//! Entropy-model trip distribution: log-domain Sinkhorn balancing of the
//! dual potentials, demand recovery and the entropy dual value.
//!
//! All demand here is normalised to unit mass; vehicle trips are `total * d`.

use crate::demand::{DemandSpec, PairSet};

/// Dual multipliers for the origin and destination totals.
#[derive(Debug, Clone, PartialEq)]
pub struct Potentials {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

impl Potentials {
    pub fn zeros(pairs: &PairSet) -> Self {
        Potentials {
            lambda: vec![0.0; pairs.origin_count],
            mu: vec![0.0; pairs.destination_count],
        }
    }

    pub fn shifted(&self, dl: f64, dm: f64) -> Self {
        Potentials {
            lambda: self.lambda.iter().map(|x| x + dl).collect(),
            mu: self.mu.iter().map(|x| x + dm).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SanitizeOptions {
    /// Mass given to each empty origin/destination, as a fraction of the total.
    pub eps_mass: f64,
    /// Unreachable pairs get this multiple of the largest finite cost.
    pub big_cost_factor: f64,
}

impl Default for SanitizeOptions {
    fn default() -> Self {
        SanitizeOptions {
            eps_mass: 1e-6,
            big_cost_factor: 10.0,
        }
    }
}

/// Normalised marginals and finite costs ready for balancing.
#[derive(Debug, Clone, PartialEq)]
pub struct Sanitized {
    pub origin_mass: Vec<f64>,
    pub destination_mass: Vec<f64>,
    pub costs: Vec<f64>,
}

/// Lifts zero entries to `eps` and takes that mass from the positive entries
/// in proportion to their size. Input and output both sum to one.
pub fn spread_zero_mass(mass: &[f64], eps: f64) -> Vec<f64> {
    let zeros = mass.iter().filter(|&&m| m <= 0.0).count();
    if zeros == 0 {
        return mass.to_vec();
    }
    let positive: f64 = mass.iter().filter(|&&m| m > 0.0).sum();
    let deficit = eps * zeros as f64;
    mass.iter()
        .map(|&m| {
            if m <= 0.0 {
                eps
            } else {
                m - deficit * m / positive
            }
        })
        .collect()
}

/// Replaces infinite costs by `factor * max finite cost`.
pub fn finite_costs(costs: &[f64], factor: f64) -> Vec<f64> {
    let max_finite = costs
        .iter()
        .copied()
        .filter(|c| c.is_finite())
        .fold(0.0f64, f64::max);
    costs
        .iter()
        .map(|&c| {
            if c.is_finite() {
                c
            } else {
                factor * max_finite
            }
        })
        .collect()
}

pub fn sanitize(demand: &DemandSpec, costs: &[f64], opts: SanitizeOptions) -> Sanitized {
    let l: Vec<f64> = demand
        .origin_totals
        .iter()
        .map(|v| v / demand.total)
        .collect();
    let w: Vec<f64> = demand
        .destination_totals
        .iter()
        .map(|v| v / demand.total)
        .collect();
    Sanitized {
        origin_mass: spread_zero_mass(&l, opts.eps_mass),
        destination_mass: spread_zero_mass(&w, opts.eps_mass),
        costs: finite_costs(costs, opts.big_cost_factor),
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Softmax over all pairs of `(-T_ij + lambda_i + mu_j) / gamma`.
pub fn demand_from_potentials(
    pairs: &PairSet,
    costs: &[f64],
    pot: &Potentials,
    gamma: f64,
) -> Vec<f64> {
    let exponents: Vec<f64> = pairs
        .pairs
        .iter()
        .zip(costs)
        .map(|(p, &c)| (-c + pot.lambda[p.origin] + pot.mu[p.destination]) / gamma)
        .collect();
    let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut d: Vec<f64> = exponents.iter().map(|x| (x - max).exp()).collect();
    let s: f64 = d.iter().sum();
    d.iter_mut().for_each(|x| *x /= s);
    d
}

/// `gamma * ln sum exp((-T + lambda + mu)/gamma) - <l, lambda> - <w, mu>`.
pub fn entropy_dual(
    pairs: &PairSet,
    costs: &[f64],
    pot: &Potentials,
    gamma: f64,
    origin_mass: &[f64],
    destination_mass: &[f64],
) -> f64 {
    let lse = log_sum_exp(
        pairs
            .pairs
            .iter()
            .zip(costs)
            .map(|(p, &c)| (-c + pot.lambda[p.origin] + pot.mu[p.destination]) / gamma),
    );
    let dot_l: f64 = origin_mass
        .iter()
        .zip(&pot.lambda)
        .map(|(a, b)| a * b)
        .sum();
    let dot_w: f64 = destination_mass
        .iter()
        .zip(&pot.mu)
        .map(|(a, b)| a * b)
        .sum();
    gamma * lse - dot_l - dot_w
}

/// `||row(d) - l||_1 + ||col(d) - w||_1`.
pub fn marginal_error(
    pairs: &PairSet,
    d: &[f64],
    origin_mass: &[f64],
    destination_mass: &[f64],
) -> f64 {
    let rows = pairs.row_sums(d);
    let cols = pairs.column_sums(d);
    rows.iter()
        .zip(origin_mass)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        + cols
            .iter()
            .zip(destination_mass)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornOutcome {
    pub potentials: Potentials,
    pub sweeps: usize,
    /// Marginal l1 error of the returned potentials.
    pub error: f64,
    pub converged: bool,
}

/// Alternating exact minimisation of the entropy dual over `mu` then `lambda`.
pub struct Sinkhorn<'a> {
    pairs: &'a PairSet,
    costs: &'a [f64],
    origin_mass: &'a [f64],
    destination_mass: &'a [f64],
    gamma: f64,
    pub potentials: Potentials,
}

impl<'a> Sinkhorn<'a> {
    pub fn new(
        pairs: &'a PairSet,
        costs: &'a [f64],
        origin_mass: &'a [f64],
        destination_mass: &'a [f64],
        gamma: f64,
        warm: Option<&Potentials>,
    ) -> Self {
        let potentials = warm.cloned().unwrap_or_else(|| Potentials::zeros(pairs));
        Sinkhorn {
            pairs,
            costs,
            origin_mass,
            destination_mass,
            gamma,
            potentials,
        }
    }

    pub fn update_mu(&mut self) {
        let g = self.gamma;
        for j in 0..self.pairs.destination_count {
            let ks = self.pairs.to_destination(j);
            let lse = log_sum_exp(ks.iter().map(|&k| {
                let i = self.pairs.pairs[k].origin;
                (-self.costs[k] + self.potentials.lambda[i]) / g
            }));
            self.potentials.mu[j] = g * self.destination_mass[j].ln() - g * lse;
        }
    }

    pub fn update_lambda(&mut self) {
        let g = self.gamma;
        for i in 0..self.pairs.origin_count {
            let ks = self.pairs.from_origin(i);
            let lse = log_sum_exp(ks.iter().map(|&k| {
                let j = self.pairs.pairs[k].destination;
                (-self.costs[k] + self.potentials.mu[j]) / g
            }));
            self.potentials.lambda[i] = g * self.origin_mass[i].ln() - g * lse;
        }
    }

    pub fn sweep(&mut self) {
        self.update_mu();
        self.update_lambda();
    }

    pub fn dual_value(&self) -> f64 {
        entropy_dual(
            self.pairs,
            self.costs,
            &self.potentials,
            self.gamma,
            self.origin_mass,
            self.destination_mass,
        )
    }

    pub fn error(&self) -> f64 {
        let d = demand_from_potentials(self.pairs, self.costs, &self.potentials, self.gamma);
        marginal_error(self.pairs, &d, self.origin_mass, self.destination_mass)
    }

    pub fn run(mut self, tol: f64, max_iter: usize) -> SinkhornOutcome {
        let mut sweeps = 0;
        let mut error = f64::INFINITY;
        while sweeps < max_iter {
            self.sweep();
            sweeps += 1;
            error = self.error();
            if error <= tol {
                break;
            }
        }
        SinkhornOutcome {
            potentials: self.potentials,
            sweeps,
            error,
            converged: error <= tol,
        }
    }
}

/// Balances potentials so the softmax demand has marginals `l` and `w`.
pub fn sinkhorn(
    pairs: &PairSet,
    costs: &[f64],
    origin_mass: &[f64],
    destination_mass: &[f64],
    opts: SinkhornOptions,
    warm: Option<&Potentials>,
) -> SinkhornOutcome {
    Sinkhorn::new(
        pairs,
        costs,
        origin_mass,
        destination_mass,
        opts.gamma,
        warm,
    )
    .run(opts.tol, opts.max_iter)
}

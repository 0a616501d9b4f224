//! Path-enumeration reference solver for tiny instances.
//!
//! Route flows live on a product of scaled simplices (one per OD pair) and are
//! found by projected gradient with backtracking. Demand is parametrised by the
//! null space of the marginal constraints; with at most four pairs that space
//! has dimension at most one, and the outer problem is convex in the single
//! coordinate, so its stationary point is found by bisection on the derivative.

use nalgebra::{DMatrix, DVector};

use super::primal::primal_value;
use crate::demand::DemandSpec;
use crate::error::{Error, Result};
use crate::network::Network;

pub const MAX_LINKS: usize = 8;
pub const MAX_PAIRS: usize = 4;
const MAX_PATHS: usize = 10_000;
const MAX_STEPS: usize = 1_000_000;
const MAPPING_TOL: f64 = 1e-10;
const STALL_WINDOW: usize = 1000;
const STALL_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceSolution {
    /// Normalised demand per pair.
    pub demand: Vec<f64>,
    /// Vehicle trips per pair.
    pub trips: Vec<f64>,
    pub flows: Vec<f64>,
    /// Link times at the solution flows.
    pub times: Vec<f64>,
    /// Link sequences of every enumerated route, per pair.
    pub paths: Vec<Vec<Vec<usize>>>,
    /// Route flows, aligned with `paths`.
    pub path_flows: Vec<Vec<f64>>,
    pub objective: f64,
}

/// All simple routes for every pair; centroids are only allowed as endpoints.
pub fn enumerate_paths(net: &Network, demand: &DemandSpec) -> Result<Vec<Vec<Vec<usize>>>> {
    let mut out_links = vec![Vec::new(); net.node_count];
    for (e, l) in net.links.iter().enumerate() {
        out_links[l.tail].push(e);
    }
    let mut all = Vec::with_capacity(demand.pairs.len());
    let mut total = 0;
    for k in 0..demand.pairs.len() {
        let (o, d) = demand.pair_nodes(k);
        let mut found = Vec::new();
        let mut visited = vec![false; net.node_count];
        let mut stack = Vec::new();
        visited[o] = true;
        walk(
            net,
            &out_links,
            o,
            o,
            d,
            &mut visited,
            &mut stack,
            &mut found,
        );
        if found.is_empty() {
            return Err(Error::Invalid(format!(
                "no route from node {} to node {}",
                o + 1,
                d + 1
            )));
        }
        total += found.len();
        if total > MAX_PATHS {
            return Err(Error::TooLarge(format!("more than {MAX_PATHS} routes")));
        }
        all.push(found);
    }
    Ok(all)
}

#[allow(clippy::too_many_arguments)]
fn walk(
    net: &Network,
    out_links: &[Vec<usize>],
    origin: usize,
    node: usize,
    target: usize,
    visited: &mut [bool],
    stack: &mut Vec<usize>,
    found: &mut Vec<Vec<usize>>,
) {
    if node == target {
        found.push(stack.clone());
        return;
    }
    if node != origin && net.is_centroid(node) {
        return;
    }
    for &e in &out_links[node] {
        let next = net.links[e].head;
        if visited[next] {
            continue;
        }
        visited[next] = true;
        stack.push(e);
        walk(net, out_links, origin, next, target, visited, stack, found);
        stack.pop();
        visited[next] = false;
    }
}

/// Euclidean projection onto `{x >= 0, sum x = total}`.
fn project_simplex(v: &mut [f64], total: f64) {
    if total <= 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        acc += s;
        let candidate = (acc - total) / (i + 1) as f64;
        if s - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

struct RouteProblem<'a> {
    net: &'a Network,
    paths: &'a [Vec<Vec<usize>>],
}

impl RouteProblem<'_> {
    fn link_flows(&self, x: &[Vec<f64>]) -> Vec<f64> {
        let mut f = vec![0.0; self.net.link_count()];
        for (routes, flows) in self.paths.iter().zip(x) {
            for (route, &v) in routes.iter().zip(flows) {
                for &e in route {
                    f[e] += v;
                }
            }
        }
        f
    }

    fn beckmann(&self, f: &[f64]) -> f64 {
        self.net
            .links
            .iter()
            .zip(f)
            .map(|(l, &v)| l.params.sigma_at(v.max(0.0)))
            .sum()
    }

    fn route_costs(&self, f: &[f64]) -> Vec<Vec<f64>> {
        let times: Vec<f64> = self
            .net
            .links
            .iter()
            .zip(f)
            .map(|(l, &v)| l.params.time_at(v.max(0.0)))
            .collect();
        self.paths
            .iter()
            .map(|routes| {
                routes
                    .iter()
                    .map(|r| r.iter().map(|&e| times[e]).sum())
                    .collect()
            })
            .collect()
    }

    /// Wardrop split of `trips` starting from `x`; returns the cheapest route
    /// cost per pair at the solution.
    fn equilibrate(&self, trips: &[f64], x: &mut Vec<Vec<f64>>) -> Vec<f64> {
        for (flows, &q) in x.iter_mut().zip(trips) {
            project_simplex(flows, q);
        }
        let mut lipschitz = 1.0;
        let mut f = self.link_flows(x);
        let mut value = self.beckmann(&f);
        let mut checkpoint = value;
        for step in 1..=MAX_STEPS {
            let g = self.route_costs(&f);
            let gnorm = g.iter().flatten().map(|c| c * c).sum::<f64>().sqrt();
            let (next, next_f, next_value, moved) = loop {
                let mut next = x.clone();
                for ((flows, grads), &q) in next.iter_mut().zip(&g).zip(trips) {
                    for (v, c) in flows.iter_mut().zip(grads) {
                        *v -= c / lipschitz;
                    }
                    project_simplex(flows, q);
                }
                let mut lin = 0.0;
                let mut moved = 0.0;
                for ((a, b), c) in next
                    .iter()
                    .flatten()
                    .zip(x.iter().flatten())
                    .zip(g.iter().flatten())
                {
                    lin += c * (a - b);
                    moved += (a - b) * (a - b);
                }
                let next_f = self.link_flows(&next);
                let next_value = self.beckmann(&next_f);
                let slack = 1e-15 * value.abs().max(1.0);
                if next_value <= value + lin + 0.5 * lipschitz * moved + slack || lipschitz > 1e30 {
                    break (next, next_f, next_value, moved.sqrt());
                }
                lipschitz *= 2.0;
            };
            *x = next;
            f = next_f;
            value = next_value;
            if lipschitz * moved <= MAPPING_TOL * gnorm.max(1.0) {
                break;
            }
            // Flat cost curves make the mapping test unreachable; stop once
            // the potential no longer moves at double precision.
            if step % STALL_WINDOW == 0 {
                if checkpoint - value <= STALL_TOL * value.abs().max(1.0) {
                    break;
                }
                checkpoint = value;
            }
            lipschitz = (lipschitz / 2.0).max(1e-12);
        }
        self.route_costs(&f)
            .iter()
            .map(|c| c.iter().copied().fold(f64::INFINITY, f64::min))
            .collect()
    }
}

/// Wardrop equilibrium for fixed vehicle trips by route enumeration.
pub fn brute_force_assignment(
    net: &Network,
    demand: &DemandSpec,
    trips: &[f64],
) -> Result<BruteForceSolution> {
    check_size(net, demand)?;
    let paths = enumerate_paths(net, demand)?;
    let problem = RouteProblem { net, paths: &paths };
    let mut x = initial_split(&paths, trips);
    problem.equilibrate(trips, &mut x);
    let total: f64 = trips.iter().sum();
    let d: Vec<f64> = trips
        .iter()
        .map(|q| if total > 0.0 { q / total } else { 0.0 })
        .collect();
    finish(net, paths, x, d, trips.to_vec(), 0.0, total)
}

/// Joint minimiser of Beckmann potential plus `gamma * total * sum d ln d`
/// subject to the demand marginals.
pub fn brute_force_oracle(
    net: &Network,
    demand: &DemandSpec,
    gamma: f64,
) -> Result<BruteForceSolution> {
    check_size(net, demand)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Invalid(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let paths = enumerate_paths(net, demand)?;
    let problem = RouteProblem { net, paths: &paths };
    let total = demand.total;
    let (base, direction) = feasible_line(demand)?;

    let mut x = initial_split(&paths, &vec![0.0; base.len()]);
    let (d, trips) = match direction {
        None => {
            let d: Vec<f64> = base.iter().map(|v| v.max(0.0)).collect();
            let trips: Vec<f64> = d.iter().map(|v| v * total).collect();
            problem.equilibrate(&trips, &mut x);
            (d, trips)
        }
        Some(dir) => {
            // Keep d > 0 on the open interval (lo, hi).
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for (b, v) in base.iter().zip(&dir) {
                if *v > 0.0 {
                    lo = lo.max(-b / v);
                } else if *v < 0.0 {
                    hi = hi.min(-b / v);
                }
            }
            if lo >= hi || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Invalid(
                    "demand marginals admit no interior point".into(),
                ));
            }
            let at = |s: f64| -> Vec<f64> {
                base.iter()
                    .zip(&dir)
                    .map(|(b, v)| (b + s * v).max(0.0))
                    .collect()
            };
            // The value function's derivative in demand is the equilibrium cost.
            let slope = |s: f64, x: &mut Vec<Vec<f64>>| -> f64 {
                let d = at(s);
                let trips: Vec<f64> = d.iter().map(|v| v * total).collect();
                let costs = problem.equilibrate(&trips, x);
                d.iter()
                    .zip(&costs)
                    .zip(&dir)
                    .map(|((dk, c), v)| v * total * (gamma * (dk.ln() + 1.0) + c))
                    .sum()
            };
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if slope(mid, &mut x) > 0.0 {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            let d = at(0.5 * (a + b));
            let trips: Vec<f64> = d.iter().map(|v| v * total).collect();
            problem.equilibrate(&trips, &mut x);
            (d, trips)
        }
    };
    finish(net, paths, x, d, trips, gamma, total)
}

fn check_size(net: &Network, demand: &DemandSpec) -> Result<()> {
    if net.link_count() > MAX_LINKS || demand.pairs.len() > MAX_PAIRS {
        return Err(Error::TooLarge(format!(
            "reference solver handles at most {MAX_LINKS} links and {MAX_PAIRS} pairs, got {} and {}",
            net.link_count(),
            demand.pairs.len()
        )));
    }
    Ok(())
}

fn initial_split(paths: &[Vec<Vec<usize>>], trips: &[f64]) -> Vec<Vec<f64>> {
    paths
        .iter()
        .zip(trips)
        .map(|(routes, &q)| vec![q / routes.len() as f64; routes.len()])
        .collect()
}

fn finish(
    net: &Network,
    paths: Vec<Vec<Vec<usize>>>,
    path_flows: Vec<Vec<f64>>,
    demand: Vec<f64>,
    trips: Vec<f64>,
    gamma: f64,
    total: f64,
) -> Result<BruteForceSolution> {
    let problem = RouteProblem { net, paths: &paths };
    let flows = problem.link_flows(&path_flows);
    let times = net
        .links
        .iter()
        .zip(&flows)
        .map(|(l, &f)| l.params.time_at(f.max(0.0)))
        .collect();
    let objective = primal_value(net, &flows, &demand, gamma, total)?;
    Ok(BruteForceSolution {
        demand,
        trips,
        flows,
        times,
        paths,
        path_flows,
        objective,
    })
}

/// Minimum-norm solution of the normalised marginal constraints and, if the
/// solution set is a line, its direction.
fn feasible_line(demand: &DemandSpec) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let n = demand.pairs.len();
    let no = demand.pairs.origin_count;
    let nd = demand.pairs.destination_count;
    // Zero rows pad the system so the thin SVD exposes the full null space.
    let rows = (no + nd).max(n);
    let mut a = DMatrix::<f64>::zeros(rows, n);
    let mut b = DVector::<f64>::zeros(rows);
    for (k, p) in demand.pairs.pairs.iter().enumerate() {
        a[(p.origin, k)] = 1.0;
        a[(no + p.destination, k)] = 1.0;
    }
    for (i, l) in demand.origin_totals.iter().enumerate() {
        b[i] = l / demand.total;
    }
    for (j, w) in demand.destination_totals.iter().enumerate() {
        b[no + j] = w / demand.total;
    }
    let svd = a.svd(true, true);
    let cutoff = 1e-10 * svd.singular_values.max();
    let base = svd
        .solve(&b, cutoff)
        .map_err(|e| Error::Invalid(format!("marginal system: {e}")))?;
    let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
    let null: Vec<Vec<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= cutoff)
        .map(|(r, _)| v_t.row(r).iter().copied().collect())
        .collect();
    match null.len() {
        0 => Ok((base.iter().copied().collect(), None)),
        1 => Ok((base.iter().copied().collect(), Some(null[0].clone()))),
        k => Err(Error::TooLarge(format!(
            "demand has {k} degrees of freedom"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection() {
        let mut v = vec![0.5, 0.5];
        project_simplex(&mut v, 3.0);
        assert_eq!(v, vec![1.5, 1.5]);
        let mut v = vec![3.0, -1.0, 0.0];
        project_simplex(&mut v, 1.0);
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
        let mut v = vec![0.2, 0.9, 0.1];
        project_simplex(&mut v, 1.0);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((v[1] - v[0] - 0.7).abs() < 1e-15);
    }
}

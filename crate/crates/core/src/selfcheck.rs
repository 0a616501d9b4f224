//! Built-in small-instance checks against closed forms and the brute-force
//! reference solver.

use crate::fixtures::{self, Fixture};
use crate::solver::{
    brute_force::brute_force_assignment, brute_force_oracle, solve_fixed_demand, solve_two_stage,
    InnerTolerance, SolverConfig,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: String) -> Self {
        Check {
            name: name.into(),
            passed,
            detail,
        }
    }
}

/// Solver settings tight enough for brute-force comparisons on fixtures.
pub fn reference_config(f: &Fixture) -> SolverConfig {
    SolverConfig {
        eps: Some(1e-5 * f.demand.total * f.network.mean_free_flow_time()),
        max_iter: 20_000,
        inner_tolerance: InnerTolerance {
            min: 1e-10,
            scale: 1e-3,
        },
        restart: true,
        record_timing: false,
        ..SolverConfig::default()
    }
}

/// Runs to the iteration cap; used where the answer is known to 1e-6.
pub fn long_run_config(f: &Fixture) -> SolverConfig {
    SolverConfig {
        eps: Some(1e-14),
        max_iter: 10_000_000,
        gap_every: 100,
        ..reference_config(f)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn oracle_check(f: &Fixture) -> Check {
    let name = format!("two_stage_vs_brute_force[{}]", f.name);
    let cfg = reference_config(f);
    let solved = match solve_two_stage(&f.network, &f.demand, &cfg) {
        Ok(r) => r,
        Err(e) => return Check::new(name, false, format!("solver error: {e}")),
    };
    let gamma = solved.gamma.unwrap_or(1.0);
    let reference = match brute_force_oracle(&f.network, &f.demand, gamma) {
        Ok(r) => r,
        Err(e) => return Check::new(name, false, format!("reference error: {e}")),
    };
    let tol = 1e-3 * f.demand.total;
    let dd = max_abs_diff(&solved.trips, &reference.trips);
    let df = max_abs_diff(&solved.flows, &reference.flows);
    Check::new(
        name,
        dd <= tol && df <= tol,
        format!("trip error {dd:.3e}, flow error {df:.3e}, tolerance {tol:.3e}"),
    )
}

fn single_link_check() -> Check {
    let f = fixtures::single_link();
    let cfg = SolverConfig {
        max_iter: 1_000_000,
        ..long_run_config(&f)
    };
    match solve_two_stage(&f.network, &f.demand, &cfg) {
        Ok(r) => {
            let err = (r.times[0] - 10.09375).abs();
            let residual = r.fixed_point_residual();
            Check::new(
                "single_link_closed_form",
                err <= 1e-4 && residual <= 1e-6,
                format!("time error {err:.3e}, fixed-point residual {residual:.3e}"),
            )
        }
        Err(e) => Check::new(
            "single_link_closed_form",
            false,
            format!("solver error: {e}"),
        ),
    }
}

fn parallel_links_check() -> Check {
    let f = fixtures::two_parallel();
    let cfg = long_run_config(&f);
    let name = "two_parallel_fixed_demand";
    let solved = match solve_fixed_demand(&f.network, &f.demand, &[3.0], &cfg) {
        Ok(r) => r,
        Err(e) => return Check::new(name, false, format!("solver error: {e}")),
    };
    let flow_err = max_abs_diff(&solved.flows, &[2.0, 1.0]);
    let time_err = max_abs_diff(&solved.times, &[3.0, 3.0]);
    let bf = brute_force_assignment(&f.network, &f.demand, &[3.0])
        .map(|s| max_abs_diff(&s.flows, &[2.0, 1.0]))
        .unwrap_or(f64::INFINITY);
    Check::new(
        name,
        flow_err <= 1e-6 && time_err <= 1e-6 && bf <= 1e-6,
        format!(
            "flow error {flow_err:.3e}, time error {time_err:.3e}, reference flow error {bf:.3e}"
        ),
    )
}

fn symmetry_check() -> Check {
    let f = fixtures::symmetric_two_route();
    let cfg = reference_config(&f);
    let name = "symmetric_two_route";
    match solve_two_stage(&f.network, &f.demand, &cfg) {
        Ok(r) => {
            let d_err = (r.demand[0] - r.demand[1]).abs();
            let t_err = (r.times[0] - r.times[1])
                .abs()
                .max((r.times[2] - r.times[3]).abs());
            Check::new(
                name,
                d_err <= 1e-9 && t_err <= 1e-6,
                format!("demand asymmetry {d_err:.3e}, route time spread {t_err:.3e}"),
            )
        }
        Err(e) => Check::new(name, false, format!("solver error: {e}")),
    }
}

pub fn run() -> Vec<Check> {
    let mut checks = vec![
        single_link_check(),
        parallel_links_check(),
        symmetry_check(),
    ];
    for f in [
        fixtures::single_link(),
        fixtures::two_parallel(),
        fixtures::triangle(),
        fixtures::bipartite(),
    ] {
        checks.push(oracle_check(&f));
    }
    checks
}

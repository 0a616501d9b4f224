use proptest::prelude::*;
use twostage::fixtures::{self, Fixture};
use twostage::selfcheck::reference_config;
use twostage::solver::{
    brute_force_oracle, default_gamma, dual_domain, primal_value, solve_fixed_demand,
    solve_two_stage, umst_minimize, DualOracle, InnerTolerance, OracleSample, SolverConfig,
    TwoStageOracle,
};
use twostage::tables::{convergence_table, demand_table, flows_table};

fn tight_oracle(f: &Fixture) -> TwoStageOracle<'_> {
    let gamma = default_gamma(&f.network, &f.demand);
    let mut o = TwoStageOracle::new(&f.network, &f.demand, gamma);
    o.tolerance = InnerTolerance {
        min: 1e-13,
        scale: 0.0,
    };
    o.warm_start = false;
    o
}

/// Interior link times, each a little above free flow.
fn unique_path_point(f: &Fixture, bumps: &[f64]) -> Vec<f64> {
    f.network
        .links
        .iter()
        .zip(bumps)
        .map(|(l, b)| l.params.free_flow_time * (1.0 + b))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gradient_matches_central_differences(
        which in 0usize..3,
        bumps in prop::collection::vec(0.01f64..0.5, 8),
    ) {
        let f = [fixtures::single_link(), fixtures::triangle(), fixtures::bipartite()][which].clone();
        let mut oracle = tight_oracle(&f);
        let t = unique_path_point(&f, &bumps);
        let sample = oracle.evaluate_with_tolerance(&t, 1e-13).unwrap();
        for e in 0..t.len() {
            let h = 1e-6 * t[e];
            let mut tp = t.clone();
            let mut tm = t.clone();
            tp[e] += h;
            tm[e] -= h;
            // Skip links whose shortest-path status flips inside the stencil.
            let cm = |x: &[f64]| twostage::shortest_paths::cost_matrix(oracle.graph(), x, &f.demand);
            let aon = |x: &[f64]| {
                let c = cm(x);
                twostage::shortest_paths::aon_assign(oracle.graph(), &c.trees, &f.demand, &vec![1.0; f.demand.pairs.len()]).unwrap()
            };
            prop_assume!(aon(&tp) == aon(&tm));
            let vp = oracle.evaluate_with_tolerance(&tp, 1e-13).unwrap().value;
            let vm = oracle.evaluate_with_tolerance(&tm, 1e-13).unwrap().value;
            let fd = (vp - vm) / (2.0 * h);
            let g = sample.grad[e];
            let scale = g.abs().max(sample.grad.iter().map(|x| x.abs()).fold(0.0, f64::max) * 1e-3);
            prop_assert!((fd - g).abs() <= 1e-5 * scale.max(1e-12), "{} link {e}: fd {fd}, grad {g}", f.name);
        }
    }
}

/// Records `primal + F` at every point the method evaluates.
struct DualityWatch<'a> {
    inner: TwoStageOracle<'a>,
    net: &'a twostage::Network,
    total: f64,
    worst: f64,
}

impl DualOracle for DualityWatch<'_> {
    fn evaluate(&mut self, t: &[f64], iteration: usize) -> twostage::Result<OracleSample> {
        let s = self.inner.evaluate(t, iteration)?;
        let state = self.inner.last.as_ref().unwrap();
        let p = primal_value(
            self.net,
            &state.aon_flows,
            &state.demand,
            self.inner.gamma,
            self.total,
        )?;
        let scale = p.abs().max(s.value.abs()).max(1.0);
        self.worst = self.worst.min((p + s.value) / scale);
        Ok(s)
    }
}

#[test]
fn weak_duality_at_every_evaluation() {
    for f in [
        fixtures::single_link(),
        fixtures::triangle(),
        fixtures::bipartite(),
        fixtures::symmetric_two_route(),
    ] {
        let mut inner = tight_oracle(&f);
        inner.warm_start = true;
        let mut watch = DualityWatch {
            inner,
            net: &f.network,
            total: f.demand.total,
            worst: f64::INFINITY,
        };
        let domain = dual_domain(&f.network);
        let cfg = SolverConfig {
            max_iter: 500,
            ..reference_config(&f)
        };
        umst_minimize(
            &mut watch,
            &domain.lower,
            &domain,
            cfg.ustm_options(cfg.eps.unwrap()),
        )
        .unwrap();
        assert!(
            watch.worst >= -1e-9,
            "{}: primal + F reached {:e}",
            f.name,
            watch.worst
        );
    }
}

#[test]
fn gap_bounds_true_suboptimality() {
    for f in [
        fixtures::single_link(),
        fixtures::triangle(),
        fixtures::bipartite(),
    ] {
        let cfg = reference_config(&f);
        let r = solve_two_stage(&f.network, &f.demand, &cfg).unwrap();
        let reference = brute_force_oracle(&f.network, &f.demand, r.gamma.unwrap()).unwrap();
        // Strong duality: the optimal dual value is minus the primal optimum.
        let best = -reference.objective;
        let slack = 1e-6 * reference.objective.abs().max(1.0);
        for rec in &r.history.records {
            if let Some(gap) = rec.gap {
                assert!(
                    rec.value - best <= gap + slack,
                    "{} iter {}: excess {:e} above gap {:e}",
                    f.name,
                    rec.iter,
                    rec.value - best,
                    gap
                );
            }
        }
    }
}

#[test]
fn reruns_are_bit_identical() {
    for f in fixtures::all() {
        let cfg = SolverConfig {
            max_iter: 300,
            ..reference_config(&f)
        };
        let a = solve_two_stage(&f.network, &f.demand, &cfg).unwrap();
        let b = solve_two_stage(&f.network, &f.demand, &cfg).unwrap();
        assert_eq!(flows_table(&f.network, &a), flows_table(&f.network, &b));
        assert_eq!(demand_table(&f.demand, &a), demand_table(&f.demand, &b));
        assert_eq!(convergence_table(&a), convergence_table(&b));
        assert_eq!(a.times, b.times);
    }
}

#[test]
fn uniform_time_shift_leaves_demand_alone() {
    // Adding a constant to every OD cost moves the potentials, not the demand.
    let f = fixtures::bipartite();
    let mut oracle = tight_oracle(&f);
    let t = unique_path_point(&f, &[0.1, 0.2, 0.0, 0.3, 0.05, 0.15, 0.25, 0.35]);
    oracle.evaluate_with_tolerance(&t, 1e-13).unwrap();
    let d0 = oracle.last.as_ref().unwrap().demand.clone();
    // Every pair here uses exactly one origin-side link first; adding c to
    // all links leaving origins adds c to every OD cost.
    let origins: Vec<usize> = f.demand.origins.clone();
    let shifted: Vec<f64> = t
        .iter()
        .zip(&f.network.links)
        .map(|(x, l)| {
            if origins.contains(&l.tail) {
                x + 7.0
            } else {
                *x
            }
        })
        .collect();
    oracle.evaluate_with_tolerance(&shifted, 1e-13).unwrap();
    let d1 = &oracle.last.as_ref().unwrap().demand;
    for (a, b) in d0.iter().zip(d1) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}

#[test]
fn fixed_demand_flows_conserve_mass() {
    let f = fixtures::triangle();
    let trips = vec![30.0, 20.0, 20.0, 30.0];
    let cfg = SolverConfig {
        max_iter: 2000,
        ..reference_config(&f)
    };
    let r = solve_fixed_demand(&f.network, &f.demand, &trips, &cfg).unwrap();
    let mut balance = vec![0.0; f.network.node_count];
    for (e, l) in f.network.links.iter().enumerate() {
        balance[l.tail] -= r.flows[e];
        balance[l.head] += r.flows[e];
    }
    for (k, q) in trips.iter().enumerate() {
        let (o, d) = f.demand.pair_nodes(k);
        balance[o] += q;
        balance[d] -= q;
    }
    assert!(balance.iter().all(|b| b.abs() <= 1e-9), "{balance:?}");
}

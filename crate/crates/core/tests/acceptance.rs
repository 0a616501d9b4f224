//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! fails the test if any criterion outside `KNOWN_SHORTFALLS` fails.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see timings;
//! the verdict lines go straight to stderr and always show.

use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use twostage::demand::DemandSpec;
use twostage::entropy::{demand_from_potentials, Potentials, Sinkhorn};
use twostage::fixtures::{self, Fixture};
use twostage::selfcheck::{long_run_config, reference_config};
use twostage::shortest_paths::{aon_assign, cost_matrix, RoadGraph};
use twostage::solver::{
    baseline_alternation, brute_force_oracle, default_gamma, dual_domain, primal_value,
    solve_fixed_demand, solve_two_stage, umst_minimize, DualOracle, InnerTolerance, OracleSample,
    SolverConfig, Status, TwoStageOracle,
};
use twostage::tables::{convergence_table, demand_table, flows_table};
use twostage::tntp::{parse_net, parse_trips, write_net};
use twostage::{Error, Link, LinkParams, Network};

/// Criteria that are known not to hold; see the README for the analysis.
const KNOWN_SHORTFALLS: &[&str] = &["1a", "5g"];

const RATE_WINDOW: (usize, usize) = (50, 2000);
const RATE_REQUIRED: f64 = -1.0;
const RATE_EXPECTED: f64 = -1.67;
const RATE_BAND: f64 = 0.5;

struct Line {
    id: &'static str,
    name: String,
    passed: bool,
    detail: String,
}

fn line(id: &'static str, name: impl Into<String>, passed: bool, detail: String) -> Line {
    Line {
        id,
        name: name.into(),
        passed,
        detail,
    }
}

fn sioux_falls() -> (Network, DemandSpec) {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/SiouxFalls");
    let read = |f: &str| std::fs::read_to_string(dir.join(f)).unwrap();
    let net = parse_net(&read("SiouxFalls_net.tntp")).unwrap();
    let trips = parse_trips(&read("SiouxFalls_trips.tntp")).unwrap();
    (net, DemandSpec::from_trips(&trips).unwrap())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn rate_line(
    id: &'static str,
    label: &str,
    net: &Network,
    demand: &DemandSpec,
    eps: Option<f64>,
) -> Line {
    let clock = Instant::now();
    let cfg = SolverConfig {
        eps,
        max_iter: RATE_WINDOW.1,
        stop_on_gap: false,
        ..SolverConfig::default()
    };
    let r = solve_two_stage(net, demand, &cfg).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    let slope = r
        .history
        .gap_rate(RATE_WINDOW.0, RATE_WINDOW.1)
        .unwrap_or(f64::NAN);
    let in_band = (slope - RATE_EXPECTED).abs() <= RATE_BAND;
    line(
        id,
        format!("gap rate on Sioux Falls, {label}"),
        slope <= RATE_REQUIRED && secs <= 300.0,
        format!(
            "slope {slope:.3} over k in [{}, {}] (need <= {RATE_REQUIRED}; reference {RATE_EXPECTED} +/- {RATE_BAND}: {}), eps {:.4e}, final gap {:.4e}, {secs:.1} s",
            RATE_WINDOW.0,
            RATE_WINDOW.1,
            if in_band { "inside" } else { "outside" },
            r.eps,
            r.gap
        ),
    )
}

fn criterion_1() -> Vec<Line> {
    let (net, demand) = sioux_falls();
    let small_eps = 1e-6 * demand.total * net.mean_free_flow_time();
    vec![
        rate_line(
            "1a",
            "default eps, run past the gap target",
            &net,
            &demand,
            None,
        ),
        rate_line(
            "1b",
            "eps = 1e-6 x total x mean free-flow time",
            &net,
            &demand,
            Some(small_eps),
        ),
    ]
}

fn criterion_2() -> Vec<Line> {
    let (net, demand) = sioux_falls();
    let net = net.with_overrides(None, Some(4.0)).unwrap();
    let cfg = SolverConfig::default();
    let clock = Instant::now();
    let base = baseline_alternation(&net, &demand, &cfg).unwrap();
    let solved = solve_two_stage(&net, &demand, &cfg).unwrap();
    let base_ok = matches!(base.status, Status::Diverged | Status::IterationCap)
        && base.baseline_passes.len() <= cfg.baseline_max_passes;
    let solve_ok = solved.status == Status::Converged && solved.gap <= solved.eps;
    vec![line(
        "2",
        "baseline alternation fails where the joint solver converges",
        base_ok && solve_ok,
        format!(
            "baseline {} after {} passes (last demand change {:.3e}); solve {} in {} iterations with gap {:.4e} <= eps {:.4e}; {:.1} s",
            base.status,
            base.baseline_passes.len(),
            base.baseline_passes.last().map_or(f64::NAN, |p| p.demand_change),
            solved.status,
            solved.iterations,
            solved.gap,
            solved.eps,
            clock.elapsed().as_secs_f64()
        ),
    )]
}

fn criterion_3() -> Vec<Line> {
    let clock = Instant::now();
    let mut out = Vec::new();
    let mut all = true;
    for f in [
        fixtures::single_link(),
        fixtures::two_parallel(),
        fixtures::triangle(),
        fixtures::bipartite(),
    ] {
        let r = solve_two_stage(&f.network, &f.demand, &reference_config(&f)).unwrap();
        let bf = brute_force_oracle(&f.network, &f.demand, r.gamma.unwrap()).unwrap();
        let tol = 1e-3 * f.demand.total;
        let dd = max_abs_diff(&r.trips, &bf.trips);
        let df = max_abs_diff(&r.flows, &bf.flows);
        all &= dd <= tol && df <= tol;
        out.push(format!(
            "{}: trips {dd:.2e}, flows {df:.2e} (tol {tol:.1e})",
            f.name
        ));
    }
    let secs = clock.elapsed().as_secs_f64();
    vec![line(
        "3",
        "small fixtures agree with brute-force enumeration",
        all && secs <= 60.0,
        format!("{}; {secs:.1} s", out.join("; ")),
    )]
}

fn analytic_line(id: &'static str, f: Fixture, flows: [f64; 2], time: f64, label: &str) -> Line {
    let r = solve_fixed_demand(&f.network, &f.demand, &[3.0], &long_run_config(&f)).unwrap();
    let ef = max_abs_diff(&r.flows, &flows);
    let et = max_abs_diff(&r.times, &[time, time]);
    line(
        id,
        format!("parallel links, {label}"),
        ef <= 1e-6 && et <= 1e-6,
        format!(
            "flows ({:.9}, {:.9}) vs ({:.9}, {:.9}), error {ef:.2e}; times error {et:.2e}; {} iterations",
            r.flows[0], r.flows[1], flows[0], flows[1], r.iterations
        ),
    )
}

fn criterion_4() -> Vec<Line> {
    vec![
        analytic_line(
            "4",
            fixtures::two_parallel(),
            [2.0, 1.0],
            3.0,
            "t = 1 + f and t = 2 + f: (2, 1) at time 3",
        ),
        analytic_line(
            "4x",
            fixtures::two_parallel_uniform_kappa(),
            [7.0 / 3.0, 2.0 / 3.0],
            10.0 / 3.0,
            "kappa = 1 on both links: (7/3, 2/3) at time 10/3",
        ),
    ]
}

fn random_link(rng: &mut StdRng) -> LinkParams {
    LinkParams::new(
        rng.random_range(0.5..20.0),
        rng.random_range(1.0..1e4),
        rng.random_range(0.01..2.0),
        rng.random_range(1.0..6.0),
    )
    .unwrap()
}

fn fenchel_young(rng: &mut StdRng) -> Line {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = random_link(rng);
        let f = rng.random_range(0.0..3.0) * p.capacity;
        let t = p.time(f).unwrap();
        let lhs = p.sigma(f).unwrap() + p.sigma_conj(t).unwrap();
        let rhs = f * t;
        worst = worst.max((lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE));
    }
    line(
        "5a",
        "Fenchel-Young equality on 1000 random links",
        worst <= 1e-9,
        format!("worst relative error {worst:.2e}"),
    )
}

fn random_full_demand(rng: &mut StdRng, n: usize) -> (DemandSpec, Vec<f64>) {
    let zones: Vec<usize> = (0..n).collect();
    let l: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..10.0)).collect();
    let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..10.0)).collect();
    let scale = l.iter().sum::<f64>() / w.iter().sum::<f64>();
    w.iter_mut().for_each(|x| *x *= scale);
    let spec = DemandSpec::new(zones.clone(), zones, l, w).unwrap();
    let costs = (0..spec.pairs.len())
        .map(|_| rng.random_range(1.0..30.0))
        .collect();
    (spec, costs)
}

fn sinkhorn_properties(rng: &mut StdRng) -> Line {
    let tol = 1e-10;
    let mut worst_err: f64 = 0.0;
    let mut worst_rise: f64 = 0.0;
    for _ in 0..20 {
        let (spec, costs) = random_full_demand(rng, 6);
        let l: Vec<f64> = spec.origin_totals.iter().map(|x| x / spec.total).collect();
        let w: Vec<f64> = spec
            .destination_totals
            .iter()
            .map(|x| x / spec.total)
            .collect();
        let gamma = rng.random_range(0.5..5.0);
        let mut s = Sinkhorn::new(&spec.pairs, &costs, &l, &w, gamma, None);
        let mut prev = s.dual_value();
        for _ in 0..50 {
            s.update_mu();
            let a = s.dual_value();
            s.update_lambda();
            let b = s.dual_value();
            worst_rise = worst_rise
                .max((a - prev) / prev.abs().max(1.0))
                .max((b - a) / a.abs().max(1.0));
            prev = b;
        }
        let out = Sinkhorn::new(&spec.pairs, &costs, &l, &w, gamma, None).run(tol, 100_000);
        worst_err = worst_err.max(out.error);
    }
    line(
        "5b",
        "Sinkhorn reaches marginal tolerance and never raises the dual",
        worst_err <= tol && worst_rise <= 1e-14,
        format!("worst marginal error {worst_err:.2e} (tol {tol:.0e}), largest relative rise {worst_rise:.2e}"),
    )
}

fn shift_invariance(rng: &mut StdRng) -> Line {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (spec, costs) = random_full_demand(rng, 5);
        let pot = Potentials {
            lambda: (0..5).map(|_| rng.random_range(-10.0..10.0)).collect(),
            mu: (0..5).map(|_| rng.random_range(-10.0..10.0)).collect(),
        };
        let gamma = rng.random_range(0.5..5.0);
        let c = rng.random_range(-100.0..100.0);
        let a = demand_from_potentials(&spec.pairs, &costs, &pot, gamma);
        let b = demand_from_potentials(&spec.pairs, &costs, &pot.shifted(c, -c), gamma);
        let e = demand_from_potentials(&spec.pairs, &costs, &pot.shifted(c, 0.0), gamma);
        worst = worst.max(max_abs_diff(&a, &b)).max(max_abs_diff(&a, &e));
    }
    line(
        "5c",
        "demand unchanged by potential shifts",
        worst <= 1e-12,
        format!("largest change {worst:.2e}"),
    )
}

fn aon_identity(rng: &mut StdRng) -> Line {
    let n = 50;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut links = Vec::new();
        for v in 0..n {
            links.push((v, (v + 1) % n));
        }
        for _ in 0..150 {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b {
                links.push((a, b));
            }
        }
        let links: Vec<Link> = links
            .into_iter()
            .map(|(tail, head)| Link {
                tail,
                head,
                params: random_link(rng),
            })
            .collect();
        let net = Network::unrestricted(n, links).unwrap();
        let graph = RoadGraph::new(&net);
        let t: Vec<f64> = net
            .links
            .iter()
            .map(|l| l.params.free_flow_time * rng.random_range(1.0..2.0))
            .collect();
        let (spec, _) = random_full_demand(rng, 8);
        let trips: Vec<f64> = (0..spec.pairs.len())
            .map(|_| rng.random_range(0.0..100.0))
            .collect();
        let cm = cost_matrix(&graph, &t, &spec);
        let f = aon_assign(&graph, &cm.trees, &spec, &trips).unwrap();
        let lhs: f64 = f.iter().zip(&t).map(|(a, b)| a * b).sum();
        let rhs: f64 = trips.iter().zip(&cm.values).map(|(a, b)| a * b).sum();
        worst = worst.max((lhs - rhs).abs() / rhs.abs());
    }
    line(
        "5d",
        "all-or-nothing identity <f, t> = <d, T> on random 50-node graphs",
        worst <= 1e-9,
        format!("worst relative error {worst:.2e}"),
    )
}

fn tight_oracle(f: &Fixture) -> TwoStageOracle<'_> {
    let mut o = TwoStageOracle::new(&f.network, &f.demand, default_gamma(&f.network, &f.demand));
    o.tolerance = InnerTolerance {
        min: 1e-13,
        scale: 0.0,
    };
    o.warm_start = false;
    o
}

fn finite_differences(rng: &mut StdRng) -> Line {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for f in [fixtures::triangle(), fixtures::bipartite()] {
        let mut oracle = tight_oracle(&f);
        let unit = vec![1.0; f.demand.pairs.len()];
        for _ in 0..20 {
            let t: Vec<f64> = f
                .network
                .links
                .iter()
                .map(|l| l.params.free_flow_time * rng.random_range(1.01..1.5))
                .collect();
            let g = oracle.evaluate_with_tolerance(&t, 1e-13).unwrap().grad;
            let gmax = g.iter().map(|x| x.abs()).fold(0.0, f64::max);
            for e in 0..t.len() {
                let h = 1e-6 * t[e];
                let (mut tp, mut tm) = (t.clone(), t.clone());
                tp[e] += h;
                tm[e] -= h;
                // Only points where no shortest path changes inside the stencil.
                let route = |x: &[f64]| {
                    let cm = cost_matrix(oracle.graph(), x, &f.demand);
                    aon_assign(oracle.graph(), &cm.trees, &f.demand, &unit).unwrap()
                };
                if route(&tp) != route(&tm) {
                    continue;
                }
                let vp = oracle.evaluate_with_tolerance(&tp, 1e-13).unwrap().value;
                let vm = oracle.evaluate_with_tolerance(&tm, 1e-13).unwrap().value;
                let fd = (vp - vm) / (2.0 * h);
                worst = worst.max((fd - g[e]).abs() / g[e].abs().max(1e-3 * gmax));
                checked += 1;
            }
        }
    }
    line(
        "5e",
        "finite-difference gradient check on unique-path points",
        worst <= 1e-5 && checked > 0,
        format!("{checked} components, worst relative error {worst:.2e}"),
    )
}

struct DualityWatch<'a> {
    inner: TwoStageOracle<'a>,
    net: &'a Network,
    total: f64,
    worst: f64,
    count: usize,
}

impl DualOracle for DualityWatch<'_> {
    fn evaluate(&mut self, t: &[f64], iteration: usize) -> twostage::Result<OracleSample> {
        let s = self.inner.evaluate(t, iteration)?;
        let st = self.inner.last.as_ref().unwrap();
        let p = primal_value(
            self.net,
            &st.aon_flows,
            &st.demand,
            self.inner.gamma,
            self.total,
        )?;
        self.worst = self
            .worst
            .min((p + s.value) / p.abs().max(s.value.abs()).max(1.0));
        self.count += 1;
        Ok(s)
    }
}

fn weak_duality() -> Line {
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for f in [
        fixtures::single_link(),
        fixtures::two_parallel(),
        fixtures::triangle(),
        fixtures::bipartite(),
    ] {
        let inner = tight_oracle(&f);
        let mut w = DualityWatch {
            inner,
            net: &f.network,
            total: f.demand.total,
            worst: f64::INFINITY,
            count: 0,
        };
        let domain = dual_domain(&f.network);
        let cfg = SolverConfig {
            max_iter: 1000,
            ..reference_config(&f)
        };
        umst_minimize(
            &mut w,
            &domain.lower,
            &domain,
            cfg.ustm_options(cfg.eps.unwrap()),
        )
        .unwrap();
        worst = worst.min(w.worst);
        count += w.count;
    }
    line(
        "5f",
        "weak duality primal + F >= 0 at every evaluated point",
        worst >= -1e-9,
        format!("{count} points, smallest scaled primal + F {worst:.2e}"),
    )
}

fn fixed_point_residual() -> Line {
    let mut parts = Vec::new();
    let mut worst: f64 = 0.0;
    for f in [
        fixtures::single_link(),
        fixtures::two_parallel(),
        fixtures::triangle(),
        fixtures::bipartite(),
        fixtures::symmetric_two_route(),
    ] {
        let r = solve_two_stage(&f.network, &f.demand, &reference_config(&f)).unwrap();
        let res = r.fixed_point_residual();
        worst = worst.max(res);
        parts.push(format!("{} {res:.2e} ({})", f.name, r.status));
    }
    line(
        "5g",
        "fixed-point residual <= 1e-3 at termination",
        worst <= 1e-3,
        parts.join(", "),
    )
}

fn determinism() -> Line {
    let mut same = true;
    let mut parts = Vec::new();
    let (sf_net, sf_demand) = sioux_falls();
    let sf = Fixture {
        name: "sioux_falls",
        network: sf_net,
        demand: sf_demand,
    };
    for f in [fixtures::triangle(), fixtures::bipartite(), sf] {
        let cfg = SolverConfig {
            max_iter: 300,
            record_timing: false,
            ..SolverConfig::default()
        };
        let a = solve_two_stage(&f.network, &f.demand, &cfg).unwrap();
        let b = solve_two_stage(&f.network, &f.demand, &cfg).unwrap();
        let eq = flows_table(&f.network, &a) == flows_table(&f.network, &b)
            && demand_table(&f.demand, &a) == demand_table(&f.demand, &b)
            && convergence_table(&a) == convergence_table(&b);
        same &= eq;
        parts.push(format!(
            "{} {}",
            f.name,
            if eq { "identical" } else { "differs" }
        ));
    }
    line(
        "5h",
        "reruns give bit-identical tables",
        same,
        parts.join(", "),
    )
}

fn criterion_5() -> Vec<Line> {
    let mut rng = StdRng::seed_from_u64(20_240_517);
    vec![
        fenchel_young(&mut rng),
        sinkhorn_properties(&mut rng),
        shift_invariance(&mut rng),
        aon_identity(&mut rng),
        finite_differences(&mut rng),
        weak_duality(),
        fixed_point_residual(),
        determinism(),
    ]
}

fn parse_line(text: &str, trips: bool) -> Option<usize> {
    let err = if trips {
        parse_trips(text).err()
    } else {
        parse_net(text).err()
    };
    match err {
        Some(Error::Parse { line, .. }) => Some(line),
        _ => None,
    }
}

fn criterion_6() -> Vec<Line> {
    let (net, demand) = sioux_falls();
    let counts_ok = net.node_count == 24 && net.link_count() == 76 && demand.total == 360_600.0;
    let counts = line(
        "6a",
        "Sioux Falls parses to 24 nodes, 76 links, 360600 trips",
        counts_ok,
        format!(
            "{} nodes, {} links, total {}",
            net.node_count,
            net.link_count(),
            demand.total
        ),
    );

    let good = write_net(&fixtures::two_parallel().network);
    let lines: Vec<&str> = good.lines().collect();
    let row = lines
        .iter()
        .rposition(|l| l.trim_end().ends_with(';'))
        .unwrap();
    let with_row = |replacement: &str| {
        let mut v: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        v[row] = replacement.to_string();
        v.join("\n")
    };
    let trips_ok = "<NUMBER OF ZONES> 2\n<END OF METADATA>\nOrigin 1\n  2 : 3;\n";
    let cases: Vec<(&str, String, bool, Option<usize>)> = vec![
        (
            "non-numeric capacity",
            with_row("\t1\t2\tlots\t1\t2\t0.5\t1\t0\t0\t1\t;"),
            false,
            Some(row + 1),
        ),
        (
            "self-loop",
            with_row("\t1\t1\t1\t1\t2\t0.5\t1\t0\t0\t1\t;"),
            false,
            Some(row + 1),
        ),
        (
            "node outside range",
            with_row("\t1\t9\t1\t1\t2\t0.5\t1\t0\t0\t1\t;"),
            false,
            Some(row + 1),
        ),
        (
            "bad trip token",
            trips_ok.replace("2 : 3;", "2 - 3;"),
            true,
            Some(4),
        ),
        (
            "non-numeric trips",
            trips_ok.replace("2 : 3;", "2 : three;"),
            true,
            Some(4),
        ),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, text, trips, want) in cases {
        let got = parse_line(&text, trips);
        ok &= got == want;
        parts.push(format!(
            "{name}: line {}",
            got.map_or("none".into(), |l| l.to_string())
        ));
    }
    let malformed = line(
        "6b",
        "malformed inputs report their line",
        ok,
        parts.join(", "),
    );
    vec![counts, malformed]
}

#[test]
fn acceptance() {
    let mut lines = Vec::new();
    for run in [
        criterion_6,
        criterion_5,
        criterion_3,
        criterion_4,
        criterion_2,
        criterion_1,
    ] {
        for l in run() {
            let mut err = std::io::stderr();
            let verdict = if l.passed { "PASS" } else { "FAIL" };
            let note = if !l.passed && KNOWN_SHORTFALLS.contains(&l.id) {
                " (known shortfall)"
            } else {
                ""
            };
            let _ = writeln!(err, "{verdict} [{}] {}{note}: {}", l.id, l.name, l.detail);
            lines.push(l);
        }
    }
    let unexpected: Vec<&str> = lines
        .iter()
        .filter(|l| !l.passed && !KNOWN_SHORTFALLS.contains(&l.id))
        .map(|l| l.id)
        .collect();
    assert!(unexpected.is_empty(), "criteria failed: {unexpected:?}");
}

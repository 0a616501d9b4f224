//! Small hand-built instances with known or brute-forceable answers.

use crate::demand::{DemandSpec, OdPair};
use crate::link_cost::LinkParams;
use crate::network::{Link, Network};

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub network: Network,
    pub demand: DemandSpec,
}

fn link(tail: usize, head: usize, t0: f64, cap: f64, kappa: f64, power: f64) -> Link {
    Link {
        tail,
        head,
        params: LinkParams::new(t0, cap, kappa, power).expect("fixture link"),
    }
}

/// One link, one pair, one unit of demand. Equilibrium time 10.09375.
pub fn single_link() -> Fixture {
    let network = Network::unrestricted(2, vec![link(0, 1, 10.0, 2.0, 0.15, 4.0)]).unwrap();
    let demand = DemandSpec::new(vec![0], vec![1], vec![1.0], vec![1.0]).unwrap();
    Fixture {
        name: "single_link",
        network,
        demand,
    }
}

/// Two linear parallel links, `t = 1 + f` and `t = 2 + f`, carrying 3 trips;
/// the equilibrium split is (2, 1) at common time 3.
pub fn two_parallel() -> Fixture {
    two_parallel_with(0.5)
}

/// Same pair of links with `kappa = 1` on both, so the second one is
/// `t = 2 + 2f`. Equilibrium (7/3, 2/3) at common time 10/3.
pub fn two_parallel_uniform_kappa() -> Fixture {
    let mut f = two_parallel_with(1.0);
    f.name = "two_parallel_uniform_kappa";
    f
}

fn two_parallel_with(kappa_slow: f64) -> Fixture {
    let network = Network::unrestricted(
        2,
        vec![
            link(0, 1, 1.0, 1.0, 1.0, 1.0),
            link(0, 1, 2.0, 1.0, kappa_slow, 1.0),
        ],
    )
    .unwrap();
    let demand = DemandSpec::new(vec![0], vec![1], vec![3.0], vec![3.0]).unwrap();
    Fixture {
        name: "two_parallel",
        network,
        demand,
    }
}

/// Three zones joined both ways; four pairs whose marginals pin the demand.
pub fn triangle() -> Fixture {
    let mut links = Vec::new();
    for &(a, b, t0, cap) in &[(0, 1, 4.0, 30.0), (1, 2, 3.0, 30.0), (0, 2, 8.0, 25.0)] {
        links.push(link(a, b, t0, cap, 0.15, 4.0));
        links.push(link(b, a, t0, cap, 0.15, 4.0));
    }
    let network = Network::unrestricted(3, links).unwrap();
    let pairs = vec![
        OdPair {
            origin: 0,
            destination: 1,
        },
        OdPair {
            origin: 0,
            destination: 2,
        },
        OdPair {
            origin: 1,
            destination: 2,
        },
        OdPair {
            origin: 2,
            destination: 0,
        },
    ];
    // d = (30, 20, 20, 30).
    let demand = DemandSpec::with_pairs(
        vec![0, 1, 2],
        vec![0, 1, 2],
        pairs,
        vec![50.0, 20.0, 30.0],
        vec![30.0, 30.0, 40.0],
    )
    .unwrap();
    Fixture {
        name: "triangle",
        network,
        demand,
    }
}

/// Two origins and two destinations fed through a shared hub and two
/// direct links; demand has one free direction.
pub fn bipartite() -> Fixture {
    let network = Network::new(
        5,
        4,
        4,
        vec![
            link(0, 4, 2.0, 40.0, 0.15, 4.0),
            link(1, 4, 3.0, 40.0, 0.15, 4.0),
            link(4, 2, 2.0, 40.0, 0.15, 4.0),
            link(4, 3, 1.0, 30.0, 0.15, 4.0),
            link(0, 2, 5.0, 20.0, 0.15, 4.0),
            link(1, 3, 3.0, 20.0, 0.15, 4.0),
        ],
    )
    .unwrap();
    let demand =
        DemandSpec::new(vec![0, 1], vec![2, 3], vec![60.0, 40.0], vec![50.0, 50.0]).unwrap();
    Fixture {
        name: "bipartite",
        network,
        demand,
    }
}

/// Two zones, each pair served by two identical parallel routes.
pub fn symmetric_two_route() -> Fixture {
    let network = Network::unrestricted(
        2,
        vec![
            link(0, 1, 5.0, 20.0, 0.15, 4.0),
            link(0, 1, 5.0, 20.0, 0.15, 4.0),
            link(1, 0, 5.0, 20.0, 0.15, 4.0),
            link(1, 0, 5.0, 20.0, 0.15, 4.0),
        ],
    )
    .unwrap();
    let demand =
        DemandSpec::new(vec![0, 1], vec![0, 1], vec![50.0, 50.0], vec![50.0, 50.0]).unwrap();
    Fixture {
        name: "symmetric_two_route",
        network,
        demand,
    }
}

pub fn all() -> Vec<Fixture> {
    vec![
        single_link(),
        two_parallel(),
        triangle(),
        bipartite(),
        symmetric_two_route(),
    ]
}

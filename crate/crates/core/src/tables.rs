//! Comma-separated result tables. Node ids are written 1-based.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::demand::DemandSpec;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::solver::EquilibriumResult;
use crate::tntp::fmt_g17;

pub const FLOWS_FILE: &str = "flows.csv";
pub const DEMAND_FILE: &str = "demand.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";

pub fn flows_table(net: &Network, result: &EquilibriumResult) -> String {
    let mut s = String::from("link_id,tail,head,flow,time,time_ratio\n");
    for (e, l) in net.links.iter().enumerate() {
        let t = result.times[e];
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            e + 1,
            l.tail + 1,
            l.head + 1,
            fmt_g17(result.flows[e]),
            fmt_g17(t),
            fmt_g17(t / l.params.free_flow_time)
        );
    }
    s
}

/// Rows in lexicographic (origin, destination) order.
pub fn demand_table(demand: &DemandSpec, result: &EquilibriumResult) -> String {
    let mut rows: Vec<(usize, usize, usize)> = (0..demand.pairs.len())
        .map(|k| {
            let (o, d) = demand.pair_nodes(k);
            (o, d, k)
        })
        .collect();
    rows.sort_unstable();
    let mut s = String::from("origin,destination,trips,share,cost\n");
    for (o, d, k) in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            o + 1,
            d + 1,
            fmt_g17(result.trips[k]),
            fmt_g17(result.demand[k]),
            fmt_g17(result.od_costs[k])
        );
    }
    s
}

pub fn convergence_table(result: &EquilibriumResult) -> String {
    let mut s = String::from("iter,objective,gap,lipschitz,sinkhorn_sweeps,elapsed_ms\n");
    for r in &result.history.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.iter,
            fmt_g17(r.value),
            r.gap.map(fmt_g17).unwrap_or_default(),
            fmt_g17(r.lipschitz),
            r.inner_sweeps,
            fmt_g17(r.elapsed_ms)
        );
    }
    s
}

/// Writes the three tables into `dir`, creating it if needed.
pub fn write_tables(
    net: &Network,
    demand: &DemandSpec,
    result: &EquilibriumResult,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (name, body) in [
        (FLOWS_FILE, flows_table(net, result)),
        (DEMAND_FILE, demand_table(demand, result)),
        (CONVERGENCE_FILE, convergence_table(result)),
    ] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

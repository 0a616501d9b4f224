use std::path::PathBuf;

use twostage::demand::DemandSpec;
use twostage::tntp::{parse_net, parse_trips, write_net};
use twostage::Error;

fn data(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/SiouxFalls")
        .join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn network_counts() {
    let net = parse_net(&data("SiouxFalls_net.tntp")).unwrap();
    assert_eq!(net.node_count, 24);
    assert_eq!(net.link_count(), 76);
    assert_eq!(net.zone_count, 24);
    assert_eq!(net.first_thru_node, 0);
    // First row of the file: 1 -> 2, free-flow time 6, b 0.15, power 4.
    let l = &net.links[0];
    assert_eq!((l.tail, l.head), (0, 1));
    assert_eq!(l.params.free_flow_time, 6.0);
    assert_eq!(l.params.kappa, 0.15);
    assert_eq!(l.params.power, 4.0);
}

#[test]
fn trip_total() {
    let trips = parse_trips(&data("SiouxFalls_trips.tntp")).unwrap();
    assert_eq!(trips.total(), 360_600.0);
    let spec = DemandSpec::from_trips(&trips).unwrap();
    assert_eq!(spec.total, 360_600.0);
    assert_eq!(spec.origins.len(), 24);
    assert_eq!(spec.destinations.len(), 24);
}

#[test]
fn network_round_trips_through_writer() {
    let net = parse_net(&data("SiouxFalls_net.tntp")).unwrap();
    let again = parse_net(&write_net(&net)).unwrap();
    assert_eq!(net, again);
}

#[test]
fn truncated_file_reports_line() {
    let text = data("SiouxFalls_net.tntp");
    let cut: String = text.lines().take(20).collect::<Vec<_>>().join("\n");
    match parse_net(&cut) {
        Err(Error::Parse { line, .. }) => assert!(line > 0),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn corrupted_row_reports_its_line() {
    let text = data("SiouxFalls_net.tntp");
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let target = lines
        .iter()
        .position(|l| l.trim_start().starts_with("1\t") || l.trim_start().starts_with("1 "))
        .unwrap();
    lines[target] = lines[target].replacen("6", "six", 1);
    match parse_net(&lines.join("\n")) {
        Err(Error::Parse { line, message }) => {
            assert_eq!(line, target + 1, "{message}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

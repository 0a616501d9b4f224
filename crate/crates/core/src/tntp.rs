//! Reader and writer for the TNTP text formats (network and trip files).
//!
//! Files are 1-based; everything in memory is 0-based.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::demand::TripTable;
use crate::error::{Error, Result};
use crate::link_cost::LinkParams;
use crate::network::{Link, Network};

/// Formats like C's `%.17g`: 17 significant digits, trailing zeros trimmed.
pub fn fmt_g17(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.16e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let mut s = format!("{x:.decimals$}");
        if s.contains('.') {
            while s.ends_with('0') {
                s.pop();
            }
            if s.ends_with('.') {
                s.pop();
            }
        }
        s
    } else {
        let (mantissa, exponent) = sci.split_at(sci.find('e').unwrap());
        let mut m = mantissa.to_string();
        if m.contains('.') {
            while m.ends_with('0') {
                m.pop();
            }
            if m.ends_with('.') {
                m.pop();
            }
        }
        format!("{m}{exponent}")
    }
}

/// Metadata value and the line it came from, keyed by tag.
type Metadata = HashMap<String, (usize, String)>;

/// Splits the `<KEY> value` header off a TNTP file. Returns the metadata map
/// and the 1-based line number where the body starts.
fn read_metadata(text: &str) -> Result<(Metadata, usize)> {
    let mut meta = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('~') {
            continue;
        }
        if !line.starts_with('<') {
            return Err(Error::parse(line_no, "data before <END OF METADATA>"));
        }
        let close = line
            .find('>')
            .ok_or_else(|| Error::parse(line_no, "unterminated metadata tag"))?;
        let key = line[1..close].trim().to_ascii_uppercase();
        if key == "END OF METADATA" {
            return Ok((meta, line_no + 1));
        }
        meta.insert(key, (line_no, line[close + 1..].trim().to_string()));
    }
    Err(Error::parse(
        text.lines().count().max(1),
        "missing <END OF METADATA>",
    ))
}

fn meta_number<T: std::str::FromStr>(
    meta: &HashMap<String, (usize, String)>,
    key: &str,
) -> Result<Option<T>> {
    match meta.get(key) {
        None => Ok(None),
        Some((line, value)) => value
            .parse::<T>()
            .map(Some)
            .map_err(|_| Error::parse(*line, format!("<{key}> is not a number: {value:?}"))),
    }
}

fn required<T: std::str::FromStr>(meta: &HashMap<String, (usize, String)>, key: &str) -> Result<T> {
    meta_number(meta, key)?.ok_or_else(|| Error::parse(1, format!("missing metadata <{key}>")))
}

fn field(tokens: &[&str], idx: usize, name: &str, line: usize) -> Result<f64> {
    let tok = tokens
        .get(idx)
        .ok_or_else(|| Error::parse(line, format!("missing column {name}")))?;
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(line, format!("column {name} is not a number: {tok:?}")))
}

fn node_field(tokens: &[&str], idx: usize, name: &str, line: usize, n: usize) -> Result<usize> {
    let tok = tokens
        .get(idx)
        .ok_or_else(|| Error::parse(line, format!("missing column {name}")))?;
    let id: usize = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("column {name} is not a node id: {tok:?}")))?;
    if id == 0 || id > n {
        return Err(Error::parse(line, format!("{name} {id} outside 1..={n}")));
    }
    Ok(id - 1)
}

/// Parses a TNTP `_net` file.
pub fn parse_net(text: &str) -> Result<Network> {
    let (meta, body_start) = read_metadata(text)?;
    let node_count: usize = required(&meta, "NUMBER OF NODES")?;
    let link_count: usize = required(&meta, "NUMBER OF LINKS")?;
    let first_thru: usize = required(&meta, "FIRST THRU NODE")?;
    let zone_count: usize = meta_number(&meta, "NUMBER OF ZONES")?.unwrap_or(node_count);

    let mut links = Vec::with_capacity(link_count);
    let mut last_line = body_start;
    for (idx, raw) in text.lines().enumerate().skip(body_start - 1) {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('~') {
            continue;
        }
        let line = line.strip_suffix(';').unwrap_or(line);
        let tokens: Vec<&str> = line.split_whitespace().filter(|t| *t != ";").collect();
        let tail = node_field(&tokens, 0, "init_node", line_no, node_count)?;
        let head = node_field(&tokens, 1, "term_node", line_no, node_count)?;
        let capacity = field(&tokens, 2, "capacity", line_no)?;
        let free_flow_time = field(&tokens, 4, "free_flow_time", line_no)?;
        let kappa = field(&tokens, 5, "b", line_no)?;
        let power = field(&tokens, 6, "power", line_no)?;
        if capacity <= 0.0 {
            return Err(Error::parse(
                line_no,
                format!("capacity must be positive, got {capacity}"),
            ));
        }
        if free_flow_time <= 0.0 {
            return Err(Error::parse(
                line_no,
                format!("free-flow time must be positive, got {free_flow_time}"),
            ));
        }
        if tail == head {
            return Err(Error::parse(line_no, "self-loop link"));
        }
        let params = LinkParams::new(free_flow_time, capacity, kappa, power)
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        links.push(Link { tail, head, params });
    }
    if links.len() != link_count {
        return Err(Error::parse(
            last_line,
            format!(
                "<NUMBER OF LINKS> declares {link_count} links but {} were found",
                links.len()
            ),
        ));
    }
    Network::new(node_count, zone_count, first_thru.saturating_sub(1), links)
}

/// Parses a TNTP `_trips` file.
pub fn parse_trips(text: &str) -> Result<TripTable> {
    let (meta, body_start) = read_metadata(text)?;
    let zone_count: usize = required(&meta, "NUMBER OF ZONES")?;
    let mut table = TripTable::new(zone_count);
    table.declared_total = meta_number(&meta, "TOTAL OD FLOW")?;

    let mut origin: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate().skip(body_start - 1) {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('~') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("Origin") {
            let id: usize = rest
                .trim()
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad origin header {line:?}")))?;
            if id == 0 || id > zone_count {
                return Err(Error::parse(
                    line_no,
                    format!("origin {id} outside 1..={zone_count}"),
                ));
            }
            origin = Some(id - 1);
            continue;
        }
        let o = origin.ok_or_else(|| Error::parse(line_no, "entry before any Origin block"))?;
        for chunk in line.split(';') {
            let chunk = chunk.trim();
            if chunk.is_empty() {
                continue;
            }
            let (dest, value) = chunk
                .split_once(':')
                .ok_or_else(|| Error::parse(line_no, format!("malformed entry {chunk:?}")))?;
            let dest: usize = dest.trim().parse().map_err(|_| {
                Error::parse(line_no, format!("malformed destination in {chunk:?}"))
            })?;
            let value: f64 = value
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| {
                    Error::parse(line_no, format!("malformed trip count in {chunk:?}"))
                })?;
            if dest == 0 || dest > zone_count {
                return Err(Error::parse(
                    line_no,
                    format!("destination {dest} outside 1..={zone_count}"),
                ));
            }
            table.insert(o, dest - 1, value);
        }
    }
    if let Some(declared) = table.declared_total {
        let total = table.total();
        if (total - declared).abs() > 0.005 * declared.abs() {
            log::warn!("trip entries sum to {total}, header declares {declared}");
        }
    }
    Ok(table)
}

/// Serialises a network back to TNTP text. Length is written as the free-flow
/// time, speed, toll and type as zero/one; only the model columns survive.
pub fn write_net(net: &Network) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "<NUMBER OF ZONES> {}", net.zone_count);
    let _ = writeln!(out, "<NUMBER OF NODES> {}", net.node_count);
    let _ = writeln!(out, "<FIRST THRU NODE> {}", net.first_thru_node + 1);
    let _ = writeln!(out, "<NUMBER OF LINKS> {}", net.links.len());
    out.push_str("<END OF METADATA>\n\n");
    out.push_str("~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;\n");
    for l in &net.links {
        let p = &l.params;
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t0\t0\t1\t;",
            l.tail + 1,
            l.head + 1,
            fmt_g17(p.capacity),
            fmt_g17(p.free_flow_time),
            fmt_g17(p.free_flow_time),
            fmt_g17(p.kappa),
            fmt_g17(p.power),
        );
    }
    out
}

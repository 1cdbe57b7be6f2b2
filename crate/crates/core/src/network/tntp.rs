//! Reader and writer for the TNTP `_net.tntp` / `_trips.tntp` text formats.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{DemandMatrix, Link, Network, NetworkError, NodeId, DEFAULT_ALPHA, DEFAULT_BETA};

fn parse_err(line: usize, message: impl Into<String>) -> NetworkError {
    NetworkError::Parse { line, message: message.into() }
}

/// Metadata tag of a `<TAG> value` header line.
fn metadata(line: &str) -> Option<(&str, &str)> {
    let rest = line.strip_prefix('<')?;
    let end = rest.find('>')?;
    Some((rest[..end].trim(), rest[end + 1..].trim()))
}

fn strip_comment(line: &str) -> &str {
    match line.find('~') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, NetworkError> {
    tok.parse().map_err(|_| parse_err(line, format!("invalid {what} `{tok}`")))
}

/// Parses a network file. Link ids follow record order.
pub fn parse_net(source: &str) -> Result<Network, NetworkError> {
    let mut declared_nodes: Option<NodeId> = None;
    let mut declared_links: Option<usize> = None;
    let mut first_thru: NodeId = 1;
    let mut links = Vec::new();
    let mut in_header = true;

    for (i, raw) in source.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if in_header {
            if let Some((tag, value)) = metadata(line) {
                match tag.to_ascii_uppercase().as_str() {
                    "NUMBER OF NODES" => declared_nodes = Some(parse_num(value, lineno, "node count")?),
                    "NUMBER OF LINKS" => declared_links = Some(parse_num(value, lineno, "link count")?),
                    "FIRST THRU NODE" => first_thru = parse_num(value, lineno, "first thru node")?,
                    "END OF METADATA" => in_header = false,
                    _ => {}
                }
                continue;
            }
        }
        let body = strip_comment(line).trim();
        if body.is_empty() {
            continue;
        }
        if body.starts_with('<') {
            return Err(parse_err(lineno, "metadata line after end of metadata"));
        }
        in_header = false;
        let toks: Vec<&str> =
            body.split(|c: char| c.is_whitespace() || c == ';').filter(|t| !t.is_empty()).collect();
        if toks.len() < 5 {
            return Err(parse_err(lineno, format!("expected at least 5 columns, found {}", toks.len())));
        }
        let tail: NodeId = parse_num(toks[0], lineno, "init node")?;
        let head: NodeId = parse_num(toks[1], lineno, "term node")?;
        let capacity: f64 = parse_num(toks[2], lineno, "capacity")?;
        let fft: f64 = parse_num(toks[4], lineno, "free flow time")?;
        let alpha = match toks.get(5) {
            Some(t) => parse_num(t, lineno, "B")?,
            None => DEFAULT_ALPHA,
        };
        let beta = match toks.get(6) {
            Some(t) => parse_num(t, lineno, "power")?,
            None => DEFAULT_BETA,
        };
        links.push(Link { tail, head, fft, capacity, alpha, beta });
    }

    if links.is_empty() {
        return Err(NetworkError::NoLinks);
    }
    if let Some(n) = declared_links {
        if n != links.len() {
            return Err(NetworkError::Validation(format!(
                "header declares {n} links, file has {}",
                links.len()
            )));
        }
    }
    let nodes: Vec<NodeId> = match declared_nodes {
        Some(n) => (1..=n).collect(),
        None => links.iter().flat_map(|l| [l.tail, l.head]).collect::<BTreeSet<_>>().into_iter().collect(),
    };
    Ok(Network::new(nodes, links)?.with_first_thru_node(first_thru))
}

/// Parses a trips file into a demand matrix.
pub fn parse_trips(source: &str) -> Result<DemandMatrix, NetworkError> {
    let mut demand = DemandMatrix::new();
    let mut origin: Option<NodeId> = None;
    let mut in_header = true;

    for (i, raw) in source.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if in_header {
            if let Some((tag, _)) = metadata(line) {
                if tag.eq_ignore_ascii_case("END OF METADATA") {
                    in_header = false;
                }
                continue;
            }
        }
        let body = strip_comment(line).trim();
        if body.is_empty() {
            continue;
        }
        in_header = false;
        if let Some(rest) = body.strip_prefix("Origin") {
            origin = Some(parse_num(rest.trim(), lineno, "origin")?);
            continue;
        }
        let o = origin.ok_or_else(|| parse_err(lineno, "demand entry before any `Origin` line"))?;
        for entry in body.split(';').map(str::trim).filter(|e| !e.is_empty()) {
            let (d, v) = entry
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected `dest : value`, found `{entry}`")))?;
            let d: NodeId = parse_num(d.trim(), lineno, "destination")?;
            let v: f64 = parse_num(v.trim(), lineno, "demand")?;
            demand.insert(o, d, v).map_err(|e| parse_err(lineno, e.to_string()))?;
        }
    }
    Ok(demand)
}

/// Parses both files and cross-validates node references.
pub fn load_tntp(net_source: &str, trips_source: &str) -> Result<(Network, DemandMatrix), NetworkError> {
    let network = parse_net(net_source)?;
    let demand = parse_trips(trips_source)?;
    demand.validate_for(&network)?;
    Ok((network, demand))
}

/// Writes surviving links in id order. Ids of a closed network are
/// renumbered densely when the output is parsed again.
pub fn write_net(network: &Network) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "<NUMBER OF ZONES> {}", network.node_count());
    let nodes = network.nodes();
    if nodes.iter().enumerate().all(|(i, &n)| n as usize == i + 1) {
        let _ = writeln!(out, "<NUMBER OF NODES> {}", nodes.len());
    }
    let _ = writeln!(out, "<FIRST THRU NODE> {}", network.first_thru_node());
    let _ = writeln!(out, "<NUMBER OF LINKS> {}", network.link_count());
    out.push_str("<END OF METADATA>\n\n\n");
    out.push_str("~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;\n");
    for (_, l) in network.links() {
        let _ = writeln!(
            out,
            "\t{}\t{}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t0\t0\t1\t;",
            l.tail, l.head, l.capacity, l.fft, l.fft, l.alpha, l.beta
        );
    }
    out
}

pub fn write_trips(demand: &DemandMatrix) -> String {
    let mut out = String::new();
    let zones = demand.iter().map(|((o, d), _)| o.max(d)).max().unwrap_or(0);
    let _ = writeln!(out, "<NUMBER OF ZONES> {zones}");
    let _ = writeln!(out, "<TOTAL OD FLOW> {:?}", demand.total());
    out.push_str("<END OF METADATA>\n\n");
    for (origin, dests) in demand.by_origin() {
        let _ = writeln!(out, "\nOrigin \t{origin}");
        for chunk in dests.chunks(5) {
            for (d, v) in chunk {
                let _ = write!(out, "{d:5} : {v:?};");
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const NET: &str = "<NUMBER OF NODES> 3\n<NUMBER OF LINKS> 2\n<END OF METADATA>\n\n~ init term cap len fft b power ;\n\t1\t2\t100\t1\t10\t0.15\t4\t;\n\t2\t3\t50\t1\t5\t;\n";

    #[test]
    fn reads_optional_bpr_columns() {
        let net = parse_net(NET).unwrap();
        assert_eq!(net.node_count(), 3);
        let l1 = net.link(crate::network::LinkId(1)).unwrap();
        assert_eq!((l1.alpha, l1.beta), (DEFAULT_ALPHA, DEFAULT_BETA));
        assert_eq!(l1.fft, 5.0);
    }

    #[test]
    fn empty_source_has_no_links() {
        let err = parse_net("").unwrap_err();
        assert_eq!(err.to_string(), "no link records");
        assert!(matches!(parse_net("<NUMBER OF LINKS> 0\n<END OF METADATA>\n"), Err(NetworkError::NoLinks)));
    }

    #[test]
    fn malformed_record_reports_line() {
        let src = "<END OF METADATA>\n1 2 100 1 10 ;\n1 3 abc 1 10 ;\n";
        match parse_net(src) {
            Err(NetworkError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match parse_net("<END OF METADATA>\n1 2 100 ;\n") {
            Err(NetworkError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn link_count_mismatch() {
        let src = "<NUMBER OF LINKS> 5\n<END OF METADATA>\n1 2 100 1 10 ;\n";
        assert!(matches!(parse_net(src), Err(NetworkError::Validation(_))));
    }

    #[test]
    fn trips_blocks() {
        let src = "<NUMBER OF ZONES> 3\n<END OF METADATA>\n\nOrigin 1\n 1 : 0.0; 2 : 10.0; 3 : 5.5;\nOrigin 2\n 3:1;\n";
        let d = parse_trips(src).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.get(1, 3), 5.5);
        assert_eq!(d.get(2, 3), 1.0);
        let bad = parse_trips("<END OF METADATA>\n 2 : 1.0;\n").unwrap_err();
        assert!(matches!(bad, NetworkError::Parse { line: 2, .. }));
    }

    #[test]
    fn dangling_trip_node() {
        let trips = "<END OF METADATA>\nOrigin 1\n 99 : 4.0;\n";
        assert!(matches!(load_tntp(NET, trips), Err(NetworkError::Validation(_))));
    }

    #[test]
    fn write_then_parse() {
        let net = parse_net(NET).unwrap();
        assert_eq!(parse_net(&write_net(&net)).unwrap(), net);
        let d = parse_trips("<END OF METADATA>\nOrigin 1\n 2 : 10.25; 3 : 1e-3;\n").unwrap();
        assert_eq!(parse_trips(&write_trips(&d)).unwrap(), d);
    }
}

//! Parse TNTP network and trip files, inspect them, and write them back.
//!
//! cargo run --example tntp_network -- [net.tntp trips.tntp]

use tap_surrogate::data::{SIOUX_FALLS_NET, SIOUX_FALLS_TRIPS};
use tap_surrogate::network::{fingerprint, load_tntp, parse_net, write_net, write_trips, ClosureConfig};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (net_text, trips_text) = match args.as_slice() {
        [n, t] => (std::fs::read_to_string(n)?, std::fs::read_to_string(t)?),
        _ => (SIOUX_FALLS_NET.to_string(), SIOUX_FALLS_TRIPS.to_string()),
    };
    let (net, demand) = load_tntp(&net_text, &trips_text)?;
    println!("{} nodes, {} links, first through node {}", net.node_count(), net.link_count(), net.first_thru_node());
    println!("{} OD pairs, total demand {}", demand.len(), demand.total());
    println!("fingerprint {}", fingerprint(&net, &demand));

    for (id, l) in net.links().take(5) {
        println!("  link {id}: {} -> {}  fft {}  capacity {:.1}  B {}  power {}", l.tail, l.head, l.fft, l.capacity, l.alpha, l.beta);
    }

    // a closure removes links but keeps the original ids
    let closed = net.apply_closures(&ClosureConfig::from_indices([0, 2]))?;
    println!("after closing {{0,2}}: {} links, {} disconnected OD pairs", closed.link_count(), closed.connectivity_check(&demand).len());

    let again = parse_net(&write_net(&net))?;
    assert_eq!(again, net);
    println!("round trip: {} bytes of net, {} bytes of trips", write_net(&net).len(), write_trips(&demand).len());
    Ok(())
}

//! Bundled benchmark instances.

use crate::network::{load_tntp, DemandMatrix, Network};

pub const SIOUX_FALLS_NET: &str = include_str!("../data/SiouxFalls_net.tntp");
pub const SIOUX_FALLS_TRIPS: &str = include_str!("../data/SiouxFalls_trips.tntp");

/// The Sioux Falls network (24 nodes, 76 links) with its 528-pair trip table.
pub fn sioux_falls() -> (Network, DemandMatrix) {
    load_tntp(SIOUX_FALLS_NET, SIOUX_FALLS_TRIPS).expect("bundled Sioux Falls files are valid")
}

//! Shortest-path trees and all-or-nothing loading.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::network::Network;

#[derive(Copy, Clone, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then node index
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest-path tree over link positions.
pub(crate) struct ShortestPathTree {
    pub dist: Vec<f64>,
    /// Position of the predecessor link, `usize::MAX` for the root and
    /// unreached nodes.
    pub pred: Vec<usize>,
    /// Nodes in the order they were settled.
    pub order: Vec<usize>,
}

pub(crate) const NO_PRED: usize = usize::MAX;

/// Dijkstra from `origin` with per-position link `costs`. Equal-distance
/// labels go to the lowest predecessor link id.
pub(crate) fn shortest_path_tree(network: &Network, costs: &[f64], origin: usize) -> ShortestPathTree {
    let n = network.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![NO_PRED; n];
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut heap = BinaryHeap::new();
    dist[origin] = 0.0;
    heap.push(Entry { dist: 0.0, node: origin });
    while let Some(Entry { dist: d, node: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        order.push(u);
        if u != origin && !network.is_passable(u) {
            continue;
        }
        for &pos in network.out_positions(u) {
            let v = network.head_index(pos);
            let nd = d + costs[pos];
            if nd < dist[v] || (nd == dist[v] && pos < pred[v] && !done[v]) {
                dist[v] = nd;
                pred[v] = pos;
                heap.push(Entry { dist: nd, node: v });
            }
        }
    }
    ShortestPathTree { dist, pred, order }
}

/// Loads `dests` from `origin` onto the tree; returns the flow added to each
/// link position via `flows`, and the load leaving the origin.
pub(crate) fn load_tree(
    network: &Network,
    tree: &ShortestPathTree,
    origin: usize,
    dests: &[(usize, f64)],
    flows: &mut [f64],
) -> Result<f64, usize> {
    let mut node_load = vec![0.0; network.node_count()];
    for &(d, v) in dests {
        if !tree.dist[d].is_finite() {
            return Err(d);
        }
        node_load[d] += v;
    }
    let mut leaving_origin = 0.0;
    for &u in tree.order.iter().rev() {
        let load = node_load[u];
        if u == origin || load == 0.0 {
            continue;
        }
        let pos = tree.pred[u];
        flows[pos] += load;
        let tail = network.tail_index(pos);
        node_load[tail] += load;
        if tail == origin {
            leaving_origin += load;
        }
    }
    Ok(leaving_origin)
}

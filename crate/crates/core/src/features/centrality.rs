//! Edge betweenness and node closeness on a weighted digraph.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::network::Network;

#[derive(Copy, Clone, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn same_length(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

struct Sweep {
    dist: Vec<f64>,
    sigma: Vec<f64>,
    /// Incoming link positions on some shortest path.
    preds: Vec<Vec<usize>>,
    order: Vec<usize>,
}

/// Dijkstra from `source` counting shortest paths. Zone nodes other than the
/// source are reached but not expanded, as in routing.
fn sweep(network: &Network, weights: &[f64], source: usize) -> Sweep {
    let n = network.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut sigma = vec![0.0; n];
    let mut preds = vec![Vec::new(); n];
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    sigma[source] = 1.0;
    heap.push(Entry(0.0, source));
    while let Some(Entry(d, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        order.push(u);
        if u != source && !network.is_passable(u) {
            continue;
        }
        for &pos in network.out_positions(u) {
            let v = network.head_index(pos);
            if done[v] {
                continue;
            }
            let nd = d + weights[pos];
            if dist[v].is_finite() && same_length(nd, dist[v]) {
                sigma[v] += sigma[u];
                preds[v].push(pos);
            } else if nd < dist[v] {
                dist[v] = nd;
                sigma[v] = sigma[u];
                preds[v].clear();
                preds[v].push(pos);
                heap.push(Entry(nd, v));
            }
        }
    }
    Sweep { dist, sigma, preds, order }
}

/// Unnormalized edge betweenness per link position: the number of ordered
/// node pairs whose shortest paths use the link, split evenly across ties.
pub fn edge_betweenness(network: &Network, weights: &[f64]) -> Vec<f64> {
    let m = network.link_count();
    let partials: Vec<Vec<f64>> = (0..network.node_count())
        .into_par_iter()
        .map(|s| {
            let sw = sweep(network, weights, s);
            let mut delta = vec![0.0; network.node_count()];
            let mut bc = vec![0.0; m];
            for &w in sw.order.iter().rev() {
                for &pos in &sw.preds[w] {
                    let v = network.tail_index(pos);
                    let c = sw.sigma[v] / sw.sigma[w] * (1.0 + delta[w]);
                    bc[pos] += c;
                    delta[v] += c;
                }
            }
            bc
        })
        .collect();
    let mut total = vec![0.0; m];
    for bc in partials {
        for (t, b) in total.iter_mut().zip(bc) {
            *t += b;
        }
    }
    total
}

/// Outward closeness per node with the Wasserman-Faust correction for
/// partially reachable graphs: `(r-1)/Σd · (r-1)/(n-1)` over the `r` nodes
/// reachable from it, itself included.
pub fn closeness(network: &Network, weights: &[f64]) -> Vec<f64> {
    let n = network.node_count();
    (0..n)
        .into_par_iter()
        .map(|s| {
            let sw = sweep(network, weights, s);
            let reached: Vec<f64> = sw.dist.iter().copied().filter(|d| d.is_finite()).collect();
            let r = reached.len() as f64;
            let total: f64 = reached.iter().sum();
            if n < 2 || r < 2.0 || total <= 0.0 {
                0.0
            } else {
                (r - 1.0) / total * (r - 1.0) / (n as f64 - 1.0)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Link;

    fn diamond() -> (Network, Vec<f64>) {
        // 1→2→4 and 1→3→4 tie at length 2; 4→1 closes the loop
        let links = vec![
            Link::new(1, 2, 1.0, 1.0),
            Link::new(1, 3, 1.0, 1.0),
            Link::new(2, 4, 1.0, 1.0),
            Link::new(3, 4, 1.0, 1.0),
            Link::new(4, 1, 1.0, 1.0),
        ];
        let net = Network::new(vec![1, 2, 3, 4], links).unwrap();
        let w = net.link_slice().iter().map(|l| l.fft).collect();
        (net, w)
    }

    #[test]
    fn diamond_splits_ties() {
        let (net, w) = diamond();
        let bc = edge_betweenness(&net, &w);
        assert_eq!(bc, vec![3.5, 3.5, 3.5, 3.5, 7.0]);
    }

    #[test]
    fn closeness_of_line() {
        let links = vec![Link::new(1, 2, 1.0, 1.0), Link::new(2, 3, 2.0, 1.0)];
        let net = Network::new(vec![1, 2, 3], links).unwrap();
        let w: Vec<f64> = net.link_slice().iter().map(|l| l.fft).collect();
        let c = closeness(&net, &w);
        assert!((c[0] - 2.0 / 4.0).abs() < 1e-12);
        assert!((c[1] - 1.0 / 2.0 * 1.0 / 2.0).abs() < 1e-12);
        assert_eq!(c[2], 0.0);
    }
}

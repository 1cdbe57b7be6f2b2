#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use tap_surrogate::network::{DemandMatrix, Network, NodeId};

/// Method of successive averages written against the public network API
/// only: its own BPR curve, Dijkstra and path-by-path loading.
pub struct Msa {
    pub ttt: f64,
    pub gap: f64,
    pub iterations: usize,
    pub flows: Vec<f64>,
}

struct Graph {
    nodes: Vec<NodeId>,
    pos: HashMap<NodeId, usize>,
    out: Vec<Vec<usize>>,
    tail: Vec<usize>,
    head: Vec<usize>,
    fft: Vec<f64>,
    cap: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    first_thru: NodeId,
}

impl Graph {
    fn new(net: &Network) -> Self {
        let nodes: Vec<NodeId> = net.nodes().to_vec();
        let pos: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut g = Graph {
            out: vec![Vec::new(); nodes.len()],
            nodes,
            pos,
            tail: vec![],
            head: vec![],
            fft: vec![],
            cap: vec![],
            alpha: vec![],
            beta: vec![],
            first_thru: net.first_thru_node(),
        };
        for (_, l) in net.links() {
            let e = g.tail.len();
            g.tail.push(g.pos[&l.tail]);
            g.head.push(g.pos[&l.head]);
            g.fft.push(l.fft);
            g.cap.push(l.capacity);
            g.alpha.push(l.alpha);
            g.beta.push(l.beta);
            g.out[g.pos[&l.tail]].push(e);
        }
        g
    }

    fn cost(&self, e: usize, f: f64) -> f64 {
        self.fft[e] * (1.0 + self.alpha[e] * (f / self.cap[e]).powf(self.beta[e]))
    }

    /// Shortest-path predecessor links from `o`.
    fn dijkstra(&self, o: usize, costs: &[f64]) -> (Vec<f64>, Vec<Option<usize>>) {
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[o] = 0.0;
        heap.push(Reverse((OrdF(0.0), o)));
        while let Some(Reverse((OrdF(d), u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if u != o && self.nodes[u] < self.first_thru {
                continue;
            }
            for &e in &self.out[u] {
                let v = self.head[e];
                let nd = d + costs[e];
                if nd < dist[v] {
                    dist[v] = nd;
                    pred[v] = Some(e);
                    heap.push(Reverse((OrdF(nd), v)));
                }
            }
        }
        (dist, pred)
    }

    fn aon(&self, demand: &DemandMatrix, costs: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.tail.len()];
        for (o, dests) in demand.by_origin() {
            let oi = self.pos[&o];
            let (_, pred) = self.dijkstra(oi, costs);
            for (d, v) in dests {
                let mut at = self.pos[&d];
                while at != oi {
                    let e = pred[at].expect("destination reachable");
                    y[e] += v;
                    at = self.tail[e];
                }
            }
        }
        y
    }
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct OrdF(f64);
impl Eq for OrdF {}
impl Ord for OrdF {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

pub fn msa(net: &Network, demand: &DemandMatrix, gap_target: f64, max_iter: usize) -> Msa {
    let g = Graph::new(net);
    let m = g.tail.len();
    let free: Vec<f64> = (0..m).map(|e| g.cost(e, 0.0)).collect();
    let mut x = g.aon(demand, &free);
    let mut k = 1;
    loop {
        let c: Vec<f64> = (0..m).map(|e| g.cost(e, x[e])).collect();
        let y = g.aon(demand, &c);
        let tc: f64 = x.iter().zip(&c).map(|(a, b)| a * b).sum();
        let sp: f64 = y.iter().zip(&c).map(|(a, b)| a * b).sum();
        let gap = (tc - sp) / sp;
        if gap <= gap_target || k >= max_iter {
            return Msa { ttt: tc, gap, iterations: k, flows: x };
        }
        k += 1;
        let step = 1.0 / k as f64;
        for e in 0..m {
            x[e] += step * (y[e] - x[e]);
        }
    }
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

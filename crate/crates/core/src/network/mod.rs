//! Road network model: links with BPR parameters, fixed OD demand, and
//! closure configurations.
//!
//! Link ids are dense in the baseline network and are never renumbered when
//! links are closed, so flows from different scenarios stay comparable.

mod tntp;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use tntp::{load_tntp, parse_net, parse_trips, write_net, write_trips};

pub type NodeId = u32;

/// Default BPR `alpha`, used when a network file carries no `B` column.
pub const DEFAULT_ALPHA: f64 = 0.15;
/// Default BPR `beta`, used when a network file carries no `Power` column.
pub const DEFAULT_BETA: f64 = 4.0;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no link records")]
    NoLinks,
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unknown link id {0}")]
    UnknownLink(LinkId),
}

/// Identifier of a road. One renovation project maps to exactly one link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub usize);

impl LinkId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `x^e`, with an integer fast path (BPR powers are almost always 4).
#[inline]
fn pow(x: f64, e: f64) -> f64 {
    if e == 4.0 {
        let x2 = x * x;
        x2 * x2
    } else if e.fract() == 0.0 && e.abs() < 64.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub tail: NodeId,
    pub head: NodeId,
    /// Free-flow travel time.
    pub fft: f64,
    pub capacity: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Link {
    pub fn new(tail: NodeId, head: NodeId, fft: f64, capacity: f64) -> Self {
        Self { tail, head, fft, capacity, alpha: DEFAULT_ALPHA, beta: DEFAULT_BETA }
    }

    pub fn with_bpr(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    /// BPR travel time at `flow`. Callers guarantee `flow >= 0`.
    #[inline]
    pub fn cost(&self, flow: f64) -> f64 {
        self.fft * (1.0 + self.alpha * pow(flow / self.capacity, self.beta))
    }

    /// Derivative of [`Link::cost`] with respect to flow.
    #[inline]
    pub fn cost_derivative(&self, flow: f64) -> f64 {
        if flow <= 0.0 {
            return if self.beta == 1.0 { self.fft * self.alpha / self.capacity } else { 0.0 };
        }
        self.fft * self.alpha * self.beta * pow(flow / self.capacity, self.beta - 1.0) / self.capacity
    }

    /// Closed-form integral of the BPR curve from 0 to `flow`.
    #[inline]
    pub fn cost_integral(&self, flow: f64) -> f64 {
        self.fft * flow
            + self.fft * self.alpha * flow * pow(flow / self.capacity, self.beta) / (self.beta + 1.0)
    }

    fn validate(&self, id: LinkId) -> Result<(), NetworkError> {
        let bad = |what: &str| {
            Err(NetworkError::Validation(format!("link {id} ({}->{}): {what}", self.tail, self.head)))
        };
        if !(self.fft.is_finite() && self.fft > 0.0) {
            return bad("free-flow time must be positive");
        }
        if !(self.capacity.is_finite() && self.capacity > 0.0) {
            return bad("capacity must be positive");
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad("alpha must be non-negative");
        }
        if !(self.beta.is_finite() && self.beta >= 1.0) {
            return bad("beta must be at least 1");
        }
        Ok(())
    }
}

/// Directed road network.
///
/// Only surviving links are stored, in ascending id order. `id_space` is the
/// link count of the baseline network the ids were assigned in.
#[derive(Clone, Debug)]
pub struct Network {
    nodes: Vec<NodeId>,
    ids: Vec<LinkId>,
    links: Vec<Link>,
    id_space: usize,
    first_thru_node: NodeId,
    link_index: HashMap<(NodeId, NodeId), LinkId>,
    node_pos: HashMap<NodeId, usize>,
    position: Vec<Option<usize>>,
    out_links: Vec<Vec<usize>>,
    tails: Vec<usize>,
    heads: Vec<usize>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.ids == other.ids
            && self.links == other.links
            && self.id_space == other.id_space
            && self.first_thru_node == other.first_thru_node
    }
}

impl Network {
    /// Builds a baseline network; link ids are assigned in the order given.
    pub fn new(nodes: Vec<NodeId>, links: Vec<Link>) -> Result<Self, NetworkError> {
        let ids = (0..links.len()).map(LinkId).collect();
        let id_space = links.len();
        Self::assemble(nodes, ids, links, id_space, 1)
    }

    /// Nodes with an id below `first_thru_node` are zones: traffic may start
    /// or end there but never pass through.
    pub fn with_first_thru_node(mut self, first_thru_node: NodeId) -> Self {
        self.first_thru_node = first_thru_node;
        self
    }

    fn assemble(
        mut nodes: Vec<NodeId>,
        ids: Vec<LinkId>,
        links: Vec<Link>,
        id_space: usize,
        first_thru_node: NodeId,
    ) -> Result<Self, NetworkError> {
        if links.is_empty() && id_space == 0 {
            return Err(NetworkError::NoLinks);
        }
        nodes.sort_unstable();
        nodes.dedup();
        let node_pos: HashMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut link_index = HashMap::with_capacity(links.len());
        let mut position = vec![None; id_space];
        let mut out_links = vec![Vec::new(); nodes.len()];
        let mut tails = Vec::with_capacity(links.len());
        let mut heads = Vec::with_capacity(links.len());
        for (pos, (&id, link)) in ids.iter().zip(&links).enumerate() {
            link.validate(id)?;
            if id.0 >= id_space {
                return Err(NetworkError::UnknownLink(id));
            }
            let tail = *node_pos.get(&link.tail).ok_or_else(|| {
                NetworkError::Validation(format!("link {id} references unknown node {}", link.tail))
            })?;
            let head = *node_pos.get(&link.head).ok_or_else(|| {
                NetworkError::Validation(format!("link {id} references unknown node {}", link.head))
            })?;
            if link.tail == link.head {
                return Err(NetworkError::Validation(format!("link {id} is a self-loop")));
            }
            if link_index.insert((link.tail, link.head), id).is_some() {
                return Err(NetworkError::Validation(format!(
                    "duplicate link {}->{}",
                    link.tail, link.head
                )));
            }
            position[id.0] = Some(pos);
            out_links[tail].push(pos);
            tails.push(tail);
            heads.push(head);
        }
        Ok(Self {
            nodes,
            ids,
            links,
            id_space,
            first_thru_node,
            link_index,
            node_pos,
            position,
            out_links,
            tails,
            heads,
        })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of surviving links.
    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    /// Number of link ids in the baseline network (the project count).
    pub fn id_space(&self) -> usize {
        self.id_space
    }

    pub fn first_thru_node(&self) -> NodeId {
        self.first_thru_node
    }

    /// Surviving links with their ids, ascending by id.
    pub fn links(&self) -> impl ExactSizeIterator<Item = (LinkId, &Link)> + '_ {
        self.ids.iter().copied().zip(self.links.iter())
    }

    pub fn link_ids(&self) -> &[LinkId] {
        &self.ids
    }

    pub fn link(&self, id: LinkId) -> Option<&Link> {
        self.position_of(id).map(|p| &self.links[p])
    }

    pub fn link_between(&self, tail: NodeId, head: NodeId) -> Option<LinkId> {
        self.link_index.get(&(tail, head)).copied()
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        self.node_pos.contains_key(&node)
    }

    // Dense views used by the solvers.

    pub(crate) fn link_slice(&self) -> &[Link] {
        &self.links
    }

    pub(crate) fn position_of(&self, id: LinkId) -> Option<usize> {
        self.position.get(id.0).copied().flatten()
    }

    pub(crate) fn node_index(&self, node: NodeId) -> Option<usize> {
        self.node_pos.get(&node).copied()
    }

    pub(crate) fn out_positions(&self, node_index: usize) -> &[usize] {
        &self.out_links[node_index]
    }

    #[inline]
    pub(crate) fn head_index(&self, pos: usize) -> usize {
        self.heads[pos]
    }

    #[inline]
    pub(crate) fn tail_index(&self, pos: usize) -> usize {
        self.tails[pos]
    }

    /// Zones below the first through node cannot be traversed.
    pub(crate) fn is_passable(&self, node_index: usize) -> bool {
        self.nodes[node_index] >= self.first_thru_node
    }

    /// Returns a copy without the closed links. Ids of surviving links are
    /// preserved; ids that are already absent are ignored.
    pub fn apply_closures(&self, config: &ClosureConfig) -> Result<Network, NetworkError> {
        config.validate_for(self)?;
        if config.is_empty() {
            return Ok(self.clone());
        }
        let (ids, links): (Vec<_>, Vec<_>) = self
            .links()
            .filter(|(id, _)| !config.contains(*id))
            .map(|(id, l)| (id, l.clone()))
            .unzip();
        Self::assemble(self.nodes.clone(), ids, links, self.id_space, self.first_thru_node)
    }

    /// Partial closures: scales capacity and free-flow time of individual
    /// links instead of removing them.
    pub fn apply_adjustments(
        &self,
        adjustments: &BTreeMap<LinkId, LinkAdjustment>,
    ) -> Result<Network, NetworkError> {
        let mut links = self.links.clone();
        for (&id, adj) in adjustments {
            let pos = self.position_of(id).ok_or(NetworkError::UnknownLink(id))?;
            adj.validate()?;
            links[pos].capacity *= adj.capacity_factor;
            links[pos].fft *= adj.fft_factor;
        }
        Self::assemble(self.nodes.clone(), self.ids.clone(), links, self.id_space, self.first_thru_node)
    }

    /// OD pairs with positive demand that have no directed path.
    pub fn connectivity_check(&self, demand: &DemandMatrix) -> Vec<(NodeId, NodeId)> {
        let mut missing = Vec::new();
        for (origin, dests) in demand.by_origin() {
            let Some(start) = self.node_index(origin) else {
                missing.extend(dests.iter().map(|&(d, _)| (origin, d)));
                continue;
            };
            let reached = self.reachable_from(start);
            for &(dest, _) in &dests {
                match self.node_index(dest) {
                    Some(d) if reached[d] => {}
                    _ => missing.push((origin, dest)),
                }
            }
        }
        missing
    }

    fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            if u != start && !self.is_passable(u) {
                continue;
            }
            for &pos in &self.out_links[u] {
                let v = self.head_index(pos);
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }
}

/// Multiplicative adjustment for a partially closed link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkAdjustment {
    pub capacity_factor: f64,
    pub fft_factor: f64,
}

impl LinkAdjustment {
    fn validate(&self) -> Result<(), NetworkError> {
        if !(self.capacity_factor > 0.0 && self.capacity_factor.is_finite())
            || !(self.fft_factor > 0.0 && self.fft_factor.is_finite())
        {
            return Err(NetworkError::Validation(format!("invalid link adjustment {self:?}")));
        }
        Ok(())
    }
}

/// Fixed origin-destination demand. Only positive entries are stored.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DemandMatrix {
    entries: BTreeMap<(NodeId, NodeId), f64>,
}

impl DemandMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds demand to an OD pair. Zero demand is accepted and not stored.
    pub fn insert(&mut self, origin: NodeId, dest: NodeId, demand: f64) -> Result<(), NetworkError> {
        if !(demand.is_finite() && demand >= 0.0) {
            return Err(NetworkError::Validation(format!(
                "demand {origin}->{dest} must be finite and non-negative, got {demand}"
            )));
        }
        if demand == 0.0 {
            return Ok(());
        }
        if origin == dest {
            return Err(NetworkError::Validation(format!("positive intrazonal demand at node {origin}")));
        }
        *self.entries.entry((origin, dest)).or_insert(0.0) += demand;
        Ok(())
    }

    pub fn get(&self, origin: NodeId, dest: NodeId) -> f64 {
        self.entries.get(&(origin, dest)).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((NodeId, NodeId), f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    /// Entries grouped by origin, ascending.
    pub fn by_origin(&self) -> Vec<(NodeId, Vec<(NodeId, f64)>)> {
        let mut out: Vec<(NodeId, Vec<(NodeId, f64)>)> = Vec::new();
        for (&(o, d), &v) in &self.entries {
            match out.last_mut() {
                Some((last, dests)) if *last == o => dests.push((d, v)),
                _ => out.push((o, vec![(d, v)])),
            }
        }
        out
    }

    pub fn validate_for(&self, network: &Network) -> Result<(), NetworkError> {
        for &(o, d) in self.entries.keys() {
            for node in [o, d] {
                if !network.contains_node(node) {
                    return Err(NetworkError::Validation(format!(
                        "demand {o}->{d} references node {node} not in the network"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A set of simultaneously closed links, kept sorted and deduplicated.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClosureConfig {
    closed: Vec<LinkId>,
}

impl ClosureConfig {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(ids: impl IntoIterator<Item = LinkId>) -> Self {
        let mut closed: Vec<LinkId> = ids.into_iter().collect();
        closed.sort_unstable();
        closed.dedup();
        Self { closed }
    }

    pub fn from_indices(ids: impl IntoIterator<Item = usize>) -> Self {
        Self::new(ids.into_iter().map(LinkId))
    }

    pub fn ids(&self) -> &[LinkId] {
        &self.closed
    }

    pub fn len(&self) -> usize {
        self.closed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closed.is_empty()
    }

    pub fn contains(&self, id: LinkId) -> bool {
        self.closed.binary_search(&id).is_ok()
    }

    /// Sorted-merge subset test.
    pub fn is_subset_of(&self, other: &ClosureConfig) -> bool {
        if self.len() > other.len() {
            return false;
        }
        let mut it = other.closed.iter();
        'outer: for id in &self.closed {
            for o in it.by_ref() {
                match o.cmp(id) {
                    std::cmp::Ordering::Less => continue,
                    std::cmp::Ordering::Equal => continue 'outer,
                    std::cmp::Ordering::Greater => return false,
                }
            }
            return false;
        }
        true
    }

    pub fn union(&self, other: &ClosureConfig) -> ClosureConfig {
        Self::new(self.closed.iter().chain(&other.closed).copied())
    }

    pub fn difference(&self, other: &ClosureConfig) -> ClosureConfig {
        Self { closed: self.closed.iter().copied().filter(|id| !other.contains(*id)).collect() }
    }

    pub fn validate_for(&self, network: &Network) -> Result<(), NetworkError> {
        match self.closed.iter().find(|id| id.0 >= network.id_space()) {
            Some(&id) => Err(NetworkError::UnknownLink(id)),
            None => Ok(()),
        }
    }
}

impl fmt::Display for ClosureConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, id) in self.closed.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{id}")?;
        }
        write!(f, "}}")
    }
}

/// Stable hash of a network together with its demand.
pub fn fingerprint(network: &Network, demand: &DemandMatrix) -> String {
    let mut h = Sha256::new();
    h.update(write_net(network).as_bytes());
    h.update(write_trips(demand).as_bytes());
    hex::encode(&h.finalize()[..16])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Network {
        Network::new(
            vec![1, 2, 3],
            vec![
                Link::new(1, 2, 1.0, 10.0),
                Link::new(2, 3, 1.0, 10.0),
                Link::new(1, 3, 3.0, 10.0),
                Link::new(3, 1, 1.0, 10.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn bpr_integral_matches_hand_value() {
        let l = Link::new(1, 2, 10.0, 100.0);
        assert!((l.cost_integral(100.0) - 1030.0).abs() < 1e-9);
        assert!((l.cost(100.0) - 11.5).abs() < 1e-12);
    }

    #[test]
    fn closure_keeps_ids() {
        let net = triangle();
        let closed = net.apply_closures(&ClosureConfig::from_indices([0])).unwrap();
        assert_eq!(closed.link_count(), 3);
        assert_eq!(closed.link_ids(), &[LinkId(1), LinkId(2), LinkId(3)]);
        assert!(closed.link(LinkId(0)).is_none());
        assert_eq!(closed.link(LinkId(2)).unwrap().fft, 3.0);
        assert_eq!(closed.id_space(), 4);
        // original untouched
        assert_eq!(net.link_count(), 4);
    }

    #[test]
    fn unknown_link_rejected() {
        let err = triangle().apply_closures(&ClosureConfig::from_indices([9])).unwrap_err();
        assert!(matches!(err, NetworkError::UnknownLink(LinkId(9))));
    }

    #[test]
    fn duplicate_and_dangling_links_rejected() {
        let dup = Network::new(vec![1, 2], vec![Link::new(1, 2, 1.0, 1.0), Link::new(1, 2, 2.0, 1.0)]);
        assert!(matches!(dup, Err(NetworkError::Validation(_))));
        let dangling = Network::new(vec![1, 2], vec![Link::new(1, 5, 1.0, 1.0)]);
        assert!(matches!(dangling, Err(NetworkError::Validation(_))));
        let bad_cap = Network::new(vec![1, 2], vec![Link::new(1, 2, 1.0, 0.0)]);
        assert!(matches!(bad_cap, Err(NetworkError::Validation(_))));
    }

    #[test]
    fn isolated_origin_reported() {
        let net = triangle();
        let mut demand = DemandMatrix::new();
        demand.insert(1, 2, 5.0).unwrap();
        demand.insert(1, 3, 5.0).unwrap();
        demand.insert(2, 3, 1.0).unwrap();
        assert!(net.connectivity_check(&demand).is_empty());
        let cut = net.apply_closures(&ClosureConfig::from_indices([0, 2])).unwrap();
        assert_eq!(cut.connectivity_check(&demand), vec![(1, 2), (1, 3)]);
        // closing 3->1 does not affect these pairs
        let spare = net.apply_closures(&ClosureConfig::from_indices([3])).unwrap();
        assert!(spare.connectivity_check(&demand).is_empty());
    }

    #[test]
    fn zones_are_not_passable() {
        // 1 -> 2 -> 3 with node 2 a zone
        let net = Network::new(vec![1, 2, 3], vec![Link::new(1, 2, 1.0, 1.0), Link::new(2, 3, 1.0, 1.0)])
            .unwrap()
            .with_first_thru_node(3);
        let mut demand = DemandMatrix::new();
        demand.insert(1, 3, 1.0).unwrap();
        demand.insert(2, 3, 1.0).unwrap();
        assert_eq!(net.connectivity_check(&demand), vec![(1, 3)]);
    }

    #[test]
    fn demand_rules() {
        let mut d = DemandMatrix::new();
        assert!(d.insert(1, 1, 0.0).is_ok());
        assert!(d.insert(1, 1, 3.0).is_err());
        assert!(d.insert(1, 2, -1.0).is_err());
        assert!(d.insert(1, 2, f64::NAN).is_err());
        d.insert(2, 1, 4.0).unwrap();
        d.insert(1, 2, 1.0).unwrap();
        d.insert(1, 3, 2.0).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.by_origin(), vec![(1, vec![(2, 1.0), (3, 2.0)]), (2, vec![(1, 4.0)])]);
    }

    #[test]
    fn closure_set_algebra() {
        let a = ClosureConfig::from_indices([3, 1, 1, 7]);
        assert_eq!(a.ids(), &[LinkId(1), LinkId(3), LinkId(7)]);
        let b = ClosureConfig::from_indices([1, 7]);
        assert!(b.is_subset_of(&a));
        assert!(!a.is_subset_of(&b));
        assert!(ClosureConfig::empty().is_subset_of(&b));
        assert!(!ClosureConfig::from_indices([2]).is_subset_of(&a));
        assert_eq!(a.difference(&b), ClosureConfig::from_indices([3]));
        assert_eq!(b.union(&ClosureConfig::from_indices([0])), ClosureConfig::from_indices([0, 1, 7]));
        assert_eq!(a.to_string(), "{1,3,7}");
    }

    #[test]
    fn partial_closure_scales_link() {
        let net = triangle();
        let adj = BTreeMap::from([(LinkId(2), LinkAdjustment { capacity_factor: 0.5, fft_factor: 2.0 })]);
        let out = net.apply_adjustments(&adj).unwrap();
        let l = out.link(LinkId(2)).unwrap();
        assert_eq!((l.capacity, l.fft), (5.0, 6.0));
        assert_eq!(out.link_count(), 4);
    }
}

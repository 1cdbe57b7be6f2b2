//! User-equilibrium traffic assignment by link-based Frank-Wolfe.
//!
//! Flows are kept per link; path flows are never materialized. Path costs
//! enter only through the shortest-path trees built for all-or-nothing
//! loading.

mod paths;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{DemandMatrix, Link, LinkId, Network, NodeId};

pub(crate) use paths::shortest_path_tree;

/// Origins above this count are swept on the rayon pool.
const PARALLEL_ORIGINS: usize = 64;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("negative flow {0}")]
    NegativeFlow(f64),
    #[error("OD pairs without a path: {0:?}")]
    Disconnected(Vec<(NodeId, NodeId)>),
    #[error("non-finite objective (check link capacities)")]
    NonFinite,
    #[error("flow vector does not match the network")]
    FlowMismatch,
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("demand conservation violated at origin {origin}: {loaded} loaded, {expected} expected")]
    Conservation { origin: NodeId, loaded: f64, expected: f64 },
    #[error("objective increased from {before} to {after} at iteration {iteration}")]
    ObjectiveIncreased { iteration: usize, before: f64, after: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub gap_tolerance: f64,
    pub max_iterations: usize,
    pub line_search_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { gap_tolerance: 1e-4, max_iterations: 5000, line_search_tolerance: 1e-8 }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.gap_tolerance > 0.0 && self.gap_tolerance.is_finite()) {
            return Err(SolveError::InvalidOptions("gap_tolerance must be positive".into()));
        }
        if !(self.line_search_tolerance > 0.0 && self.line_search_tolerance.is_finite()) {
            return Err(SolveError::InvalidOptions("line_search_tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(SolveError::InvalidOptions("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-link flows aligned with the surviving links of one network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowVector {
    ids: Vec<LinkId>,
    values: Vec<f64>,
}

impl FlowVector {
    pub fn zeros(network: &Network) -> Self {
        Self { ids: network.link_ids().to_vec(), values: vec![0.0; network.link_count()] }
    }

    /// `values` follow `network.link_ids()` order.
    pub fn from_values(network: &Network, values: Vec<f64>) -> Result<Self, SolveError> {
        if values.len() != network.link_count() {
            return Err(SolveError::FlowMismatch);
        }
        if let Some(&v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(SolveError::NegativeFlow(v));
        }
        Ok(Self { ids: network.link_ids().to_vec(), values })
    }

    pub fn get(&self, id: LinkId) -> Option<f64> {
        self.ids.binary_search(&id).ok().map(|i| self.values[i])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (LinkId, f64)> + '_ {
        self.ids.iter().copied().zip(self.values.iter().copied())
    }

    /// `(1 - step) * self + step * other`.
    pub fn combine(&self, other: &FlowVector, step: f64) -> FlowVector {
        let values = self.values.iter().zip(&other.values).map(|(f, y)| f + step * (y - f)).collect();
        FlowVector { ids: self.ids.clone(), values }
    }

    fn check(&self, network: &Network) -> Result<(), SolveError> {
        if self.ids != network.link_ids() {
            return Err(SolveError::FlowMismatch);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub flows: FlowVector,
    pub relative_gap: f64,
    pub iterations: usize,
    pub ttt: f64,
    pub converged: bool,
    /// Beckmann objective after initialization and after every update.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

impl Equilibrium {
    /// One JSON object on a single line.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("equilibrium serializes")
    }
}

/// BPR travel time on `link` at `flow`.
pub fn bpr_cost(link: &Link, flow: f64) -> Result<f64, SolveError> {
    if flow < 0.0 || flow.is_nan() {
        return Err(SolveError::NegativeFlow(flow));
    }
    Ok(link.cost(flow))
}

/// Sum over links of the integrated cost curve.
pub fn beckmann_objective(network: &Network, flows: &FlowVector) -> Result<f64, SolveError> {
    flows.check(network)?;
    Ok(objective(network.link_slice(), flows.values()))
}

pub fn total_travel_time(network: &Network, flows: &FlowVector) -> Result<f64, SolveError> {
    flows.check(network)?;
    Ok(total_cost(network.link_slice(), flows.values()))
}

/// Link costs at `flows`, aligned with `network.link_ids()`.
pub fn link_costs(network: &Network, flows: &FlowVector) -> Result<Vec<f64>, SolveError> {
    flows.check(network)?;
    Ok(costs_at(network.link_slice(), flows.values()))
}

/// Loads every OD demand onto its shortest path under `costs` (aligned with
/// `network.link_ids()`).
pub fn all_or_nothing(network: &Network, costs: &[f64], demand: &DemandMatrix) -> Result<FlowVector, SolveError> {
    if costs.len() != network.link_count() {
        return Err(SolveError::FlowMismatch);
    }
    let od = OdTable::new(network, demand)?;
    let values = od.assign(network, costs)?;
    Ok(FlowVector { ids: network.link_ids().to_vec(), values })
}

/// Step along `auxiliary - current` minimizing the Beckmann objective, by
/// bisection on the directional derivative.
pub fn line_search(
    network: &Network,
    current: &FlowVector,
    auxiliary: &FlowVector,
    tolerance: f64,
) -> Result<f64, SolveError> {
    current.check(network)?;
    auxiliary.check(network)?;
    Ok(bisect_step(network.link_slice(), current.values(), auxiliary.values(), tolerance))
}

/// `(sum f*c(f) - sum y*c(f)) / sum y*c(f)` with `y` the all-or-nothing
/// assignment at the costs of `flows`.
pub fn relative_gap(network: &Network, flows: &FlowVector, demand: &DemandMatrix) -> Result<f64, SolveError> {
    flows.check(network)?;
    let costs = costs_at(network.link_slice(), flows.values());
    let od = OdTable::new(network, demand)?;
    let aux = od.assign(network, &costs)?;
    Ok(gap(flows.values(), &aux, &costs))
}

/// Frank-Wolfe until the relative gap reaches `opts.gap_tolerance` or the
/// iteration budget runs out.
pub fn solve_ue(network: &Network, demand: &DemandMatrix, opts: &SolverOptions) -> Result<Equilibrium, SolveError> {
    opts.validate()?;
    let missing = network.connectivity_check(demand);
    if !missing.is_empty() {
        return Err(SolveError::Disconnected(missing));
    }
    let links = network.link_slice();
    let od = OdTable::new(network, demand)?;

    let free_flow: Vec<f64> = links.iter().map(|l| l.fft).collect();
    let mut flows = od.assign(network, &free_flow)?;
    let mut obj = objective(links, &flows);
    if !obj.is_finite() {
        return Err(SolveError::NonFinite);
    }
    let mut trace = vec![obj];
    let mut rel_gap = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let costs = costs_at(links, &flows);
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(SolveError::NonFinite);
        }
        let aux = od.assign(network, &costs)?;
        rel_gap = gap(&flows, &aux, &costs);
        if rel_gap <= opts.gap_tolerance {
            converged = true;
            break;
        }
        if iterations == opts.max_iterations {
            break;
        }
        let step = bisect_step(links, &flows, &aux, opts.line_search_tolerance);
        for (f, y) in flows.iter_mut().zip(&aux) {
            *f += step * (y - *f);
        }
        let next = objective(links, &flows);
        if !next.is_finite() {
            return Err(SolveError::NonFinite);
        }
        if next > obj + 1e-12 * obj.abs().max(1.0) {
            return Err(SolveError::ObjectiveIncreased { iteration: iterations, before: obj, after: next });
        }
        obj = next;
        trace.push(obj);
    }

    let ttt = total_cost(links, &flows);
    Ok(Equilibrium {
        flows: FlowVector { ids: network.link_ids().to_vec(), values: flows },
        relative_gap: rel_gap,
        iterations,
        ttt,
        converged,
        objective_trace: trace,
    })
}

fn costs_at(links: &[Link], flows: &[f64]) -> Vec<f64> {
    links.iter().zip(flows).map(|(l, &f)| l.cost(f)).collect()
}

fn objective(links: &[Link], flows: &[f64]) -> f64 {
    links.iter().zip(flows).map(|(l, &f)| l.cost_integral(f)).sum()
}

fn total_cost(links: &[Link], flows: &[f64]) -> f64 {
    links.iter().zip(flows).map(|(l, &f)| f * l.cost(f)).sum()
}

fn gap(flows: &[f64], aux: &[f64], costs: &[f64]) -> f64 {
    let current: f64 = flows.iter().zip(costs).map(|(f, c)| f * c).sum();
    let shortest: f64 = aux.iter().zip(costs).map(|(y, c)| y * c).sum();
    if shortest <= 0.0 {
        return 0.0;
    }
    ((current - shortest) / shortest).max(0.0)
}

fn directional_derivative(links: &[Link], f: &[f64], y: &[f64], step: f64) -> f64 {
    links
        .iter()
        .zip(f.iter().zip(y))
        .map(|(l, (&fi, &yi))| {
            let d = yi - fi;
            if d == 0.0 {
                0.0
            } else {
                d * l.cost((fi + step * d).max(0.0))
            }
        })
        .sum()
}

/// Returns the largest point known to have a negative derivative, so the
/// objective never increases.
fn bisect_step(links: &[Link], f: &[f64], y: &[f64], tolerance: f64) -> f64 {
    if directional_derivative(links, f, y, 0.0) >= 0.0 {
        return 0.0;
    }
    if directional_derivative(links, f, y, 1.0) <= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..64 {
        if hi - lo <= tolerance {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let g = directional_derivative(links, f, y, mid);
        if g == 0.0 {
            return mid;
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// OD demand keyed by dense node indices.
struct OdTable {
    rows: Vec<(usize, NodeId, f64, Vec<(usize, f64)>)>,
}

impl OdTable {
    fn new(network: &Network, demand: &DemandMatrix) -> Result<Self, SolveError> {
        let mut rows = Vec::new();
        for (origin, dests) in demand.by_origin() {
            let o = network.node_index(origin).ok_or_else(|| disconnected_all(origin, &dests))?;
            let mut idx = Vec::with_capacity(dests.len());
            for &(d, v) in &dests {
                let di = network.node_index(d).ok_or(SolveError::Disconnected(vec![(origin, d)]))?;
                idx.push((di, v));
            }
            let total = dests.iter().map(|(_, v)| v).sum();
            rows.push((o, origin, total, idx));
        }
        Ok(Self { rows })
    }

    fn assign_origin(
        &self,
        network: &Network,
        costs: &[f64],
        row: usize,
        flows: &mut [f64],
    ) -> Result<(), SolveError> {
        let (o, origin, total, ref dests) = self.rows[row];
        let tree = shortest_path_tree(network, costs, o);
        let loaded = paths::load_tree(network, &tree, o, dests, flows).map_err(|d| {
            SolveError::Disconnected(vec![(origin, network.nodes()[d])])
        })?;
        if (loaded - total).abs() > 1e-9 * total.max(1.0) {
            return Err(SolveError::Conservation { origin, loaded, expected: total });
        }
        Ok(())
    }

    fn assign(&self, network: &Network, costs: &[f64]) -> Result<Vec<f64>, SolveError> {
        let m = network.link_count();
        if self.rows.len() < PARALLEL_ORIGINS {
            let mut flows = vec![0.0; m];
            for row in 0..self.rows.len() {
                self.assign_origin(network, costs, row, &mut flows)?;
            }
            return Ok(flows);
        }
        let parts: Vec<Vec<f64>> = (0..self.rows.len())
            .into_par_iter()
            .map(|row| {
                let mut part = vec![0.0; m];
                self.assign_origin(network, costs, row, &mut part).map(|_| part)
            })
            .collect::<Result<_, _>>()?;
        let mut flows = vec![0.0; m];
        for part in parts {
            for (f, p) in flows.iter_mut().zip(part) {
                *f += p;
            }
        }
        Ok(flows)
    }
}

fn disconnected_all(origin: NodeId, dests: &[(NodeId, f64)]) -> SolveError {
    SolveError::Disconnected(dests.iter().map(|&(d, _)| (origin, d)).collect())
}

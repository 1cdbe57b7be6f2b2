//! Subset and superset lookups over already-evaluated closures.
//!
//! These rely on the empirical observation that closing more roads never
//! lowers total travel time: a known subset bounds a query from below, a
//! known superset from above.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{ClosureConfig, LinkId};
use crate::scenario::{Dataset, LabeledScenario};

#[derive(Debug, Error, PartialEq)]
pub enum HeuristicError {
    #[error("index has no baseline (empty-closure) value")]
    MissingBaseline,
}

/// The three lookup heuristics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heuristic {
    /// Highest TTT among known subsets.
    CostliestSubset,
    /// Costliest subset plus the marginal effect of the remaining links.
    AdditiveSubset,
    /// Lowest TTT among known supersets.
    CheapestSuperset,
}

impl Heuristic {
    pub const ALL: [Heuristic; 3] =
        [Heuristic::CostliestSubset, Heuristic::AdditiveSubset, Heuristic::CheapestSuperset];

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::CostliestSubset => "CostliestSubset",
            Heuristic::AdditiveSubset => "AdditiveSubset",
            Heuristic::CheapestSuperset => "CheapestSuperset",
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Evaluated closures with a per-link inverted index.
#[derive(Clone, Debug, Default)]
pub struct SubsetIndex {
    baseline: Option<f64>,
    entries: Vec<(ClosureConfig, f64)>,
    lookup: HashMap<ClosureConfig, usize>,
    by_link: HashMap<LinkId, Vec<usize>>,
}

impl SubsetIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_baseline(ttt: f64) -> Self {
        Self { baseline: Some(ttt), ..Self::default() }
    }

    /// Baseline plus every scenario of `dataset`, in order.
    pub fn from_dataset(dataset: &Dataset) -> Self {
        let mut index = Self::with_baseline(dataset.baseline_ttt);
        for s in &dataset.scenarios {
            index.insert(&s.config, s.ttt);
        }
        index
    }

    pub fn baseline(&self) -> Option<f64> {
        self.baseline
    }

    /// Number of non-empty configurations indexed.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, config: &ClosureConfig) -> Option<f64> {
        if config.is_empty() {
            return self.baseline;
        }
        self.lookup.get(config).map(|&i| self.entries[i].1)
    }

    /// Entries containing `link`.
    pub fn entries_with(&self, link: LinkId) -> &[usize] {
        self.by_link.get(&link).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn entry(&self, id: usize) -> (&ClosureConfig, f64) {
        let (c, y) = &self.entries[id];
        (c, *y)
    }

    /// Adds a labeled scenario. A config already present keeps its first
    /// label; the empty config sets the baseline.
    pub fn insert_scenario(&mut self, scenario: &LabeledScenario) {
        self.insert(&scenario.config, scenario.ttt);
    }

    pub fn insert(&mut self, config: &ClosureConfig, ttt: f64) {
        if config.is_empty() {
            self.baseline.get_or_insert(ttt);
            return;
        }
        if self.lookup.contains_key(config) {
            return;
        }
        let id = self.entries.len();
        self.entries.push((config.clone(), ttt));
        self.lookup.insert(config.clone(), id);
        for &link in config.ids() {
            self.by_link.entry(link).or_default().push(id);
        }
    }

    /// Indexed subsets of `query` other than the empty set. Only entries
    /// sharing a link with the query are touched.
    pub fn subsets_of(&self, query: &ClosureConfig) -> Vec<usize> {
        let mut hits: Vec<usize> = query.ids().iter().flat_map(|&l| self.entries_with(l).iter().copied()).collect();
        hits.sort_unstable();
        let mut out = Vec::new();
        let mut i = 0;
        while i < hits.len() {
            let id = hits[i];
            let mut j = i;
            while j < hits.len() && hits[j] == id {
                j += 1;
            }
            // contained-link count equals size exactly for subsets
            if j - i == self.entries[id].0.len() {
                out.push(id);
            }
            i = j;
        }
        out
    }

    /// Indexed supersets of `query`, excluding the baseline.
    pub fn supersets_of(&self, query: &ClosureConfig) -> Vec<usize> {
        if query.is_empty() {
            return (0..self.entries.len()).collect();
        }
        let shortest = query.ids().iter().map(|&l| self.entries_with(l)).min_by_key(|s| s.len()).unwrap_or(&[]);
        shortest.iter().copied().filter(|&id| query.is_subset_of(&self.entries[id].0)).collect()
    }

    /// The subset maximizing TTT; ties go to the smaller set, then the
    /// lexicographically first.
    pub fn argmax_subset(&self, query: &ClosureConfig) -> Result<(ClosureConfig, f64), HeuristicError> {
        let base = self.baseline.ok_or(HeuristicError::MissingBaseline)?;
        let mut best: (Option<usize>, f64) = (None, base);
        for id in self.subsets_of(query) {
            let (cfg, y) = &self.entries[id];
            let better = match best.0 {
                _ if *y > best.1 => true,
                _ if *y < best.1 => false,
                None => false,
                Some(cur) => {
                    let cur_cfg = &self.entries[cur].0;
                    (cfg.len(), cfg.ids()) < (cur_cfg.len(), cur_cfg.ids())
                }
            };
            if better {
                best = (Some(id), *y);
            }
        }
        Ok(match best.0 {
            Some(id) => (self.entries[id].0.clone(), best.1),
            None => (ClosureConfig::empty(), base),
        })
    }

    /// Costliest subset: max TTT over indexed subsets, the baseline when
    /// none is known.
    pub fn csh(&self, query: &ClosureConfig) -> Result<f64, HeuristicError> {
        self.argmax_subset(query).map(|(_, y)| y)
    }

    /// Costliest additive subset: `csh(A*) + csh(query \ A*) - y(∅)`.
    pub fn cash(&self, query: &ClosureConfig) -> Result<f64, HeuristicError> {
        let base = self.baseline.ok_or(HeuristicError::MissingBaseline)?;
        let (best, y_best) = self.argmax_subset(query)?;
        let rest = query.difference(&best);
        Ok(y_best + (self.csh(&rest)? - base))
    }

    /// Cheapest superset: min TTT over indexed supersets, `None` when no
    /// superset is known.
    pub fn csuph(&self, query: &ClosureConfig) -> Result<Option<f64>, HeuristicError> {
        let base = self.baseline.ok_or(HeuristicError::MissingBaseline)?;
        let mut best = self.supersets_of(query).into_iter().map(|id| self.entries[id].1).reduce(f64::min);
        if query.is_empty() {
            best = Some(best.map_or(base, |b| b.min(base)));
        }
        Ok(best)
    }

    pub fn estimate(&self, heuristic: Heuristic, query: &ClosureConfig) -> Result<Option<f64>, HeuristicError> {
        match heuristic {
            Heuristic::CostliestSubset => self.csh(query).map(Some),
            Heuristic::AdditiveSubset => self.cash(query).map(Some),
            Heuristic::CheapestSuperset => self.csuph(query),
        }
    }
}

//! Feature encodings of closure configurations, correlation screening and
//! wrapper-based feature selection.

use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heuristics::SubsetIndex;
use crate::network::{ClosureConfig, Network};
use crate::scenario::Dataset;
use crate::tap::Equilibrium;

pub mod centrality;
mod select;

pub use select::{sequential_select, Direction};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("link {id} out of range for {count} projects")]
    OutOfRange { id: usize, count: usize },
    #[error("unknown engineered feature `{0}`")]
    UnknownFeature(String),
    #[error("duplicate column name `{0}`")]
    DuplicateName(String),
    #[error("row has {got} values, expected {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("non-finite value in column `{column}`")]
    NonFinite { column: String },
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("{targets} targets for {rows} rows")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("target has zero variance")]
    ConstantTarget,
    #[error("log transform needs positive targets")]
    NonPositiveTarget,
    #[error("CSH column requested without a heuristic index")]
    MissingIndex,
    #[error("invalid selection request: {0}")]
    InvalidSelection(String),
    #[error("every candidate feature set gives a singular fit")]
    DegenerateDesign,
    #[error("baseline statistics cover {stats} links, network has {network}")]
    StatsMismatch { stats: usize, network: usize },
    #[error(transparent)]
    Heuristic(#[from] crate::heuristics::HeuristicError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn check_range(config: &ClosureConfig, count: usize) -> Result<(), FeatureError> {
    match config.ids().iter().find(|id| id.0 >= count) {
        Some(id) => Err(FeatureError::OutOfRange { id: id.0, count }),
        None => Ok(()),
    }
}

/// Indicator of closed links, one position per link id.
pub fn one_hot(config: &ClosureConfig, project_count: usize) -> Result<Vec<f64>, FeatureError> {
    check_range(config, project_count)?;
    let mut v = vec![0.0; project_count];
    for id in config.ids() {
        v[id.0] = 1.0;
    }
    Ok(v)
}

/// Position of pair `(i, j)`, `i < j`, in the canonical pair ordering.
fn pair_position(i: usize, j: usize, n: usize) -> usize {
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Indicator of closed link pairs `(i, j)`, `i < j`, in row-major order.
pub fn pairwise_encode(config: &ClosureConfig, project_count: usize) -> Result<Vec<f64>, FeatureError> {
    check_range(config, project_count)?;
    let n = project_count;
    let mut v = vec![0.0; n * n.saturating_sub(1) / 2];
    let ids = config.ids();
    for (a, i) in ids.iter().enumerate() {
        for j in &ids[a + 1..] {
            v[pair_position(i.0, j.0, n)] = 1.0;
        }
    }
    Ok(v)
}

/// Per-link quantities of the baseline equilibrium, indexed by link id.
/// Absent ids carry zeros.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineStats {
    pub baseline_ttt: f64,
    pub flow: Vec<f64>,
    pub cost: Vec<f64>,
    pub betweenness: Vec<f64>,
    pub closeness: Vec<f64>,
    pub fft: Vec<f64>,
    pub capacity: Vec<f64>,
}

impl BaselineStats {
    /// Derives statistics from the baseline equilibrium of `network`.
    pub fn compute(network: &Network, baseline: &Equilibrium) -> Result<Self, FeatureError> {
        let values = baseline.flows.values();
        if values.len() != network.link_count() {
            return Err(FeatureError::StatsMismatch { stats: values.len(), network: network.link_count() });
        }
        let n = network.id_space();
        let links = network.link_slice();
        let weights: Vec<f64> = links.iter().map(|l| l.fft).collect();
        let edge_bc = centrality::edge_betweenness(network, &weights);
        let node_cl = centrality::closeness(network, &weights);
        let mut stats = BaselineStats {
            baseline_ttt: baseline.ttt,
            flow: vec![0.0; n],
            cost: vec![0.0; n],
            betweenness: vec![0.0; n],
            closeness: vec![0.0; n],
            fft: vec![0.0; n],
            capacity: vec![0.0; n],
        };
        for (pos, (id, link)) in network.links().enumerate() {
            let i = id.0;
            stats.flow[i] = values[pos];
            stats.cost[i] = link.cost(values[pos]);
            stats.betweenness[i] = edge_bc[pos];
            stats.closeness[i] = 0.5 * (node_cl[network.tail_index(pos)] + node_cl[network.head_index(pos)]);
            stats.fft[i] = link.fft;
            stats.capacity[i] = link.capacity;
        }
        Ok(stats)
    }

    pub fn project_count(&self) -> usize {
        self.flow.len()
    }

    fn quantity(&self, q: Quantity, i: usize) -> f64 {
        match q {
            Quantity::DisruptedFlow => self.flow[i],
            Quantity::BaselineCost => self.cost[i],
            Quantity::NaiveImpact => self.flow[i] * self.cost[i],
            Quantity::Betweenness => self.betweenness[i],
            Quantity::Closeness => self.closeness[i],
            Quantity::Fft => self.fft[i],
            Quantity::Capacity => self.capacity[i],
        }
    }
}

#[derive(Clone, Copy)]
enum Quantity {
    DisruptedFlow,
    BaselineCost,
    NaiveImpact,
    Betweenness,
    Closeness,
    Fft,
    Capacity,
}

const QUANTITIES: [Quantity; 7] = [
    Quantity::DisruptedFlow,
    Quantity::BaselineCost,
    Quantity::NaiveImpact,
    Quantity::Betweenness,
    Quantity::Closeness,
    Quantity::Fft,
    Quantity::Capacity,
];

/// Names of the engineered features, in evaluation order.
pub const ENGINEERED_FEATURES: [&str; 22] = [
    "disrupted_flow_sum",
    "disrupted_flow_max",
    "disrupted_flow_mean",
    "baseline_cost_sum",
    "baseline_cost_max",
    "baseline_cost_mean",
    "naive_impact_sum",
    "naive_impact_max",
    "naive_impact_mean",
    "betweenness_sum",
    "betweenness_max",
    "betweenness_mean",
    "closeness_sum",
    "closeness_max",
    "closeness_mean",
    "fft_sum",
    "fft_max",
    "fft_mean",
    "capacity_sum",
    "capacity_max",
    "capacity_mean",
    "set_size",
];

fn engineered_values(config: &ClosureConfig, stats: &BaselineStats) -> [f64; 22] {
    let mut out = [0.0; 22];
    let k = config.len();
    for (qi, &q) in QUANTITIES.iter().enumerate() {
        if k == 0 {
            continue;
        }
        let mut sum = 0.0;
        let mut max = f64::NEG_INFINITY;
        for id in config.ids() {
            let v = stats.quantity(q, id.0);
            sum += v;
            max = max.max(v);
        }
        out[3 * qi] = sum;
        out[3 * qi + 1] = max;
        out[3 * qi + 2] = sum / k as f64;
    }
    out[21] = k as f64;
    out
}

/// Sum, max and mean over closed links of each baseline quantity, plus the
/// set size. Every feature is 0 for the empty configuration.
pub fn engineered_features(
    config: &ClosureConfig,
    stats: &BaselineStats,
) -> Result<Vec<(&'static str, f64)>, FeatureError> {
    check_range(config, stats.project_count())?;
    Ok(ENGINEERED_FEATURES.iter().copied().zip(engineered_values(config, stats)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    OneHot,
    Pairwise,
    Engineered,
    /// One-hot block followed by engineered features.
    Combined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub representation: Representation,
    /// Engineered features to keep; all of them when absent.
    #[serde(default)]
    pub selected: Option<Vec<String>>,
    #[serde(default)]
    pub include_csh: bool,
}

impl FeatureSpec {
    pub fn new(representation: Representation) -> Self {
        Self { representation, selected: None, include_csh: false }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if let Some(sel) = &self.selected {
            let mut seen = HashSet::new();
            for name in sel {
                if !ENGINEERED_FEATURES.contains(&name.as_str()) {
                    return Err(FeatureError::UnknownFeature(name.clone()));
                }
                if !seen.insert(name) {
                    return Err(FeatureError::DuplicateName(name.clone()));
                }
            }
        }
        Ok(())
    }
}

pub const CSH_COLUMN: &str = "csh";

/// Row encoder for a fixed spec and baseline.
#[derive(Clone, Debug)]
pub struct FeatureBuilder<'a> {
    spec: FeatureSpec,
    stats: &'a BaselineStats,
    engineered: Vec<usize>,
    names: Vec<String>,
}

impl<'a> FeatureBuilder<'a> {
    pub fn new(spec: &FeatureSpec, stats: &'a BaselineStats) -> Result<Self, FeatureError> {
        spec.validate()?;
        let n = stats.project_count();
        let engineered: Vec<usize> = match &spec.selected {
            Some(sel) => sel.iter().map(|s| ENGINEERED_FEATURES.iter().position(|f| f == s).unwrap()).collect(),
            None => (0..ENGINEERED_FEATURES.len()).collect(),
        };
        let mut names = Vec::new();
        let rep = spec.representation;
        if rep != Representation::Engineered {
            names.extend((0..n).map(|i| format!("closed_{i}")));
        }
        if rep == Representation::Pairwise {
            for i in 0..n {
                names.extend((i + 1..n).map(|j| format!("pair_{i}_{j}")));
            }
        }
        if matches!(rep, Representation::Engineered | Representation::Combined) {
            names.extend(engineered.iter().map(|&e| ENGINEERED_FEATURES[e].to_string()));
        }
        if spec.include_csh {
            names.push(CSH_COLUMN.to_string());
        }
        Ok(Self { spec: spec.clone(), stats, engineered, names })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn needs_csh(&self) -> bool {
        self.spec.include_csh
    }

    /// Appends the encoding of `config` to `out`. `csh` is required exactly
    /// when the spec includes the CSH column.
    pub fn encode_into(&self, config: &ClosureConfig, csh: Option<f64>, out: &mut Vec<f64>) -> Result<(), FeatureError> {
        let n = self.stats.project_count();
        check_range(config, n)?;
        let rep = self.spec.representation;
        if rep != Representation::Engineered {
            let start = out.len();
            out.resize(start + n, 0.0);
            for id in config.ids() {
                out[start + id.0] = 1.0;
            }
        }
        if rep == Representation::Pairwise {
            out.extend(pairwise_encode(config, n)?);
        }
        if matches!(rep, Representation::Engineered | Representation::Combined) {
            let all = engineered_values(config, self.stats);
            out.extend(self.engineered.iter().map(|&e| all[e]));
        }
        if self.spec.include_csh {
            out.push(csh.ok_or(FeatureError::MissingIndex)?);
        }
        Ok(())
    }

    pub fn encode(&self, config: &ClosureConfig, csh: Option<f64>) -> Result<Vec<f64>, FeatureError> {
        let mut out = Vec::with_capacity(self.width());
        self.encode_into(config, csh, &mut out)?;
        Ok(out)
    }
}

/// Encodes every scenario of `dataset`. With the CSH column, row `i` is
/// scored against `index` plus the scenarios before it.
pub fn build_feature_matrix(
    dataset: &Dataset,
    spec: &FeatureSpec,
    stats: &BaselineStats,
    index: Option<&SubsetIndex>,
) -> Result<FeatureMatrix, FeatureError> {
    let builder = FeatureBuilder::new(spec, stats)?;
    let mut running = match (spec.include_csh, index) {
        (true, None) => return Err(FeatureError::MissingIndex),
        (true, Some(i)) => Some(i.clone()),
        (false, _) => None,
    };
    let mut matrix = FeatureMatrix::new(builder.names().to_vec())?;
    let mut row = Vec::with_capacity(builder.width());
    for s in &dataset.scenarios {
        let csh = running.as_ref().map(|idx| idx.csh(&s.config)).transpose()?;
        row.clear();
        builder.encode_into(&s.config, csh, &mut row)?;
        matrix.push_row(&row)?;
        if let Some(idx) = running.as_mut() {
            idx.insert_scenario(s);
        }
    }
    Ok(matrix)
}

/// Dense row-major matrix with named columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    names: Vec<String>,
    data: Vec<f64>,
    rows: usize,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>) -> Result<Self, FeatureError> {
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(FeatureError::DuplicateName(n.clone()));
            }
        }
        Ok(Self { names, data: Vec::new(), rows: 0 })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self, FeatureError> {
        let mut m = Self::new(names)?;
        for r in rows {
            m.push_row(r)?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<(), FeatureError> {
        if row.len() != self.names.len() {
            return Err(FeatureError::WidthMismatch { expected: self.names.len(), got: row.len() });
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite { column: self.names[j].clone() });
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.ncols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Row-major values.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, rows: impl IntoIterator<Item = usize>) -> FeatureMatrix {
        let mut out = FeatureMatrix { names: self.names.clone(), data: Vec::new(), rows: 0 };
        for i in rows {
            out.data.extend_from_slice(self.row(i));
            out.rows += 1;
        }
        out
    }

    pub fn select_columns(&self, names: &[String]) -> Result<FeatureMatrix, FeatureError> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| FeatureError::UnknownFeature(n.clone())))
            .collect::<Result<_, _>>()?;
        let mut out = FeatureMatrix::new(names.to_vec())?;
        for r in self.rows() {
            out.data.extend(idx.iter().map(|&j| r[j]));
            out.rows += 1;
        }
        Ok(out)
    }

    /// CSV with a header row of column names.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(&self.names).map_err(csv_io)?;
        for r in self.rows() {
            w.write_record(r.iter().map(|v| v.to_string())).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> FeatureError {
    FeatureError::Io(e.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetTransform {
    Identity,
    Log,
}

impl TargetTransform {
    pub(crate) fn apply(self, y: &[f64]) -> Result<Vec<f64>, FeatureError> {
        match self {
            TargetTransform::Identity => Ok(y.to_vec()),
            TargetTransform::Log => {
                if y.iter().any(|v| !(*v > 0.0)) {
                    return Err(FeatureError::NonPositiveTarget);
                }
                Ok(y.iter().map(|v| v.ln()).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub name: String,
    pub r: f64,
    /// The feature is constant, so `r` is reported as 0.
    pub degenerate: bool,
}

/// Pearson correlation of each column with the (transformed) targets.
pub fn pearson_screen(
    matrix: &FeatureMatrix,
    targets: &[f64],
    transform: TargetTransform,
) -> Result<Vec<Correlation>, FeatureError> {
    let n = matrix.nrows();
    if n < 3 {
        return Err(FeatureError::TooFewRows { needed: 3, got: n });
    }
    if targets.len() != n {
        return Err(FeatureError::LengthMismatch { rows: n, targets: targets.len() });
    }
    let y = transform.apply(targets)?;
    let (my, sy) = center_scale(&y);
    if sy == 0.0 {
        return Err(FeatureError::ConstantTarget);
    }
    Ok((0..matrix.ncols())
        .map(|j| {
            let x = matrix.column(j);
            let (mx, sx) = center_scale(&x);
            let name = matrix.names()[j].clone();
            if sx == 0.0 {
                return Correlation { name, r: 0.0, degenerate: true };
            }
            let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
            Correlation { name, r: (cov / (sx * sy)).clamp(-1.0, 1.0), degenerate: false }
        })
        .collect())
}

/// Mean and root of the sum of squared deviations.
fn center_scale(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    (m, ss.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Link;
    use crate::scenario::LabeledScenario;
    use crate::tap::{solve_ue, SolverOptions};

    fn cfg(ids: &[usize]) -> ClosureConfig {
        ClosureConfig::from_indices(ids.iter().copied())
    }

    fn toy_stats() -> BaselineStats {
        BaselineStats {
            baseline_ttt: 100.0,
            flow: vec![10.0, 20.0, 30.0, 40.0],
            cost: vec![1.0, 2.0, 3.0, 4.0],
            betweenness: vec![1.0, 1.0, 2.0, 2.0],
            closeness: vec![0.1, 0.2, 0.3, 0.4],
            fft: vec![1.0, 1.0, 2.0, 3.0],
            capacity: vec![5.0, 6.0, 7.0, 8.0],
        }
    }

    fn named(v: &[(&'static str, f64)], name: &str) -> f64 {
        v.iter().find(|(n, _)| *n == name).unwrap().1
    }

    #[test]
    fn one_hot_examples() {
        assert_eq!(one_hot(&cfg(&[2]), 4).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(one_hot(&cfg(&[]), 3).unwrap(), vec![0.0; 3]);
        assert_eq!(one_hot(&cfg(&[0, 3, 5]), 6).unwrap().iter().sum::<f64>(), 3.0);
        assert!(matches!(one_hot(&cfg(&[4]), 4), Err(FeatureError::OutOfRange { id: 4, count: 4 })));
    }

    #[test]
    fn pairwise_examples() {
        assert_eq!(pairwise_encode(&cfg(&[0, 1]), 3).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(pairwise_encode(&cfg(&[1, 2]), 3).unwrap(), vec![0.0, 0.0, 1.0]);
        assert!(pairwise_encode(&cfg(&[2]), 5).unwrap().iter().all(|&v| v == 0.0));
        let v = pairwise_encode(&cfg(&[0, 2, 3, 6]), 8).unwrap();
        assert_eq!(v.len(), 28);
        assert_eq!(v.iter().sum::<f64>(), 6.0);
    }

    #[test]
    fn engineered_examples() {
        let s = toy_stats();
        assert!(engineered_features(&cfg(&[]), &s).unwrap().iter().all(|(_, v)| *v == 0.0));
        let single = engineered_features(&cfg(&[2]), &s).unwrap();
        assert_eq!(named(&single, "disrupted_flow_sum"), 30.0);
        assert_eq!(named(&single, "disrupted_flow_max"), 30.0);
        assert_eq!(named(&single, "disrupted_flow_mean"), 30.0);
        assert_eq!(named(&single, "closeness_mean"), 0.3);
        let ab = engineered_features(&cfg(&[1, 3]), &s).unwrap();
        let a = engineered_features(&cfg(&[1]), &s).unwrap();
        let b = engineered_features(&cfg(&[3]), &s).unwrap();
        assert_eq!(named(&ab, "naive_impact_sum"), named(&a, "naive_impact_sum") + named(&b, "naive_impact_sum"));
        assert_eq!(named(&ab, "naive_impact_max"), 160.0);
        assert_eq!(named(&ab, "capacity_mean"), 7.0);
        assert_eq!(named(&ab, "set_size"), 2.0);
    }

    #[test]
    fn builder_widths() {
        let s = toy_stats();
        let w = |rep, sel: Option<usize>, csh| {
            let spec = FeatureSpec {
                representation: rep,
                selected: sel.map(|k| ENGINEERED_FEATURES[..k].iter().map(|s| s.to_string()).collect()),
                include_csh: csh,
            };
            FeatureBuilder::new(&spec, &s).unwrap().width()
        };
        assert_eq!(w(Representation::OneHot, None, false), 4);
        assert_eq!(w(Representation::Pairwise, None, false), 4 + 6);
        assert_eq!(w(Representation::Engineered, None, false), 22);
        assert_eq!(w(Representation::Combined, Some(12), true), 4 + 13);
        let bad = FeatureSpec { selected: Some(vec!["nope".into()]), ..FeatureSpec::new(Representation::Engineered) };
        assert!(matches!(FeatureBuilder::new(&bad, &s), Err(FeatureError::UnknownFeature(_))));
    }

    fn toy_dataset() -> Dataset {
        let scen = |ids: &[usize], ttt| LabeledScenario { config: cfg(ids), ttt, gap: 0.0, solve_time: 0.0 };
        Dataset {
            scenarios: vec![scen(&[0], 110.0), scen(&[0, 1], 130.0), scen(&[0, 1, 2], 150.0)],
            network_fingerprint: "x".into(),
            rng_seed: 0,
            baseline_ttt: 100.0,
            solver: SolverOptions::default(),
            sampler: Default::default(),
        }
    }

    #[test]
    fn matrix_csh_uses_prior_rows_only() {
        let d = toy_dataset();
        let s = toy_stats();
        let spec = FeatureSpec { include_csh: true, ..FeatureSpec::new(Representation::OneHot) };
        assert!(matches!(build_feature_matrix(&d, &spec, &s, None), Err(FeatureError::MissingIndex)));
        let m = build_feature_matrix(&d, &spec, &s, Some(&SubsetIndex::with_baseline(100.0))).unwrap();
        assert_eq!((m.nrows(), m.ncols()), (3, 5));
        assert_eq!(m.column(4), vec![100.0, 110.0, 130.0]);
        let plain = build_feature_matrix(&d, &FeatureSpec::new(Representation::OneHot), &s, None).unwrap();
        assert_eq!((plain.nrows(), plain.ncols()), (3, 4));
    }

    #[test]
    fn matrix_rejects_bad_rows() {
        let mut m = FeatureMatrix::new(vec!["a".into(), "b".into()]).unwrap();
        assert!(matches!(m.push_row(&[1.0]), Err(FeatureError::WidthMismatch { .. })));
        assert!(matches!(m.push_row(&[1.0, f64::NAN]), Err(FeatureError::NonFinite { .. })));
        assert!(FeatureMatrix::new(vec!["a".into(), "a".into()]).is_err());
        m.push_row(&[1.0, 2.5]).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n1,2.5\n");
    }

    #[test]
    fn pearson_examples() {
        let y: Vec<f64> = (1..=10).map(|i| i as f64 * 3.0).collect();
        let rows: Vec<Vec<f64>> = y.iter().map(|&v| vec![v, -v, 7.0]).collect();
        let m = FeatureMatrix::from_rows(vec!["same".into(), "neg".into(), "flat".into()], &rows).unwrap();
        let c = pearson_screen(&m, &y, TargetTransform::Identity).unwrap();
        assert!((c[0].r - 1.0).abs() < 1e-12);
        assert!((c[1].r + 1.0).abs() < 1e-12);
        assert!(c[2].degenerate && c[2].r == 0.0);
        let short = m.select_rows(0..2);
        assert!(matches!(pearson_screen(&short, &y[..2], TargetTransform::Log), Err(FeatureError::TooFewRows { .. })));
    }

    #[test]
    fn stats_from_equilibrium() {
        let links = vec![Link::new(1, 2, 2.0, 10.0), Link::new(2, 3, 3.0, 10.0)];
        let net = Network::new(vec![1, 2, 3], links).unwrap();
        let mut demand = crate::network::DemandMatrix::new();
        demand.insert(1, 3, 5.0).unwrap();
        let eq = solve_ue(&net, &demand, &SolverOptions::default()).unwrap();
        let s = BaselineStats::compute(&net, &eq).unwrap();
        assert_eq!(s.flow, vec![5.0, 5.0]);
        assert_eq!(s.betweenness, vec![2.0, 2.0]);
        assert!((s.cost[0] - net.link_slice()[0].cost(5.0)).abs() < 1e-12);
        assert_eq!(s.fft, vec![2.0, 3.0]);
    }
}

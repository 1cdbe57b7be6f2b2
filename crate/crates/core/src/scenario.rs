//! Closure sampling, equilibrium labeling, and JSON Lines datasets.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{fingerprint, ClosureConfig, DemandMatrix, Network, NetworkError, NodeId};
use crate::tap::{solve_ue, SolveError, SolverOptions};

pub const DATASET_FORMAT: &str = "tap-surrogate/dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid size range [{min}, {max}] for {project_count} projects")]
    InvalidRange { min: usize, max: usize, project_count: usize },
    #[error("n must be ≥ 1")]
    EmptyRequest,
    #[error("could not find {wanted} unique feasible configurations in {draws} draws ({accepted} accepted)")]
    Exhausted { wanted: usize, accepted: usize, draws: usize },
    #[error("baseline network is not solvable: {0}")]
    Baseline(String),
    #[error("dataset fingerprint {found} does not match network fingerprint {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("dataset line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("workers must be at least 1")]
    NoWorkers,
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One labeled closure. Serialized as
/// `{"closed":[ids],"ttt":..,"gap":..,"solve_time":..}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledScenario {
    #[serde(rename = "closed")]
    pub config: ClosureConfig,
    pub ttt: f64,
    pub gap: f64,
    pub solve_time: f64,
}

/// Outcome of labeling one configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum LabelOutcome {
    Labeled(LabeledScenario),
    /// The closure severs these OD pairs.
    Infeasible(Vec<(NodeId, NodeId)>),
    /// Iteration budget exhausted above the gap tolerance.
    NotConverged { gap: f64 },
}

impl LabelOutcome {
    pub fn labeled(self) -> Option<LabeledScenario> {
        match self {
            LabelOutcome::Labeled(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub seed: u64,
    pub size_min: usize,
    pub size_max: usize,
    /// Draw budget per requested scenario before giving up.
    pub max_draws_per_scenario: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { seed: 0, size_min: 1, size_max: 10, max_draws_per_scenario: 50 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerateOptions {
    pub workers: usize,
    /// When false, `solve_time` is written as 0 so files are byte-stable.
    pub record_timings: bool,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self { workers: 1, record_timings: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub fingerprint: String,
    pub seed: u64,
    pub baseline_ttt: f64,
    pub solver: SolverOptions,
    pub sampler: SamplerConfig,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub scenarios: Vec<LabeledScenario>,
    pub network_fingerprint: String,
    pub rng_seed: u64,
    /// Equilibrium TTT of the unclosed network.
    pub baseline_ttt: f64,
    pub solver: SolverOptions,
    pub sampler: SamplerConfig,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.ttt).collect()
    }

    pub fn configs(&self) -> Vec<ClosureConfig> {
        self.scenarios.iter().map(|s| s.config.clone()).collect()
    }

    /// First `n` scenarios with the same provenance.
    pub fn truncated(&self, n: usize) -> Dataset {
        let mut out = self.clone();
        out.scenarios.truncate(n);
        out
    }

    fn header(&self) -> DatasetHeader {
        DatasetHeader {
            format: DATASET_FORMAT.to_string(),
            version: DATASET_VERSION,
            fingerprint: self.network_fingerprint.clone(),
            seed: self.rng_seed,
            baseline_ttt: self.baseline_ttt,
            solver: self.solver,
            sampler: self.sampler,
            count: self.scenarios.len(),
        }
    }
}

/// Subset size uniform on `[min, max]`, then links uniform without
/// replacement.
pub fn sample_closure_config<R: Rng + ?Sized>(
    rng: &mut R,
    project_count: usize,
    size_range: (usize, usize),
) -> Result<ClosureConfig, ScenarioError> {
    let (min, max) = size_range;
    if min > max || max > project_count {
        return Err(ScenarioError::InvalidRange { min, max, project_count });
    }
    let size = rng.random_range(min..=max);
    Ok(ClosureConfig::from_indices(sample(rng, project_count, size).into_iter()))
}

/// Applies the closure, checks connectivity, and solves for equilibrium.
pub fn label_scenario(
    network: &Network,
    demand: &DemandMatrix,
    config: &ClosureConfig,
    opts: &SolverOptions,
) -> Result<LabelOutcome, ScenarioError> {
    let start = Instant::now();
    let closed = network.apply_closures(config)?;
    let missing = closed.connectivity_check(demand);
    if !missing.is_empty() {
        return Ok(LabelOutcome::Infeasible(missing));
    }
    let eq = solve_ue(&closed, demand, opts)?;
    if !eq.converged {
        return Ok(LabelOutcome::NotConverged { gap: eq.relative_gap });
    }
    Ok(LabelOutcome::Labeled(LabeledScenario {
        config: config.clone(),
        ttt: eq.ttt,
        gap: eq.relative_gap,
        solve_time: start.elapsed().as_secs_f64(),
    }))
}

/// Draws and labels closures until `n` unique feasible scenarios are found.
///
/// Candidates come from one seeded stream and are accepted strictly in draw
/// order, so the result does not depend on `workers`.
pub fn generate_dataset(
    network: &Network,
    demand: &DemandMatrix,
    n: usize,
    sampler: &SamplerConfig,
    opts: &SolverOptions,
    gen: &GenerateOptions,
) -> Result<Dataset, ScenarioError> {
    if n == 0 {
        return Err(ScenarioError::EmptyRequest);
    }
    if gen.workers == 0 {
        return Err(ScenarioError::NoWorkers);
    }
    let project_count = network.id_space();
    let range = (sampler.size_min, sampler.size_max);
    if sampler.size_min > sampler.size_max || sampler.size_max > project_count {
        return Err(ScenarioError::InvalidRange { min: range.0, max: range.1, project_count });
    }
    let baseline = match label_scenario(network, demand, &ClosureConfig::empty(), opts)? {
        LabelOutcome::Labeled(s) => s,
        LabelOutcome::Infeasible(p) => return Err(ScenarioError::Baseline(format!("disconnected pairs {p:?}"))),
        LabelOutcome::NotConverged { gap } => {
            return Err(ScenarioError::Baseline(format!("not converged, gap {gap:e}")))
        }
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(gen.workers)
        .build()
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let budget = n.saturating_mul(sampler.max_draws_per_scenario.max(1));
    let chunk = 32;
    let mut seen: HashSet<ClosureConfig> = HashSet::new();
    let mut scenarios = Vec::with_capacity(n);
    let mut draws = 0usize;

    while scenarios.len() < n {
        if draws >= budget {
            return Err(ScenarioError::Exhausted { wanted: n, accepted: scenarios.len(), draws });
        }
        let mut batch = Vec::with_capacity(chunk);
        while batch.len() < chunk && draws < budget {
            let c = sample_closure_config(&mut rng, project_count, range)?;
            draws += 1;
            if seen.insert(c.clone()) {
                batch.push(c);
            }
        }
        let outcomes: Vec<Result<LabelOutcome, ScenarioError>> = pool.install(|| {
            batch
                .par_iter()
                .map(|c| {
                    if c.is_empty() {
                        Ok(LabelOutcome::Labeled(baseline.clone()))
                    } else {
                        label_scenario(network, demand, c, opts)
                    }
                })
                .collect()
        });
        for outcome in outcomes {
            if let LabelOutcome::Labeled(mut s) = outcome? {
                if !gen.record_timings {
                    s.solve_time = 0.0;
                }
                scenarios.push(s);
                if scenarios.len() % 100 == 0 {
                    log::info!("labeled {} / {n} scenarios ({draws} draws)", scenarios.len());
                }
                if scenarios.len() == n {
                    break;
                }
            }
        }
    }

    Ok(Dataset {
        scenarios,
        network_fingerprint: fingerprint(network, demand),
        rng_seed: sampler.seed,
        baseline_ttt: baseline.ttt,
        solver: *opts,
        sampler: *sampler,
    })
}

/// Header line, then one scenario per line.
pub fn save_dataset<W: Write>(dataset: &Dataset, mut sink: W) -> Result<(), ScenarioError> {
    let header = serde_json::to_string(&dataset.header()).map_err(std::io::Error::other)?;
    writeln!(sink, "{header}")?;
    for s in &dataset.scenarios {
        let line = serde_json::to_string(s).map_err(std::io::Error::other)?;
        writeln!(sink, "{line}")?;
    }
    sink.flush()?;
    Ok(())
}

/// Reads a dataset; with `expected_fingerprint`, rejects files labeled on a
/// different network.
pub fn load_dataset<R: BufRead>(source: R, expected_fingerprint: Option<&str>) -> Result<Dataset, ScenarioError> {
    let mut lines = source.lines().enumerate();
    let header: DatasetHeader = loop {
        match lines.next() {
            None => return Err(ScenarioError::Malformed { line: 1, message: "missing header".into() }),
            Some((i, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line)
                    .map_err(|e| ScenarioError::Malformed { line: i + 1, message: e.to_string() })?;
            }
        }
    };
    if header.format != DATASET_FORMAT || header.version != DATASET_VERSION {
        return Err(ScenarioError::Malformed {
            line: 1,
            message: format!("unsupported format {} v{}", header.format, header.version),
        });
    }
    if let Some(expected) = expected_fingerprint {
        if expected != header.fingerprint {
            return Err(ScenarioError::FingerprintMismatch {
                expected: expected.to_string(),
                found: header.fingerprint,
            });
        }
    }
    let mut scenarios = Vec::with_capacity(header.count);
    let mut seen = HashSet::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: LabeledScenario = serde_json::from_str(&line)
            .map_err(|e| ScenarioError::Malformed { line: i + 1, message: e.to_string() })?;
        if !seen.insert(s.config.clone()) {
            return Err(ScenarioError::Malformed { line: i + 1, message: format!("duplicate config {}", s.config) });
        }
        scenarios.push(s);
    }
    if scenarios.len() != header.count {
        return Err(ScenarioError::Malformed {
            line: scenarios.len() + 2,
            message: format!("header declares {} scenarios, found {}", header.count, scenarios.len()),
        });
    }
    Ok(Dataset {
        scenarios,
        network_fingerprint: header.fingerprint,
        rng_seed: header.seed,
        baseline_ttt: header.baseline_ttt,
        solver: header.solver,
        sampler: header.sampler,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        Dataset {
            scenarios: vec![
                LabeledScenario { config: ClosureConfig::from_indices([1, 4]), ttt: 120.5, gap: 1e-5, solve_time: 0.25 },
                LabeledScenario { config: ClosureConfig::from_indices([2]), ttt: 101.0, gap: 0.0, solve_time: 0.0 },
            ],
            network_fingerprint: "abc".into(),
            rng_seed: 9,
            baseline_ttt: 100.0,
            solver: SolverOptions::default(),
            sampler: SamplerConfig::default(),
        }
    }

    #[test]
    fn line_format() {
        let s = &tiny().scenarios[0];
        assert_eq!(
            serde_json::to_string(s).unwrap(),
            r#"{"closed":[1,4],"ttt":120.5,"gap":0.00001,"solve_time":0.25}"#
        );
    }

    #[test]
    fn save_load_round_trip() {
        let ds = tiny();
        let mut buf = Vec::new();
        save_dataset(&ds, &mut buf).unwrap();
        assert_eq!(load_dataset(&buf[..], Some("abc")).unwrap(), ds);
        match load_dataset(&buf[..], Some("other")) {
            Err(ScenarioError::FingerprintMismatch { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_dataset_is_header_only() {
        let ds = tiny().truncated(0);
        let mut buf = Vec::new();
        save_dataset(&ds, &mut buf).unwrap();
        assert_eq!(String::from_utf8_lossy(&buf).lines().count(), 1);
        assert_eq!(load_dataset(&buf[..], None).unwrap(), ds);
    }

    #[test]
    fn malformed_line_numbered() {
        let mut buf = Vec::new();
        save_dataset(&tiny(), &mut buf).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text = text.replacen("\"ttt\":101.0", "\"ttt\":oops", 1);
        match load_dataset(text.as_bytes(), None) {
            Err(ScenarioError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sampler_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = sample_closure_config(&mut rng, 76, (1, 1)).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c.ids()[0].0 < 76);
        assert!(sample_closure_config(&mut rng, 76, (3, 2)).is_err());
        assert!(sample_closure_config(&mut rng, 5, (1, 6)).is_err());
        let a = sample_closure_config(&mut ChaCha8Rng::seed_from_u64(4), 76, (1, 10)).unwrap();
        let b = sample_closure_config(&mut ChaCha8Rng::seed_from_u64(4), 76, (1, 10)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sizes_are_uniform() {
        // 10,000 draws over sizes 1..=5: each count ~ Binomial(10000, 0.2),
        // sd = sqrt(10000 * 0.2 * 0.8) = 40.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut counts = [0usize; 6];
        for _ in 0..10_000 {
            counts[sample_closure_config(&mut rng, 76, (1, 5)).unwrap().len()] += 1;
        }
        assert_eq!(counts[0], 0);
        for &c in &counts[1..] {
            assert!((c as f64 - 2000.0).abs() <= 3.0 * 40.0, "{counts:?}");
        }
    }
}

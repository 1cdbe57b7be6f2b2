//! Online evaluation: train on everything seen so far, predict the next
//! batch, repeat.

use std::collections::HashSet;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureBuilder, FeatureError, FeatureMatrix, FeatureSpec};
use crate::heuristics::{Heuristic, HeuristicError, SubsetIndex};
use crate::scenario::Dataset;
use crate::surrogates::{fit, pinball, ModelSpec, SurrogateError};

mod render;

pub use render::{emit_report, load_report, render_svg, save_report};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const REVISION: &str = concat!("tap-surrogate ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predictions} predictions for {targets} targets")]
    LengthMismatch { targets: usize, predictions: usize },
    #[error("empty target vector")]
    Empty,
    #[error("percentage error undefined for target {0}")]
    NonPositiveTarget(f64),
    #[error("no models to evaluate")]
    NoModels,
    #[error("duplicate model name `{0}`")]
    DuplicateModel(String),
    #[error("invalid eval config: {0}")]
    InvalidConfig(String),
    #[error("dataset of {rows} rows holds no full test batch of {batch}")]
    TooLittleData { rows: usize, batch: usize },
    #[error("report averages for `{model}` do not match its records")]
    InconsistentReport { model: String },
    #[error("report schema version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Heuristic(#[from] HeuristicError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub pinball: f64,
    pub bias: f64,
    /// In percent.
    pub mape: f64,
}

/// Mean absolute error, mean pinball loss, mean signed error and mean
/// absolute percentage error of `y_hat` against `y`.
pub fn compute_metrics(y: &[f64], y_hat: &[f64], tau: f64) -> Result<Metrics, EvalError> {
    if y.len() != y_hat.len() {
        return Err(EvalError::LengthMismatch { targets: y.len(), predictions: y_hat.len() });
    }
    if y.is_empty() {
        return Err(EvalError::Empty);
    }
    crate::surrogates::pinball_loss(0.0, 0.0, tau)?;
    if let Some(&bad) = y.iter().find(|v| !(**v > 0.0)) {
        return Err(EvalError::NonPositiveTarget(bad));
    }
    let n = y.len() as f64;
    let mut m = Metrics::default();
    for (&t, &p) in y.iter().zip(y_hat) {
        m.mae += (p - t).abs();
        m.pinball += pinball(t, p, tau);
        m.bias += p - t;
        m.mape += (p - t).abs() / t;
    }
    m.mae /= n;
    m.pinball /= n;
    m.bias /= n;
    m.mape *= 100.0 / n;
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub batch_size: usize,
    pub iterations: usize,
    pub tau: f64,
    pub time_cap_seconds: f64,
    pub time_cap_window: usize,
    pub seed: u64,
    /// Wall times are recorded as 0 when off, making reports reproducible
    /// byte for byte.
    pub record_timings: bool,
    /// Keep every test prediction in the records.
    pub keep_predictions: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            batch_size: 200,
            iterations: 20,
            tau: crate::surrogates::DEFAULT_TAU,
            time_cap_seconds: 600.0,
            time_cap_window: 10,
            seed: 0,
            record_timings: true,
            keep_predictions: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::InvalidConfig(m.to_string()));
        if self.batch_size == 0 || self.iterations == 0 || self.time_cap_window == 0 {
            return bad("batch_size, iterations and time_cap_window must be positive");
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad("tau must lie in (0, 1)");
        }
        if !(self.time_cap_seconds > 0.0) {
            return bad("time_cap_seconds must be positive");
        }
        Ok(())
    }
}

/// A heuristic or a regression model under evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    Heuristic(Heuristic),
    Model(ModelSpec),
}

impl Candidate {
    pub fn name(&self) -> String {
        match self {
            Candidate::Heuristic(h) => h.name().to_string(),
            Candidate::Model(s) => s.kind.name().to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub model: String,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub fit_plus_predict_seconds: f64,
    /// The model hit the time cap after this iteration.
    pub terminated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub models: Vec<ModelRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelAverage {
    pub model: String,
    pub iterations: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub fit_plus_predict_seconds: f64,
    /// Iterations kept after dropping MAPE outliers.
    pub filtered_iterations: usize,
    pub filtered: Metrics,
    pub terminated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub schema_version: u32,
    pub revision: String,
    pub dataset_fingerprint: String,
    pub dataset_rows: usize,
    pub baseline_ttt: f64,
    pub config: EvalConfig,
    pub features: FeatureSpec,
    pub candidates: Vec<Candidate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub provenance: Provenance,
    pub records: Vec<IterationRecord>,
    pub averages: Vec<ModelAverage>,
}

/// Whether the median of the last `window` times exceeds `cap`.
pub fn exceeds_time_cap(times: &[f64], window: usize, cap: f64) -> bool {
    if window == 0 || times.len() < window {
        return false;
    }
    let mut last = times[times.len() - window..].to_vec();
    last.sort_by(f64::total_cmp);
    let mid = last.len() / 2;
    let median = if last.len() % 2 == 1 { last[mid] } else { 0.5 * (last[mid - 1] + last[mid]) };
    median > cap
}

fn mean_metrics<'a>(ms: impl Iterator<Item = &'a Metrics>) -> (usize, Metrics) {
    let mut n = 0;
    let mut acc = Metrics::default();
    for m in ms {
        n += 1;
        acc.mae += m.mae;
        acc.pinball += m.pinball;
        acc.bias += m.bias;
        acc.mape += m.mape;
    }
    if n > 0 {
        let d = n as f64;
        acc.mae /= d;
        acc.pinball /= d;
        acc.bias /= d;
        acc.mape /= d;
    }
    (n, acc)
}

/// Per-model means over recorded iterations, raw and with iterations whose
/// MAPE exceeds ten times the model's median MAPE removed.
pub fn compute_averages(records: &[IterationRecord], order: &[String]) -> Vec<ModelAverage> {
    order
        .iter()
        .map(|name| {
            let rows: Vec<&ModelRecord> = records.iter().flat_map(|r| r.models.iter()).filter(|m| &m.model == name).collect();
            let (n, metrics) = mean_metrics(rows.iter().map(|m| &m.metrics));
            let mut mapes: Vec<f64> = rows.iter().map(|m| m.metrics.mape).collect();
            mapes.sort_by(f64::total_cmp);
            let median = match mapes.len() {
                0 => 0.0,
                k if k % 2 == 1 => mapes[k / 2],
                k => 0.5 * (mapes[k / 2 - 1] + mapes[k / 2]),
            };
            let (fn_, filtered) =
                mean_metrics(rows.iter().filter(|m| m.metrics.mape <= 10.0 * median).map(|m| &m.metrics));
            let seconds = if n > 0 { rows.iter().map(|m| m.fit_plus_predict_seconds).sum::<f64>() / n as f64 } else { 0.0 };
            ModelAverage {
                model: name.clone(),
                iterations: n,
                metrics,
                fit_plus_predict_seconds: seconds,
                filtered_iterations: fn_,
                filtered,
                terminated: rows.iter().any(|m| m.terminated),
            }
        })
        .collect()
}

struct Outcome {
    predictions: Vec<f64>,
    seconds: f64,
}

/// Runs the online protocol. At iteration `t` every live candidate is
/// trained on rows `[0, tB)` and scored on rows `[tB, (t+1)B)` with its
/// conservative prediction at `config.tau`.
///
/// Feature rows for a batch, including the CSH column, are computed once
/// against the index of the rows before that batch, so training rows look
/// exactly as they did when they were test rows. Models with fewer than two
/// training rows predict the baseline TTT. A missing superset scores as the
/// largest training label.
pub fn run_online_eval(
    dataset: &Dataset,
    candidates: &[Candidate],
    config: &EvalConfig,
    features: &FeatureBuilder<'_>,
) -> Result<EvalReport, EvalError> {
    config.validate()?;
    if candidates.is_empty() {
        return Err(EvalError::NoModels);
    }
    let names: Vec<String> = candidates.iter().map(Candidate::name).collect();
    let mut seen = HashSet::new();
    for n in &names {
        if !seen.insert(n) {
            return Err(EvalError::DuplicateModel(n.clone()));
        }
    }
    let specs: Vec<Candidate> = candidates
        .iter()
        .map(|c| match c {
            Candidate::Model(s) => {
                let spec = s.clone().with_tau(config.tau);
                spec.validate().map(|_| Candidate::Model(spec))
            }
            h => Ok(h.clone()),
        })
        .collect::<Result<_, _>>()?;

    let b = config.batch_size;
    let iterations = config.iterations.min(dataset.len() / b);
    if iterations == 0 {
        return Err(EvalError::TooLittleData { rows: dataset.len(), batch: b });
    }
    let baseline = dataset.baseline_ttt;
    let mut index = SubsetIndex::with_baseline(baseline);
    let mut all_rows = FeatureMatrix::new(features.names().to_vec())?;
    let mut live = vec![true; specs.len()];
    let mut times: Vec<Vec<f64>> = vec![Vec::new(); specs.len()];
    let mut records = Vec::with_capacity(iterations);
    let mut row = Vec::with_capacity(features.width());

    for t in 0..iterations {
        let (lo, hi) = (t * b, (t + 1) * b);
        for s in &dataset.scenarios[lo..hi] {
            let csh = features.needs_csh().then(|| index.csh(&s.config)).transpose()?;
            row.clear();
            features.encode_into(&s.config, csh, &mut row)?;
            all_rows.push_row(&row)?;
        }
        let train_x = all_rows.select_rows(0..lo);
        let test_x = all_rows.select_rows(lo..hi);
        let train_y: Vec<f64> = dataset.scenarios[..lo].iter().map(|s| s.ttt).collect();
        let test_y: Vec<f64> = dataset.scenarios[lo..hi].iter().map(|s| s.ttt).collect();
        let max_label = train_y.iter().copied().fold(baseline, f64::max);

        let outcomes: Vec<Option<Result<Outcome, EvalError>>> = specs
            .par_iter()
            .zip(&live)
            .map(|(cand, &alive)| {
                alive.then(|| {
                    let start = Instant::now();
                    let predictions = match cand {
                        Candidate::Heuristic(h) => dataset.scenarios[lo..hi]
                            .iter()
                            .map(|s| Ok(index.estimate(*h, &s.config)?.unwrap_or(max_label)))
                            .collect::<Result<Vec<f64>, EvalError>>()?,
                        Candidate::Model(_) if lo < 2 => vec![baseline; hi - lo],
                        Candidate::Model(spec) => fit(spec, &train_x, &train_y)?.predict_conservative(&test_x, config.tau)?,
                    };
                    let seconds = if config.record_timings { start.elapsed().as_secs_f64() } else { 0.0 };
                    Ok(Outcome { predictions, seconds })
                })
            })
            .collect();

        let mut models = Vec::new();
        for (k, out) in outcomes.into_iter().enumerate() {
            let Some(out) = out else { continue };
            let out = out?;
            times[k].push(out.seconds);
            let terminated = exceeds_time_cap(&times[k], config.time_cap_window, config.time_cap_seconds);
            if terminated {
                live[k] = false;
                log::warn!("{} exceeded the time cap at iteration {t}", names[k]);
            }
            models.push(ModelRecord {
                model: names[k].clone(),
                metrics: compute_metrics(&test_y, &out.predictions, config.tau)?,
                fit_plus_predict_seconds: out.seconds,
                terminated,
                predictions: config.keep_predictions.then_some(out.predictions),
            });
        }
        log::info!("iteration {t}: trained on {lo} rows, tested on {}", hi - lo);
        records.push(IterationRecord { iteration: t, train_rows: lo, test_rows: hi - lo, models });
        for s in &dataset.scenarios[lo..hi] {
            index.insert_scenario(s);
        }
    }

    let averages = compute_averages(&records, &names);
    Ok(EvalReport {
        provenance: Provenance {
            schema_version: REPORT_SCHEMA_VERSION,
            revision: REVISION.to_string(),
            dataset_fingerprint: dataset.network_fingerprint.clone(),
            dataset_rows: dataset.len(),
            baseline_ttt: baseline,
            config: config.clone(),
            features: features.spec().clone(),
            candidates: specs,
        },
        records,
        averages,
    })
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io { path: path.display().to_string(), source }
}

//! Regression surrogates for total travel time with conservative (low
//! quantile) prediction.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;

mod knn;
mod linear;
mod tree;

pub use linear::{BayesRidge, LinearModel};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_TAU: f64 = 0.05;

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("quantile {0} outside (0, 1)")]
    InvalidTau(f64),
    #[error("unknown model kind `{0}`")]
    UnknownKind(String),
    #[error("{kind} has no hyperparameter `{key}`")]
    UnknownHyperparameter { kind: ModelKind, key: String },
    #[error("hyperparameter `{key}` = {value}: {reason}")]
    InvalidHyperparameter { key: String, value: f64, reason: &'static str },
    #[error("need at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("feature matrix has no columns")]
    EmptyFeatures,
    #[error("{targets} targets for {rows} rows")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("log-target model needs positive targets, found {0}")]
    NonPositiveTarget(f64),
    #[error("non-finite target {0}")]
    NonFiniteTarget(f64),
    #[error("feature schema mismatch: model expects {expected} columns {first_expected:?}..., got {got} {first_got:?}...")]
    SchemaMismatch { expected: usize, got: usize, first_expected: Option<String>, first_got: Option<String> },
    #[error("model trained at quantile {trained}, asked for {requested}")]
    TauMismatch { trained: f64, requested: f64 },
    #[error("model format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LogOls,
    LogQuantile,
    LogBayesRidge,
    LogBagging,
    LogKnn,
    RandomForest,
    Gbt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::LogOls,
        ModelKind::LogQuantile,
        ModelKind::LogBayesRidge,
        ModelKind::LogBagging,
        ModelKind::LogKnn,
        ModelKind::RandomForest,
        ModelKind::Gbt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LogOls => "log_ols",
            ModelKind::LogQuantile => "log_quantile",
            ModelKind::LogBayesRidge => "log_bayes_ridge",
            ModelKind::LogBagging => "log_bagging",
            ModelKind::LogKnn => "log_knn",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Gbt => "gbt",
        }
    }

    /// Trained on `ln(ttt)` rather than raw TTT.
    pub fn log_target(self) -> bool {
        !matches!(self, ModelKind::RandomForest | ModelKind::Gbt)
    }

    /// Features are standardized on the training rows before fitting.
    pub fn standardizes(self) -> bool {
        self.log_target()
    }

    pub fn strategy(self) -> ConservativeStrategy {
        match self {
            ModelKind::LogOls => ConservativeStrategy::None,
            ModelKind::LogQuantile | ModelKind::Gbt => ConservativeStrategy::Pinball,
            ModelKind::LogBayesRidge => ConservativeStrategy::Posterior,
            ModelKind::LogBagging | ModelKind::LogKnn | ModelKind::RandomForest => ConservativeStrategy::Ensemble,
        }
    }

    /// (default keys, optional keys without a default)
    fn keys(self) -> (&'static [(&'static str, f64)], &'static [&'static str]) {
        match self {
            ModelKind::LogOls => (&[], &[]),
            ModelKind::LogQuantile => {
                (&[("max_epochs", 5000.0), ("patience", 50.0), ("learning_rate", 0.01), ("tolerance", 1e-9)], &[])
            }
            ModelKind::LogBayesRidge => (&[("max_iter", 300.0), ("tolerance", 1e-6)], &["alpha", "lambda"]),
            ModelKind::LogBagging => (&[("members", 50.0), ("sample_fraction", 1.0)], &[]),
            ModelKind::LogKnn => (&[("k", 10.0)], &[]),
            ModelKind::RandomForest => (&[("trees", 100.0), ("depth", 12.0), ("min_leaf", 5.0)], &[]),
            ModelKind::Gbt => (&[("trees", 300.0), ("depth", 4.0), ("learning_rate", 0.1), ("min_leaf", 5.0)], &[]),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = SurrogateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| SurrogateError::UnknownKind(s.to_string()))
    }
}

/// How a kind produces its conservative prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConservativeStrategy {
    /// Trained directly on the pinball loss at the model's quantile.
    Pinball,
    /// Lower quantile of the Gaussian predictive distribution.
    Posterior,
    /// Empirical quantile across ensemble members or neighbors.
    Ensemble,
    /// No mechanism: the point prediction is returned.
    None,
}

pub type Hyperparameters = BTreeMap<String, f64>;

/// Documented defaults for `kind`.
pub fn default_hyperparameters(kind: ModelKind) -> Hyperparameters {
    kind.keys().0.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn check_tau(tau: f64) -> Result<(), SurrogateError> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(SurrogateError::InvalidTau(tau))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Overrides of [`default_hyperparameters`].
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
    #[serde(default)]
    pub seed: u64,
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self { kind, tau: DEFAULT_TAU, hyperparameters: Hyperparameters::new(), seed: 0 }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.hyperparameters.insert(key.to_string(), value);
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Defaults overlaid with overrides, validated.
    pub fn resolved(&self) -> Result<Params, SurrogateError> {
        check_tau(self.tau)?;
        let (defaults, optional) = self.kind.keys();
        let mut values = default_hyperparameters(self.kind);
        for (k, &v) in &self.hyperparameters {
            if !defaults.iter().any(|(d, _)| d == k) && !optional.contains(&k.as_str()) {
                return Err(SurrogateError::UnknownHyperparameter { kind: self.kind, key: k.clone() });
            }
            if !v.is_finite() {
                return Err(SurrogateError::InvalidHyperparameter { key: k.clone(), value: v, reason: "not finite" });
            }
            values.insert(k.clone(), v);
        }
        let params = Params(values);
        params.validate(self.kind)?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), SurrogateError> {
        self.resolved().map(|_| ())
    }
}

/// Resolved hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Params(Hyperparameters);

impl Params {
    fn real(&self, key: &str) -> f64 {
        self.0[key]
    }

    fn optional(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    fn count(&self, key: &str) -> usize {
        self.0[key] as usize
    }

    fn validate(&self, kind: ModelKind) -> Result<(), SurrogateError> {
        let bad = |key: &str, reason| Err(SurrogateError::InvalidHyperparameter { key: key.into(), value: self.0[key], reason });
        for (key, &v) in &self.0 {
            let ok = match key.as_str() {
                "max_epochs" | "patience" | "max_iter" | "members" | "k" | "trees" | "depth" | "min_leaf" => {
                    v >= 1.0 && v.fract() == 0.0
                }
                "learning_rate" if kind == ModelKind::Gbt => v > 0.0 && v <= 1.0,
                "sample_fraction" => v > 0.0 && v <= 1.0,
                "alpha" | "lambda" | "learning_rate" | "tolerance" => v > 0.0,
                _ => true,
            };
            if !ok {
                return bad(key, "out of range");
            }
        }
        Ok(())
    }
}

pub fn pinball_loss(y: f64, y_hat: f64, tau: f64) -> Result<f64, SurrogateError> {
    check_tau(tau)?;
    Ok(pinball(y, y_hat, tau))
}

pub(crate) fn pinball(y: f64, y_hat: f64, tau: f64) -> f64 {
    if y >= y_hat {
        tau * (y - y_hat)
    } else {
        (1.0 - tau) * (y_hat - y)
    }
}

/// The `ceil(n tau)`-th smallest value, a minimizer of the summed pinball
/// loss. Being an order statistic it commutes with monotone transforms.
/// Reorders `values`.
pub fn lower_quantile(values: &mut [f64], tau: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty sample");
    let k = ((values.len() as f64 * tau).ceil() as usize).clamp(1, values.len()) - 1;
    *values.select_nth_unstable_by(k, f64::total_cmp).1
}

/// Per-column centering and scaling fit on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &FeatureMatrix) -> Self {
        let n = x.nrows() as f64;
        let (mut mean, mut scale) = (Vec::new(), Vec::new());
        for j in 0..x.ncols() {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            mean.push(m);
            scale.push(if sd > 1e-12 * m.abs().max(1.0) { sd } else { 1.0 });
        }
        Self { mean, scale }
    }

    pub fn transform_row(&self, row: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(row.iter().zip(self.mean.iter().zip(&self.scale)).map(|(v, (m, s))| (v - m) / s));
    }

    pub fn transform(&self, x: &FeatureMatrix) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.nrows() * x.ncols());
        let mut buf = Vec::new();
        for r in x.rows() {
            self.transform_row(r, &mut buf);
            out.extend_from_slice(&buf);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Fitted {
    LogOls(LinearModel),
    LogQuantile(LinearModel),
    LogBayesRidge(BayesRidge),
    LogBagging(Vec<LinearModel>),
    LogKnn(knn::Knn),
    RandomForest(Vec<tree::Tree>),
    Gbt(tree::Boosted),
}

/// A fitted surrogate with its feature schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    format_version: u32,
    spec: ModelSpec,
    schema: Vec<String>,
    n_train: usize,
    scaler: Option<Standardizer>,
    fitted: Fitted,
}

/// Fits `spec` on rows of `x` with targets `y` (raw TTT).
pub fn fit(spec: &ModelSpec, x: &FeatureMatrix, y: &[f64]) -> Result<TrainedModel, SurrogateError> {
    let params = spec.resolved()?;
    let n = x.nrows();
    if x.ncols() == 0 {
        return Err(SurrogateError::EmptyFeatures);
    }
    if n < 2 {
        return Err(SurrogateError::TooFewRows(n));
    }
    if y.len() != n {
        return Err(SurrogateError::LengthMismatch { rows: n, targets: y.len() });
    }
    if let Some(&bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(SurrogateError::NonFiniteTarget(bad));
    }
    let kind = spec.kind;
    let target: Vec<f64> = if kind.log_target() {
        if let Some(&bad) = y.iter().find(|&&v| v <= 0.0) {
            return Err(SurrogateError::NonPositiveTarget(bad));
        }
        y.iter().map(|v| v.ln()).collect()
    } else {
        y.to_vec()
    };
    let scaler = kind.standardizes().then(|| Standardizer::fit(x));
    let data = match &scaler {
        Some(s) => s.transform(x),
        None => x.as_slice().to_vec(),
    };
    let cols = x.ncols();
    let fitted = match kind {
        ModelKind::LogOls => Fitted::LogOls(LinearModel::ols(&data, cols, &target)),
        ModelKind::LogQuantile => Fitted::LogQuantile(linear::fit_quantile(&data, cols, &target, spec.tau, &params)),
        ModelKind::LogBayesRidge => Fitted::LogBayesRidge(BayesRidge::fit(&data, cols, &target, &params)),
        ModelKind::LogBagging => Fitted::LogBagging(linear::fit_bagging(&data, cols, &target, &params, spec.seed)),
        ModelKind::LogKnn => Fitted::LogKnn(knn::Knn::new(data, cols, target, params.count("k"))),
        ModelKind::RandomForest => Fitted::RandomForest(tree::fit_forest(&data, cols, &target, &params, spec.seed)),
        ModelKind::Gbt => Fitted::Gbt(tree::fit_gbt(&data, cols, &target, spec.tau, &params)),
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        spec: spec.clone(),
        schema: x.names().to_vec(),
        n_train: n,
        scaler,
        fitted,
    })
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn tau(&self) -> f64 {
        self.spec.tau
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn training_rows(&self) -> usize {
        self.n_train
    }

    pub fn log_target(&self) -> bool {
        self.spec.kind.log_target()
    }

    pub fn strategy(&self) -> ConservativeStrategy {
        self.spec.kind.strategy()
    }

    /// Per-round training pinball loss, for boosted models.
    pub fn training_trace(&self) -> Option<&[f64]> {
        match &self.fitted {
            Fitted::Gbt(b) => Some(&b.training_loss),
            _ => None,
        }
    }

    /// `[intercept, w...]` on raw features in target space, for single
    /// linear models.
    pub fn linear_coefficients(&self) -> Option<Vec<f64>> {
        let lin = match &self.fitted {
            Fitted::LogOls(m) | Fitted::LogQuantile(m) => &m.coef,
            Fitted::LogBayesRidge(b) => &b.coef,
            _ => return None,
        };
        let s = self.scaler.as_ref()?;
        let mut out = vec![lin[0]];
        for j in 0..s.mean.len() {
            out.push(lin[j + 1] / s.scale[j]);
            out[0] -= lin[j + 1] * s.mean[j] / s.scale[j];
        }
        Some(out)
    }

    fn check_schema(&self, x: &FeatureMatrix) -> Result<(), SurrogateError> {
        if x.names() != self.schema.as_slice() {
            let first_diff = self.schema.iter().zip(x.names()).position(|(a, b)| a != b).unwrap_or(0);
            return Err(SurrogateError::SchemaMismatch {
                expected: self.schema.len(),
                got: x.ncols(),
                first_expected: self.schema.get(first_diff).cloned(),
                first_got: x.names().get(first_diff).cloned(),
            });
        }
        Ok(())
    }

    fn each_row(&self, x: &FeatureMatrix, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let mut buf = Vec::new();
        x.rows()
            .map(|r| {
                let v = match &self.scaler {
                    Some(s) => {
                        s.transform_row(r, &mut buf);
                        f(&buf)
                    }
                    None => f(r),
                };
                if self.log_target() {
                    v.exp()
                } else {
                    v
                }
            })
            .collect()
    }

    /// Point predictions of TTT.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>, SurrogateError> {
        self.check_schema(x)?;
        Ok(self.each_row(x, |r| match &self.fitted {
            Fitted::LogOls(m) | Fitted::LogQuantile(m) => m.predict(r),
            Fitted::LogBayesRidge(b) => b.mean(r),
            Fitted::LogBagging(ms) => ms.iter().map(|m| m.predict(r)).sum::<f64>() / ms.len() as f64,
            Fitted::LogKnn(k) => k.mean(r),
            Fitted::RandomForest(ts) => ts.iter().map(|t| t.predict(r)).sum::<f64>() / ts.len() as f64,
            Fitted::Gbt(b) => b.predict(r),
        }))
    }

    /// Conservative predictions at quantile `tau`. Pinball-trained kinds
    /// accept only their training quantile; `log_ols` returns its point
    /// prediction (see [`TrainedModel::strategy`]).
    pub fn predict_conservative(&self, x: &FeatureMatrix, tau: f64) -> Result<Vec<f64>, SurrogateError> {
        check_tau(tau)?;
        self.check_schema(x)?;
        if self.strategy() == ConservativeStrategy::Pinball && (tau - self.spec.tau).abs() > 1e-12 {
            return Err(SurrogateError::TauMismatch { trained: self.spec.tau, requested: tau });
        }
        let z = if let Fitted::LogBayesRidge(_) = self.fitted { standard_normal_quantile(tau) } else { 0.0 };
        Ok(self.each_row(x, |r| match &self.fitted {
            Fitted::LogOls(m) | Fitted::LogQuantile(m) => m.predict(r),
            Fitted::LogBayesRidge(b) => b.mean(r) + z * b.predictive_sd(r),
            Fitted::LogBagging(ms) => {
                let mut v: Vec<f64> = ms.iter().map(|m| m.predict(r)).collect();
                lower_quantile(&mut v, tau)
            }
            Fitted::LogKnn(k) => k.quantile(r, tau),
            Fitted::RandomForest(ts) => {
                let mut v: Vec<f64> = ts.iter().map(|t| t.predict(r)).collect();
                lower_quantile(&mut v, tau)
            }
            Fitted::Gbt(b) => b.predict(r),
        }))
    }

    pub fn to_json(&self) -> Result<String, SurrogateError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, SurrogateError> {
        #[derive(Deserialize)]
        struct Probe {
            format_version: u32,
        }
        let probe: Probe = serde_json::from_str(s)?;
        if probe.format_version != MODEL_FORMAT_VERSION {
            return Err(SurrogateError::Version { found: probe.format_version, expected: MODEL_FORMAT_VERSION });
        }
        Ok(serde_json::from_str(s)?)
    }
}

pub(crate) fn standard_normal_quantile(tau: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(tau)
}

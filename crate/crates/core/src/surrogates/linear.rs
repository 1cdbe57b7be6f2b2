//! Linear models in log-target space.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lower_quantile, pinball, Params};
use crate::linalg::{dot_affine, ols};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// `[intercept, w...]` on the model's input features.
    pub coef: Vec<f64>,
}

impl LinearModel {
    pub fn ols(x: &[f64], cols: usize, y: &[f64]) -> Self {
        Self { coef: ols(x, cols, y) }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        dot_affine(&self.coef, row)
    }

    fn mean_pinball(&self, x: &[f64], cols: usize, y: &[f64], tau: f64) -> f64 {
        x.chunks(cols).zip(y).map(|(r, &t)| pinball(t, self.predict(r), tau)).sum::<f64>() / y.len() as f64
    }
}

/// Linear quantile regression by full-batch subgradient descent on the mean
/// pinball loss, started from least squares with the intercept moved to the
/// residual quantile. Returns the best iterate seen.
pub(crate) fn fit_quantile(x: &[f64], cols: usize, y: &[f64], tau: f64, params: &Params) -> LinearModel {
    let n = y.len();
    let mut current = LinearModel::ols(x, cols, y);
    let mut resid: Vec<f64> = x.chunks(cols).zip(y).map(|(r, &t)| t - current.predict(r)).collect();
    current.coef[0] += lower_quantile(&mut resid, tau);

    let max_epochs = params.count("max_epochs");
    let patience = params.count("patience");
    let lr = params.real("learning_rate");
    let tol = params.real("tolerance");
    let mut best = current.clone();
    let mut best_loss = current.mean_pinball(x, cols, y, tau);
    let mut history = vec![best_loss];
    let mut grad = vec![0.0; cols + 1];
    for epoch in 0..max_epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (r, &t) in x.chunks(cols).zip(y) {
            // d/dŷ of the pinball loss
            let g = if t > current.predict(r) { -tau } else { 1.0 - tau };
            grad[0] += g;
            for (gj, v) in grad[1..].iter_mut().zip(r) {
                *gj += g * v;
            }
        }
        let step = lr / ((epoch + 1) as f64).sqrt() / n as f64;
        for (c, g) in current.coef.iter_mut().zip(&grad) {
            *c -= step * g;
        }
        let loss = current.mean_pinball(x, cols, y, tau);
        if loss < best_loss {
            best_loss = loss;
            best = current.clone();
        }
        history.push(best_loss);
        if history.len() > patience && history[history.len() - 1 - patience] - best_loss < tol {
            break;
        }
    }
    best
}

/// Least-squares members on bootstrap resamples. Member `i` draws from its
/// own stream of the seeded generator.
pub(crate) fn fit_bagging(x: &[f64], cols: usize, y: &[f64], params: &Params, seed: u64) -> Vec<LinearModel> {
    let n = y.len();
    let draws = ((params.real("sample_fraction") * n as f64).round() as usize).max(2);
    (0..params.count("members"))
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut bx = Vec::with_capacity(draws * cols);
            let mut by = Vec::with_capacity(draws);
            for _ in 0..draws {
                let r = rng.random_range(0..n);
                bx.extend_from_slice(&x[r * cols..(r + 1) * cols]);
                by.push(y[r]);
            }
            LinearModel::ols(&bx, cols, &by)
        })
        .collect()
}

const PRIOR_SHAPE: f64 = 1e-6;
const PRIOR_RATE: f64 = 1e-6;

/// Bayesian linear regression with Gaussian noise (precision `alpha`) and
/// an isotropic Gaussian weight prior (precision `lambda`), both chosen by
/// evidence maximization unless fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesRidge {
    pub coef: Vec<f64>,
    pub alpha: f64,
    pub lambda: f64,
    x_mean: Vec<f64>,
    /// Row-major posterior covariance of the weights.
    sigma: Vec<f64>,
}

impl BayesRidge {
    pub(crate) fn fit(x: &[f64], cols: usize, y: &[f64], params: &Params) -> Self {
        let n = y.len();
        let nf = n as f64;
        let x_mean: Vec<f64> = (0..cols).map(|j| x.iter().skip(j).step_by(cols).sum::<f64>() / nf).collect();
        let y_mean = y.iter().sum::<f64>() / nf;
        let xc = DMatrix::from_fn(n, cols, |i, j| x[i * cols + j] - x_mean[j]);
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let xtx = xc.transpose() * &xc;
        let xty = xc.transpose() * &yc;
        let eig = SymmetricEigen::new(xtx);
        let e: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
        let v = eig.eigenvectors;
        let vty = v.transpose() * &xty;

        let fixed_alpha = params.optional("alpha");
        let fixed_lambda = params.optional("lambda");
        let var_y = yc.norm_squared() / nf;
        let mut alpha = fixed_alpha.unwrap_or(1.0 / (var_y + f64::EPSILON));
        let mut lambda = fixed_lambda.unwrap_or(1.0);
        let posterior_mean = |alpha: f64, lambda: f64| {
            let scaled = DVector::from_iterator(cols, (0..cols).map(|i| vty[i] * alpha / (alpha * e[i] + lambda)));
            &v * scaled
        };
        let mut m = posterior_mean(alpha, lambda);
        for iter in 0..params.count("max_iter") {
            let sse = (&yc - &xc * &m).norm_squared();
            let gamma: f64 = e.iter().map(|&ei| alpha * ei / (lambda + alpha * ei)).sum();
            if fixed_lambda.is_none() {
                lambda = (gamma + 2.0 * PRIOR_SHAPE) / (m.norm_squared() + 2.0 * PRIOR_RATE);
            }
            if fixed_alpha.is_none() {
                alpha = (nf - gamma + 2.0 * PRIOR_SHAPE) / (sse + 2.0 * PRIOR_RATE);
            }
            let next = posterior_mean(alpha, lambda);
            let change = (&next - &m).abs().sum();
            m = next;
            if iter > 0 && change < params.real("tolerance") {
                break;
            }
        }
        let inv = DMatrix::from_diagonal(&DVector::from_iterator(cols, e.iter().map(|&ei| 1.0 / (alpha * ei + lambda))));
        let sigma = &v * inv * v.transpose();
        let intercept = y_mean - m.iter().zip(&x_mean).map(|(a, b)| a * b).sum::<f64>();
        Self {
            coef: std::iter::once(intercept).chain(m.iter().copied()).collect(),
            alpha,
            lambda,
            x_mean,
            // column-major transpose yields row-major order
            sigma: sigma.transpose().iter().copied().collect(),
        }
    }

    pub fn mean(&self, row: &[f64]) -> f64 {
        dot_affine(&self.coef, row)
    }

    /// Standard deviation of the predictive distribution at `row`.
    pub fn predictive_sd(&self, row: &[f64]) -> f64 {
        let p = self.x_mean.len();
        let d: Vec<f64> = row.iter().zip(&self.x_mean).map(|(a, b)| a - b).collect();
        let mut quad = 0.0;
        for i in 0..p {
            let s = &self.sigma[i * p..(i + 1) * p];
            quad += d[i] * s.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
        }
        (1.0 / self.alpha + quad.max(0.0)).sqrt()
    }
}

//! k-nearest-neighbor regression on standardized features.

use serde::{Deserialize, Serialize};

use super::lower_quantile;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct Knn {
    x: Vec<f64>,
    cols: usize,
    y: Vec<f64>,
    k: usize,
}

impl Knn {
    pub fn new(x: Vec<f64>, cols: usize, y: Vec<f64>, k: usize) -> Self {
        let k = k.min(y.len());
        Self { x, cols, y, k }
    }

    /// Targets of the `k` nearest rows; distance ties go to the earlier row.
    fn neighbors(&self, row: &[f64]) -> Vec<f64> {
        let mut d: Vec<(f64, usize)> = self
            .x
            .chunks(self.cols)
            .enumerate()
            .map(|(i, r)| (r.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.into_iter().map(|(_, i)| self.y[i]).collect()
    }

    pub fn mean(&self, row: &[f64]) -> f64 {
        let v = self.neighbors(row);
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn quantile(&self, row: &[f64], tau: f64) -> f64 {
        lower_quantile(&mut self.neighbors(row), tau)
    }
}

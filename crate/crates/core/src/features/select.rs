//! Greedy wrapper selection scored by cross-validated R² of least squares
//! on log targets.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureMatrix, TargetTransform};
use crate::linalg::{dot_affine, Gram};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

struct CrossValidation {
    /// Standardized row-major features.
    x: Vec<f64>,
    cols: usize,
    y: Vec<f64>,
    /// Held-out rows of each fold.
    folds: Vec<Vec<usize>>,
    /// Gram matrices of the rows outside each fold.
    train: Vec<Gram>,
}

impl CrossValidation {
    fn new(matrix: &FeatureMatrix, y: Vec<f64>, folds: usize, seed: u64) -> Self {
        let (n, cols) = (matrix.nrows(), matrix.ncols());
        let mut x = matrix.as_slice().to_vec();
        for j in 0..cols {
            let col = matrix.column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            let sd = if sd > 0.0 { sd } else { 1.0 };
            for i in 0..n {
                x[i * cols + j] = (x[i * cols + j] - mean) / sd;
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut held = vec![Vec::new(); folds];
        for (i, &row) in perm.iter().enumerate() {
            held[i % folds].push(row);
        }
        for f in &mut held {
            f.sort_unstable();
        }
        let mut total = Gram::zeros(cols);
        let mut per_fold = vec![Gram::zeros(cols); folds];
        for (f, rows) in held.iter().enumerate() {
            for &i in rows {
                per_fold[f].add_row(&x[i * cols..(i + 1) * cols], y[i]);
            }
            total.xtx += &per_fold[f].xtx;
            total.xty += &per_fold[f].xty;
        }
        let train = per_fold
            .iter()
            .map(|g| {
                let mut t = total.sub(g);
                t.symmetrize();
                t
            })
            .collect();
        Self { x, cols, y, folds: held, train }
    }

    /// Mean held-out R² of the columns `subset`, `None` when any fold's fit
    /// is singular.
    fn score(&self, subset: &[usize]) -> Option<f64> {
        let mut total = 0.0;
        let mut buf = Vec::with_capacity(subset.len());
        for (rows, gram) in self.folds.iter().zip(&self.train) {
            let coef = gram.solve(subset, 0.0)?;
            let mean = rows.iter().map(|&i| self.y[i]).sum::<f64>() / rows.len() as f64;
            let (mut sse, mut sst) = (0.0, 0.0);
            for &i in rows {
                let row = &self.x[i * self.cols..(i + 1) * self.cols];
                buf.clear();
                buf.extend(subset.iter().map(|&j| row[j]));
                let r = self.y[i] - dot_affine(&coef, &buf);
                sse += r * r;
                sst += (self.y[i] - mean).powi(2);
            }
            total += if sst > 0.0 { 1.0 - sse / sst } else { 0.0 };
        }
        Some(total / self.folds.len() as f64)
    }
}

/// Greedy forward or backward selection of `k` columns. Folds are assigned
/// by a seeded shuffle; score ties go to the alphabetically first feature.
/// Forward results are in selection order, backward results in column order.
pub fn sequential_select(
    matrix: &FeatureMatrix,
    targets: &[f64],
    direction: Direction,
    k: usize,
    folds: usize,
    seed: u64,
) -> Result<Vec<String>, FeatureError> {
    let (n, p) = (matrix.nrows(), matrix.ncols());
    if k > p {
        return Err(FeatureError::InvalidSelection(format!("k = {k} exceeds {p} columns")));
    }
    if folds < 2 {
        return Err(FeatureError::InvalidSelection(format!("need at least 2 folds, got {folds}")));
    }
    if n < 2 * folds {
        return Err(FeatureError::TooFewRows { needed: 2 * folds, got: n });
    }
    if targets.len() != n {
        return Err(FeatureError::LengthMismatch { rows: n, targets: targets.len() });
    }
    let y = TargetTransform::Log.apply(targets)?;
    if k == p {
        return Ok(matrix.names().to_vec());
    }
    let cv = CrossValidation::new(matrix, y, folds, seed);
    let mut by_name: Vec<usize> = (0..p).collect();
    by_name.sort_by(|&a, &b| matrix.names()[a].cmp(&matrix.names()[b]));

    let mut chosen: Vec<usize> = match direction {
        Direction::Forward => Vec::new(),
        Direction::Backward => (0..p).collect(),
    };
    while chosen.len() != k {
        let mut best: Option<(usize, f64)> = None;
        for &c in &by_name {
            let trial: Vec<usize> = match direction {
                Direction::Forward if chosen.contains(&c) => continue,
                Direction::Forward => chosen.iter().copied().chain([c]).collect(),
                Direction::Backward if !chosen.contains(&c) => continue,
                Direction::Backward => chosen.iter().copied().filter(|&j| j != c).collect(),
            };
            if let Some(s) = cv.score(&trial) {
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((c, s));
                }
            }
        }
        let (c, score) = best.ok_or(FeatureError::DegenerateDesign)?;
        log::debug!("{direction:?} step: {} (cv r2 {score:.6})", matrix.names()[c]);
        match direction {
            Direction::Forward => chosen.push(c),
            Direction::Backward => chosen.retain(|&j| j != c),
        }
    }
    Ok(chosen.into_iter().map(|j| matrix.names()[j].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn synthetic(n: usize, seed: u64) -> (FeatureMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let names = ["a", "b", "f", "z"].iter().map(|s| s.to_string()).collect();
        let mut m = FeatureMatrix::new(names).unwrap();
        let mut y = Vec::new();
        for _ in 0..n {
            let row: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
            y.push((1.0 + 2.0 * row[2] + 0.01 * rng.random_range(-1.0..1.0)).exp());
            m.push_row(&row).unwrap();
        }
        (m, y)
    }

    #[test]
    fn forward_finds_signal() {
        let (m, y) = synthetic(200, 3);
        assert_eq!(sequential_select(&m, &y, Direction::Forward, 1, 5, 0).unwrap(), vec!["f"]);
        let back = sequential_select(&m, &y, Direction::Backward, 1, 5, 0).unwrap();
        assert_eq!(back, vec!["f"]);
    }

    #[test]
    fn full_k_returns_all() {
        let (m, y) = synthetic(50, 1);
        for d in [Direction::Forward, Direction::Backward] {
            assert_eq!(sequential_select(&m, &y, d, 4, 5, 0).unwrap(), m.names().to_vec());
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let (m, y) = synthetic(50, 1);
        assert!(sequential_select(&m, &y, Direction::Forward, 5, 5, 0).is_err());
        assert!(sequential_select(&m, &y, Direction::Forward, 1, 1, 0).is_err());
        let flat = FeatureMatrix::from_rows(vec!["c".into()], &vec![vec![1.0]; 20]).unwrap();
        let mut dup = FeatureMatrix::new(vec!["p".into(), "q".into()]).unwrap();
        for i in 0..20 {
            dup.push_row(&[i as f64, i as f64]).unwrap();
        }
        let yy: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        assert!(matches!(
            sequential_select(&flat, &yy, Direction::Forward, 0, 5, 0),
            Ok(v) if v.is_empty()
        ));
        assert!(matches!(sequential_select(&dup, &yy, Direction::Backward, 1, 5, 0), Ok(v) if v == vec!["q"]));
        let mut flat2 = FeatureMatrix::new(vec!["c".into(), "d".into()]).unwrap();
        for _ in 0..20 {
            flat2.push_row(&[1.0, 2.0]).unwrap();
        }
        assert!(matches!(
            sequential_select(&flat2, &yy, Direction::Forward, 1, 5, 0),
            Err(FeatureError::DegenerateDesign)
        ));
    }
}

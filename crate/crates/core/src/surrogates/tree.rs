//! Regression trees on pre-binned features, random forests and
//! quantile-loss gradient boosting.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lower_quantile, pinball, Params};

const MAX_CUTS: usize = 255;

/// Features quantized to at most 256 bins. Row `i` falls in bin `b` of
/// feature `j` when `x <= cuts[j][b]` and `x > cuts[j][b - 1]`.
struct Binned {
    cols: usize,
    bins: Vec<u8>,
    cuts: Vec<Vec<f64>>,
}

impl Binned {
    fn new(x: &[f64], cols: usize) -> Self {
        let n = x.len() / cols;
        let mut cuts = Vec::with_capacity(cols);
        for j in 0..cols {
            let mut u: Vec<f64> = (0..n).map(|i| x[i * cols + j]).collect();
            u.sort_by(f64::total_cmp);
            u.dedup();
            let mid = |k: usize| 0.5 * (u[k - 1] + u[k]);
            let mut c: Vec<f64> = if u.len() <= MAX_CUTS + 1 {
                (1..u.len()).map(mid).collect()
            } else {
                (1..=MAX_CUTS).map(|q| mid(q * u.len() / (MAX_CUTS + 1))).collect()
            };
            c.dedup();
            cuts.push(c);
        }
        let mut bins = vec![0u8; n * cols];
        for i in 0..n {
            for j in 0..cols {
                bins[i * cols + j] = cuts[j].partition_point(|&c| c < x[i * cols + j]) as u8;
            }
        }
        Self { cols, bins, cuts }
    }

    fn bin(&self, row: usize, feature: usize) -> usize {
        self.bins[row * self.cols + feature] as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

struct Grower<'a, F> {
    binned: &'a Binned,
    target: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
    /// Features tried per split; all when `None`.
    max_features: Option<usize>,
    rng: Option<ChaCha8Rng>,
    leaf_value: F,
    nodes: Vec<Node>,
}

impl<F: FnMut(&[usize]) -> f64> Grower<'_, F> {
    fn grow(mut self, rows: Vec<usize>) -> Tree {
        self.node(rows, 0);
        Tree { nodes: self.nodes }
    }

    fn node(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(0.0));
        let split = if depth < self.max_depth && rows.len() >= 2 * self.min_leaf { self.best_split(&rows) } else { None };
        match split {
            None => self.nodes[id] = Node::Leaf((self.leaf_value)(&rows)),
            Some((feature, bin)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.binned.bin(i, feature) <= bin);
                let threshold = self.binned.cuts[feature][bin];
                let left = self.node(l, depth + 1);
                let right = self.node(r, depth + 1);
                self.nodes[id] = Node::Split { feature, threshold, left, right };
            }
        }
        id
    }

    /// Variance-reduction split maximizing `S_L²/n_L + S_R²/n_R`.
    fn best_split(&mut self, rows: &[usize]) -> Option<(usize, usize)> {
        let cols = self.binned.cols;
        let features: Vec<usize> = match (self.max_features, self.rng.as_mut()) {
            (Some(m), Some(rng)) if m < cols => {
                let mut f = sample(rng, cols, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..cols).collect(),
        };
        let n = rows.len() as f64;
        let total: f64 = rows.iter().map(|&i| self.target[i]).sum();
        let parent = total * total / n;
        let mut best: Option<(f64, usize, usize)> = None;
        let mut count = [0usize; MAX_CUTS + 1];
        let mut sum = [0.0f64; MAX_CUTS + 1];
        for f in features {
            let nb = self.binned.cuts[f].len() + 1;
            if nb < 2 {
                continue;
            }
            count[..nb].fill(0);
            sum[..nb].fill(0.0);
            for &i in rows {
                let b = self.binned.bin(i, f);
                count[b] += 1;
                sum[b] += self.target[i];
            }
            let (mut cl, mut sl) = (0usize, 0.0);
            for b in 0..nb - 1 {
                cl += count[b];
                sl += sum[b];
                let cr = rows.len() - cl;
                if cl < self.min_leaf {
                    continue;
                }
                if cr < self.min_leaf {
                    break;
                }
                let sr = total - sl;
                let gain = sl * sl / cl as f64 + sr * sr / cr as f64 - parent;
                if gain > 1e-12 * parent.abs().max(f64::MIN_POSITIVE) && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, b));
                }
            }
        }
        best.map(|(_, f, b)| (f, b))
    }
}

/// Trees on bootstrap resamples with per-split feature subsampling of
/// `ceil(sqrt(p))` features; leaves hold resample means.
pub(crate) fn fit_forest(x: &[f64], cols: usize, y: &[f64], params: &Params, seed: u64) -> Vec<Tree> {
    let binned = Binned::new(x, cols);
    let n = y.len();
    let max_features = ((cols as f64).sqrt().ceil() as usize).max(1);
    (0..params.count("trees"))
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            Grower {
                binned: &binned,
                target: y,
                max_depth: params.count("depth"),
                min_leaf: params.count("min_leaf"),
                max_features: Some(max_features),
                rng: Some(rng),
                leaf_value: |rows: &[usize]| rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64,
                nodes: Vec::new(),
            }
            .grow(rows)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct Boosted {
    init: f64,
    trees: Vec<Tree>,
    /// Mean training pinball loss after the initial constant and each round.
    pub training_loss: Vec<f64>,
}

impl Boosted {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.init + self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }
}

/// Gradient boosting on the pinball loss at `tau`. Each tree is grown on
/// the negative subgradient; its leaves then take the `tau`-quantile of the
/// residuals they hold, shrunk by the learning rate.
pub(crate) fn fit_gbt(x: &[f64], cols: usize, y: &[f64], tau: f64, params: &Params) -> Boosted {
    let n = y.len();
    let binned = Binned::new(x, cols);
    let lr = params.real("learning_rate");
    let init = lower_quantile(&mut y.to_vec(), tau);
    let mut f = vec![init; n];
    let mean_loss = |f: &[f64]| y.iter().zip(f).map(|(&t, &p)| pinball(t, p, tau)).sum::<f64>() / n as f64;
    let mut training_loss = vec![mean_loss(&f)];
    let mut trees = Vec::with_capacity(params.count("trees"));
    let mut grad = vec![0.0; n];
    let mut buf = Vec::new();
    for _ in 0..params.count("trees") {
        for i in 0..n {
            grad[i] = if y[i] > f[i] { tau } else { tau - 1.0 };
        }
        let f_now = &f;
        let tree = Grower {
            binned: &binned,
            target: &grad,
            max_depth: params.count("depth"),
            min_leaf: params.count("min_leaf"),
            max_features: None,
            rng: None,
            leaf_value: |rows: &[usize]| {
                buf.clear();
                buf.extend(rows.iter().map(|&i| y[i] - f_now[i]));
                lr * lower_quantile(&mut buf, tau)
            },
            nodes: Vec::new(),
        }
        .grow((0..n).collect());
        for (i, row) in x.chunks(cols).enumerate() {
            f[i] += tree.predict(row);
        }
        training_loss.push(mean_loss(&f));
        trees.push(tree);
    }
    Boosted { init, trees, training_loss }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogates::{default_hyperparameters, ModelKind};

    fn params(kind: ModelKind, over: &[(&str, f64)]) -> Params {
        let mut p = default_hyperparameters(kind);
        for (k, v) in over {
            p.insert(k.to_string(), *v);
        }
        Params(p)
    }

    #[test]
    fn bins_respect_thresholds() {
        let x: Vec<f64> = (0..600).map(|i| (i % 300) as f64 * 0.5).collect();
        let b = Binned::new(&x, 1);
        assert!(b.cuts[0].len() <= MAX_CUTS);
        for (i, &v) in x.iter().enumerate() {
            let bin = b.bin(i, 0);
            if bin < b.cuts[0].len() {
                assert!(v <= b.cuts[0][bin]);
            }
            if bin > 0 {
                assert!(v > b.cuts[0][bin - 1]);
            }
        }
    }

    #[test]
    fn single_split_step_function() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v < 10.0 { 1.0 } else { 5.0 }).collect();
        let trees = fit_forest(&x, 1, &y, &params(ModelKind::RandomForest, &[("trees", 1.0), ("min_leaf", 1.0)]), 0);
        assert!(trees[0].nodes.len() >= 3);
        let g = fit_gbt(&x, 1, &y, 0.5, &params(ModelKind::Gbt, &[("trees", 100.0), ("min_leaf", 1.0)]));
        assert!((g.predict(&[3.0]) - 1.0).abs() < 1e-3);
        assert!((g.predict(&[15.0]) - 5.0).abs() < 1e-3);
    }

    #[test]
    fn gbt_loss_decreases_each_round() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 500;
        let x: Vec<f64> = (0..n * 3).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = x.chunks(3).map(|r| 10.0 * r[0] + 5.0 * r[1] * r[2] + rng.random_range(0.0..1.0)).collect();
        let g = fit_gbt(&x, 3, &y, 0.5, &params(ModelKind::Gbt, &[("trees", 200.0), ("depth", 3.0)]));
        assert_eq!(g.training_loss.len(), 201);
        for w in g.training_loss.windows(2) {
            assert!(w[1] < w[0], "{} -> {}", w[0], w[1]);
        }
    }
}

//! Dense least-squares helpers shared by feature selection and the linear
//! surrogates.

use nalgebra::{DMatrix, DVector};

/// Smallest pivot, relative to its diagonal entry, accepted by
/// [`solve_spd`].
const PIVOT_TOLERANCE: f64 = 1e-11;

/// Solves `a x = b` for symmetric positive definite `a`. Returns `None`
/// when `a` is numerically singular.
pub(crate) fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    let chol = a.clone().cholesky()?;
    let l = chol.l_dirty();
    for i in 0..n {
        let pivot = l[(i, i)] * l[(i, i)];
        if !(pivot > PIVOT_TOLERANCE * a[(i, i)].abs().max(f64::MIN_POSITIVE)) {
            return None;
        }
    }
    let x = chol.solve(b);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Accumulates `[1, x]ᵀ[1, x]` and `[1, x]ᵀy` over rows.
#[derive(Clone, Debug)]
pub(crate) struct Gram {
    pub xtx: DMatrix<f64>,
    pub xty: DVector<f64>,
}

impl Gram {
    pub fn zeros(features: usize) -> Self {
        Self { xtx: DMatrix::zeros(features + 1, features + 1), xty: DVector::zeros(features + 1) }
    }

    pub fn add_row(&mut self, x: &[f64], y: f64) {
        let p = x.len() + 1;
        let at = |j: usize| if j == 0 { 1.0 } else { x[j - 1] };
        for i in 0..p {
            let xi = at(i);
            self.xty[i] += xi * y;
            for j in i..p {
                self.xtx[(i, j)] += xi * at(j);
            }
        }
    }

    /// Fills the lower triangle after accumulation.
    pub fn symmetrize(&mut self) {
        let p = self.xtx.nrows();
        for i in 0..p {
            for j in 0..i {
                self.xtx[(i, j)] = self.xtx[(j, i)];
            }
        }
    }

    pub fn sub(&self, other: &Gram) -> Gram {
        Gram { xtx: &self.xtx - &other.xtx, xty: &self.xty - &other.xty }
    }

    /// Least-squares coefficients `[intercept, w...]` restricted to the
    /// feature columns `cols`, with `ridge` added to the non-intercept
    /// diagonal.
    pub fn solve(&self, cols: &[usize], ridge: f64) -> Option<Vec<f64>> {
        let idx: Vec<usize> = std::iter::once(0).chain(cols.iter().map(|c| c + 1)).collect();
        let p = idx.len();
        let mut a = DMatrix::zeros(p, p);
        let mut b = DVector::zeros(p);
        for (i, &gi) in idx.iter().enumerate() {
            b[i] = self.xty[gi];
            for (j, &gj) in idx.iter().enumerate() {
                a[(i, j)] = self.xtx[(gi, gj)];
            }
            if i > 0 {
                a[(i, i)] += ridge;
            }
        }
        solve_spd(&a, &b).map(|x| x.iter().copied().collect())
    }
}

/// Ordinary least squares with intercept on row-major `x` (`cols` wide).
/// Falls back to a small ridge term when the design is singular.
pub(crate) fn ols(x: &[f64], cols: usize, y: &[f64]) -> Vec<f64> {
    let mut gram = Gram::zeros(cols);
    for (row, &yi) in x.chunks(cols.max(1)).take(y.len()).zip(y) {
        gram.add_row(if cols == 0 { &[] } else { row }, yi);
    }
    gram.symmetrize();
    let all: Vec<usize> = (0..cols).collect();
    if let Some(w) = gram.solve(&all, 0.0) {
        return w;
    }
    let scale = (1..=cols).map(|i| gram.xtx[(i, i)]).fold(0.0, f64::max).max(1.0);
    let mut ridge = scale * 1e-10;
    loop {
        if let Some(w) = gram.solve(&all, ridge) {
            return w;
        }
        ridge *= 10.0;
    }
}

pub(crate) fn dot_affine(coef: &[f64], x: &[f64]) -> f64 {
    coef[0] + coef[1..].iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_plane() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let a = i as f64;
            let b = ((i * 7) % 5) as f64;
            x.extend([a, b]);
            y.push(1.5 + 2.0 * a - 0.5 * b);
        }
        let w = ols(&x, 2, &y);
        assert!((w[0] - 1.5).abs() < 1e-9 && (w[1] - 2.0).abs() < 1e-9 && (w[2] + 0.5).abs() < 1e-9);
    }

    #[test]
    fn duplicated_column_falls_back_to_ridge() {
        let x: Vec<f64> = (0..10).flat_map(|i| [i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 3.0 * i as f64).collect();
        let w = ols(&x, 2, &y);
        for (row, yi) in x.chunks(2).zip(&y) {
            assert!((dot_affine(&w, row) - yi).abs() < 1e-4);
        }
        let mut gram = Gram::zeros(2);
        for (row, yi) in x.chunks(2).zip(&y) {
            gram.add_row(row, *yi);
        }
        gram.symmetrize();
        assert!(gram.solve(&[0, 1], 0.0).is_none());
        assert!(gram.solve(&[0], 0.0).is_some());
    }
}

//! Banded matrices and a partially pivoted banded LU factorization.
//!
//! Storage is row-wise: row `i` keeps the window of columns
//! `[i - kl, i + ku]`. The factorization widens the upper band to `ku + kl`
//! to hold the fill produced by row interchanges.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        m.data.fill(1.0);
        m
    }

    /// Tridiagonal matrix from its three diagonals. `sub[i]` sits at `(i, i - 1)`
    /// and `sup[i]` at `(i, i + 1)`; `sub[0]` and `sup[n - 1]` are ignored.
    pub fn tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, 1, 1);
        for i in 0..n {
            m.set(i, i, diag[i]);
            if i > 0 {
                m.set(i, i - 1, sub[i]);
            }
            if i + 1 < n {
                m.set(i, i + 1, sup[i]);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i >= self.n || j >= self.n || !self.in_band(i, j) {
            return 0.0;
        }
        self.data[i * self.width() + (j + self.kl - i)]
    }

    /// Panics when `(i, j)` falls outside the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let w = self.width();
        self.data[i * w + (j + self.kl - i)] = value;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let v = self.get(i, j);
        self.set(i, j, v + value);
    }

    pub fn add_diagonal(&mut self, values: &[f64]) {
        for (i, v) in values.iter().enumerate() {
            self.add(i, i, *v);
        }
    }

    #[inline]
    fn columns(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.columns(i).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// Matrix product; the result has bandwidths `(kl + other.kl, ku + other.ku)`.
    pub fn mul(&self, other: &BandMatrix) -> BandMatrix {
        assert_eq!(self.n, other.n);
        let mut out = BandMatrix::zeros(self.n, self.kl + other.kl, self.ku + other.ku);
        for i in 0..self.n {
            for k in self.columns(i) {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in other.columns(k) {
                    out.add(i, j, a * other.get(k, j));
                }
            }
        }
        out
    }

    /// Sum of two band matrices of the same dimension.
    pub fn plus(&self, other: &BandMatrix) -> BandMatrix {
        assert_eq!(self.n, other.n);
        let mut out = BandMatrix::zeros(self.n, self.kl.max(other.kl), self.ku.max(other.ku));
        for i in 0..self.n {
            for j in self.columns(i) {
                out.add(i, j, self.get(i, j));
            }
            for j in other.columns(i) {
                out.add(i, j, other.get(i, j));
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> BandMatrix {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn lu(&self) -> Result<BandLu> {
        BandLu::factor(self)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let lu = self.lu()?;
        let mut x = rhs.to_vec();
        lu.solve_in_place(&mut x);
        Ok(x)
    }
}

/// `P A = L U` with unit lower `L` of bandwidth `kl` and upper `U` of
/// bandwidth `ku + kl`.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    // row i stores columns [i - kl, i + ku], ku already widened
    rows: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    #[inline]
    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku);
        i * self.width() + (j + self.kl - i)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            0.0
        } else {
            self.rows[self.idx(i, j)]
        }
    }

    fn factor(a: &BandMatrix) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let ku = a.ku + a.kl;
        let mut lu = BandLu { n, kl, ku, rows: vec![0.0; n * (kl + ku + 1)], pivots: vec![0; n] };
        for i in 0..n {
            for j in a.columns(i) {
                let k = lu.idx(i, j);
                lu.rows[k] = a.get(i, j);
            }
        }

        let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = lu.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || best <= scale * f64::EPSILON * 1e-3 {
                return Err(Error::Singular(k));
            }
            lu.pivots[k] = p;
            let last_col = (k + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (a_idx, b_idx) = (lu.idx(k, j), lu.idx(p, j));
                    lu.rows.swap(a_idx, b_idx);
                }
            }
            let pivot = lu.get(k, k);
            for i in k + 1..=last_row {
                let li = lu.idx(i, k);
                let factor = lu.rows[li] / pivot;
                lu.rows[li] = factor;
                if factor == 0.0 {
                    continue;
                }
                for j in k + 1..=last_col {
                    let kj = lu.get(k, j);
                    let ij = lu.idx(i, j);
                    lu.rows[ij] -= factor * kj;
                }
            }
        }
        Ok(lu)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        // forward: apply interchanges and unit-lower elimination in order
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                b[i] -= self.get(i, k) * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + self.ku).min(n - 1) {
                s -= self.get(i, j) * b[j];
            }
            b[i] = s / self.get(i, i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    #[test]
    fn tridiagonal_solve_recovers_rhs() {
        let n = 12;
        let a = BandMatrix::tridiagonal(&vec![-1.0; n], &vec![2.5; n], &vec![-1.2; n]);
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.matvec(&x);
        let y = a.solve(&b).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        // leading zero pivot forces an interchange
        let mut a = BandMatrix::zeros(5, 2, 2);
        let entries = [
            (0, 0, 0.0), (0, 1, 1.0), (0, 2, 2.0),
            (1, 0, 3.0), (1, 1, 1.0), (1, 2, -1.0), (1, 3, 0.5),
            (2, 0, 1.0), (2, 1, -2.0), (2, 2, 4.0), (2, 3, 1.0), (2, 4, 1.0),
            (3, 1, 1.0), (3, 2, 1.0), (3, 3, 3.0), (3, 4, -1.0),
            (4, 2, 2.0), (4, 3, 1.0), (4, 4, 5.0),
        ];
        for (i, j, v) in entries {
            a.set(i, j, v);
        }
        let x = vec![1.0, -2.0, 0.5, 3.0, -1.0];
        let b = dense_matvec(&a.to_dense(), &x);
        let y = a.solve(&b).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12, "{x:?} vs {y:?}");
        }
    }

    #[test]
    fn product_matches_dense() {
        let n = 7;
        let a = BandMatrix::tridiagonal(&vec![-1.0; n], &vec![2.0; n], &vec![-3.0; n]);
        let b = BandMatrix::tridiagonal(&vec![0.5; n], &vec![1.0; n], &vec![0.25; n]);
        let c = a.mul(&b);
        assert_eq!((c.lower_bandwidth(), c.upper_bandwidth()), (2, 2));
        let (da, db) = (a.to_dense(), b.to_dense());
        for i in 0..n {
            for j in 0..n {
                let expect: f64 = (0..n).map(|k| da[i][k] * db[k][j]).sum();
                assert!((c.get(i, j) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = BandMatrix::zeros(3, 1, 1);
        assert!(matches!(a.lu(), Err(Error::Singular(0))));
    }
}

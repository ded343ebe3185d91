//! Uniform mesh on `[0, L]`, trapezoid quadrature and the discrete
//! operators shared by the energy, the dual metric and both solvers.

use crate::banded::BandMatrix;
use crate::{Error, Result};

/// Uniform nodes `x_i = i h`, `i = 0..n`, with trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    length: f64,
    spacing: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    laplacian: DiscreteLaplacian,
}

pub fn make_grid(length: f64, nodes: usize) -> Result<Grid> {
    Grid::new(length, nodes)
}

impl Grid {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 nodes, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        let spacing = length / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| i as f64 * spacing).collect();
        nodes[n - 1] = length;
        let mut weights = vec![spacing; n];
        weights[0] = 0.5 * spacing;
        weights[n - 1] = 0.5 * spacing;
        Ok(Self { length, spacing, nodes, weights, laplacian: DiscreteLaplacian::new(n, spacing) })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn laplacian(&self) -> &DiscreteLaplacian {
        &self.laplacian
    }

    pub(crate) fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: values.len() });
        }
        Ok(())
    }

    /// Evaluate `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    pub fn quadrature(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f)?;
        Ok(self.integrate(f))
    }

    #[inline]
    pub(crate) fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// Weighted discrete L2 product `sum_i w_i f_i g_i`.
    #[inline]
    pub(crate) fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
    }

    /// Second-order central first derivative; one-sided second-order
    /// stencils at both ends.
    pub fn central_derivative(&self, q: &[f64]) -> Vec<f64> {
        let n = self.len();
        let h2 = 2.0 * self.spacing;
        let mut d = vec![0.0; n];
        d[0] = (-3.0 * q[0] + 4.0 * q[1] - q[2]) / h2;
        for i in 1..n - 1 {
            d[i] = (q[i + 1] - q[i - 1]) / h2;
        }
        d[n - 1] = (3.0 * q[n - 1] - 4.0 * q[n - 2] + q[n - 3]) / h2;
        d
    }

    /// First-derivative operator on the free nodes `1..n` as a band matrix
    /// (the value at node 0 is the Dirichlet zero and drops out).
    pub fn derivative_matrix(&self, scheme: DerivativeStencil) -> BandMatrix {
        let m = self.len() - 1;
        let inv = 1.0 / (2.0 * self.spacing);
        let mut d = BandMatrix::zeros(m, 2, 1);
        // free index r is node r + 1
        for r in 0..m {
            let node = r + 1;
            let last = node == m;
            match (scheme, node, last) {
                (_, _, true) => {
                    d.set(r, r, 3.0 * inv);
                    d.set(r, r - 1, -4.0 * inv);
                    if r >= 2 {
                        d.set(r, r - 2, inv);
                    }
                }
                (DerivativeStencil::Central, _, false) | (DerivativeStencil::Upwind, 1, false) => {
                    d.set(r, r + 1, inv);
                    if r >= 1 {
                        d.set(r, r - 1, -inv);
                    }
                }
                (DerivativeStencil::Upwind, _, false) => {
                    d.set(r, r, 3.0 * inv);
                    d.set(r, r - 1, -4.0 * inv);
                    if r >= 2 {
                        d.set(r, r - 2, inv);
                    }
                }
            }
        }
        d
    }
}

/// Stencil for the transport derivative in the strong-form oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeStencil {
    /// Second-order central differences.
    Central,
    /// Second-order backward (upwind for positive velocity); central at the
    /// first free node where only one left neighbour exists.
    Upwind,
}

/// `A ~ -d^2/dx^2` on the free nodes `1..n` with `v(0) = 0` imposed
/// strongly and `v'(L) = 0` through a mirrored ghost node.
///
/// `A` is self-adjoint with respect to the trapezoid weights, and
/// `(A v, v)_w` equals the forward-difference `|v|_V^2` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaplacian {
    n: usize,
    inv_h2: f64,
    // Thomas coefficients for rows of the free-node system
    c_prime: Vec<f64>,
    denom: Vec<f64>,
}

impl DiscreteLaplacian {
    fn new(n: usize, h: f64) -> Self {
        let inv_h2 = 1.0 / (h * h);
        let m = n - 1;
        let (sub, diag, sup) = Self::diagonals(m, inv_h2);
        let mut c_prime = vec![0.0; m];
        let mut denom = vec![0.0; m];
        denom[0] = diag[0];
        c_prime[0] = sup[0] / denom[0];
        for r in 1..m {
            denom[r] = diag[r] - sub[r] * c_prime[r - 1];
            c_prime[r] = if r + 1 < m { sup[r] / denom[r] } else { 0.0 };
        }
        Self { n, inv_h2, c_prime, denom }
    }

    fn diagonals(m: usize, inv_h2: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut sub = vec![-inv_h2; m];
        let diag = vec![2.0 * inv_h2; m];
        let mut sup = vec![-inv_h2; m];
        sub[0] = 0.0;
        sup[m - 1] = 0.0;
        // ghost node v_n = v_{n-2}
        sub[m - 1] = -2.0 * inv_h2;
        (sub, diag, sup)
    }

    /// Number of free nodes.
    pub fn dim(&self) -> usize {
        self.n - 1
    }

    /// `A` as an `(n-1) x (n-1)` band matrix over the free nodes.
    pub fn band(&self) -> BandMatrix {
        let (sub, diag, sup) = Self::diagonals(self.dim(), self.inv_h2);
        BandMatrix::tridiagonal(&sub, &diag, &sup)
    }

    /// `A v` on a full nodal vector; `v[0]` is treated as zero and the
    /// returned entry 0 is zero.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 1..n - 1 {
            let left = if i == 1 { 0.0 } else { v[i - 1] };
            out[i] = (2.0 * v[i] - left - v[i + 1]) * self.inv_h2;
        }
        out[n - 1] = 2.0 * (v[n - 1] - v[n - 2]) * self.inv_h2;
        out
    }

    /// Solve `A z = f` at the free nodes; returns a full nodal vector with
    /// `z[0] = 0`. `f[0]` is ignored.
    pub fn solve(&self, f: &[f64]) -> Vec<f64> {
        let m = self.dim();
        let mut d = vec![0.0; m];
        let sub_last = -2.0 * self.inv_h2;
        d[0] = f[1] / self.denom[0];
        for r in 1..m {
            let sub = if r + 1 == m { sub_last } else { -self.inv_h2 };
            d[r] = (f[r + 1] - sub * d[r - 1]) / self.denom[r];
        }
        let mut z = vec![0.0; self.n];
        z[m] = d[m - 1];
        for r in (0..m - 1).rev() {
            z[r + 1] = d[r] - self.c_prime[r] * z[r + 2];
        }
        z
    }
}

//! The spaces `V = {u in H^1(0,L) : u(0) = 0}` and its dual at the discrete
//! level.
//!
//! `|u|_V^2` is the integral of the squared forward differences, and a dual
//! element is stored through its Riesz lift `z` solving `A z = f` with the
//! grid's [`DiscreteLaplacian`](crate::DiscreteLaplacian). Because the same
//! `A` defines the energy gradient and the lift, the summation-by-parts
//! identities `(A v, v)_w = |v|_V^2` and `<f, v> = (z_f, v)_V = (f, v)_w`
//! hold to rounding error.

use std::ops::Deref;

use crate::{Error, Grid, Result, Trajectory};

/// Nodal values of a function in `V`; `u[0] == 0` and every value finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        grid.check_len(&values)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if values[0] != 0.0 {
            return Err(Error::NotInV(values[0]));
        }
        Ok(Self(values))
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self(vec![0.0; grid.len()])
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.sample(f))
    }

    /// Caller guarantees finiteness; the value at node 0 is overwritten.
    pub(crate) fn from_raw(mut values: Vec<f64>) -> Self {
        values[0] = 0.0;
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn difference(&self, other: &Field) -> Vec<f64> {
        self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()
    }

    /// `self + factor * other`
    pub fn axpy(&self, factor: f64, other: &Field) -> Field {
        Field(self.0.iter().zip(&other.0).map(|(a, b)| a + factor * b).collect())
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// An element of `V'` represented by its Riesz lift `z in V`, so that
/// `|phi|_{V'} = |z|_V`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualRep {
    lift: Field,
}

impl DualRep {
    pub fn lift(&self) -> &Field {
        &self.lift
    }

    pub fn norm(&self, grid: &Grid) -> f64 {
        v_norm(grid, &self.lift)
    }

    pub fn inner(&self, other: &DualRep, grid: &Grid) -> f64 {
        v_inner(grid, &self.lift, &other.lift)
    }

    /// Residual `max |A z - f|` over the free nodes, relative to `max |f|`.
    pub fn round_trip_error(&self, grid: &Grid, f: &[f64]) -> f64 {
        let back = grid.laplacian().apply(&self.lift);
        let scale = f[1..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = back[1..].iter().zip(&f[1..]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if scale == 0.0 {
            err
        } else {
            err / scale
        }
    }
}

fn check_finite(f: &[f64]) -> Result<()> {
    match f.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

/// Lift of an `L2` function: `A z = f` with `z(0) = 0` and the ghost-node
/// Neumann closure at `x = L`. The value `f[0]` does not enter.
pub fn riesz_lift(grid: &Grid, f: &[f64]) -> Result<DualRep> {
    grid.check_len(f)?;
    check_finite(f)?;
    Ok(DualRep { lift: Field::from_raw(grid.laplacian().solve(f)) })
}

pub fn vprime_norm(grid: &Grid, f: &[f64]) -> Result<f64> {
    Ok(riesz_lift(grid, f)?.norm(grid))
}

pub fn vprime_inner(grid: &Grid, f: &[f64], g: &[f64]) -> Result<f64> {
    let zf = riesz_lift(grid, f)?;
    let zg = riesz_lift(grid, g)?;
    Ok(zf.inner(&zg, grid))
}

/// Duality pairing `<f, v>_{V',V} = (z_f, v)_V`.
pub fn duality_pairing(grid: &Grid, f: &[f64], v: &Field) -> Result<f64> {
    grid.check_len(v)?;
    Ok(v_inner(grid, riesz_lift(grid, f)?.lift(), v))
}

pub fn v_norm(grid: &Grid, u: &Field) -> f64 {
    v_norm_of_values(grid, u)
}

pub fn v_inner(grid: &Grid, u: &Field, v: &Field) -> f64 {
    let h = grid.spacing();
    u.windows(2).zip(v.windows(2)).map(|(a, b)| (a[1] - a[0]) * (b[1] - b[0])).sum::<f64>() / h
}

/// Forward-difference `V` norm of raw nodal values (node 0 taken as given).
pub(crate) fn v_norm_of_values(grid: &Grid, u: &[f64]) -> f64 {
    let h = grid.spacing();
    (u.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / h).sqrt()
}

/// Checked version of the `V` norm for arbitrary nodal values.
pub fn try_v_norm(grid: &Grid, u: &[f64]) -> Result<f64> {
    grid.check_len(u)?;
    Ok(v_norm_of_values(grid, u))
}

pub fn l2_norm(grid: &Grid, f: &[f64]) -> f64 {
    grid.dot(f, f).sqrt()
}

/// `L^inf` norm.
pub fn sup_norm(f: &[f64]) -> f64 {
    f.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Time average of `q'` over `((k-1) tau, k tau]`: the piecewise-linear
/// time interpolant of `q` is integrated exactly (trapezoid on the samples
/// inside the interval), then differentiated with central differences.
pub fn average_forcing(grid: &Grid, q: &Trajectory, tau: f64, k: usize) -> Result<Vec<f64>> {
    let averaged = time_average(q, tau, k)?;
    grid.check_len(&averaged)?;
    Ok(grid.central_derivative(&averaged))
}

fn time_average(q: &Trajectory, tau: f64, k: usize) -> Result<Vec<f64>> {
    let times = q.times();
    let (lo, hi) = (times[0], *times.last().unwrap());
    let (a, b) = ((k as f64 - 1.0) * tau, k as f64 * tau);
    let slack = 1e-9 * tau;
    if k == 0 || !(tau > 0.0) || a < lo - slack || b > hi + slack {
        return Err(Error::IntervalOutOfRange { start: a, end: b, lo, hi });
    }
    let (a, b) = (a.max(lo), b.min(hi));
    let n = q.snapshots()[0].len();
    let mut acc = vec![0.0; n];
    let snaps = q.snapshots();
    // first segment whose right end exceeds a
    let start = times.partition_point(|&t| t <= a + slack).max(1);
    for j in start..times.len() {
        let (t0, t1) = (times[j - 1], times[j]);
        if t0 >= b - slack {
            break;
        }
        let (s0, s1) = (t0.max(a), t1.min(b));
        if s1 <= s0 {
            continue;
        }
        // values of the linear interpolant at s0, s1
        let (c0, c1) = ((s0 - t0) / (t1 - t0), (s1 - t0) / (t1 - t0));
        let half = 0.5 * (s1 - s0);
        for ((out, u), v) in acc.iter_mut().zip(snaps[j - 1].iter()).zip(snaps[j].iter()) {
            let y0 = u + c0 * (v - u);
            let y1 = u + c1 * (v - u);
            *out += half * (y0 + y1);
        }
    }
    let inv = 1.0 / (b - a);
    acc.iter_mut().for_each(|v| *v *= inv);
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::make_grid;
    use crate::trajectory::uniform_times;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn field_membership() {
        let g = make_grid(1.0, 5).unwrap();
        assert!(matches!(Field::new(&g, vec![0.1, 0.0, 0.0, 0.0, 0.0]), Err(Error::NotInV(_))));
        assert!(matches!(Field::new(&g, vec![0.0, f64::NAN, 0.0, 0.0, 0.0]), Err(Error::NonFinite(1))));
        assert!(matches!(Field::new(&g, vec![0.0; 4]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn lift_of_zero_is_zero() {
        let g = make_grid(1.0, 21).unwrap();
        let z = riesz_lift(&g, &[0.0; 21]).unwrap();
        assert!(z.lift().iter().all(|&v| v == 0.0));
        assert_eq!(vprime_norm(&g, &[0.0; 21]).unwrap(), 0.0);
    }

    #[test]
    fn lift_analytic_profiles() {
        let g = make_grid(1.0, 101).unwrap();
        let z = riesz_lift(&g, &vec![1.0; 101]).unwrap();
        for (x, v) in g.nodes().iter().zip(z.lift().iter()) {
            assert!((v - (x - x * x / 2.0)).abs() < 1e-3);
        }
        assert!((z.lift()[100] - 0.5).abs() < 1e-3);

        let f = g.sample(|x| x);
        let z = riesz_lift(&g, &f).unwrap();
        for (x, v) in g.nodes().iter().zip(z.lift().iter()) {
            assert!((v - (x / 2.0 - x.powi(3) / 6.0)).abs() < 1e-3);
        }
    }

    #[test]
    fn dual_norm_examples() {
        let g = make_grid(1.0, 101).unwrap();
        let one = vprime_norm(&g, &vec![1.0; 101]).unwrap();
        assert!((one - (1.0f64 / 3.0).sqrt()).abs() < 1e-3);
        let x = vprime_norm(&g, &g.sample(|x| x)).unwrap();
        assert!((x - (2.0f64 / 15.0).sqrt()).abs() < 1e-3);
        let ip = vprime_inner(&g, &vec![1.0; 101], &vec![1.0; 101]).unwrap();
        assert!((ip - one * one).abs() < 1e-14);
        assert!(vprime_norm(&g, &[1.0; 3]).is_err());
    }

    #[test]
    fn v_norm_examples() {
        let g = make_grid(1.0, 101).unwrap();
        assert_eq!(v_norm(&g, &Field::zeros(&g)), 0.0);
        let lin = Field::from_fn(&g, |x| x).unwrap();
        assert!((v_norm(&g, &lin) - 1.0).abs() < 1e-12);
        let g = make_grid(1.0, 201).unwrap();
        let s = Field::from_fn(&g, |x| (FRAC_PI_2 * x).sin()).unwrap();
        assert!((v_norm(&g, &s) - PI / 8f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn transpose_identity() {
        let g = make_grid(1.0, 201).unwrap();
        let f = g.sample(|x| (2.0 * x).cos() + 1.0);
        let v = Field::from_fn(&g, |x| x * (1.5 - x)).unwrap();
        let pairing = duality_pairing(&g, &f, &v).unwrap();
        let direct = g.quadrature(&f.iter().zip(v.iter()).map(|(a, b)| a * b).collect::<Vec<_>>()).unwrap();
        assert!((pairing - direct).abs() < 1e-10 * direct.abs().max(1.0));
    }

    #[test]
    fn forcing_average_examples() {
        let g = make_grid(1.0, 11).unwrap();
        let times = uniform_times(1.0, 2);
        let snaps = times.iter().map(|&t| Field::from_fn(&g, |x| t * x).unwrap()).collect();
        let q = Trajectory::sampled(times, snaps).unwrap();
        let first = average_forcing(&g, &q, 0.5, 1).unwrap();
        assert!(first.iter().all(|v| (v - 0.25).abs() < 1e-12), "{first:?}");
        let second = average_forcing(&g, &q, 0.5, 2).unwrap();
        assert!(second.iter().all(|v| (v - 0.75).abs() < 1e-12));
        assert!(matches!(average_forcing(&g, &q, 0.5, 3), Err(Error::IntervalOutOfRange { .. })));
        assert!(average_forcing(&g, &q, 0.5, 0).is_err());
    }

    #[test]
    fn forcing_average_on_finer_samples() {
        // q = t x sampled 4x finer than tau; the average is still exact
        let g = make_grid(1.0, 11).unwrap();
        let times = uniform_times(1.0, 8);
        let snaps = times.iter().map(|&t| Field::from_fn(&g, |x| t * t * x).unwrap()).collect();
        let q = Trajectory::sampled(times, snaps).unwrap();
        let avg = average_forcing(&g, &q, 0.5, 2).unwrap();
        // trapezoid of t^2 on 4 equal pieces of (0.5, 1]
        let ts: Vec<f64> = (0..=4).map(|i| 0.5 + 0.125 * i as f64).collect();
        let tr: f64 = ts.windows(2).map(|w| 0.0625 * (w[0] * w[0] + w[1] * w[1])).sum::<f64>() / 0.5;
        assert!(avg.iter().all(|v| (v - tr).abs() < 1e-12));
    }

    #[test]
    fn constant_forcing_average_is_profile_derivative() {
        let g = make_grid(2.0, 21).unwrap();
        let p = Field::from_fn(&g, |x| x * x).unwrap();
        let q = Trajectory::constant(p.clone(), 1.0, 10).unwrap();
        let avg = average_forcing(&g, &q, 0.1, 4).unwrap();
        let d = g.central_derivative(&p);
        for (a, b) in avg.iter().zip(&d) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

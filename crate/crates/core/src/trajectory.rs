//! Time-sampled fields: solver output and forcing histories.

use crate::hilbert::Field;
use crate::scheme::StepRecord;
use crate::{Error, Grid, Result};

/// Snapshots `u^k` at times `t_k`, with per-step diagnostics when produced
/// by a solver (`records[k - 1]` belongs to step `k`).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    snapshots: Vec<Field>,
    records: Vec<StepRecord>,
    beta: f64,
}

impl Trajectory {
    pub(crate) fn start(initial: Field, beta: f64, steps: usize) -> Self {
        let mut times = Vec::with_capacity(steps + 1);
        times.push(0.0);
        let mut snapshots = Vec::with_capacity(steps + 1);
        snapshots.push(initial);
        Self { times, snapshots, records: Vec::with_capacity(steps), beta }
    }

    pub(crate) fn push(&mut self, time: f64, u: Field, record: StepRecord) {
        self.times.push(time);
        self.snapshots.push(u);
        self.records.push(record);
    }

    /// A bare time series, e.g. a prescribed forcing. Times must be
    /// strictly increasing and every field must live on the same grid.
    pub fn sampled(times: Vec<f64>, snapshots: Vec<Field>) -> Result<Self> {
        if times.is_empty() || times.len() != snapshots.len() {
            return Err(Error::InvalidParameter(format!(
                "{} times for {} snapshots",
                times.len(),
                snapshots.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("sample times must be strictly increasing".into()));
        }
        let n = snapshots[0].len();
        if let Some(f) = snapshots.iter().find(|f| f.len() != n) {
            return Err(Error::LengthMismatch { expected: n, got: f.len() });
        }
        Ok(Self { times, snapshots, records: Vec::new(), beta: 0.0 })
    }

    /// The same profile at every time of a uniform grid with `steps` intervals.
    pub fn constant(profile: Field, horizon: f64, steps: usize) -> Result<Self> {
        let times = uniform_times(horizon, steps);
        let snapshots = vec![profile; times.len()];
        Self::sampled(times, snapshots)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[Field] {
        &self.snapshots
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn initial(&self) -> &Field {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Field {
        self.snapshots.last().expect("non-empty")
    }

    /// Interval index `k` with `t_{k-1} < t <= t_k`, clamped to the range.
    fn bracket(&self, t: f64) -> usize {
        let k = self.times.partition_point(|&s| s < t);
        k.clamp(1, self.times.len() - 1)
    }

    /// Piecewise-affine interpolant in time.
    pub fn affine_at(&self, t: f64) -> Vec<f64> {
        if self.times.len() == 1 {
            return self.snapshots[0].to_vec();
        }
        let k = self.bracket(t);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let (a, b) = (&self.snapshots[k - 1], &self.snapshots[k]);
        a.iter().zip(b.iter()).map(|(x, y)| x + s * (y - x)).collect()
    }

    /// Piecewise-constant interpolant: `u^k` on `(t_{k-1}, t_k]`, `u^0` at
    /// `t <= t_0`.
    pub fn constant_at(&self, t: f64) -> &Field {
        if t <= self.times[0] || self.times.len() == 1 {
            return &self.snapshots[0];
        }
        &self.snapshots[self.bracket(t)]
    }

    /// `sup_k |u^k - other^k|_V` over matching snapshots.
    pub fn sup_v_distance(&self, other: &Trajectory, grid: &Grid) -> Result<f64> {
        self.check_aligned(other)?;
        Ok(self
            .snapshots
            .iter()
            .zip(&other.snapshots)
            .map(|(a, b)| crate::hilbert::v_norm_of_values(grid, &a.difference(b)))
            .fold(0.0, f64::max))
    }

    /// `|u - other|_{L2(0,T;V)}` by trapezoid quadrature over the samples.
    pub fn l2v_distance(&self, other: &Trajectory, grid: &Grid) -> Result<f64> {
        self.check_aligned(other)?;
        let sq: Vec<f64> = self
            .snapshots
            .iter()
            .zip(&other.snapshots)
            .map(|(a, b)| crate::hilbert::v_norm_of_values(grid, &a.difference(b)).powi(2))
            .collect();
        Ok(time_trapezoid(&self.times, &sq).sqrt())
    }

    /// `|u|_{L2(0,T;V)}`.
    pub fn l2v_norm(&self, grid: &Grid) -> f64 {
        let sq: Vec<f64> =
            self.snapshots.iter().map(|u| crate::hilbert::v_norm(grid, u).powi(2)).collect();
        time_trapezoid(&self.times, &sq).sqrt()
    }

    fn check_aligned(&self, other: &Trajectory) -> Result<()> {
        if self.times.len() != other.times.len() {
            return Err(Error::LengthMismatch { expected: self.times.len(), got: other.times.len() });
        }
        let scale = self.horizon().abs().max(1.0);
        if self.times.iter().zip(&other.times).any(|(a, b)| (a - b).abs() > 1e-12 * scale) {
            return Err(Error::InvalidParameter("trajectories sampled at different times".into()));
        }
        Ok(())
    }
}

/// `t_k = k T / N`, `k = 0..=N`, with the last entry pinned to `T`.
pub fn uniform_times(horizon: f64, steps: usize) -> Vec<f64> {
    let tau = horizon / steps as f64;
    let mut t: Vec<f64> = (0..=steps).map(|k| k as f64 * tau).collect();
    if let Some(last) = t.last_mut() {
        *last = horizon;
    }
    t
}

pub(crate) fn time_trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

//! Verification studies: the energy equality, the uniform a-priori bound,
//! the dissipativity estimate, the `O(beta)` rate as transport vanishes, and
//! Lipschitz dependence on the initial datum.

use rayon::prelude::*;
use serde::Serialize;

use crate::coupling::{solve_fixed_point, PicardConfig};
use crate::error::Error;
use crate::hilbert::{self, Field};
use crate::potential::PotentialModel;
use crate::scheme::{chemical_potential, energy, run_minimizing_movements, StepConfig};
use crate::{Grid, Result, Trajectory};

/// Where the dissipation and transport terms of the energy residual are
/// evaluated within a step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Evaluation {
    /// At `u_k`, matching the implicit scheme.
    #[default]
    RightEndpoint,
    /// Average of the values at `u_{k-1}` and `u_k`.
    Midpoint,
}

/// Terms of `dE/dt + |mu|_V^2 + beta int u' mu = 0` along a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    /// `E(u_k)`, `k = 0..=N`.
    pub energy: Vec<f64>,
    /// `|mu_k|_V^2`, `k = 1..=N` (evaluation-dependent).
    pub dissipation: Vec<f64>,
    /// `beta int u_k' mu_k`, `k = 1..=N`.
    pub cross: Vec<f64>,
    /// `r_k = (E_k - E_{k-1}) / tau_k + |mu_k|_V^2 + beta int u_k' mu_k`.
    pub residuals: Vec<f64>,
}

impl EnergyReport {
    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn median_abs_residual(&self) -> f64 {
        let mut r: Vec<f64> = self.residuals.iter().map(|r| r.abs()).collect();
        if r.is_empty() {
            return 0.0;
        }
        r.sort_by(f64::total_cmp);
        let n = r.len();
        if n % 2 == 1 {
            r[n / 2]
        } else {
            0.5 * (r[n / 2 - 1] + r[n / 2])
        }
    }

    /// Largest step of the underlying trajectory.
    pub fn max_step(&self) -> f64 {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// `(|mu|_V^2, int u' mu)` at one snapshot.
fn balance_terms(grid: &Grid, u: &Field, model: &PotentialModel) -> (f64, f64) {
    let mu = chemical_potential(grid, u, model).to_field();
    let du = grid.central_derivative(u);
    (hilbert::v_norm(grid, &mu).powi(2), grid.dot(&du, &mu))
}

/// Residuals of the discrete energy equality with right-endpoint evaluation.
pub fn energy_equality_residual(grid: &Grid, traj: &Trajectory, model: &PotentialModel) -> EnergyReport {
    energy_equality_residual_with(grid, traj, model, Evaluation::RightEndpoint)
}

pub fn energy_equality_residual_with(
    grid: &Grid,
    traj: &Trajectory,
    model: &PotentialModel,
    evaluation: Evaluation,
) -> EnergyReport {
    let beta = traj.beta();
    let energies: Vec<f64> = traj.snapshots().iter().map(|u| energy(grid, u, model)).collect();
    let terms: Vec<(f64, f64)> = traj.snapshots().iter().map(|u| balance_terms(grid, u, model)).collect();
    let n = traj.steps();
    let mut dissipation = Vec::with_capacity(n);
    let mut cross = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    for k in 1..=n {
        let tau = traj.times()[k] - traj.times()[k - 1];
        let (d, c) = match evaluation {
            Evaluation::RightEndpoint => terms[k],
            Evaluation::Midpoint => (0.5 * (terms[k].0 + terms[k - 1].0), 0.5 * (terms[k].1 + terms[k - 1].1)),
        };
        let c = beta * c;
        dissipation.push(d);
        cross.push(c);
        residuals.push((energies[k] - energies[k - 1]) / tau + d + c);
    }
    EnergyReport { times: traj.times().to_vec(), energy: energies, dissipation, cross, residuals }
}

/// The uniform bound `|u(t)|_V^2 <= 2 (E(u_0) + L K0) exp(beta^2 L^2 T)`.
#[derive(Debug, Clone, Serialize)]
pub struct AprioriReport {
    pub bound: f64,
    pub times: Vec<f64>,
    /// `|u_k|_V^2`
    pub values: Vec<f64>,
    /// `bound - |u_k|_V^2`
    pub margins: Vec<f64>,
    /// `(t, margin)` at the smallest margin.
    pub worst: (f64, f64),
}

impl AprioriReport {
    pub fn passed(&self) -> bool {
        self.worst.1 >= 0.0
    }
}

pub fn apriori_bound(grid: &Grid, u0: &Field, beta: f64, horizon: f64, model: &PotentialModel) -> f64 {
    let l = grid.length();
    2.0 * (energy(grid, u0, model) + l * model.k0) * (beta * beta * l * l * horizon).exp()
}

pub fn apriori_bound_check(grid: &Grid, traj: &Trajectory, model: &PotentialModel) -> AprioriReport {
    let bound = apriori_bound(grid, traj.initial(), traj.beta(), traj.horizon(), model);
    let values: Vec<f64> = traj.snapshots().iter().map(|u| hilbert::v_norm(grid, u).powi(2)).collect();
    let margins: Vec<f64> = values.iter().map(|v| bound - v).collect();
    let worst = traj
        .times()
        .iter()
        .zip(&margins)
        .fold((0.0, f64::INFINITY), |w, (&t, &m)| if m < w.1 { (t, m) } else { w });
    AprioriReport { bound, times: traj.times().to_vec(), values, margins, worst }
}

/// The Gronwall estimate `E(u(t)) <= (E(u_0) - D/C) exp(-C t) + D/C`.
#[derive(Debug, Clone, Serialize)]
pub struct DissipativityReport {
    /// `C_beta = 1/L^4 - beta^2 L^2`
    pub c_beta: f64,
    /// `D_beta = K1/L^3 + beta^2 L^3 K0`
    pub d_beta: f64,
    pub eps_disc: f64,
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub bound: Vec<f64>,
    /// `bound + eps_disc - energy`
    pub margins: Vec<f64>,
}

impl DissipativityReport {
    pub fn passed(&self) -> bool {
        self.margins.iter().all(|&m| m >= 0.0)
    }

    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `(C_beta, D_beta)`; fails when `beta >= L^{-3}`.
pub fn dissipativity_constants(length: f64, beta: f64, model: &PotentialModel) -> Result<(f64, f64)> {
    let c = length.powi(-4) - beta * beta * length * length;
    if !(c > 0.0) {
        return Err(Error::BetaAboveThreshold { beta, threshold: length.powi(-3) });
    }
    let d = model.k1 / length.powi(3) + beta * beta * length.powi(3) * model.k0;
    Ok((c, d))
}

pub fn dissipativity_check(grid: &Grid, traj: &Trajectory, model: &PotentialModel) -> Result<DissipativityReport> {
    let (c, d) = dissipativity_constants(grid.length(), traj.beta(), model)?;
    let report = energy_equality_residual(grid, traj, model);
    let eps_disc = (10.0 * report.max_abs_residual() * report.max_step()).max(1e-8);
    let e0 = report.energy[0];
    let plateau = d / c;
    let bound: Vec<f64> = traj.times().iter().map(|&t| (e0 - plateau) * (-c * t).exp() + plateau).collect();
    let margins = bound.iter().zip(&report.energy).map(|(b, e)| b + eps_disc - e).collect();
    Ok(DissipativityReport {
        c_beta: c,
        d_beta: d,
        eps_disc,
        times: report.times,
        energy: report.energy,
        bound,
        margins,
    })
}

/// Least-squares fit `y = slope x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}

/// Shared parameters of the member runs in a study.
#[derive(Debug, Clone)]
pub struct StudySetup<'a> {
    pub grid: &'a Grid,
    pub model: &'a PotentialModel,
    pub horizon: f64,
    pub steps: usize,
    pub step: StepConfig,
    pub picard: PicardConfig,
}

impl StudySetup<'_> {
    fn solve(&self, u0: &Field, beta: f64) -> Result<Trajectory> {
        if beta == 0.0 {
            return run_minimizing_movements(self.grid, u0, None, self.horizon, self.steps, 0.0, self.model, &self.step);
        }
        solve_fixed_point(self.grid, u0, self.horizon, self.steps, beta, self.model, &self.step, &self.picard)
            .map(|s| s.trajectory)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub betas: Vec<f64>,
    /// `sup_t |u_beta(t) - u_0(t)|_V` per entry of `betas`.
    pub distances: Vec<f64>,
    /// Log-log fit over the positive `betas`.
    pub slope: f64,
    pub intercept: f64,
}

impl RateReport {
    /// `max / min` of `distance / beta` over the positive `betas`.
    pub fn ratio_spread(&self) -> f64 {
        let r: Vec<f64> =
            self.betas.iter().zip(&self.distances).filter(|(b, _)| **b > 0.0).map(|(b, d)| d / b).collect();
        let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = r.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }
}

fn check_geometric(betas: &[f64]) -> Result<()> {
    let pos: Vec<f64> = betas.iter().copied().filter(|&b| b != 0.0).collect();
    if betas.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(Error::InvalidParameter("beta samples must be finite and nonnegative".into()));
    }
    if pos.len() < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 positive beta samples, got {}", pos.len())));
    }
    let ratio = pos[1] / pos[0];
    let geometric = ratio != 1.0 && pos.windows(2).all(|w| ((w[1] / w[0]) / ratio - 1.0).abs() <= 1e-6);
    if !geometric {
        return Err(Error::InvalidParameter("positive beta samples must be geometrically spaced".into()));
    }
    Ok(())
}

/// Distance to the transport-free solution for each `beta`, with a
/// log-log fit. Zero entries reuse the baseline and give distance 0.
pub fn beta_rate_study(setup: &StudySetup<'_>, u0: &Field, betas: &[f64]) -> Result<RateReport> {
    check_geometric(betas)?;
    let threshold = setup.grid.length().powi(-3);
    if let Some(&beta) = betas.iter().find(|&&b| b >= threshold) {
        return Err(Error::BetaAboveThreshold { beta, threshold });
    }
    let baseline = setup.solve(u0, 0.0).map_err(|e| Error::member("beta = 0", e))?;
    let distances = betas
        .par_iter()
        .map(|&beta| {
            if beta == 0.0 {
                return Ok(0.0);
            }
            let run = setup.solve(u0, beta).map_err(|e| Error::member(format!("beta = {beta}"), e))?;
            run.sup_v_distance(&baseline, setup.grid)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (x, y): (Vec<f64>, Vec<f64>) = betas
        .iter()
        .zip(&distances)
        .filter(|(b, _)| **b > 0.0)
        .map(|(b, d)| (b.ln(), d.ln()))
        .unzip();
    let (slope, intercept) = linear_fit(&x, &y);
    Ok(RateReport { betas: betas.to_vec(), distances, slope, intercept })
}

#[derive(Debug, Clone, Serialize)]
pub struct DependenceReport {
    pub deltas: Vec<f64>,
    /// `sup_t |u_delta(t) - u(t)|_V / |u_delta(0) - u(0)|_V` per delta.
    pub ratios: Vec<f64>,
}

impl DependenceReport {
    /// Largest factor between ratios at consecutive positive deltas.
    pub fn variation(&self) -> f64 {
        let r: Vec<f64> =
            self.deltas.iter().zip(&self.ratios).filter(|(d, _)| **d > 0.0).map(|(_, r)| *r).collect();
        r.windows(2).map(|w| (w[0] / w[1]).max(w[1] / w[0])).fold(1.0, f64::max)
    }

    /// The largest amplification observed, an empirical Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }
}

/// Amplification of an initial perturbation `delta phi` for each `delta`,
/// at transport strength `beta`. The ratio is normalized by the actual
/// initial distance, so it equals 1 at `t = 0`.
pub fn continuous_dependence_check(
    setup: &StudySetup<'_>,
    u0: &Field,
    phi: &Field,
    beta: f64,
    deltas: &[f64],
) -> Result<DependenceReport> {
    if deltas.is_empty() || deltas.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::InvalidParameter("perturbation sizes must be finite and nonnegative".into()));
    }
    if deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("perturbation sizes must be strictly decreasing".into()));
    }
    if hilbert::v_norm(setup.grid, phi) == 0.0 {
        return Err(Error::InvalidParameter("perturbation direction must be nonzero".into()));
    }
    let base = setup.solve(u0, beta).map_err(|e| Error::member("unperturbed", e))?;
    let ratios = deltas
        .par_iter()
        .map(|&delta| {
            if delta == 0.0 {
                return Ok(0.0);
            }
            let start = u0.axpy(delta, phi);
            let initial = hilbert::v_norm_of_values(setup.grid, &start.difference(u0));
            if initial == 0.0 {
                return Err(Error::InvalidParameter(format!("perturbation {delta} vanishes in floating point")));
            }
            let run = setup.solve(&start, beta).map_err(|e| Error::member(format!("delta = {delta}"), e))?;
            Ok(run.sup_v_distance(&base, setup.grid)? / initial)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(DependenceReport { deltas: deltas.to_vec(), ratios })
}

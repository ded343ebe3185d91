//! Minimizing-movement steps in the discrete `V'` metric.
//!
//! Step `k` minimizes
//!
//! ```text
//! Phi(v) = E(v) + beta (qbar_k, v)_{V'} + |v - u_{k-1}|_{V'}^2 / (2 tau)
//! ```
//!
//! through its Euler-Lagrange system `A u + W_s(u) + lift(u - u_{k-1}) / tau
//! + beta lift(qbar_k) = 0`. Newton works on the `A`-premultiplied form whose
//! Jacobian `A (A + diag W_ss(u)) + I / tau` is pentadiagonal.

use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::hilbert::{self, average_forcing, Field};
use crate::potential::{Potential, PotentialModel};
use crate::trajectory::uniform_times;
use crate::{Error, Grid, Result, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    /// Time step. Trajectory drivers overwrite it with `T / N`.
    pub tau: f64,
    /// Tolerance on the sup-norm of the Euler-Lagrange residual.
    pub newton_tol: f64,
    pub max_newton_iterations: usize,
    /// Maximum number of step halvings in the Newton line search.
    pub max_halvings: usize,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self { tau: 1e-3, newton_tol: 1e-10, max_newton_iterations: 50, max_halvings: 30 }
    }
}

impl StepConfig {
    pub fn with_tau(self, tau: f64) -> Self {
        Self { tau, ..self }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {}", self.tau)));
        }
        if !(self.newton_tol > 0.0) || self.max_newton_iterations == 0 {
            return Err(Error::InvalidParameter("Newton tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

/// Diagnostics of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub energy: f64,
    /// `|mu_k|_V` of the chemical potential's `V` representative.
    pub mu_v_norm: f64,
    /// `|(u_k - u_{k-1}) / tau|_{V'}`
    pub velocity_vprime_norm: f64,
    pub newton_iterations: usize,
    /// Final sup-norm Euler-Lagrange residual.
    pub residual: f64,
    /// `|mu(0)|` from a one-sided stencil.
    pub mu_boundary: f64,
    /// Whether the damped predictor restart was needed.
    pub restarted: bool,
}

/// Nodal `mu = -u'' + W_s(x, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChemicalPotential {
    values: Vec<f64>,
}

impl ChemicalPotential {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `|mu(0)|`; vanishes for exact solutions.
    pub fn boundary_residual(&self) -> f64 {
        self.values[0].abs()
    }

    /// The representative in `V` (node 0 set to zero).
    pub fn to_field(&self) -> Field {
        Field::from_raw(self.values.clone())
    }
}

/// `E(u) = 1/2 |u|_V^2 + int W(x, u)`.
pub fn energy<P: Potential + ?Sized>(grid: &Grid, u: &Field, model: &P) -> f64 {
    let w: Vec<f64> = grid.nodes().iter().zip(u.iter()).map(|(&x, &s)| model.value(x, s)).collect();
    0.5 * hilbert::v_norm(grid, u).powi(2) + grid.integrate(&w)
}

/// `A u + W_s(x, u)` at the free nodes and zero at node 0.
fn mu_free<P: Potential + ?Sized>(grid: &Grid, u: &[f64], model: &P) -> Vec<f64> {
    let mut mu = grid.laplacian().apply(u);
    for i in 1..grid.len() {
        mu[i] += model.ds(grid.nodes()[i], u[i]);
    }
    mu
}

/// Chemical potential with the ghost-node stencil at `x = L` and a
/// one-sided second-order second derivative at `x = 0`.
pub fn chemical_potential<P: Potential + ?Sized>(grid: &Grid, u: &Field, model: &P) -> ChemicalPotential {
    let mut values = mu_free(grid, u, model);
    let h2 = grid.spacing().powi(2);
    let u_xx0 = if grid.len() >= 4 {
        (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / h2
    } else {
        (u[0] - 2.0 * u[1] + u[2]) / h2
    };
    values[0] = -u_xx0 + model.ds(0.0, u[0]);
    ChemicalPotential { values }
}

/// Transport contribution to a step.
pub(crate) enum Transport {
    /// Explicit forcing `beta qbar_k` (full nodal vector).
    Forcing(Vec<f64>),
    /// Implicit `beta D u_k` with `D` acting on the free nodes.
    Implicit(BandMatrix),
    None,
}

/// One implicit step `A (A u + W_s(u)) + (u - u_prev) / tau + T(u) = 0`.
pub(crate) struct StepSystem<'a> {
    pub grid: &'a Grid,
    pub model: &'a PotentialModel,
    pub u_prev: &'a Field,
    pub tau: f64,
    pub transport: Transport,
}

pub(crate) struct Solved {
    pub u: Field,
    pub iterations: usize,
    pub residual: f64,
}

impl StepSystem<'_> {
    /// Terms outside the `A mu` part, on the full node vector.
    fn rest(&self, u: &[f64]) -> Vec<f64> {
        let inv_tau = 1.0 / self.tau;
        let mut r: Vec<f64> = u.iter().zip(self.u_prev.iter()).map(|(a, b)| (a - b) * inv_tau).collect();
        match &self.transport {
            Transport::Forcing(f) => r.iter_mut().zip(f).for_each(|(a, b)| *a += b),
            Transport::Implicit(d) => {
                let du = d.matvec(&u[1..]);
                r[1..].iter_mut().zip(du).for_each(|(a, b)| *a += b);
            }
            Transport::None => {}
        }
        r[0] = 0.0;
        r
    }

    /// Lifted residual `mu + A^{-1}(rest)` and the premultiplied `A mu + rest`.
    fn residuals(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mu = mu_free(self.grid, u, self.model);
        let rest = self.rest(u);
        let lifted_rest = self.grid.laplacian().solve(&rest);
        let g: Vec<f64> = mu.iter().zip(&lifted_rest).map(|(a, b)| a + b).collect();
        let amu = self.grid.laplacian().apply(&mu);
        let f: Vec<f64> = amu.iter().zip(&rest).map(|(a, b)| a + b).collect();
        (g, f)
    }

    fn jacobian(&self, u: &[f64]) -> BandMatrix {
        let a = self.grid.laplacian().band();
        let curv: Vec<f64> =
            (1..self.grid.len()).map(|i| self.model.dss(self.grid.nodes()[i], u[i])).collect();
        let mut hess = a.clone();
        hess.add_diagonal(&curv);
        let mut j = a.mul(&hess);
        j.add_diagonal(&vec![1.0 / self.tau; j.dim()]);
        if let Transport::Implicit(d) = &self.transport {
            j = j.plus(d);
        }
        j
    }

    /// Rounding floor of the lifted residual at `u`.
    fn tolerance(&self, tol: f64, u: &[f64], g_scale: f64) -> f64 {
        let h2 = self.grid.spacing().powi(2);
        let l2 = self.grid.length().powi(2);
        let usup = hilbert::sup_norm(u);
        let floor = 64.0
            * f64::EPSILON
            * (4.0 * usup / h2 + g_scale + (usup + self.u_prev.sup_norm()) * l2 / self.tau);
        tol.max(floor)
    }

    pub fn solve(&self, guess: Field, cfg: &StepConfig) -> std::result::Result<Solved, (usize, f64)> {
        let free = 1..self.grid.len();
        let sup = |v: &[f64]| hilbert::sup_norm(&v[free.clone()]);
        let mut u = guess.into_values();
        let (g, mut f) = self.residuals(&u);
        let mut r = sup(&g);
        for it in 0..=cfg.max_newton_iterations {
            if !r.is_finite() {
                return Err((it, r));
            }
            let ds_scale = (1..u.len())
                .map(|i| self.model.ds(self.grid.nodes()[i], u[i]).abs())
                .fold(0.0, f64::max);
            if r <= self.tolerance(cfg.newton_tol, &u, ds_scale) {
                return Ok(Solved { u: Field::from_raw(u), iterations: it, residual: r });
            }
            if it == cfg.max_newton_iterations {
                break;
            }
            let mut rhs: Vec<f64> = f[1..].iter().map(|v| -v).collect();
            match self.jacobian(&u).lu() {
                Ok(lu) => lu.solve_in_place(&mut rhs),
                Err(_) => return Err((it, r)),
            }
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..=cfg.max_halvings {
                let mut trial = u.clone();
                trial[1..].iter_mut().zip(&rhs).for_each(|(a, d)| *a += lambda * d);
                let (tg, tf) = self.residuals(&trial);
                let tr = sup(&tg);
                if tr.is_finite() && tr <= (1.0 - 1e-4 * lambda) * r {
                    accepted = Some((trial, tf, tr));
                    break;
                }
                lambda *= 0.5;
            }
            match accepted {
                Some((nu, nf, nr)) => {
                    u = nu;
                    f = nf;
                    r = nr;
                }
                // stagnation: no further decrease possible at this precision
                None => return Err((it + 1, r)),
            }
        }
        Err((cfg.max_newton_iterations, r))
    }

    /// Damped explicit predictor `u_prev + s tau v` with `v = -(A mu + T)`.
    pub fn predictor(&self) -> Field {
        let mu = mu_free(self.grid, self.u_prev, self.model);
        let amu = self.grid.laplacian().apply(&mu);
        let mut v: Vec<f64> = amu.iter().map(|a| -a).collect();
        match &self.transport {
            Transport::Forcing(f) => v.iter_mut().zip(f).for_each(|(a, b)| *a -= b),
            Transport::Implicit(d) => {
                let du = d.matvec(&self.u_prev[1..]);
                v[1..].iter_mut().zip(du).for_each(|(a, b)| *a -= b);
            }
            Transport::None => {}
        }
        let vs = hilbert::sup_norm(&v);
        if vs == 0.0 {
            return self.u_prev.clone();
        }
        let s = (0.1 * (1.0 + self.u_prev.sup_norm()) / (self.tau * vs)).min(1.0);
        let out: Vec<f64> = self.u_prev.iter().zip(&v).map(|(a, b)| a + s * self.tau * b).collect();
        Field::from_raw(out)
    }
}

/// Step objective `Phi`; `forcing_lift` is the lift of `beta qbar` when present.
fn objective(
    grid: &Grid,
    model: &PotentialModel,
    u_prev: &Field,
    tau: f64,
    forcing_lift: Option<&Field>,
    v: &Field,
) -> f64 {
    let lift_v = Field::from_raw(grid.laplacian().solve(v));
    let dist = Field::from_raw(grid.laplacian().solve(&v.difference(u_prev)));
    let mut phi = energy(grid, v, model) + hilbert::v_norm(grid, &dist).powi(2) / (2.0 * tau);
    if let Some(z) = forcing_lift {
        phi += hilbert::v_inner(grid, z, &lift_v);
    }
    phi
}

/// One minimizing-movement step from `u_prev` with averaged forcing
/// derivative `qbar` (ignored when `beta == 0`).
pub fn mm_step(
    grid: &Grid,
    u_prev: &Field,
    qbar: Option<&[f64]>,
    beta: f64,
    model: &PotentialModel,
    cfg: &StepConfig,
) -> Result<(Field, StepRecord)> {
    mm_step_indexed(grid, u_prev, qbar, beta, model, cfg, 1)
}

pub(crate) fn mm_step_indexed(
    grid: &Grid,
    u_prev: &Field,
    qbar: Option<&[f64]>,
    beta: f64,
    model: &PotentialModel,
    cfg: &StepConfig,
    step: usize,
) -> Result<(Field, StepRecord)> {
    cfg.validate()?;
    grid.check_len(u_prev)?;
    let forcing = match qbar {
        Some(q) if beta != 0.0 => {
            grid.check_len(q)?;
            if let Some(i) = q.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(i));
            }
            let mut f: Vec<f64> = q.iter().map(|v| beta * v).collect();
            f[0] = 0.0;
            Some(f)
        }
        _ => None,
    };
    let forcing_lift = forcing.as_ref().map(|f| Field::from_raw(grid.laplacian().solve(f)));
    let system = StepSystem {
        grid,
        model,
        u_prev,
        tau: cfg.tau,
        transport: forcing.map(Transport::Forcing).unwrap_or(Transport::None),
    };

    let phi_prev = objective(grid, model, u_prev, cfg.tau, forcing_lift.as_ref(), u_prev);
    let slack = 1e-10 * phi_prev.abs().max(1.0);
    let accept = |s: &Solved| {
        let phi = objective(grid, model, u_prev, cfg.tau, forcing_lift.as_ref(), &s.u);
        phi - phi_prev
    };

    let mut restarted = false;
    let mut failure = None;
    let mut solved = None;
    for guess in [Some(u_prev.clone()), None] {
        let guess = guess.unwrap_or_else(|| {
            restarted = true;
            system.predictor()
        });
        match system.solve(guess, cfg) {
            Ok(s) => {
                let increase = accept(&s);
                if increase <= slack {
                    solved = Some(s);
                    break;
                }
                failure = Some(Error::ObjectiveIncrease { step, increase });
            }
            Err((iterations, residual)) => {
                failure = Some(Error::NewtonFailed { step, iterations, residual });
            }
        }
    }
    let Some(solved) = solved else {
        return Err(failure.expect("at least one attempt"));
    };

    let record = step_record(grid, model, u_prev, &solved, cfg.tau, restarted);
    Ok((solved.u, record))
}

pub(crate) fn step_record(
    grid: &Grid,
    model: &PotentialModel,
    u_prev: &Field,
    solved: &Solved,
    tau: f64,
    restarted: bool,
) -> StepRecord {
    let u = &solved.u;
    let mu = chemical_potential(grid, u, model);
    let velocity: Vec<f64> = u.iter().zip(u_prev.iter()).map(|(a, b)| (a - b) / tau).collect();
    let vel_lift = Field::from_raw(grid.laplacian().solve(&velocity));
    StepRecord {
        energy: energy(grid, u, model),
        mu_v_norm: hilbert::v_norm(grid, &mu.to_field()),
        velocity_vprime_norm: hilbert::v_norm(grid, &vel_lift),
        newton_iterations: solved.iterations,
        residual: solved.residual,
        mu_boundary: mu.boundary_residual(),
        restarted,
    }
}

pub(crate) fn validate_run(grid: &Grid, u0: &Field, horizon: f64, steps: usize, beta: f64) -> Result<()> {
    grid.check_len(u0)?;
    if steps == 0 {
        return Err(Error::InvalidParameter("need at least one time step".into()));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be nonnegative, got {beta}")));
    }
    Ok(())
}

pub(crate) fn check_range(model: &PotentialModel, u: &Field, step: usize) -> Result<()> {
    let sup = u.sup_norm();
    if !model.in_range(sup) {
        return Err(Error::RangeExceeded { step, value: sup, bound: model.s_bound });
    }
    Ok(())
}

/// `N` minimizing-movement steps on `[0, T]`; the forcing `q` (sampled on
/// `[0, T]`, at least as finely as `tau`) enters through its per-interval
/// averaged derivative. `q = None` means zero forcing.
#[allow(clippy::too_many_arguments)]
pub fn run_minimizing_movements(
    grid: &Grid,
    u0: &Field,
    q: Option<&Trajectory>,
    horizon: f64,
    steps: usize,
    beta: f64,
    model: &PotentialModel,
    cfg: &StepConfig,
) -> Result<Trajectory> {
    validate_run(grid, u0, horizon, steps, beta)?;
    let tau = horizon / steps as f64;
    let cfg = cfg.with_tau(tau);
    let times = uniform_times(horizon, steps);
    check_range(model, u0, 0)?;
    let mut traj = Trajectory::start(u0.clone(), beta, steps);
    let mut u = u0.clone();
    for k in 1..=steps {
        let qbar = match q {
            Some(q) if beta != 0.0 => Some(average_forcing(grid, q, tau, k)?),
            _ => None,
        };
        let (next, record) = mm_step_indexed(grid, &u, qbar.as_deref(), beta, model, &cfg, k)?;
        check_range(model, &next, k)?;
        traj.push(times[k], next.clone(), record);
        u = next;
    }
    Ok(traj)
}

/// `M1 = 2 L beta |q|_{L2(0,T;V)} + 2 sqrt(E(u0) + K0 L)`, the uniform
/// bound on `|u_k|_{H1}` along a minimizing-movement trajectory.
pub fn discrete_bound_m1(grid: &Grid, u0: &Field, q_norm: f64, beta: f64, model: &PotentialModel) -> f64 {
    let l = grid.length();
    2.0 * l * beta * q_norm + 2.0 * (energy(grid, u0, model) + model.k0 * l).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::make_grid;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn poly(c: &[f64], g: &Grid) -> PotentialModel {
        PotentialModel::polynomial(c.to_vec(), g, 10.0).unwrap()
    }

    #[test]
    fn energy_examples() {
        let g = make_grid(1.0, 201).unwrap();
        let q = PotentialModel::quartic_well();
        assert_eq!(energy(&g, &Field::zeros(&g), &q), 0.0);
        let u = Field::from_fn(&g, |x| (FRAC_PI_2 * x).sin()).unwrap();
        assert!((energy(&g, &u, &q) - (PI * PI / 16.0 - 5.0 / 32.0)).abs() < 1e-3);

        let lb = PotentialModel::lb_potential(
            crate::LBParams { c0: 1.0, zeta0: 0.0, xs: 0.5, ls: 0.1 },
            &g,
        )
        .unwrap();
        assert!((energy(&g, &Field::zeros(&g), &lb) + 0.25).abs() < 1e-14);
    }

    #[test]
    fn chemical_potential_examples() {
        let g = make_grid(1.0, 201).unwrap();
        let q = PotentialModel::quartic_well();
        let mu = chemical_potential(&g, &Field::zeros(&g), &q);
        assert!(mu.values().iter().all(|&v| v == 0.0));

        let zero = poly(&[0.0], &g);
        let lin = Field::from_fn(&g, |x| x).unwrap();
        let mu = chemical_potential(&g, &lin, &zero);
        for v in &mu.values()[1..g.len() - 1] {
            assert!(v.abs() < 1e-8);
        }

        let s = Field::from_fn(&g, |x| (FRAC_PI_2 * x).sin()).unwrap();
        let mu = chemical_potential(&g, &s, &zero);
        for (x, v) in g.nodes().iter().zip(mu.values()) {
            assert!((v - FRAC_PI_2.powi(2) * (FRAC_PI_2 * x).sin()).abs() < 1e-3, "x = {x}");
        }
        assert!(mu.boundary_residual() < 1e-3);
    }

    #[test]
    fn zero_is_fixed_without_potential() {
        let g = make_grid(1.0, 41).unwrap();
        let zero = poly(&[0.0], &g);
        let (u, rec) = mm_step(&g, &Field::zeros(&g), None, 0.0, &zero, &StepConfig::default()).unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
        assert_eq!(rec.newton_iterations, 0);
    }

    #[test]
    fn quartic_step_decreases_energy_and_obeys_minimality() {
        let g = make_grid(1.0, 101).unwrap();
        let m = PotentialModel::quartic_well();
        let cfg = StepConfig { tau: 1e-3, ..Default::default() };
        let prev = Field::from_fn(&g, |x| (FRAC_PI_2 * x).sin()).unwrap();
        let (u, rec) = mm_step(&g, &prev, None, 0.0, &m, &cfg).unwrap();
        let (e0, e1) = (energy(&g, &prev, &m), energy(&g, &u, &m));
        assert!(e1 <= e0);
        let dist = hilbert::vprime_norm(&g, &u.difference(&prev)).unwrap();
        assert!(dist <= (2.0 * cfg.tau * (e0 - e1) + cfg.tau * cfg.newton_tol).sqrt());
        assert!(rec.residual <= cfg.newton_tol);
    }

    #[test]
    fn newton_residual_below_tolerance() {
        let g = make_grid(1.0, 101).unwrap();
        let m = PotentialModel::quartic_well();
        let cfg = StepConfig { tau: 1e-2, ..Default::default() };
        let prev = Field::from_fn(&g, |x| 0.8 * (3.0 * FRAC_PI_2 * x).sin()).unwrap();
        let (u, rec) = mm_step(&g, &prev, None, 0.0, &m, &cfg).unwrap();
        let mu = mu_free(&g, &u, &m);
        let lifted = g.laplacian().solve(&u.difference(&prev));
        let res = (1..g.len()).map(|i| (mu[i] + lifted[i] / cfg.tau).abs()).fold(0.0, f64::max);
        assert!(res <= 1e-10, "{res}");
        assert!(rec.residual <= 1e-10);
    }

    #[test]
    fn forcing_is_ignored_without_transport() {
        let g = make_grid(1.0, 51).unwrap();
        let m = PotentialModel::quartic_well();
        let cfg = StepConfig::default();
        let prev = Field::from_fn(&g, |x| 0.4 * x * (2.0 - x)).unwrap();
        let q = vec![3.0; 51];
        let a = mm_step(&g, &prev, Some(&q), 0.0, &m, &cfg).unwrap();
        let b = mm_step(&g, &prev, None, 0.0, &m, &cfg).unwrap();
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn run_produces_consistent_trajectory() {
        let g = make_grid(1.0, 51).unwrap();
        let m = PotentialModel::quartic_well();
        let u0 = Field::from_fn(&g, |x| 0.5 * (FRAC_PI_2 * x).sin()).unwrap();
        let tr = run_minimizing_movements(&g, &u0, None, 0.05, 10, 0.0, &m, &StepConfig::default()).unwrap();
        assert_eq!(tr.steps(), 10);
        assert_eq!(tr.initial(), &u0);
        assert!(tr.snapshots().iter().all(|u| u[0] == 0.0));
        assert_eq!(tr.records().len(), 10);
        assert!((tr.horizon() - 0.05).abs() < 1e-15);

        let one = run_minimizing_movements(&g, &u0, None, 0.005, 1, 0.0, &m, &StepConfig::default()).unwrap();
        let (direct, _) = mm_step(&g, &u0, None, 0.0, &m, &StepConfig { tau: 0.005, ..Default::default() }).unwrap();
        assert_eq!(one.last(), &direct);
    }

    #[test]
    fn run_rejects_bad_input() {
        let g = make_grid(1.0, 11).unwrap();
        let m = PotentialModel::quartic_well();
        let u0 = Field::zeros(&g);
        let cfg = StepConfig::default();
        assert!(run_minimizing_movements(&g, &u0, None, 1.0, 0, 0.0, &m, &cfg).is_err());
        assert!(run_minimizing_movements(&g, &u0, None, -1.0, 4, 0.0, &m, &cfg).is_err());
        assert!(run_minimizing_movements(&g, &u0, None, 1.0, 4, -0.1, &m, &cfg).is_err());
    }

    #[test]
    fn range_violation_is_reported() {
        let g = make_grid(1.0, 21).unwrap();
        let m = PotentialModel { s_bound: 0.1, ..PotentialModel::quartic_well() };
        let u0 = Field::from_fn(&g, |x| 0.5 * x).unwrap();
        let err = run_minimizing_movements(&g, &u0, None, 0.1, 2, 0.0, &m, &StepConfig::default());
        assert!(matches!(err, Err(Error::RangeExceeded { step: 0, .. })));
    }
}

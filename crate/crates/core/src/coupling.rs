//! Transport coupling.
//!
//! For a frozen forcing history `q` the map `S(q) = u_q` is one
//! minimizing-movement sweep; a weak solution of the advective problem is a
//! fixed point `q = S(q)`, found here by relaxed Picard iteration. An
//! independent fully implicit discretization of the strong form serves as
//! the cross-check.

use serde::{Deserialize, Serialize};

use crate::grid::DerivativeStencil;
use crate::hilbert::Field;
use crate::potential::PotentialModel;
use crate::scheme::{self, run_minimizing_movements, StepConfig, StepSystem, Transport};
use crate::trajectory::uniform_times;
use crate::{Error, Grid, Result, Trajectory};

/// Initial Picard iterate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PicardStart {
    /// `q_0(t) = u_0` for all `t`.
    #[default]
    Constant,
    /// `q_0` = the solution without transport.
    Unadvected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    /// Relaxation `theta` in `(0, 1]`.
    pub theta: f64,
    /// Tolerance on `|S(q) - q| / |S(q)|` in `L2(0,T;V)`.
    pub tol: f64,
    pub max_iterations: usize,
    pub start: PicardStart,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self { theta: 1.0, tol: 1e-6, max_iterations: 100, start: PicardStart::Constant }
    }
}

/// Consecutive residual increases that trigger a relaxation halving.
const DIVERGENCE_WINDOW: usize = 5;

#[derive(Debug, Clone)]
pub struct CoupledSolution {
    /// `S(q*)`, a full minimizing-movement trajectory.
    pub trajectory: Trajectory,
    /// The forcing `q*` that produced it.
    pub forcing: Trajectory,
    /// `d_m = |q_{m+1} - q_m|_{L2(0,T;V)}` per outer iteration.
    pub distances: Vec<f64>,
    /// `|S(q_m) - q_m| / |S(q_m)|` per outer iteration.
    pub relative_residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `|S(q*) - q*|_{L2(0,T;V)}`
    pub residual: f64,
    /// Relaxation in effect at convergence.
    pub theta: f64,
}

impl CoupledSolution {
    /// Empirical contraction factors `rho_{m+1} / rho_m`.
    pub fn contraction_factors(&self) -> Vec<f64> {
        self.relative_residuals.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// `u_q`: one minimizing-movement sweep driven by the frozen forcing `q`.
#[allow(clippy::too_many_arguments)]
pub fn solve_forced(
    grid: &Grid,
    u0: &Field,
    q: &Trajectory,
    horizon: f64,
    steps: usize,
    beta: f64,
    model: &PotentialModel,
    cfg: &StepConfig,
) -> Result<Trajectory> {
    run_minimizing_movements(grid, u0, Some(q), horizon, steps, beta, model, cfg)
}

fn relax(q: &Trajectory, s: &Trajectory, theta: f64) -> Result<Trajectory> {
    if theta == 1.0 {
        return Ok(s.clone());
    }
    let snaps = q
        .snapshots()
        .iter()
        .zip(s.snapshots())
        .map(|(a, b)| a.axpy(theta, &Field::from_raw(b.difference(a))))
        .collect();
    Trajectory::sampled(q.times().to_vec(), snaps)
}

/// Relaxed Picard iteration `q_{m+1} = (1 - theta) q_m + theta S(q_m)`.
///
/// Stops when `|S(q_m) - q_m| <= tol |S(q_m)|` and returns `S(q_m)`. If the
/// residual grows for five consecutive iterations the relaxation is halved
/// and the iteration restarts from the iterate with the smallest residual.
#[allow(clippy::too_many_arguments)]
pub fn solve_fixed_point(
    grid: &Grid,
    u0: &Field,
    horizon: f64,
    steps: usize,
    beta: f64,
    model: &PotentialModel,
    step_cfg: &StepConfig,
    cfg: &PicardConfig,
) -> Result<CoupledSolution> {
    if !(cfg.theta > 0.0 && cfg.theta <= 1.0) {
        return Err(Error::InvalidParameter(format!("relaxation must lie in (0, 1], got {}", cfg.theta)));
    }
    if !(cfg.tol > 0.0) || cfg.max_iterations == 0 {
        return Err(Error::InvalidParameter("Picard tolerance and iteration cap must be positive".into()));
    }
    scheme::validate_run(grid, u0, horizon, steps, beta)?;

    if beta == 0.0 {
        // S does not depend on q: S(q_0) is already the fixed point
        let trajectory = run_minimizing_movements(grid, u0, None, horizon, steps, 0.0, model, step_cfg)?;
        return Ok(CoupledSolution {
            forcing: trajectory.clone(),
            trajectory,
            distances: vec![0.0],
            relative_residuals: vec![0.0],
            iterations: 1,
            converged: true,
            residual: 0.0,
            theta: cfg.theta,
        });
    }

    let mut q = match cfg.start {
        PicardStart::Constant => Trajectory::constant(u0.clone(), horizon, steps)?,
        PicardStart::Unadvected => {
            run_minimizing_movements(grid, u0, None, horizon, steps, 0.0, model, step_cfg)?
        }
    };
    debug_assert_eq!(q.times(), uniform_times(horizon, steps).as_slice());

    let mut theta = cfg.theta;
    let mut distances = Vec::new();
    let mut relative = Vec::new();
    let mut best: Option<(f64, Trajectory)> = None;
    let mut increases = 0;

    for iteration in 1..=cfg.max_iterations {
        let s = solve_forced(grid, u0, &q, horizon, steps, beta, model, step_cfg)?;
        let rho = s.l2v_distance(&q, grid)?;
        let scale = s.l2v_norm(grid);
        let rel = if scale > 0.0 { rho / scale } else { rho };
        if let Some(&prev) = relative.last() {
            increases = if rel > prev { increases + 1 } else { 0 };
        }
        relative.push(rel);

        if rel <= cfg.tol {
            distances.push(theta * rho);
            return Ok(CoupledSolution {
                trajectory: s,
                forcing: q,
                distances,
                relative_residuals: relative,
                iterations: iteration,
                converged: true,
                residual: rho,
                theta,
            });
        }
        if best.as_ref().is_none_or(|(r, _)| rel < *r) {
            best = Some((rel, q.clone()));
        }
        if increases >= DIVERGENCE_WINDOW {
            theta *= 0.5;
            increases = 0;
            q = best.as_ref().map(|(_, b)| b.clone()).expect("recorded");
            distances.push(0.0);
            continue;
        }
        let next = relax(&q, &s, theta)?;
        distances.push(next.l2v_distance(&q, grid)?);
        q = next;
    }

    Err(Error::PicardNotConverged {
        iterations: cfg.max_iterations,
        last: relative.last().copied().unwrap_or(f64::NAN),
        history: relative,
    })
}

/// Transport stencil of the strong-form solver.
pub type Advection = DerivativeStencil;

/// Fully implicit Euler for the strong form
/// `(u_k - u_{k-1}) / tau + A (A u_k + W_s(u_k)) + beta D u_k = 0`, where the
/// outer `A` acts on `mu` with `mu(0) = 0` and `mu'(L) = 0`.
#[allow(clippy::too_many_arguments)]
pub fn solve_monolithic(
    grid: &Grid,
    u0: &Field,
    horizon: f64,
    steps: usize,
    beta: f64,
    model: &PotentialModel,
    cfg: &StepConfig,
    advection: Advection,
) -> Result<Trajectory> {
    scheme::validate_run(grid, u0, horizon, steps, beta)?;
    let tau = horizon / steps as f64;
    let cfg = cfg.with_tau(tau);
    let times = uniform_times(horizon, steps);
    let transport_matrix = (beta != 0.0).then(|| grid.derivative_matrix(advection).scaled(beta));
    scheme::check_range(model, u0, 0)?;

    let mut traj = Trajectory::start(u0.clone(), beta, steps);
    let mut u = u0.clone();
    for k in 1..=steps {
        let system = StepSystem {
            grid,
            model,
            u_prev: &u,
            tau,
            transport: match &transport_matrix {
                Some(d) => Transport::Implicit(d.clone()),
                None => Transport::None,
            },
        };
        let (solved, restarted) = match system.solve(u.clone(), &cfg) {
            Ok(s) => (s, false),
            Err(_) => match system.solve(system.predictor(), &cfg) {
                Ok(s) => (s, true),
                Err((iterations, residual)) => {
                    return Err(Error::NewtonFailed { step: k, iterations, residual })
                }
            },
        };
        scheme::check_range(model, &solved.u, k)?;
        let record = scheme::step_record(grid, model, &u, &solved, tau, restarted);
        traj.push(times[k], solved.u.clone(), record);
        u = solved.u;
    }
    Ok(traj)
}

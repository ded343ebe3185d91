//! The subcommands. Each returns its report so callers can inspect results
//! without re-reading the files it writes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chflow::analysis::{
    apriori_bound_check, beta_rate_study, continuous_dependence_check, dissipativity_check, energy_equality_residual,
    StudySetup,
};
use chflow::hilbert::{self, l2_norm, riesz_lift, v_norm, vprime_norm};
use chflow::scheme::chemical_potential;
use chflow::{solve_fixed_point, solve_monolithic, CoupledSolution, Error, Field, Grid, PotentialModel, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::output::{write_csv, write_json, write_snapshot};
use crate::{CliError, RunConfig};

/// Energy residuals of consecutive halvings must shrink by a factor in this
/// range (first order, within 30%).
pub const HALVING_RATIO: (f64, f64) = (0.35, 0.65);
/// Oracle agreement floor in the sup-in-time `V` norm.
pub const ORACLE_TOLERANCE: f64 = 5e-5;
/// Continuous-dependence ratios may vary by less than this factor.
pub const DEPENDENCE_VARIATION: f64 = 2.0;

/// The JSON summary; fields not produced by a command are `null`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Summary {
    pub converged: Option<bool>,
    pub picard_iters: Option<usize>,
    pub max_energy_residual: Option<f64>,
    pub apriori_margin: Option<f64>,
    /// `null` when the dissipativity estimate does not apply (`beta >= L^-3`).
    pub dissipativity_pass: Option<bool>,
    pub rate_slope: Option<f64>,
    #[serde(flatten)]
    pub details: Map<String, Value>,
}

struct Scenario {
    grid: Grid,
    model: PotentialModel,
    u0: Field,
}

impl Scenario {
    fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let grid = cfg.grid()?;
        let model = cfg.potential(&grid)?;
        let u0 = cfg.initial_datum(&grid)?;
        Ok(Self { grid, model, u0 })
    }

    fn fixed_point(&self, cfg: &RunConfig, steps: usize) -> chflow::Result<CoupledSolution> {
        solve_fixed_point(
            &self.grid,
            &self.u0,
            cfg.time.horizon,
            steps,
            cfg.model.beta,
            &self.model,
            &cfg.step_config(),
            &cfg.picard_config(),
        )
    }

    fn study(&self, cfg: &RunConfig) -> StudySetup<'_> {
        StudySetup {
            grid: &self.grid,
            model: &self.model,
            horizon: cfg.time.horizon,
            steps: cfg.time.steps,
            step: cfg.step_config(),
            picard: cfg.picard_config(),
        }
    }
}

fn prepare(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn archive_config(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    fs::write(out.join("config.toml"), cfg.to_toml())?;
    Ok(())
}

/// Solve the coupled problem and write `timeseries.csv`, snapshots and
/// `summary.json`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<Summary, CliError> {
    let sc = Scenario::new(cfg)?;
    prepare(out)?;
    archive_config(cfg, out)?;
    let solution = match sc.fixed_point(cfg, cfg.time.steps) {
        Ok(s) => s,
        Err(Error::PicardNotConverged { iterations, last, history }) => {
            let mut details = Map::new();
            details.insert("picard_history".into(), json!(history));
            details.insert("picard_last".into(), json!(last));
            let summary = Summary { converged: Some(false), picard_iters: Some(iterations), details, ..Default::default() };
            write_json(&out.join("summary.json"), &summary)?;
            return Err(Error::PicardNotConverged { iterations, last, history }.into());
        }
        Err(e) => return Err(e.into()),
    };
    let traj = &solution.trajectory;
    let energy = energy_equality_residual(&sc.grid, traj, &sc.model);
    write_timeseries(&out.join("timeseries.csv"), &sc, traj, &energy.residuals)?;
    for &t in &cfg.output.snapshot_times {
        let k = nearest_level(traj, t);
        write_snapshot(&out.join(format!("snapshot_{k:06}.txt")), &sc.grid, traj.times()[k], &traj.snapshots()[k])?;
    }

    let apriori = apriori_bound_check(&sc.grid, traj, &sc.model);
    let dissipativity = match dissipativity_check(&sc.grid, traj, &sc.model) {
        Ok(r) => Some(r.passed()),
        Err(Error::BetaAboveThreshold { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let mut details = Map::new();
    details.insert("beta".into(), json!(cfg.model.beta));
    details.insert("picard_history".into(), json!(solution.relative_residuals));
    details.insert("picard_distances".into(), json!(solution.distances));
    details.insert("picard_theta".into(), json!(solution.theta));
    details.insert("fixed_point_residual".into(), json!(solution.residual));
    details.insert("median_energy_residual".into(), json!(energy.median_abs_residual()));
    details.insert("apriori_bound".into(), json!(apriori.bound));
    details.insert("max_newton_iterations".into(), json!(traj.records().iter().map(|r| r.newton_iterations).max()));
    details.insert("newton_restarts".into(), json!(traj.records().iter().filter(|r| r.restarted).count()));
    let summary = Summary {
        converged: Some(solution.converged),
        picard_iters: Some(solution.iterations),
        max_energy_residual: Some(energy.max_abs_residual()),
        apriori_margin: Some(apriori.worst.1),
        dissipativity_pass: dissipativity,
        rate_slope: None,
        details,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn nearest_level(traj: &Trajectory, t: f64) -> usize {
    let times = traj.times();
    (0..times.len()).min_by(|&a, &b| (times[a] - t).abs().total_cmp(&(times[b] - t).abs())).expect("non-empty")
}

fn write_timeseries(path: &Path, sc: &Scenario, traj: &Trajectory, residuals: &[f64]) -> Result<(), CliError> {
    let rows = traj.times().iter().zip(traj.snapshots()).enumerate().map(|(k, (&t, u))| {
        let (e, mu) = match k {
            0 => {
                let mu = chemical_potential(&sc.grid, u, &sc.model).to_field();
                (chflow::scheme::energy(&sc.grid, u, &sc.model), v_norm(&sc.grid, &mu))
            }
            _ => (traj.records()[k - 1].energy, traj.records()[k - 1].mu_v_norm),
        };
        let r = if k == 0 { 0.0 } else { residuals[k - 1] };
        vec![t, e, mu, v_norm(&sc.grid, u), r]
    });
    write_csv(path, &["t", "E", "mu_V_norm", "u_V_norm", "residual"], rows)
}

/// Distance to the transport-free solution over `sweep.betas`; writes
/// `rate.csv` and `summary.json`.
pub fn sweep_beta(cfg: &RunConfig, out: &Path) -> Result<Summary, CliError> {
    let sc = Scenario::new(cfg)?;
    prepare(out)?;
    archive_config(cfg, out)?;
    let report = beta_rate_study(&sc.study(cfg), &sc.u0, &cfg.sweep.betas).map_err(|e| match e {
        Error::InvalidParameter(msg) => CliError::Config(format!("sweep.betas: {msg}")),
        Error::BetaAboveThreshold { beta, threshold } => {
            CliError::Config(format!("sweep.betas: {beta} is not below L^-3 = {threshold}"))
        }
        other => other.into(),
    })?;
    write_csv(
        &out.join("rate.csv"),
        &["beta", "sup_dist"],
        report.betas.iter().zip(&report.distances).map(|(b, d)| vec![*b, *d]),
    )?;
    let mut details = Map::new();
    details.insert("betas".into(), json!(report.betas));
    details.insert("distances".into(), json!(report.distances));
    details.insert("rate_intercept".into(), json!(report.intercept));
    details.insert("ratio_spread".into(), json!(report.ratio_spread()));
    let summary = Summary { rate_slope: Some(report.slope), details, ..Default::default() };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, pass: bool, detail: String) -> Self {
        Self { name, status: if pass { Status::Pass } else { Status::Fail }, detail }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut s = String::new();
        for c in &self.checks {
            let status = match &c.status {
                Status::Pass => "pass".to_string(),
                Status::Fail => "FAIL".to_string(),
                Status::Skipped(why) => format!("skipped: {why}"),
            };
            let _ = writeln!(s, "{:<width$}  {status:<4}  {}", c.name, c.detail);
        }
        s
    }
}

fn list(values: &[f64], style: &str) -> String {
    let fmt = |v: &f64| if style == "e" { format!("{v:.3e}") } else { format!("{v:.3}") };
    values.iter().map(fmt).collect::<Vec<_>>().join(", ")
}

/// Randomized duality-calculus checks on the configured grid.
fn check_duality(grid: &Grid, seed: u64, fields: usize) -> Check {
    let l = grid.length();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_round_trip = 0.0f64;
    let mut ok = true;
    for _ in 0..fields {
        let f: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut v = f.clone();
        v[0] = 0.0;
        let v = Field::new(grid, v).expect("valid field");
        let dual = vprime_norm(grid, &f).expect("valid length");
        ok &= dual <= l * l2_norm(grid, &f) * (1.0 + 1e-12);
        ok &= l2_norm(grid, &v) <= l * v_norm(grid, &v) * (1.0 + 1e-12);
        let rt = riesz_lift(grid, &f).expect("valid length").round_trip_error(grid, &f);
        worst_round_trip = worst_round_trip.max(rt);
    }
    ok &= worst_round_trip <= 1e-10;
    Check::new("duality", ok, format!("{fields} fields, worst lift round trip {worst_round_trip:.2e}"))
}

/// Run the verification table; `Err(Verification)` if any check fails.
pub fn verify(cfg: &RunConfig, out: Option<&Path>) -> Result<VerifyReport, CliError> {
    let sc = Scenario::new(cfg)?;
    let beta = cfg.model.beta;
    let mut checks = vec![check_duality(&sc.grid, cfg.seed, cfg.verify.random_fields)];

    // energy residual under time-step halving
    let mut maxes = Vec::new();
    let mut base = None;
    for j in 0..=cfg.verify.refinements {
        let steps = cfg.time.steps << j;
        let sol = sc.fixed_point(cfg, steps)?;
        maxes.push(energy_equality_residual(&sc.grid, &sol.trajectory, &sc.model).max_abs_residual());
        base.get_or_insert(sol);
    }
    let base = base.expect("at least one run");
    let ratios: Vec<f64> = maxes.windows(2).map(|w| w[1] / w[0]).collect();
    let halving_ok = ratios.iter().all(|r| (HALVING_RATIO.0..=HALVING_RATIO.1).contains(r));
    checks.push(Check::new(
        "energy residual refinement",
        halving_ok,
        format!("max |r_k| = [{}], ratios [{}]", list(&maxes, "e"), list(&ratios, "f")),
    ));

    let traj = &base.trajectory;
    let apriori = apriori_bound_check(&sc.grid, traj, &sc.model);
    checks.push(Check::new(
        "a-priori bound",
        apriori.passed(),
        format!("bound {:.4e}, worst margin {:.4e} at t = {:.4}", apriori.bound, apriori.worst.1, apriori.worst.0),
    ));

    checks.push(match dissipativity_check(&sc.grid, traj, &sc.model) {
        Ok(r) => Check::new(
            "dissipativity",
            r.passed(),
            format!("C = {:.4}, D = {:.4e}, min margin {:.3e}, eps_disc {:.1e}", r.c_beta, r.d_beta, r.min_margin(), r.eps_disc),
        ),
        Err(Error::BetaAboveThreshold { threshold, .. }) => Check {
            name: "dissipativity",
            status: Status::Skipped("C_β ≤ 0".into()),
            detail: format!("beta = {beta} >= L^-3 = {threshold}"),
        },
        Err(e) => return Err(e.into()),
    });

    let oracle = solve_monolithic(
        &sc.grid,
        &sc.u0,
        cfg.time.horizon,
        cfg.time.steps,
        beta,
        &sc.model,
        &cfg.step_config(),
        cfg.solver.advection.into(),
    )?;
    let discrepancy = traj.sup_v_distance(&oracle, &sc.grid)?;
    let tol = ORACLE_TOLERANCE.max(10.0 * cfg.solver.newton_tol);
    checks.push(Check::new(
        "oracle equivalence",
        discrepancy <= tol,
        format!("sup_t |u - u_oracle|_V = {discrepancy:.3e} (tolerance {tol:.1e})"),
    ));

    let phi = Field::from_fn(&sc.grid, |x| (std::f64::consts::FRAC_PI_2 * x / sc.grid.length()).sin())?;
    let dep = continuous_dependence_check(&sc.study(cfg), &sc.u0, &phi, beta, &cfg.verify.deltas)?;
    checks.push(Check::new(
        "continuous dependence",
        dep.variation() < DEPENDENCE_VARIATION,
        format!("ratios [{}], variation {:.3}", list(&dep.ratios, "f"), dep.variation()),
    ));

    let report = VerifyReport { checks };
    if let Some(out) = out {
        prepare(out)?;
        write_json(&out.join("verify.json"), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub discrepancy: f64,
    pub tolerance: f64,
    pub picard_iters: usize,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.discrepancy <= self.tolerance
    }
}

/// Compare the fixed-point solution with the strong-form oracle; writes
/// `oracle.csv` and `summary.json`.
pub fn oracle_compare(cfg: &RunConfig, out: &Path) -> Result<OracleReport, CliError> {
    let sc = Scenario::new(cfg)?;
    prepare(out)?;
    archive_config(cfg, out)?;
    let (fixed, oracle) = rayon::join(
        || sc.fixed_point(cfg, cfg.time.steps),
        || {
            solve_monolithic(
                &sc.grid,
                &sc.u0,
                cfg.time.horizon,
                cfg.time.steps,
                cfg.model.beta,
                &sc.model,
                &cfg.step_config(),
                cfg.solver.advection.into(),
            )
        },
    );
    let (fixed, oracle) = (fixed?, oracle?);
    let traj = &fixed.trajectory;
    let rows = traj.times().iter().zip(traj.snapshots()).zip(oracle.snapshots()).map(|((&t, a), b)| {
        let d = hilbert::try_v_norm(&sc.grid, &a.difference(b)).expect("aligned");
        vec![t, v_norm(&sc.grid, a), v_norm(&sc.grid, b), d]
    });
    write_csv(&out.join("oracle.csv"), &["t", "fixed_point_V_norm", "oracle_V_norm", "distance_V"], rows)?;
    let report = OracleReport {
        discrepancy: traj.sup_v_distance(&oracle, &sc.grid)?,
        tolerance: ORACLE_TOLERANCE.max(10.0 * cfg.solver.newton_tol),
        picard_iters: fixed.iterations,
    };
    let mut details = Map::new();
    details.insert("oracle_discrepancy".into(), json!(report.discrepancy));
    details.insert("oracle_tolerance".into(), json!(report.tolerance));
    let summary = Summary {
        converged: Some(fixed.converged),
        picard_iters: Some(fixed.iterations),
        details,
        ..Default::default()
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(report)
}

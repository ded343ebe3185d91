//! Run configuration: a TOML file with one section per concern.

use std::path::{Path, PathBuf};

use chflow::potential::DEFAULT_S_BOUND;
use chflow::{make_grid, Advection, Field, Grid, PicardConfig, PicardStart, PotentialKind, PotentialModel, StepConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for the randomized checks of `verify`.
    #[serde(default)]
    pub seed: u64,
    pub domain: Domain,
    pub time: Time,
    #[serde(default)]
    pub model: Model,
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default)]
    pub initial: InitialDatum,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub output: Output,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub verify: Verify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub length: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Time {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Model {
    #[serde(default)]
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSection {
    #[serde(flatten)]
    pub kind: PotentialKind,
    /// Range `|s| <= s_bound` over which the potential constants are
    /// certified; defaults to `10 + |c0|` for `lb` and 10 for polynomials.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_bound: Option<f64>,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self { kind: PotentialKind::Quartic, s_bound: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDatum {
    Zero,
    /// `amplitude * sin(pi x / (2 L))`
    ScaledSine { amplitude: f64 },
    /// Nodal values, one per line (a second column is read as `u` when
    /// lines hold `x u` pairs). Relative paths resolve against the config.
    File { path: PathBuf },
}

impl Default for InitialDatum {
    fn default() -> Self {
        Self::ScaledSine { amplitude: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Solver {
    pub newton_tol: f64,
    pub max_newton_iterations: usize,
    pub max_halvings: usize,
    pub picard_theta: f64,
    pub picard_tol: f64,
    pub picard_max_iterations: usize,
    pub picard_start: PicardStart,
    /// Transport stencil of the strong-form oracle: `upwind` or `central`.
    pub advection: AdvectionChoice,
}

impl Default for Solver {
    fn default() -> Self {
        let step = StepConfig::default();
        let picard = PicardConfig::default();
        Self {
            newton_tol: step.newton_tol,
            max_newton_iterations: step.max_newton_iterations,
            max_halvings: step.max_halvings,
            picard_theta: picard.theta,
            picard_tol: picard.tol,
            picard_max_iterations: picard.max_iterations,
            picard_start: picard.start,
            advection: AdvectionChoice::Upwind,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvectionChoice {
    #[default]
    Upwind,
    Central,
}

impl From<AdvectionChoice> for Advection {
    fn from(a: AdvectionChoice) -> Self {
        match a {
            AdvectionChoice::Upwind => Advection::Upwind,
            AdvectionChoice::Central => Advection::Central,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    /// Output directory when `--out` is not given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Times at which snapshot files are written; each is rounded to the
    /// nearest time level.
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub betas: Vec<f64>,
}

impl Default for Sweep {
    fn default() -> Self {
        Self { betas: vec![0.04, 0.02, 0.01] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Verify {
    /// Number of time-step halvings in the energy-residual refinement.
    pub refinements: usize,
    pub deltas: Vec<f64>,
    /// Fields drawn for the randomized duality check.
    pub random_fields: usize,
}

impl Default for Verify {
    fn default() -> Self {
        Self { refinements: 3, deltas: vec![1e-2, 1e-3, 1e-4], random_fields: 100 }
    }
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let InitialDatum::File { path: p } = &mut cfg.initial {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(key, format!("must be positive, got {v}")))
            }
        };
        positive("domain.length", self.domain.length)?;
        if self.domain.nodes < 4 {
            return Err(invalid("domain.nodes", format!("need at least 4 nodes, got {}", self.domain.nodes)));
        }
        positive("time.horizon", self.time.horizon)?;
        if self.time.steps == 0 {
            return Err(invalid("time.steps", "must be at least 1"));
        }
        if !(self.model.beta.is_finite() && self.model.beta >= 0.0) {
            return Err(invalid("model.beta", format!("must be nonnegative, got {}", self.model.beta)));
        }
        if let Some(s) = self.potential.s_bound {
            positive("potential.s_bound", s)?;
        }
        if let InitialDatum::ScaledSine { amplitude } = self.initial {
            if !amplitude.is_finite() {
                return Err(invalid("initial.amplitude", "must be finite"));
            }
        }
        let s = &self.solver;
        positive("solver.newton_tol", s.newton_tol)?;
        positive("solver.picard_tol", s.picard_tol)?;
        if !(s.picard_theta > 0.0 && s.picard_theta <= 1.0) {
            return Err(invalid("solver.picard_theta", format!("must lie in (0, 1], got {}", s.picard_theta)));
        }
        if s.max_newton_iterations == 0 || s.picard_max_iterations == 0 {
            return Err(invalid("solver", "iteration caps must be positive"));
        }
        if let Some(t) = self.output.snapshot_times.iter().find(|t| !(**t >= 0.0 && **t <= self.time.horizon)) {
            return Err(invalid("output.snapshot_times", format!("{t} lies outside [0, {}]", self.time.horizon)));
        }
        if self.sweep.betas.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(invalid("sweep.betas", "entries must be finite and nonnegative"));
        }
        if self.verify.deltas.iter().any(|d| !(d.is_finite() && *d > 0.0))
            || self.verify.deltas.windows(2).any(|w| !(w[1] < w[0]))
        {
            return Err(invalid("verify.deltas", "must be positive and strictly decreasing"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        make_grid(self.domain.length, self.domain.nodes).map_err(|e| invalid("domain", e))
    }

    pub fn potential(&self, grid: &Grid) -> Result<PotentialModel, CliError> {
        let built = match (&self.potential.kind, self.potential.s_bound) {
            (PotentialKind::Quartic, None) => Ok(PotentialModel::quartic_well()),
            (PotentialKind::LangmuirBlodgett(p), None) => PotentialModel::lb_potential(*p, grid),
            (PotentialKind::LangmuirBlodgett(p), Some(s)) => PotentialModel::lb_potential_on_range(*p, grid, s),
            (PotentialKind::Polynomial { coefficients }, s) => {
                PotentialModel::polynomial(coefficients.clone(), grid, s.unwrap_or(DEFAULT_S_BOUND))
            }
            (kind, Some(s)) => PotentialModel::certified(kind.clone(), grid, s),
        };
        built.map_err(|e| invalid("potential", e))
    }

    /// The initial datum; must vanish at `x = 0`.
    pub fn initial_datum(&self, grid: &Grid) -> Result<Field, CliError> {
        let values = match &self.initial {
            InitialDatum::Zero => return Ok(Field::zeros(grid)),
            InitialDatum::ScaledSine { amplitude } => {
                let k = std::f64::consts::FRAC_PI_2 / grid.length();
                grid.sample(|x| amplitude * (k * x).sin())
            }
            InitialDatum::File { path } => read_nodal_values(path)?,
        };
        Field::new(grid, values).map_err(|e| invalid("initial", e))
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig {
            tau: self.time.horizon / self.time.steps as f64,
            newton_tol: self.solver.newton_tol,
            max_newton_iterations: self.solver.max_newton_iterations,
            max_halvings: self.solver.max_halvings,
        }
    }

    pub fn picard_config(&self) -> PicardConfig {
        PicardConfig {
            theta: self.solver.picard_theta,
            tol: self.solver.picard_tol,
            max_iterations: self.solver.picard_max_iterations,
            start: self.solver.picard_start,
        }
    }
}

fn read_nodal_values(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid("initial.path", format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let last = line.split_whitespace().last().expect("non-empty line");
        let v: f64 = last
            .parse()
            .map_err(|_| invalid("initial.path", format!("{}:{}: bad number {last:?}", path.display(), lineno + 1)))?;
        values.push(v);
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[domain]\nlength = 1.0\nnodes = 21\n[time]\nhorizon = 0.1\nsteps = 10\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.model.beta, 0.0);
        assert_eq!(cfg.potential.kind, PotentialKind::Quartic);
        assert_eq!(cfg.initial, InitialDatum::ScaledSine { amplitude: 0.5 });
        assert_eq!(cfg.sweep.betas, vec![0.04, 0.02, 0.01]);
        assert!((cfg.step_config().tau - 0.01).abs() < 1e-15);
    }

    #[test]
    fn round_trip_is_idempotent() {
        let text = format!(
            "seed = 9\n{MINIMAL}[model]\nbeta = 0.1\n[potential]\nkind = \"lb\"\nc0 = -0.9\nzeta0 = 0.2\nxs = 0.5\nls = 0.1\n\
             [initial]\nkind = \"zero\"\n[output]\nsnapshot_times = [0.0, 0.1]\n"
        );
        let cfg = RunConfig::parse(&text).unwrap();
        let once = cfg.to_toml();
        let again = RunConfig::parse(&once).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_toml(), once);
    }

    #[test]
    fn errors_name_the_key() {
        let err = RunConfig::parse(&MINIMAL.replace("nodes = 21", "nodes = 2")).unwrap_err();
        assert!(err.to_string().contains("domain.nodes"), "{err}");
        let err = RunConfig::parse(&format!("{MINIMAL}[model]\nbeta = -1.0\n")).unwrap_err();
        assert!(err.to_string().contains("model.beta"), "{err}");
        let err = RunConfig::parse(&format!("{MINIMAL}[model]\nbeat = 1.0\n")).unwrap_err();
        assert!(err.to_string().contains("beat"), "{err}");
    }

    #[test]
    fn initial_datum_must_vanish_at_origin() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("u0.txt");
        let values: Vec<String> = (0..21).map(|i| format!("{}", 0.1 + i as f64 * 0.01)).collect();
        std::fs::write(&file, values.join("\n")).unwrap();
        let cfg_path = dir.path().join("run.toml");
        std::fs::write(&cfg_path, format!("{MINIMAL}[initial]\nkind = \"file\"\npath = \"u0.txt\"\n")).unwrap();
        let cfg = RunConfig::load(&cfg_path).unwrap();
        let grid = cfg.grid().unwrap();
        assert!(matches!(cfg.initial_datum(&grid), Err(CliError::Config(_))));

        let pairs: Vec<String> = (0..21).map(|i| format!("{} {}", i as f64 * 0.05, i as f64 * 0.01)).collect();
        std::fs::write(&file, format!("# x u\n{}\n", pairs.join("\n"))).unwrap();
        let u0 = cfg.initial_datum(&grid).unwrap();
        assert!((u0[20] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn potential_selection() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        let grid = cfg.grid().unwrap();
        assert_eq!(cfg.potential(&grid).unwrap().k0, 0.25);
        let poly = RunConfig::parse(&format!("{MINIMAL}[potential]\nkind = \"polynomial\"\ncoefficients = [0.0, 0.0, 0.5]\n"))
            .unwrap();
        let m = poly.potential(&grid).unwrap();
        assert_eq!((m.k0, m.k1), (0.0, 0.0));
    }
}

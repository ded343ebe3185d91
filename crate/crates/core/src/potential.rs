//! Double-well potentials `W(x, s)` and their growth constants.
//!
//! Every model carries `K0`, `K1` with `W >= -K0` and
//! `d_s W(x, s) s >= W(x, s) - K1` on its certified range of `s`.

use serde::{Deserialize, Serialize};

use crate::{Error, Grid, Result};

/// Pointwise evaluators of a potential and its derivatives.
pub trait Potential {
    fn value(&self, x: f64, s: f64) -> f64;
    fn ds(&self, x: f64, s: f64) -> f64;
    fn dss(&self, x: f64, s: f64) -> f64;
    fn dsx(&self, x: f64, s: f64) -> f64;
}

/// Langmuir-Blodgett meniscus parameters: offset `c0`, meniscus depth
/// `zeta0`, position `xs` and width `ls`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LBParams {
    pub c0: f64,
    pub zeta0: f64,
    pub xs: f64,
    pub ls: f64,
}

impl LBParams {
    /// Meniscus profile `zeta(x) = -(zeta0 / 2) (1 + tanh((x - xs) / ls))`.
    pub fn zeta(&self, x: f64) -> f64 {
        -0.5 * self.zeta0 * (1.0 + ((x - self.xs) / self.ls).tanh())
    }

    pub fn zeta_prime(&self, x: f64) -> f64 {
        let sech = 1.0 / ((x - self.xs) / self.ls).cosh();
        -0.5 * self.zeta0 / self.ls * sech * sech
    }

    fn validate(&self, length: f64) -> Result<()> {
        if !(self.ls.is_finite() && self.ls > 0.0) {
            return Err(Error::InvalidParameter(format!("meniscus width ls must be positive, got {}", self.ls)));
        }
        if !(self.zeta0.is_finite() && self.zeta0 >= 0.0) {
            return Err(Error::InvalidParameter(format!("zeta0 must be nonnegative, got {}", self.zeta0)));
        }
        if !(self.c0.is_finite() && (0.0..=length).contains(&self.xs)) {
            return Err(Error::InvalidParameter(format!("xs = {} outside [0, {length}]", self.xs)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// `s^4/4 - s^2/2`
    Quartic,
    /// `(s + c0)^4/4 - (s + c0)^2/2 + zeta(x) s`
    #[serde(rename = "lb")]
    LangmuirBlodgett(LBParams),
    /// `sum_j c_j s^j`, independent of `x`.
    Polynomial { coefficients: Vec<f64> },
}

impl Potential for PotentialKind {
    #[inline]
    fn value(&self, x: f64, s: f64) -> f64 {
        match self {
            PotentialKind::Quartic => {
                let s2 = s * s;
                0.25 * s2 * s2 - 0.5 * s2
            }
            PotentialKind::LangmuirBlodgett(p) => {
                let y2 = (s + p.c0).powi(2);
                0.25 * y2 * y2 - 0.5 * y2 + p.zeta(x) * s
            }
            PotentialKind::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, c| acc * s + c)
            }
        }
    }

    #[inline]
    fn ds(&self, x: f64, s: f64) -> f64 {
        match self {
            PotentialKind::Quartic => s * s * s - s,
            PotentialKind::LangmuirBlodgett(p) => {
                let y = s + p.c0;
                y * y * y - y + p.zeta(x)
            }
            PotentialKind::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (j, c)| acc * s + j as f64 * c),
        }
    }

    #[inline]
    fn dss(&self, _x: f64, s: f64) -> f64 {
        match self {
            PotentialKind::Quartic => 3.0 * s * s - 1.0,
            PotentialKind::LangmuirBlodgett(p) => 3.0 * (s + p.c0).powi(2) - 1.0,
            PotentialKind::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (j, c)| acc * s + (j * (j - 1)) as f64 * c),
        }
    }

    #[inline]
    fn dsx(&self, x: f64, _s: f64) -> f64 {
        match self {
            PotentialKind::LangmuirBlodgett(p) => p.zeta_prime(x),
            _ => 0.0,
        }
    }
}

/// Default half-width of the certified `s` range for numerically certified
/// models.
pub const DEFAULT_S_BOUND: f64 = 10.0;

/// Number of `s` samples used by [`certify_constants`].
pub const CERTIFY_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialModel {
    pub kind: PotentialKind,
    pub k0: f64,
    pub k1: f64,
    /// Constants hold for `|s| <= s_bound` (infinite when analytic).
    pub s_bound: f64,
}

impl Potential for PotentialModel {
    #[inline]
    fn value(&self, x: f64, s: f64) -> f64 {
        self.kind.value(x, s)
    }
    #[inline]
    fn ds(&self, x: f64, s: f64) -> f64 {
        self.kind.ds(x, s)
    }
    #[inline]
    fn dss(&self, x: f64, s: f64) -> f64 {
        self.kind.dss(x, s)
    }
    #[inline]
    fn dsx(&self, x: f64, s: f64) -> f64 {
        self.kind.dsx(x, s)
    }
}

impl PotentialModel {
    /// `s^4/4 - s^2/2` with the exact constants `K0 = 1/4` (wells at
    /// `s = +-1`) and `K1 = 1/12` (minimum of `3 s^4/4 - s^2/2` at `s^2 = 1/3`).
    pub fn quartic_well() -> Self {
        Self { kind: PotentialKind::Quartic, k0: 0.25, k1: 1.0 / 12.0, s_bound: f64::INFINITY }
    }

    pub fn lb_potential(params: LBParams, grid: &Grid) -> Result<Self> {
        Self::lb_potential_on_range(params, grid, DEFAULT_S_BOUND + params.c0.abs())
    }

    pub fn lb_potential_on_range(params: LBParams, grid: &Grid, s_bound: f64) -> Result<Self> {
        params.validate(grid.length())?;
        Self::certified(PotentialKind::LangmuirBlodgett(params), grid, s_bound)
    }

    pub fn polynomial(coefficients: Vec<f64>, grid: &Grid, s_bound: f64) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite polynomial coefficient".into()));
        }
        Self::certified(PotentialKind::Polynomial { coefficients }, grid, s_bound)
    }

    /// Model whose constants come from [`certify_constants`] over
    /// `|s| <= s_bound` and the grid nodes.
    pub fn certified(kind: PotentialKind, grid: &Grid, s_bound: f64) -> Result<Self> {
        if !(s_bound.is_finite() && s_bound > 0.0) {
            return Err(Error::InvalidParameter(format!("certified range must be finite and positive, got {s_bound}")));
        }
        let (k0, k1) = certify_constants(&kind, (-s_bound, s_bound), grid.nodes())?;
        Ok(Self { kind, k0, k1, s_bound })
    }

    pub fn in_range(&self, s: f64) -> bool {
        s.abs() <= self.s_bound
    }
}

/// Dense-sampling certificate: `K0 = max(0, -min W)` and
/// `K1 = max(0, -min(d_s W s - W))` over `CERTIFY_SAMPLES` values of `s` in
/// `s_range` and every `x` in `x_nodes`, both padded by 10%.
pub fn certify_constants<P: Potential + ?Sized>(
    model: &P,
    s_range: (f64, f64),
    x_nodes: &[f64],
) -> Result<(f64, f64)> {
    let (lo, hi) = s_range;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) || x_nodes.is_empty() {
        return Err(Error::InvalidParameter(format!("bad certification range [{lo}, {hi}]")));
    }
    let ds = (hi - lo) / (CERTIFY_SAMPLES - 1) as f64;
    let mut min_w = f64::INFINITY;
    let mut min_g = f64::INFINITY;
    for &x in x_nodes {
        for i in 0..CERTIFY_SAMPLES {
            let s = if i + 1 == CERTIFY_SAMPLES { hi } else { lo + i as f64 * ds };
            let w = model.value(x, s);
            let g = model.ds(x, s) * s - w;
            if !(w.is_finite() && g.is_finite()) {
                return Err(Error::InvalidParameter(format!("non-finite potential at (x, s) = ({x}, {s})")));
            }
            min_w = min_w.min(w);
            min_g = min_g.min(g);
        }
    }
    Ok((1.1 * (-min_w).max(0.0), 1.1 * (-min_g).max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::make_grid;

    fn lb(c0: f64, zeta0: f64) -> LBParams {
        LBParams { c0, zeta0, xs: 0.5, ls: 0.05 }
    }

    #[test]
    fn quartic_wells() {
        let m = PotentialModel::quartic_well();
        assert_eq!(m.value(0.3, 0.0), 0.0);
        assert_eq!(m.ds(0.0, 1.0), 0.0);
        assert_eq!(m.ds(0.0, -1.0), 0.0);
        assert_eq!(m.value(0.0, 1.0), -0.25);
        assert_eq!((m.k0, m.k1), (0.25, 1.0 / 12.0));
    }

    #[test]
    fn quartic_constants_match_one_dimensional_minimization() {
        // golden-section search as an independent minimizer
        fn argmin(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
            let r = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..200 {
                let (c, d) = (b - r * (b - a), a + r * (b - a));
                if f(c) < f(d) {
                    b = d
                } else {
                    a = c
                }
            }
            f(0.5 * (a + b))
        }
        let m = PotentialKind::Quartic;
        let min_w = argmin(|s| m.value(0.0, s), 0.0, 3.0);
        let min_g = argmin(|s| m.ds(0.0, s) * s - m.value(0.0, s), 0.0, 3.0);
        assert!((min_w + 0.25).abs() < 1e-12);
        assert!((min_g + 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn lb_reduces_to_quartic() {
        let g = make_grid(1.0, 11).unwrap();
        let m = PotentialModel::lb_potential(lb(0.0, 0.0), &g).unwrap();
        let q = PotentialKind::Quartic;
        for &x in g.nodes() {
            for i in 0..21 {
                let s = -2.0 + 0.2 * i as f64;
                assert_eq!(m.value(x, s), q.value(x, s));
                assert_eq!(m.ds(x, s), q.ds(x, s));
            }
        }
    }

    #[test]
    fn meniscus_profile() {
        let p = LBParams { c0: 0.0, zeta0: 0.2, xs: 0.5, ls: 0.05 };
        assert_eq!(p.zeta(0.5), -0.1);
        let g = make_grid(1.0, 101).unwrap();
        let m = PotentialModel::lb_potential(p, &g).unwrap();
        assert!((m.value(1.0, 1.0) + 0.45).abs() < 1e-3);
    }

    #[test]
    fn lb_rejects_degenerate_width() {
        let g = make_grid(1.0, 11).unwrap();
        assert!(PotentialModel::lb_potential(LBParams { ls: 0.0, ..lb(0.0, 0.1) }, &g).is_err());
        assert!(PotentialModel::lb_potential(LBParams { zeta0: -1.0, ..lb(0.0, 0.1) }, &g).is_err());
    }

    #[test]
    fn certify_examples() {
        let g = make_grid(1.0, 5).unwrap();
        let sq = PotentialKind::Polynomial { coefficients: vec![0.0, 0.0, 1.0] };
        assert_eq!(certify_constants(&sq, (-3.0, 3.0), g.nodes()).unwrap(), (0.0, 0.0));

        let (k0, k1) = certify_constants(&PotentialKind::Quartic, (-3.0, 3.0), g.nodes()).unwrap();
        assert!((0.25..=0.25 * 1.1 + 1e-12).contains(&k0), "{k0}");
        assert!((1.0 / 12.0..=1.1 / 12.0 + 1e-12).contains(&k1), "{k1}");
    }

    #[test]
    fn certify_tilted_well_dominates_brute_force() {
        let tilted = PotentialKind::Polynomial { coefficients: vec![0.0, 0.1, -0.5, 0.0, 0.25] };
        let (k0, k1) = certify_constants(&tilted, (-3.0, 3.0), &[0.0]).unwrap();
        // independent oracle: 10^4 random points in the range
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let s: f64 = rng.random_range(-3.0..=3.0);
            let w = tilted.value(0.0, s);
            assert!(w >= -k0);
            assert!(tilted.ds(0.0, s) * s >= w - k1);
        }
        // the analytic minimum of W sits near the left well
        let wmin = tilted.value(0.0, -1.0488);
        assert!(k0 >= -wmin);
    }

    #[test]
    fn certified_constants_hold_on_lattice() {
        let g = make_grid(1.0, 51).unwrap();
        let p = LBParams { c0: -0.9, zeta0: 0.2, xs: 0.5, ls: 0.05 };
        let m = PotentialModel::lb_potential(p, &g).unwrap();
        assert!(m.k0 > 0.0 && m.k1 > 0.0);
        for &x in g.nodes() {
            for i in 0..=200 {
                let s = -m.s_bound + 2.0 * m.s_bound * i as f64 / 200.0;
                let w = m.value(x, s);
                assert!(w >= -m.k0, "W({x}, {s}) = {w}");
                assert!(m.ds(x, s) * s >= w - m.k1);
            }
        }
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let models = [
            PotentialKind::Quartic,
            PotentialKind::LangmuirBlodgett(LBParams { c0: -0.9, zeta0: 0.2, xs: 0.5, ls: 0.05 }),
            PotentialKind::LangmuirBlodgett(LBParams { c0: 0.3, zeta0: 1.0, xs: 0.2, ls: 0.3 }),
            PotentialKind::Polynomial { coefficients: vec![0.0, 0.1, -0.5, 0.2, 0.25] },
        ];
        let eps = 1e-5;
        for m in &models {
            for i in 0..50 {
                let x = i as f64 / 49.0;
                for j in 0..50 {
                    let s = -2.0 + 4.0 * j as f64 / 49.0;
                    let fd_s = (m.value(x, s + eps) - m.value(x, s - eps)) / (2.0 * eps);
                    assert!(rel_close(m.ds(x, s), fd_s, 1e-5), "{m:?} ds at ({x},{s})");
                    let fd_ss = (m.ds(x, s + eps) - m.ds(x, s - eps)) / (2.0 * eps);
                    assert!(rel_close(m.dss(x, s), fd_ss, 1e-5), "{m:?} dss at ({x},{s})");
                    let fd_sx = (m.ds(x + eps, s) - m.ds(x - eps, s)) / (2.0 * eps);
                    assert!(rel_close(m.dsx(x, s), fd_sx, 1e-5), "{m:?} dsx at ({x},{s})");
                }
            }
        }
    }
}

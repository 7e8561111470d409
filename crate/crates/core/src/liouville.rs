//! The explicit singular Liouville family
//! `η_ρ(x) = log(2(1-b)ρ cos(πb/2) / (|x|^{2(1-b)} + 2ρ|x|^{1-b} sin(πb/2) + ρ²))`,
//! which solves `(-Δ)^{1/2} η = |x|^{-b} e^η` on the line.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::operators::{apply_frac_laplacian, integrate_line};
use crate::profile::Profile;
use crate::quadrature::QuadratureConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleParams {
    pub rho: f64,
    pub b: f64,
}

impl LiouvilleParams {
    pub fn new(rho: f64, b: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Domain(format!("ρ = {rho} must be positive")));
        }
        if !(b > -1.0 && b < 1.0) {
            return Err(Error::Domain(format!("b = {b} not in (-1, 1)")));
        }
        Ok(Self { rho, b })
    }

    /// `2π(1-b)`.
    pub fn kappa_exact(&self) -> f64 {
        2.0 * PI * (1.0 - self.b)
    }

    /// `ρ` whose member takes the value `eta0` at the origin.
    pub fn rho_for_origin_value(b: f64, eta0: f64) -> f64 {
        2.0 * (1.0 - b) * (0.5 * PI * b).cos() * (-eta0).exp()
    }
}

pub fn eta_family(lp: &LiouvilleParams, x: f64) -> f64 {
    let LiouvilleParams { rho, b } = *lp;
    let (s, c) = (0.5 * PI * b).sin_cos();
    let r = x.abs().powf(1.0 - b);
    (2.0 * (1.0 - b) * rho * c).ln() - (r * r + 2.0 * rho * r * s + rho * rho).ln()
}

/// `η_ρ` as a profile for the integrators.
#[derive(Clone, Copy, Debug)]
pub struct Eta(pub LiouvilleParams);

impl Profile for Eta {
    fn value(&self, x: f64) -> f64 {
        eta_family(&self.0, x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        if self.0.b == 0.0 {
            Vec::new()
        } else {
            vec![0.0]
        }
    }
    fn is_even(&self) -> bool {
        true
    }
}

/// The density `|x|^{-b} e^{η}` of `dm_b`.
pub fn density(lp: &LiouvilleParams, x: f64) -> f64 {
    let w = if lp.b == 0.0 { 1.0 } else { x.abs().powf(-lp.b) };
    w * eta_family(lp, x).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    pub kappa: f64,
    pub kappa_exact: f64,
    pub rel_err: f64,
    pub quadrature_error: f64,
}

/// `κ = ∫ |x|^{-b} e^{η_ρ}`.
pub fn mass(lp: &LiouvilleParams, cfg: &QuadratureConfig) -> Result<MassReport> {
    let lp = LiouvilleParams::new(lp.rho, lp.b)?;
    let f = |x: f64| density(&lp, x);
    let scale = lp.rho.powf(1.0 / (1.0 - lp.b));
    let e = integrate_line(f, lp.b.max(0.0), 2.0 - lp.b, true, &[scale], cfg)?;
    let kappa_exact = lp.kappa_exact();
    Ok(MassReport {
        kappa: e.value,
        kappa_exact,
        rel_err: (e.value - kappa_exact).abs() / kappa_exact,
        quadrature_error: e.error,
    })
}

/// The default sampling grid: `[10⁻⁸, 10⁸]`, ten nodes per decade.
pub fn default_grid() -> Grid {
    Grid::geometric(1e-8, 1e8, 10.0).expect("static grid")
}

/// Samples `η_ρ` on `grid`.
pub fn sample(lp: &LiouvilleParams, grid: Grid) -> Result<GridFunction> {
    GridFunction::from_fn(grid, |x| eta_family(lp, x), 0.0, 0.0)
}

/// `max |(-Δ)^{1/2} u - |x|^{-b} e^{η_ρ}|` over `nodes`.
pub fn residual_of<P: Profile + ?Sized>(
    u: &P,
    lp: &LiouvilleParams,
    nodes: &[f64],
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for &x in nodes {
        if x == 0.0 {
            return Err(Error::Domain("residual nodes must avoid the origin".into()));
        }
        let l = apply_frac_laplacian(u, 0.5, x, cfg)?.value;
        worst = worst.max((l - density(lp, x)).abs());
    }
    Ok(worst)
}

/// Residual of the exact family member.
pub fn residual(lp: &LiouvilleParams, nodes: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
    residual_of(&Eta(*lp), lp, nodes, cfg)
}

/// Residual of the spline sampling of `η_ρ` on `grid`, at the grid nodes with
/// `lo ≤ |x| ≤ hi`.
pub fn sampled_residual(lp: &LiouvilleParams, grid: Grid, lo: f64, hi: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let u = sample(lp, grid)?;
    let nodes: Vec<f64> = grid.nodes().into_iter().filter(|x| x.abs() >= lo && x.abs() <= hi).collect();
    residual_of(&u, lp, &nodes, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoFit {
    pub params: LiouvilleParams,
    pub fit_error: f64,
}

/// Fits `ρ` by minimising `max |samples - η_ρ|` over the sample nodes with
/// `|x| ≤ window`.
pub fn fit_rho(samples: &GridFunction, b: f64, window: f64, max_error: f64) -> Result<RhoFit> {
    let pts: Vec<(f64, f64)> = samples
        .nodes()
        .into_iter()
        .zip(samples.values().iter().copied())
        .filter(|(x, _)| x.abs() <= window)
        .collect();
    if pts.is_empty() {
        return Err(Error::FitFailed(format!("no samples inside |x| ≤ {window}")));
    }
    fit_rho_points(&pts, b, max_error)
}

/// [`fit_rho`] on explicit `(x, η)` pairs.
pub fn fit_rho_points(pts: &[(f64, f64)], b: f64, max_error: f64) -> Result<RhoFit> {
    LiouvilleParams::new(1.0, b)?;
    let err = |ln_rho: f64| {
        let lp = LiouvilleParams { rho: ln_rho.exp(), b };
        pts.iter().map(|&(x, v)| (v - eta_family(&lp, x)).abs()).fold(0.0, f64::max)
    };
    // coarse scan, then golden section on the bracketing cell
    let (lo, hi, m) = (-12.0f64, 12.0f64, 480);
    let step = (hi - lo) / m as f64;
    let mut best = (0, f64::INFINITY);
    for i in 0..=m {
        let e = err(lo + step * i as f64);
        if e < best.1 {
            best = (i, e);
        }
    }
    let mut a = lo + step * (best.0 as f64 - 1.0);
    let mut c = lo + step * (best.0 as f64 + 1.0);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = c - g * (c - a);
    let mut x2 = a + g * (c - a);
    let (mut f1, mut f2) = (err(x1), err(x2));
    while c - a > 1e-13 {
        if f1 < f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - g * (c - a);
            f1 = err(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (c - a);
            f2 = err(x2);
        }
    }
    let ln_rho = 0.5 * (a + c);
    let fit_error = err(ln_rho);
    if !(fit_error <= max_error) {
        return Err(Error::FitFailed(format!("sup error {fit_error} exceeds {max_error}")));
    }
    Ok(RhoFit { params: LiouvilleParams { rho: ln_rho.exp(), b }, fit_error })
}

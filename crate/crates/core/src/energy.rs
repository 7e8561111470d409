//! The CKN energy quotient
//! `E(u) = ‖u‖²_{γ,α} / (∫ |x|^{-βp} |u|^p)^{2/p}`, its ground-state form,
//! the explicit competitor `(1 + x²)^{-δ}` and the extremal solver.
//!
//! The solver works on the even cubic log-splines of [`GridFunction`]. Its
//! collocation matrix is cheap because `L` commutes with dilations:
//! `L[u(λ·)](x) = λ^{2γ+2α} (Lu)(λx)`, so every interior basis function is a
//! dilate of one reference spline and a single row of operator values fills
//! the whole matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{EvenSpline, Grid, GridFunction, LogSpline};
use crate::limit::ScheduleParams;
use crate::operators::{apply_l, c_gamma_alpha, weighted_lp, weighted_norm_sq, CknParams};
use crate::profile::{Analytic, PowerWeighted, Profile};
use crate::quadrature::{integrate_pieces, Estimate, Piece, QuadratureConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `‖u‖²_{γ,α}`
    pub numerator: f64,
    /// `(∫ |x|^{-βp} |u|^p)^{2/p}`
    pub denominator: f64,
    pub ratio: f64,
    /// `∫ |x|^{-βp} |u|^p`
    pub lp_mass: f64,
    /// `sup |Lu - μ |x|^{-βp} u^{p-1}|` over the check nodes.
    pub el_residual: f64,
    pub numerator_error: f64,
    pub lp_mass_error: f64,
}

/// `n` geometric points per decade strictly inside `[lo, hi]`, placed halfway
/// (in `log x`) between the points of the matching geometric grid.
pub fn check_nodes(lo: f64, hi: f64, per_decade: f64) -> Vec<f64> {
    let n = ((hi / lo).log10() * per_decade).round().max(1.0) as usize;
    let h = (hi / lo).ln() / n as f64;
    (0..n).map(|i| lo * (h * (i as f64 + 0.5)).exp()).collect()
}

/// `sup |Lu - μ |x|^{-βp} u^{p-1}|` over `nodes` (and their mirrors when `u` is
/// not even).
pub fn el_residual<P: Profile + ?Sized>(
    u: &P,
    params: &CknParams,
    mu: f64,
    nodes: &[f64],
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let mut pts: Vec<f64> = nodes.to_vec();
    if !u.is_even() {
        pts.extend(nodes.iter().map(|x| -x));
    }
    let mut worst = 0.0f64;
    for x in pts {
        let l = apply_l(u, params.gamma, params.alpha, x, cfg)?.value;
        let ux = u.value(x);
        let rhs = mu * x.abs().powf(-params.weight_power()) * ux.abs().powf(params.p - 1.0) * ux.signum();
        worst = worst.max((l - rhs).abs());
    }
    Ok(worst)
}

fn assemble(numerator: Estimate, lp: Estimate, p: f64) -> Result<EnergyReport> {
    if !(lp.value > 0.0) {
        return Err(Error::ZeroDenominator);
    }
    let denominator = lp.value.powf(2.0 / p);
    Ok(EnergyReport {
        numerator: numerator.value,
        denominator,
        ratio: numerator.value / denominator,
        lp_mass: lp.value,
        el_residual: 0.0,
        numerator_error: numerator.error,
        lp_mass_error: lp.error,
    })
}

/// `E(u)`. The Euler–Lagrange defect is measured at `nodes` with the
/// multiplier `μ = ‖u‖² / (2∫|x|^{-βp}|u|^p)` that a critical point would
/// have; pass no nodes to skip it.
pub fn energy_at<P: Profile + ?Sized>(
    u: &P,
    params: &CknParams,
    nodes: &[f64],
    cfg: &QuadratureConfig,
) -> Result<EnergyReport> {
    let num = weighted_norm_sq(u, params.gamma, params.alpha, cfg)?;
    let lp = weighted_lp(u, params.p, params.weight_power(), cfg)?;
    let mut r = assemble(num, lp, params.p)?;
    if !nodes.is_empty() {
        let mu = r.numerator / (2.0 * r.lp_mass);
        r.el_residual = el_residual(u, params, mu, nodes, cfg)?;
    }
    Ok(r)
}

/// `E(u)` with the defect checked at 10 nodes per decade on `[10⁻², 10²]`.
pub fn energy<P: Profile + ?Sized>(u: &P, params: &CknParams, cfg: &QuadratureConfig) -> Result<EnergyReport> {
    energy_at(u, params, &check_nodes(1e-2, 1e2, 10.0), cfg)
}

/// The same quotient written in `ũ = |x|^{-α} u`:
/// `‖u‖²_{γ,α} = ∬ (ũ(x) - ũ(y))² |x - y|^{-1-2γ} + 2 C_{γ,α} ∫ ũ² |x|^{-2γ}` and
/// `∫ |x|^{-βp}|u|^p = ∫ |x|^{-(β-α)p} |ũ|^p`.
pub fn energy_tilde<P: Profile + ?Sized>(
    u_tilde: &P,
    params: &CknParams,
    cfg: &QuadratureConfig,
) -> Result<EnergyReport> {
    let (g, a, p) = (params.gamma, params.alpha, params.p);
    let gag = weighted_norm_sq(u_tilde, g, 0.0, cfg)?;
    let c = c_gamma_alpha(1, g, a, cfg)?;
    let f = |x: f64| {
        let v = u_tilde.value(x);
        v * v * x.abs().powf(-2.0 * g)
    };
    let e0 = 2.0 * g + 2.0 * u_tilde.origin_exponent();
    let decay = 2.0 * g + 2.0 * u_tilde.decay_exponent().min(1e3);
    let hardy = crate::operators::integrate_line(f, e0, decay, u_tilde.is_even(), &u_tilde.breakpoints(), cfg)?;
    let num = Estimate {
        value: gag.value + 2.0 * c.value * hardy.value,
        error: gag.error + 2.0 * (c.error * hardy.value.abs() + c.value.abs() * hardy.error),
        evals: gag.evals + c.evals + hardy.evals,
    };
    let lp = weighted_lp(u_tilde, p, (params.beta - a) * p, cfg)?;
    let mut r = assemble(num, lp, p)?;
    let u = PowerWeighted { inner: u_tilde, power: a };
    r.el_residual = el_residual(&u, params, r.numerator / (2.0 * r.lp_mass), &check_nodes(1e-2, 1e2, 10.0), cfg)?;
    Ok(r)
}

/// `φ_δ(x) = (1 + x²)^{-δ}`.
pub fn upper_bound_test_function(delta: f64) -> Result<Analytic<impl Fn(f64) -> f64>> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("δ = {delta} must be positive")));
    }
    Ok(Analytic::new(move |x: f64| (-delta * x.mul_add(x, 1.0).ln()).exp()).even().decay(2.0 * delta).breaks([-1.0, 1.0]))
}

/// `δ` with `2γ + 2α + 4δ = 1 + 4/p`.
pub fn delta_from_schedule(sched: &ScheduleParams) -> Result<f64> {
    let d = (1.0 + 4.0 / sched.p_eps - 2.0 * sched.gamma_eps - 2.0 * sched.alpha_eps) / 4.0;
    if !(d > 0.0) {
        return Err(Error::Domain(format!("δ = {d} is not positive")));
    }
    Ok(d)
}

/// `f(x) = ∫₀^∞ (φ_δ(x) - φ_δ(y))² |x - y|^{-1-2γ} y^{-α} dy` for `x > 0`.
pub fn f_eps(delta: f64, gamma: f64, alpha: f64, x: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("x = {x} must be positive")));
    }
    let phi = |y: f64| (-delta * y.mul_add(y, 1.0).ln()).exp();
    let px = phi(x);
    let s = -1.0 - 2.0 * gamma;
    let f = |y: f64| {
        let d = px - phi(y);
        d * d * (x - y).abs().powf(s) * y.powf(-alpha)
    };
    let ed = Some(2.0 * gamma - 1.0);
    let pieces = [
        Piece::singular(0.0, x, Some(alpha), ed),
        Piece::singular(x, 2.0 * x, ed, None),
        Piece::Up { from: 2.0 * x, decay: 1.0 + 2.0 * gamma + alpha },
    ];
    integrate_pieces(&f, &pieces, &[1.0], cfg)
}

/// Discretisation and stopping knobs of [`minimize`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverKnobs {
    pub x_min: f64,
    pub x_max: f64,
    pub per_decade: f64,
    pub max_iter: usize,
    /// Relative collocation defect `max|Lu - μf| / max|μf|` to reach. The
    /// iteration then continues until the defect stops improving.
    pub tol: f64,
    /// Monotone rearrangement of `|x|^{-α}u` after every step.
    pub rearrange: bool,
    pub check_min: f64,
    pub check_max: f64,
    pub check_per_decade: f64,
}

impl Default for SolverKnobs {
    fn default() -> Self {
        Self {
            x_min: 1e-8,
            x_max: 1e8,
            per_decade: 16.0,
            max_iter: 50_000,
            tol: 1e-4,
            rearrange: true,
            check_min: 1e-2,
            check_max: 1e2,
            check_per_decade: 10.0,
        }
    }
}

impl SolverKnobs {
    pub fn validate(&self) -> Result<()> {
        let ok = self.x_min > 0.0
            && self.x_max > self.x_min
            && self.per_decade > 0.0
            && self.max_iter > 0
            && self.tol > 0.0
            && self.check_min > 0.0
            && self.check_max > self.check_min
            && self.check_per_decade > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid solver knobs {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    /// Discrete energy quotient on the collocation grid.
    pub ratio: f64,
    /// Relative collocation defect at the grid nodes.
    pub el_residual: f64,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizerResult {
    pub u: GridFunction,
    pub report: EnergyReport,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

/// Collocation of `L` on the even log-spline space of a grid.
struct Collocation {
    grid: Grid,
    /// decay exponent of the right continuation
    decay: f64,
    /// `q^{iσ} (LΦ_j)(x_i)`, LU-factorised
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    scaled: DMatrix<f64>,
    row_scale: Vec<f64>,
    x: Vec<f64>,
    /// `|x_i|^{-βp}`
    w: Vec<f64>,
    p: f64,
    alpha: f64,
}

fn reference_spline(t0: f64, h: f64, coeffs: Vec<f64>, left: f64, right: f64, decay: f64) -> EvenSpline {
    EvenSpline { spline: LogSpline { t0, h, coeffs, left, right }, origin: 0.0, decay }
}

/// `(L B)(x)` for an even spline `B` supported on `a ≤ |y| ≤ b` and `x` off that set.
fn outside_annulus(b: &EvenSpline, gamma: f64, alpha: f64, x: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let lo = b.spline.t0 - 2.0 * b.spline.h;
    let hi = b.spline.t0 + b.spline.h * (b.spline.coeffs.len() as f64 + 1.0);
    let (ya, yb) = (lo.exp(), hi.exp());
    let s = -1.0 - 2.0 * gamma;
    let f = |y: f64| -b.value(y) * ((x - y).abs().powf(s) + (x + y).abs().powf(s)) * y.powf(-alpha);
    let knots: Vec<f64> = b.spline.active_knots().into_iter().map(f64::exp).filter(|&k| k > ya && k < yb).collect();
    let r = integrate_pieces(&f, &[Piece::span(ya, yb)], &knots, cfg)?;
    Ok(r.value * x.powf(-alpha))
}

impl Collocation {
    fn new(params: &CknParams, grid: Grid, cfg: &QuadratureConfig) -> Result<Self> {
        let (g, a) = (params.gamma, params.alpha);
        let n = grid.n;
        let h = grid.h;
        let sigma = 2.0 * g + 2.0 * a;
        let decay = 1.0 - 2.0 * g - 2.0 * a;
        let r = (-decay * h).exp();
        let x: Vec<f64> = grid.positive_nodes();

        // g(m) = (L B_0)(x_0 q^m)
        let b0 = reference_spline(grid.t0, h, vec![1.0], 0.0, 0.0, f64::INFINITY);
        let mut gm = vec![0.0; 2 * n - 1];
        for (k, slot) in gm.iter_mut().enumerate() {
            let m = k as f64 - (n - 1) as f64;
            let xm = (grid.t0 + m * h).exp();
            *slot = if m.abs() >= 2.0 { outside_annulus(&b0, g, a, xm, cfg)? } else { apply_l(&b0, g, a, xm, cfg)?.value };
        }
        let first = reference_spline(grid.t0, h, vec![1.0, 0.0], 1.0, 0.0, f64::INFINITY);
        let last = reference_spline(grid.t0 + (n as f64 - 2.0) * h, h, vec![0.0, 1.0], 0.0, r, decay);
        let mut scaled = DMatrix::zeros(n, n);
        let row_scale: Vec<f64> = (0..n).map(|i| (sigma * h * i as f64).exp()).collect();
        for i in 0..n {
            scaled[(i, 0)] = row_scale[i] * apply_l(&first, g, a, x[i], cfg)?.value;
            scaled[(i, n - 1)] = row_scale[i] * apply_l(&last, g, a, x[i], cfg)?.value;
            for j in 1..n - 1 {
                let m = i as i64 - j as i64;
                scaled[(i, j)] = (sigma * h * m as f64).exp() * gm[(m + n as i64 - 1) as usize];
            }
        }
        let lu = scaled.clone().lu();
        let w = x.iter().map(|&xi| xi.powf(-params.weight_power())).collect();
        Ok(Self { grid, decay, lu, scaled, row_scale, x, w, p: params.p, alpha: a })
    }

    fn right(&self) -> f64 {
        (-self.decay * self.grid.h).exp()
    }

    fn coeffs(&self, u: &[f64]) -> Vec<f64> {
        LogSpline::interpolate(self.grid.t0, self.grid.h, u, 1.0, self.right()).coeffs
    }

    fn values(&self, c: &[f64]) -> Vec<f64> {
        let n = c.len();
        let at = |j: i64| {
            if j < 0 {
                c[0]
            } else if j as usize >= n {
                c[n - 1] * self.right()
            } else {
                c[j as usize]
            }
        };
        (0..n as i64).map(|i| (at(i - 1) + 4.0 * at(i) + at(i + 1)) / 6.0).collect()
    }

    /// `(Lu)(x_i)` for the spline with coefficients `c`.
    fn apply(&self, c: &[f64]) -> Vec<f64> {
        let v = &self.scaled * DVector::from_column_slice(c);
        v.iter().zip(&self.row_scale).map(|(a, s)| a / s).collect()
    }

    fn solve(&self, f: &[f64]) -> Result<Vec<f64>> {
        let rhs = DVector::from_iterator(f.len(), f.iter().zip(&self.row_scale).map(|(a, s)| a * s));
        self.lu
            .solve(&rhs)
            .map(|v| v.iter().copied().collect())
            .ok_or_else(|| Error::Domain("singular collocation matrix".into()))
    }

    fn nonlinearity(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.w).map(|(&ui, &wi)| wi * ui.powf(self.p - 1.0)).collect()
    }

    /// `(Σ ω u Lu, Σ ω w u^p)` with `ω_i = x_i h` on the half-line.
    fn forms(&self, u: &[f64], lu: &[f64]) -> (f64, f64) {
        let h = self.grid.h;
        let mut a = 0.0;
        let mut b = 0.0;
        for i in 0..u.len() {
            let om = self.x[i] * h;
            a += om * u[i] * lu[i];
            b += om * self.w[i] * u[i].powf(self.p);
        }
        (a, b)
    }

    /// Discrete quotient of the even function: `4Σ / (2Σ)^{2/p}`.
    fn ratio(&self, u: &[f64]) -> f64 {
        let lu = self.apply(&self.coeffs(u));
        let (a, b) = self.forms(u, &lu);
        4.0 * a / (2.0 * b).powf(2.0 / self.p)
    }

    /// Relative defect `max|Lu - μf| / max|μf|` and the multiplier `μ`.
    fn defect(&self, u: &[f64]) -> (f64, f64) {
        let lu = self.apply(&self.coeffs(u));
        let f = self.nonlinearity(u);
        let (a, b) = self.forms(u, &lu);
        let mu = a / b;
        let top = f.iter().fold(0.0f64, |m, fi| m.max(mu * fi));
        let d = lu.iter().zip(&f).map(|(l, fi)| (l - mu * fi).abs()).fold(0.0, f64::max);
        (d / top, mu)
    }

    fn project(&self, u: &mut [f64], rearrange: bool) -> Result<()> {
        let top = u.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        if !(top > 0.0) {
            return Err(Error::PositivityLost(0));
        }
        let floor = 1e-300;
        for v in u.iter_mut() {
            *v = v.max(floor);
        }
        if rearrange {
            let mut run = f64::INFINITY;
            for (v, &x) in u.iter_mut().zip(&self.x) {
                let wx = x.powf(self.alpha);
                run = run.min(*v / wx);
                *v = (run * wx).max(floor);
            }
        }
        Ok(())
    }
}

/// Largest value of an even `u` on `[-r, r]`, sampled at the origin, at `r`, and
/// at four points per grid cell.
pub fn max_on_ball(u: &GridFunction, r: f64) -> f64 {
    let mut m = u.value(0.0).max(u.value(r));
    let g = u.grid;
    for i in 0..g.n {
        for k in 0..4 {
            let x = (g.t0 + g.h * (i as f64 + 0.25 * k as f64)).exp();
            if x > r {
                return m;
            }
            m = m.max(u.value(x));
        }
    }
    m
}

/// Extremal of `E` for core-window parameters.
///
/// Petviashvili iteration on the collocation system `Lu = w u^{p-1}` with
/// backtracking on the discrete quotient, projected onto positive even
/// functions with `|x|^{-α}u` nonincreasing. The fixed point is then replaced
/// by `x ↦ c u(Rx)` so that `Lu = (1/p)|x|^{-βp}u^{p-1}` and `max_{B̄₁} u = 1`.
pub fn minimize<P: Profile + ?Sized>(
    params: &CknParams,
    init: &P,
    knobs: &SolverKnobs,
    cfg: &QuadratureConfig,
) -> Result<MinimizerResult> {
    params.check_core_window()?;
    knobs.validate()?;
    let p = params.p;
    if !(p > 2.0) {
        return Err(Error::WindowViolation(format!("p = {p} must exceed 2")));
    }
    let grid = Grid::geometric(knobs.x_min, knobs.x_max, knobs.per_decade)?;
    let col = Collocation::new(params, grid, cfg)?;
    let mut u: Vec<f64> = col.x.iter().map(|&x| 0.5 * (init.value(x) + init.value(-x))).collect();
    col.project(&mut u, knobs.rearrange)?;

    let power = (p - 1.0) / (p - 2.0);
    let mut ratio = col.ratio(&u);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    // Once the defect is below `tol`, keep going while it still improves.
    let (mut best, mut idle) = (f64::INFINITY, 0);
    for iter in 1..=knobs.max_iter {
        iterations = iter;
        let (defect, mu) = col.defect(&u);
        if defect < 0.9 * best {
            best = defect;
            idle = 0;
        } else {
            idle += 1;
        }
        if (defect <= knobs.tol && idle >= 5) || idle >= 100 {
            converged = defect <= knobs.tol;
            trace.push(TraceRow { iter, ratio, el_residual: defect, step: 0.0 });
            break;
        }
        let f = col.nonlinearity(&u);
        let target = col.values(&col.solve(&f)?);
        let scale = mu.powf(power);
        let mut step = 1.0;
        let next = loop {
            let mut cand: Vec<f64> = u.iter().zip(&target).map(|(ui, ti)| ui + step * (scale * ti - ui)).collect();
            col.project(&mut cand, knobs.rearrange)?;
            let r = col.ratio(&cand);
            if r <= ratio * (1.0 + 1e-12) || step < 1.0 / 1024.0 {
                break cand;
            }
            step *= 0.5;
        };
        u = next;
        ratio = col.ratio(&u);
        trace.push(TraceRow { iter, ratio, el_residual: defect, step });
    }

    // x ↦ c u(Rx): μ m(R)^{p-2} R^θ = 1/p with θ = 2γ + 2α - βp, c = 1/m(R)
    let mu = col.defect(&u).1;
    let raw = GridFunction::even_from_positive(grid, &u, 0.0, col.decay)?;
    let theta = 2.0 * params.gamma + 2.0 * params.alpha - params.weight_power();
    if !(theta > 0.0) {
        return Err(Error::WindowViolation(format!("2γ + 2α - βp = {theta} must be positive")));
    }
    let target = -p.ln();
    let eq = |ln_r: f64| mu.ln() + (p - 2.0) * max_on_ball(&raw, ln_r.exp()).ln() + theta * ln_r - target;
    let (mut lo, mut hi) = (grid.t0, grid.t0 + grid.h * (grid.n - 1) as f64);
    if !(eq(lo) < 0.0 && eq(hi) > 0.0) {
        return Err(Error::NotConverged { iterations, residual: f64::NAN });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eq(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rr = (0.5 * (lo + hi)).exp();
    let v = raw.rescaled(1.0 / max_on_ball(&raw, rr), rr);
    let v = v.rescaled(1.0 / max_on_ball(&v, 1.0), 1.0);

    let mut report = energy_at(&v, params, &[], cfg)?;
    let nodes = check_nodes(knobs.check_min, knobs.check_max, knobs.check_per_decade);
    report.el_residual = el_residual(&v, params, 1.0 / p, &nodes, cfg)?;
    Ok(MinimizerResult { u: v, report, iterations, converged, trace })
}

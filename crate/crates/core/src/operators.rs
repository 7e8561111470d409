//! The weighted nonlocal operator `L_{γ,α}`, its quadratic form, and the
//! constants attached to it.
//!
//! `L u(x) = PV∫ (u(x) - u(y)) G(x, y) dy` with
//! `G(x, y) = |x - y|^{-1-2γ} |x|^{-α} |y|^{-α}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::profile::{Profile, Reflected};
use crate::quadrature::{integrate_pieces, Estimate, Piece, QuadratureConfig};
use crate::special;

/// `(n, γ, α, β)` and the derived exponent `p = 2n / (n - 2γ + 2(β - α))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CknParams {
    pub n: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
}

pub fn exponent_p(n: usize, gamma: f64, alpha: f64, beta: f64) -> Result<f64> {
    let nf = n as f64;
    let den = nf - 2.0 * gamma + 2.0 * (beta - alpha);
    if !(den > 0.0) {
        return Err(Error::Domain(format!("n - 2γ + 2(β - α) = {den} is not positive")));
    }
    Ok(2.0 * nf / den)
}

impl CknParams {
    /// One-dimensional parameters.
    pub fn new(gamma: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Domain(format!("γ = {gamma} not in (0, 1)")));
        }
        let p = exponent_p(1, gamma, alpha, beta)?;
        Ok(Self { n: 1, gamma, alpha, beta, p })
    }

    /// `0 < α < min{β, (1-2γ)/2}`, `β < α + γ`, `0 < γ < 1/2`.
    pub fn check_core_window(&self) -> Result<()> {
        let (g, a, b) = (self.gamma, self.alpha, self.beta);
        let fail = |what: &str| Err(Error::WindowViolation(format!("{what} (γ={g}, α={a}, β={b})")));
        if !(g > 0.0 && g < 0.5) {
            return fail("γ must lie in (0, 1/2)");
        }
        if !(a > 0.0) {
            return fail("α must be positive");
        }
        if !(a < b) {
            return fail("α < β violated");
        }
        if !(a < (1.0 - 2.0 * g) / 2.0) {
            return fail("α < (1-2γ)/2 violated");
        }
        if !(b < a + g) {
            return fail("β < α + γ violated");
        }
        Ok(())
    }

    /// `(n-2γ)/2 < α < n`, the range reached by inversion.
    pub fn check_extended_window(&self) -> Result<()> {
        let nf = self.n as f64;
        if self.alpha > (nf - 2.0 * self.gamma) / 2.0 && self.alpha < nf {
            Ok(())
        } else {
            Err(Error::WindowViolation(format!(
                "α = {} outside ((n-2γ)/2, n) for γ = {}",
                self.alpha, self.gamma
            )))
        }
    }

    /// Exponent of the weight in the denominator, `βp`.
    pub fn weight_power(&self) -> f64 {
        self.beta * self.p
    }

    /// Parameters after `x ↦ x/|x|²`: `ᾱ = n - 2γ - α` and `β̄ p = 2n - β p`.
    pub fn kelvin(&self) -> Self {
        let nf = self.n as f64;
        let alpha = nf - 2.0 * self.gamma - self.alpha;
        let beta = (2.0 * nf - self.beta * self.p) / self.p;
        Self { n: self.n, gamma: self.gamma, alpha, beta, p: self.p }
    }
}

/// `G_{γ,α}(x, y)`.
#[inline]
pub fn kernel(gamma: f64, alpha: f64, x: f64, y: f64) -> f64 {
    let d = (x - y).abs().powf(-1.0 - 2.0 * gamma);
    if alpha == 0.0 {
        d
    } else {
        d * (x.abs() * y.abs()).powf(-alpha)
    }
}

#[inline]
fn weight(alpha: f64, y: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else {
        y.abs().powf(-alpha)
    }
}

pub fn sigma_gamma(n: usize, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("γ = {gamma} not in (0, 1)")));
    }
    Ok(special::sigma_gamma(n, gamma))
}

pub fn c_hardy(n: usize, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && 2.0 * gamma < n as f64) {
        return Err(Error::Domain(format!("closed form needs 0 < 2γ < n, got γ = {gamma}")));
    }
    Ok(special::hardy_constant(n, gamma))
}

fn check_1d(n: usize) -> Result<()> {
    if n != 1 {
        return Err(Error::Domain("quadrature paths are one-dimensional".into()));
    }
    Ok(())
}

/// `C_{γ,α}` from the folded integral over the unit ball,
/// `∫_{-1}^{1} (|z|^{-α} - 1)(1 - |z|^{-1+2γ+α}) |1 - z|^{-1-2γ} dz`.
pub fn c_gamma_alpha(n: usize, gamma: f64, alpha: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    check_1d(n)?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("γ = {gamma} not in (0, 1)")));
    }
    if alpha == 0.0 {
        return Ok(Estimate { value: 0.0, error: 0.0, evals: 0 });
    }
    let k = -1.0 + 2.0 * gamma + alpha;
    let fold = |ln_s: f64| (-alpha * ln_s).exp_m1() * -(k * ln_s).exp_m1();
    // z = 1 - h on (1/2, 1)
    let right = |h: f64| fold((-h).ln_1p()) * h.powf(-1.0 - 2.0 * gamma);
    // z on (0, 1/2)
    let mid = |z: f64| fold(z.ln()) * (1.0 - z).powf(-1.0 - 2.0 * gamma);
    // z = -s on (-1, 0)
    let left = |s: f64| fold(s.ln()) * (1.0 + s).powf(-1.0 - 2.0 * gamma);
    let e_zero = 1.0 - 2.0 * gamma;
    let a = integrate_pieces(&right, &[Piece::singular(0.0, 0.5, Some(2.0 * gamma - 1.0), None)], &[], cfg)?;
    let m = integrate_pieces(&mid, &[Piece::singular(0.0, 0.5, Some(e_zero), None)], &[], cfg)?;
    let b = integrate_pieces(&left, &[Piece::singular(0.0, 1.0, Some(e_zero), None)], &[], cfg)?;
    Ok(add(add(a, m), b))
}

/// `C_{γ,α}` from the principal-value form
/// `PV∫ (|z|^{-α} - 1) |1 - z|^{-1-2γ} dz`, paired symmetrically around `z = 1`.
pub fn c_gamma_alpha_pv(gamma: f64, alpha: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    let s = -1.0 - 2.0 * gamma;
    // (1+h)^{-α} - 1 + (1-h)^{-α} - 1 on 0 < h < 1
    let near = |h: f64| {
        ((-alpha * h.ln_1p()).exp_m1() + (-alpha * (-h).ln_1p()).exp_m1()) * h.powf(s)
    };
    // z = 1 + h > 2 and z = 1 - h < 0 for h > 1
    let far = |h: f64| ((-alpha * (1.0 + h).ln()).exp_m1() + (-alpha * (h - 1.0).ln()).exp_m1()) * h.powf(s);
    let a = integrate_pieces(&near, &[Piece::singular(0.0, 1.0, Some(2.0 * gamma - 1.0), Some(alpha))], &[], cfg)?;
    let b = integrate_pieces(
        &far,
        &[Piece::singular(1.0, 2.0, Some(alpha), None), Piece::Up { from: 2.0, decay: 1.0 + 2.0 * gamma }],
        &[],
        cfg,
    )?;
    Ok(Estimate { value: a.value + b.value, error: a.error + b.error, evals: a.evals + b.evals })
}

/// `c_H` by quadrature: `-ς_γ C_{γ,(1-2γ)/2}`.
pub fn c_hardy_quadrature(gamma: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    let c = c_gamma_alpha(1, gamma, (1.0 - 2.0 * gamma) / 2.0, cfg)?;
    let s = special::sigma_gamma(1, gamma);
    Ok(Estimate { value: -s * c.value, error: s * c.error, evals: c.evals })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub n: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub sigma_gamma: f64,
    pub c_gamma_alpha: f64,
    pub c_hardy: f64,
    pub c_ckn: f64,
    pub quadrature_error: f64,
}

pub fn constants(n: usize, gamma: f64, alpha: f64, cfg: &QuadratureConfig) -> Result<ConstantsReport> {
    let sigma = sigma_gamma(n, gamma)?;
    let c = c_gamma_alpha(n, gamma, alpha, cfg)?;
    Ok(ConstantsReport {
        n,
        gamma,
        alpha,
        sigma_gamma: sigma,
        c_gamma_alpha: c.value,
        c_hardy: c_hardy(n, gamma)?,
        c_ckn: -sigma * c.value,
        quadrature_error: sigma * c.error,
    })
}

fn add(a: Estimate, b: Estimate) -> Estimate {
    Estimate { value: a.value + b.value, error: a.error + b.error, evals: a.evals + b.evals }
}

const ZERO: Estimate = Estimate { value: 0.0, error: 0.0, evals: 0 };

fn integrand_decay(base: f64, d: f64, vanishes_at_x: bool) -> f64 {
    if vanishes_at_x {
        base + d.min(10.0)
    } else {
        base + d.min(0.0)
    }
}

/// Pieces covering `ℝ` with singular points at `0` and `x`.
fn around(x: f64, e0: f64, ed: Option<f64>, decay: f64) -> Vec<Piece> {
    if x > 0.0 {
        vec![
            Piece::Down { from: -x, decay },
            Piece::singular(-x, 0.0, None, Some(e0)),
            Piece::singular(0.0, x, Some(e0), ed),
            Piece::singular(x, 2.0 * x, ed, None),
            Piece::Up { from: 2.0 * x, decay },
        ]
    } else {
        vec![
            Piece::Down { from: 2.0 * x, decay },
            Piece::singular(2.0 * x, x, None, ed),
            Piece::singular(x, 0.0, ed, Some(e0)),
            Piece::singular(0.0, -x, Some(e0), None),
            Piece::Up { from: -x, decay },
        ]
    }
}

/// Pieces covering `ℝ` with a singular point at `0` only.
fn whole_line(e0: f64, decay: f64, r: f64) -> Vec<Piece> {
    vec![
        Piece::Down { from: -r, decay },
        Piece::singular(-r, 0.0, None, Some(e0)),
        Piece::singular(0.0, r, Some(e0), None),
        Piece::Up { from: r, decay },
    ]
}

fn half_line(e0: f64, decay: f64, r: f64) -> Vec<Piece> {
    vec![Piece::singular(0.0, r, Some(e0), None), Piece::Up { from: r, decay }]
}

/// `L_{γ,α} u(x)`.
pub fn apply_l<P: Profile + ?Sized>(u: &P, gamma: f64, alpha: f64, x: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    if x == 0.0 || !x.is_finite() {
        return Err(Error::Domain(format!("L is evaluated away from the origin, got x = {x}")));
    }
    if x < 0.0 {
        return apply_l_pos(&Reflected(u), gamma, alpha, -x, cfg);
    }
    apply_l_pos(u, gamma, alpha, x, cfg)
}

fn apply_l_pos<P: Profile + ?Sized>(u: &P, gamma: f64, alpha: f64, x: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    let s = -1.0 - 2.0 * gamma;
    let ux = u.value(x);
    let o = u.origin_exponent().max(0.0);
    let e0 = alpha + o;
    let breaks = u.breakpoints();
    let scale = weight(alpha, x);

    if ux == 0.0 {
        if let Some((a, b)) = u.support() {
            if x <= a || x >= b {
                let f = |y: f64| -u.value(y) * (x - y).abs().powf(s) * weight(alpha, y);
                let mut pieces = Vec::new();
                if a < 0.0 && b > 0.0 {
                    pieces.push(Piece::singular(a, 0.0, None, Some(e0)));
                    pieces.push(Piece::singular(0.0, b, Some(e0), None));
                } else {
                    let left = if a == 0.0 { Some(e0) } else { None };
                    let right = if b == 0.0 { Some(e0) } else { None };
                    pieces.push(Piece::singular(a, b, left, right));
                }
                let r = integrate_pieces(&f, &pieces, &breaks, cfg)?;
                return Ok(Estimate { value: r.value * scale, error: r.error * scale, evals: r.evals });
            }
        }
    }

    // Paired part on x - H < y < x + H. With a singular weight or origin
    // behaviour the pairing stops at H = x/2; otherwise it may cross 0.
    let singular0 = alpha != 0.0 || u.origin_exponent() != 0.0;
    let nearest = breaks
        .iter()
        .map(|&t| (t - x).abs())
        .filter(|&h| h > 1e-12 * x)
        .fold(f64::INFINITY, f64::min);
    let scale_x = if singular0 { x } else { x.max(1.0) };
    let h0 = (cfg.pv_exclusion * scale_x).min(0.25 * nearest);
    let reach = if singular0 { 0.5 * x } else { (0.5 * x).max(4.0 * h0) };
    let bracket = |h: f64| {
        let a = (ux - u.value(x + h)) * weight(alpha, x + h);
        let b = (ux - u.value(x - h)) * weight(alpha, x - h);
        a + b
    };
    let near = |h: f64| bracket(h) * h.powf(s);
    let mut hb: Vec<f64> = breaks
        .iter()
        .map(|&t| (t - x).abs())
        .filter(|&h| h > h0 && h < reach)
        .collect();
    hb.sort_by(|a, b| a.total_cmp(b));
    hb.dedup();
    // Rounding in u(x) - u(x ± h) is amplified by h^{-1-2γ} down to h0.
    let noise = 32.0 * f64::EPSILON * ux.abs() * weight(alpha, x - reach) * h0.powf(-2.0 * gamma) / (2.0 * gamma);
    let near_cfg = QuadratureConfig { abs_tol: cfg.abs_tol.max(noise), ..cfg.clone() };
    let mut total = integrate_pieces(&near, &[Piece::span(h0, reach)], &hb, &near_cfg)?;
    let c = pv_closure(bracket(h0), bracket(2.0 * h0), h0, gamma);
    total.value += c.value;
    total.error += c.error;

    let decay = integrand_decay(-s + alpha, u.decay_exponent(), ux == 0.0);
    if !(decay > 1.0) {
        return Err(Error::Domain(format!("integrand decays like |y|^-{decay}, not integrable")));
    }
    let far = |y: f64| (ux - u.value(y)) * (x - y).abs().powf(s) * weight(alpha, y);
    let pieces: Vec<Piece> = if singular0 {
        vec![
            Piece::Down { from: -x, decay },
            Piece::singular(-x, 0.0, None, Some(e0)),
            Piece::singular(0.0, 0.5 * x, Some(e0), None),
            Piece::Up { from: 1.5 * x, decay },
        ]
    } else {
        vec![Piece::Down { from: x - reach, decay }, Piece::Up { from: x + reach, decay }]
    };
    total = add(total, integrate_pieces(&far, &pieces, &breaks, cfg)?);
    Ok(Estimate { value: total.value * scale, error: total.error * scale, evals: total.evals })
}

/// `∫_0^{h0} B(h) h^{-1-2γ} dh` for the pairing bracket, fitted as
/// `B(h) = a h² + c h³` through `B(h0)` and `B(2 h0)`. The cubic term covers
/// knots of `C²` data, where the third derivative jumps.
fn pv_closure(b1: f64, b2: f64, h0: f64, gamma: f64) -> Estimate {
    let c = (b2 - 4.0 * b1) / (4.0 * h0.powi(3));
    let a = (b1 - c * h0.powi(3)) / (h0 * h0);
    let lead = a * h0.powf(2.0 - 2.0 * gamma) / (2.0 - 2.0 * gamma);
    let next = c * h0.powf(3.0 - 2.0 * gamma) / (3.0 - 2.0 * gamma);
    Estimate { value: lead + next, error: next.abs() * h0, evals: 2 }
}

/// `(-Δ)^γ u(x) = ς_γ PV∫ (u(x) - u(y)) |x - y|^{-1-2γ} dy`.
pub fn apply_frac_laplacian<P: Profile + ?Sized>(u: &P, gamma: f64, x: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    let s = sigma_gamma(1, gamma)?;
    let r = apply_l(u, gamma, 0.0, x, cfg)?;
    Ok(Estimate { value: s * r.value, error: s * r.error, evals: r.evals })
}

/// `∫ (u(x) - u(y))(v(x) - v(y)) G(x, y) dy` at a fixed `x`.
pub fn cross_term<P: Profile + ?Sized, Q: Profile + ?Sized>(
    u: &P,
    v: &Q,
    gamma: f64,
    alpha: f64,
    x: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    if x == 0.0 {
        return Err(Error::Domain("cross term is evaluated away from the origin".into()));
    }
    let (ux, vx) = (u.value(x), v.value(x));
    let s = -1.0 - 2.0 * gamma;
    let f = |y: f64| (ux - u.value(y)) * (vx - v.value(y)) * (x - y).abs().powf(s) * weight(alpha, y);
    let o = u.origin_exponent().max(0.0) + v.origin_exponent().max(0.0);
    let d = u.decay_exponent().min(0.0) + v.decay_exponent().min(0.0);
    let decay = -s + alpha + d;
    let mut breaks = u.breakpoints();
    breaks.extend(v.breakpoints());
    crate::profile::sort_dedup(&mut breaks);
    let r = integrate_pieces(&f, &around(x, alpha + o, Some(2.0 * gamma - 1.0), decay), &breaks, cfg)?;
    let w = weight(alpha, x);
    Ok(Estimate { value: r.value * w, error: r.error * w, evals: r.evals })
}

/// Collects the first error raised inside an integrand.
struct Failure(std::cell::RefCell<Option<Error>>);

impl Failure {
    fn new() -> Self {
        Self(std::cell::RefCell::new(None))
    }
    fn take(&self, r: Result<Estimate>) -> f64 {
        match r {
            Ok(e) => e.value,
            Err(e) => {
                self.0.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    }
    fn check<T>(self, r: Result<T>) -> Result<T> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => r,
        }
    }
}

/// Inner integral of the quadratic form at a fixed `x`,
/// `|x|^{-α} ∫ (u(x) - u(y))² |x - y|^{-1-2γ} |y|^{-α} dy`.
pub(crate) fn norm_density<P: Profile + ?Sized>(
    u: &P,
    gamma: f64,
    alpha: f64,
    x: f64,
    breaks: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    let ux = u.value(x);
    let s = -1.0 - 2.0 * gamma;
    let f = |y: f64| {
        let d = ux - u.value(y);
        d * d * (x - y).abs().powf(s) * weight(alpha, y)
    };
    let o = u.origin_exponent().max(0.0);
    let decay = -s + alpha + 2.0 * u.decay_exponent().min(0.0);
    let r = integrate_pieces(&f, &around(x, alpha + 2.0 * o, Some(2.0 * gamma - 1.0), decay), breaks, cfg)?;
    let w = weight(alpha, x);
    Ok(Estimate { value: r.value * w, error: r.error * w, evals: r.evals })
}

/// Inner tolerance at `x` for an outer integrand decaying like `|x|^{-decay}`.
/// Near the origin an inner error of order `|x|^{-1/2}` still integrates to
/// the outer tolerance.
fn inner_cfg(cfg: &QuadratureConfig, x: f64, decay: f64) -> QuadratureConfig {
    let mut c = cfg.clone();
    c.abs_tol = cfg.abs_tol * (1.0 + x.abs()).powf(-decay.clamp(0.0, 8.0)) / x.abs().min(1.0).sqrt();
    c
}

/// `‖u‖²_{γ,α} = ∬ (u(x) - u(y))² G_{γ,α}(x, y) dx dy`.
pub fn weighted_norm_sq<P: Profile + ?Sized>(u: &P, gamma: f64, alpha: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    let breaks = u.breakpoints();
    let fail = Failure::new();
    let o = u.origin_exponent().max(0.0);
    let e0 = (alpha + 2.0 * o).max(2.0 * alpha + 2.0 * o + 2.0 * gamma - 1.0);
    let d = u.decay_exponent();
    let decay = (2.0 * d + 2.0 * gamma + 2.0 * alpha).min(1.0 + 2.0 * gamma + alpha);
    if !(decay > 1.0) {
        return Err(Error::Domain(format!("quadratic form density decays like |x|^-{decay}")));
    }
    let inner = |x: f64| fail.take(norm_density(u, gamma, alpha, x, &breaks, &inner_cfg(cfg, x, decay)));
    let r = if u.is_even() {
        integrate_pieces(&inner, &half_line(e0, decay, cfg.r_max), &breaks, cfg).map(|mut e| {
            e.value *= 2.0;
            e.error *= 2.0;
            e
        })
    } else {
        integrate_pieces(&inner, &whole_line(e0, decay, cfg.r_max), &breaks, cfg)
    };
    fail.check(r)
}

/// `∫ f(x) dx` over `ℝ` for an integrand singular at 0 with exponent `e0` and
/// decaying with exponent `decay`; halves the work for even integrands.
pub fn integrate_line<F: Fn(f64) -> f64>(
    f: F,
    e0: f64,
    decay: f64,
    even: bool,
    breaks: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    if !(decay > 1.0) {
        return Err(Error::Domain(format!("integrand decays like |x|^-{decay}, not integrable")));
    }
    if even {
        let mut r = integrate_pieces(&f, &half_line(e0, decay, cfg.r_max), breaks, cfg)?;
        r.value *= 2.0;
        r.error *= 2.0;
        Ok(r)
    } else {
        integrate_pieces(&f, &whole_line(e0, decay, cfg.r_max), breaks, cfg)
    }
}

/// `∫ v·L_{γ,α}u`, integrating over the support of `v` when it is compact.
pub fn pairing<P: Profile + ?Sized, Q: Profile + ?Sized>(
    v: &Q,
    u: &P,
    gamma: f64,
    alpha: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    let fail = Failure::new();
    let outer = if v.support().is_some() { 0.0 } else { v.decay_exponent() };
    let f = |x: f64| {
        let vx = v.value(x);
        if vx == 0.0 {
            return 0.0;
        }
        vx * fail.take(apply_l(u, gamma, alpha, x, &inner_cfg(cfg, x, outer)))
    };
    let mut breaks = u.breakpoints();
    breaks.extend(v.breakpoints());
    crate::profile::sort_dedup(&mut breaks);
    let e0 = alpha + v.origin_exponent().max(0.0) + u.origin_exponent().max(0.0) + 2.0 * gamma;
    let e0 = e0.min(0.999);
    let r = match v.support() {
        Some((a, b)) => {
            let mut pieces = Vec::new();
            if a < 0.0 && b > 0.0 {
                pieces.push(Piece::singular(a, 0.0, None, Some(e0)));
                pieces.push(Piece::singular(0.0, b, Some(e0), None));
            } else {
                pieces.push(Piece::span(a, b));
            }
            integrate_pieces(&f, &pieces, &breaks, cfg)
        }
        None => {
            let decay = v.decay_exponent() + 2.0 * gamma + 2.0 * alpha + u.decay_exponent().min(0.0);
            integrate_line(&f, e0, decay, u.is_even() && v.is_even(), &breaks, cfg)
        }
    };
    fail.check(r)
}

/// `∫ |u|^p |x|^{-w}`.
pub fn weighted_lp<P: Profile + ?Sized>(u: &P, p: f64, w: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    let f = |x: f64| u.value(x).abs().powf(p) * x.abs().powf(-w);
    let e0 = w + p * u.origin_exponent();
    let decay = w + p * u.decay_exponent().min(1e3);
    integrate_line(f, e0, decay, u.is_even(), &u.breakpoints(), cfg)
}

/// `∫ |u| / (1 + |x|^q)`.
pub fn l1q_norm<P: Profile + ?Sized>(u: &P, q: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    if !(q > 1.0) {
        return Err(Error::Domain(format!("q = {q} must exceed 1")));
    }
    let f = |x: f64| u.value(x).abs() / (1.0 + x.abs().powf(q));
    integrate_line(f, u.origin_exponent().max(0.0), q + u.decay_exponent().min(1e3), u.is_even(), &u.breakpoints(), cfg)
}

fn check_intervals(s: &[(f64, f64)]) -> Result<()> {
    if s.iter().any(|&(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
        return Err(Error::Domain("intervals must be bounded and nonempty".into()));
    }
    Ok(())
}

fn split_at_zero(a: f64, b: f64, e0: f64) -> Vec<Piece> {
    if a < 0.0 && b > 0.0 {
        vec![Piece::singular(a, 0.0, None, Some(e0)), Piece::singular(0.0, b, Some(e0), None)]
    } else {
        vec![Piece::singular(a, b, (a == 0.0).then_some(e0), (b == 0.0).then_some(e0))]
    }
}

/// `|S|_{μ_α} = ∫_S |x|^{-α} dx` for a union of intervals.
pub fn weighted_measure(s: &[(f64, f64)], alpha: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    check_intervals(s)?;
    let f = |x: f64| weight(alpha, x);
    let mut total = ZERO;
    for &(a, b) in s {
        total = add(total, integrate_pieces(&f, &split_at_zero(a, b, alpha), &[], cfg)?);
    }
    Ok(total)
}

/// `[u]²_S = ∬_{S×S} G (u(x) - u(y))²` for a union of intervals.
pub fn seminorm_sq<P: Profile + ?Sized>(
    u: &P,
    s: &[(f64, f64)],
    gamma: f64,
    alpha: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    check_intervals(s)?;
    let breaks = u.breakpoints();
    let fail = Failure::new();
    let o = u.origin_exponent().max(0.0);
    let inner = |x: f64| {
        let ux = u.value(x);
        let f = |y: f64| {
            let d = ux - u.value(y);
            d * d * kernel(gamma, alpha, x, y)
        };
        let mut total = ZERO;
        for &(c, d) in s {
            let mut cuts: Vec<(f64, f64)> = Vec::new();
            if c < 0.0 && d > 0.0 {
                cuts.push((0.0, alpha + 2.0 * o));
            }
            if c < x && x < d {
                cuts.push((x, 2.0 * gamma - 1.0));
            }
            cuts.sort_by(|p, q| p.0.total_cmp(&q.0));
            let end_e = |t: f64| {
                if t == 0.0 {
                    Some(alpha + 2.0 * o)
                } else if t == x {
                    Some(2.0 * gamma - 1.0)
                } else {
                    None
                }
            };
            let mut pieces = Vec::new();
            let mut lo = (c, end_e(c));
            for (t, e) in cuts {
                pieces.push(Piece::singular(lo.0, t, lo.1, Some(e)));
                lo = (t, Some(e));
            }
            pieces.push(Piece::singular(lo.0, d, lo.1, end_e(d)));
            match integrate_pieces(&f, &pieces, &breaks, cfg) {
                Ok(e) => total = add(total, e),
                Err(e) => return fail.take(Err(e)),
            }
        }
        total.value
    };
    let e0 = (alpha + 2.0 * o).max(2.0 * alpha + 2.0 * o + 2.0 * gamma - 1.0);
    let mut total = ZERO;
    for &(a, b) in s {
        let mut pieces = split_at_zero(a, b, e0);
        for p in pieces.iter_mut() {
            if let Piece::Span { a: pa, b: pb, left, right } = p {
                for &(c, d) in s {
                    for t in [c, d] {
                        if (t - *pa).abs() < 1e-15 && left.is_none() {
                            *left = Some(2.0 * gamma - 1.0);
                        }
                        if (t - *pb).abs() < 1e-15 && right.is_none() {
                            *right = Some(2.0 * gamma - 1.0);
                        }
                    }
                }
            }
        }
        let r = integrate_pieces(&inner, &pieces, &breaks, cfg);
        total = add(total, fail_map(&fail, r)?);
    }
    fail.check(Ok(total))
}

fn fail_map(fail: &Failure, r: Result<Estimate>) -> Result<Estimate> {
    if fail.0.borrow().is_some() {
        return Err(fail.0.borrow().clone().unwrap());
    }
    r
}

/// `Tail_α(u; x0, R) = R^{2γ+α} ∫_{|x-x0|>R} |u(x)| |x - x0|^{-1-2γ} |x|^{-α} dx`.
pub fn tail<P: Profile + ?Sized>(
    u: &P,
    x0: f64,
    r: f64,
    gamma: f64,
    alpha: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius {r} must be positive")));
    }
    let s = -1.0 - 2.0 * gamma;
    let f = |x: f64| u.value(x).abs() * (x - x0).abs().powf(s) * weight(alpha, x);
    let e0 = alpha + u.origin_exponent().max(0.0);
    let decay = -s + alpha + u.decay_exponent().min(1e3);
    if !(decay > 1.0) {
        return Err(Error::Domain(format!("tail integrand decays like |x|^-{decay}")));
    }
    let (lo, hi) = (x0 - r, x0 + r);
    let mut pieces = Vec::new();
    // (-∞, lo)
    if lo > 0.0 {
        pieces.push(Piece::Down { from: -lo.max(1.0), decay });
        pieces.push(Piece::singular(-lo.max(1.0), 0.0, None, Some(e0)));
        pieces.push(Piece::singular(0.0, lo, Some(e0), None));
    } else {
        pieces.push(Piece::Down { from: lo, decay });
    }
    // (hi, ∞)
    if hi < 0.0 {
        pieces.push(Piece::singular(hi, 0.0, None, Some(e0)));
        pieces.push(Piece::singular(0.0, (-hi).max(1.0), Some(e0), None));
        pieces.push(Piece::Up { from: (-hi).max(1.0), decay });
    } else {
        pieces.push(Piece::Up { from: hi, decay });
    }
    if lo == 0.0 || hi == 0.0 {
        return Err(Error::Domain("the ball boundary must avoid the origin".into()));
    }
    let mut est = integrate_pieces(&f, &pieces, &u.breakpoints(), cfg)?;
    let k = r.powf(2.0 * gamma + alpha);
    est.value *= k;
    est.error *= k;
    Ok(est)
}

/// `ū(x) = u(x/|x|²)` with the parameters of the inverted problem.
pub fn kelvin_invert(u: &GridFunction, params: &CknParams) -> Result<(GridFunction, CknParams)> {
    Ok((u.inverted()?, params.kelvin()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn p_examples() {
        assert!((exponent_p(1, 0.45, 0.02, 0.05).unwrap() - 12.5).abs() < 1e-12);
        assert!((exponent_p(1, 0.3, 0.1, 0.1).unwrap() - 2.0 / 0.4).abs() < 1e-12);
        assert!(exponent_p(1, 0.6, 0.0, 0.0).is_err());
    }

    #[test]
    fn kelvin_preserves_p() {
        let q = CknParams::new(0.3, 0.1, 0.15).unwrap();
        let k = q.kelvin();
        assert!((exponent_p(1, k.gamma, k.alpha, k.beta).unwrap() - q.p).abs() < 1e-12);
        assert!((q.beta * q.p + k.beta * k.p - 2.0).abs() < 1e-14);
        assert!(k.check_extended_window().is_ok());
    }

    #[test]
    fn window_checks() {
        assert!(CknParams::new(0.3, 0.1, 0.15).unwrap().check_core_window().is_ok());
        assert!(matches!(
            CknParams::new(0.3, 0.1, 0.5).unwrap().check_core_window(),
            Err(Error::WindowViolation(_))
        ));
    }

    #[test]
    fn folded_and_pv_forms_agree() {
        for &(g, a) in &[(0.25, 0.2), (0.4, 0.05), (0.1, 0.3)] {
            let f = c_gamma_alpha(1, g, a, &cfg()).unwrap().value;
            let p = c_gamma_alpha_pv(g, a, &cfg()).unwrap().value;
            assert!((f - p).abs() < 1e-8 * f.abs().max(1.0), "γ={g} α={a}: {f} vs {p}");
            assert!(f < 0.0);
        }
    }

    #[test]
    fn hardy_route() {
        let q = c_hardy_quadrature(0.25, &cfg()).unwrap().value;
        assert!((q - c_hardy(1, 0.25).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn constants_annihilated() {
        let u = crate::profile::Analytic::new(|_| 3.0).even();
        for &x in &[-2.0, 0.3, 5.0] {
            assert!(apply_l(&u, 0.3, 0.1, x, &cfg()).unwrap().value.abs() < 1e-12);
        }
    }

    #[test]
    fn half_laplacian_of_lorentzian() {
        let u = crate::profile::Analytic::new(|x: f64| 1.0 / (1.0 + x * x)).decay(2.0).even();
        for &x in &[0.1, 0.7, 1.0, 2.5, 10.0] {
            let v = apply_frac_laplacian(&u, 0.5, x, &cfg()).unwrap().value;
            let exact = (1.0 - x * x) / (1.0 + x * x).powi(2);
            assert!((v - exact).abs() < 1e-8, "x={x}: {v} vs {exact}");
        }
    }

    #[test]
    fn half_laplacian_of_log_profile() {
        let u = crate::profile::Analytic::new(|x: f64| (2.0 / (1.0 + x * x)).ln()).even();
        for &x in &[-3.0, 0.2, 1.0, 4.0] {
            let v = apply_frac_laplacian(&u, 0.5, x, &cfg()).unwrap().value;
            assert!((v - 2.0 / (1.0 + x * x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn measure_matches_closed_form() {
        let a = 0.3;
        let closed = |l: f64, r: f64| {
            let prim = |x: f64| x.signum() * x.abs().powf(1.0 - a) / (1.0 - a);
            prim(r) - prim(l)
        };
        let m = weighted_measure(&[(-0.5, 2.0), (3.0, 4.0)], a, &cfg()).unwrap().value;
        assert!((m - closed(-0.5, 2.0) - closed(3.0, 4.0)).abs() < 1e-10);
    }

    #[test]
    fn l1q_of_one() {
        let u = crate::profile::Analytic::new(|_| 1.0).even();
        assert!((l1q_norm(&u, 2.0, &cfg()).unwrap().value - PI).abs() < 1e-9);
    }
}

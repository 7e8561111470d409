//! The limiting Onofri-type inequality
//! `log((1/κ)∫e^v dm_b) ≤ (1/2κ)∫v(-Δ)^{1/2}v + (1/κ)∫v dm_b`, with
//! `dm_b = |x|^{-b} e^{η} dx`, its test battery, the `ψ_k` sequence and the
//! counterexample for `b < 0`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::MinimizerResult;
use crate::error::{Error, Result};
use crate::liouville::{self, LiouvilleParams};
use crate::operators::{cross_term, pairing, weighted_norm_sq, CknParams};
use crate::profile::{plateau, sort_dedup, Analytic, Product, Profile};
use crate::quadrature::{integrate_pieces, Estimate, Piece, QuadratureConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub lhs: f64,
    pub quad_term: f64,
    /// `quad_term` through `∫ v (-Δ)^{1/2} v` instead of the double integral.
    pub quad_term_pairing: f64,
    pub mean_term: f64,
    pub gap: f64,
    pub error_bar: f64,
    pub kappa: f64,
    pub kappa_exact: f64,
    /// `1/(2κ)` and `1/κ`, the coefficients in front of the two right-hand terms.
    pub quad_coeff: f64,
    pub mean_coeff: f64,
}

/// The raw integrals entering a gap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapIntegrals {
    /// `∫ (e^v - 1) dm_b`
    pub exp_excess: Estimate,
    /// `∫ v dm_b`
    pub mean: Estimate,
    /// `∫ v (-Δ)^{1/2} v` from the double integral
    pub quarter: Estimate,
    /// the same through the operator
    pub quarter_pairing: Estimate,
    pub kappa: Estimate,
    pub kappa_exact: f64,
}

impl GapIntegrals {
    /// The gap for `a·v`, given the integrals of `v` and of `e^{a v} - 1`.
    pub fn assemble(&self, a: f64) -> GapReport {
        let k = self.kappa.value;
        let lhs = (self.exp_excess.value / k).ln_1p();
        let quad_term = a * a * self.quarter.value / (2.0 * k);
        let quad_term_pairing = a * a * self.quarter_pairing.value / (2.0 * k);
        let mean_term = a * self.mean.value / k;
        let error_bar = self.exp_excess.error / (k + self.exp_excess.value).abs()
            + a * a * self.quarter.error / (2.0 * k)
            + a.abs() * self.mean.error / k;
        GapReport {
            lhs,
            quad_term,
            quad_term_pairing,
            mean_term,
            gap: quad_term + mean_term - lhs,
            error_bar,
            kappa: k,
            kappa_exact: self.kappa_exact,
            quad_coeff: 1.0 / (2.0 * k),
            mean_coeff: 1.0 / k,
        }
    }
}

fn support_pieces<P: Profile + ?Sized>(v: &P, b: f64) -> Result<(Vec<Piece>, Vec<f64>)> {
    let (lo, hi) = v
        .support()
        .ok_or_else(|| Error::UnsupportedSupport("test functions must have compact support".into()))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::UnsupportedSupport(format!("support ({lo}, {hi})")));
    }
    let e0 = b.max(0.0);
    let pieces = if lo < 0.0 && hi > 0.0 {
        vec![Piece::singular(lo, 0.0, None, Some(e0)), Piece::singular(0.0, hi, Some(e0), None)]
    } else {
        vec![Piece::singular(lo, hi, (lo == 0.0).then_some(e0), (hi == 0.0).then_some(e0))]
    };
    let mut breaks = v.breakpoints();
    breaks.retain(|t| t.is_finite());
    sort_dedup(&mut breaks);
    Ok((pieces, breaks))
}

/// Integrals of `v` against `dm_b`, with `e^{a v}` on the left.
pub fn gap_integrals<P: Profile + ?Sized>(
    v: &P,
    a: f64,
    lp: &LiouvilleParams,
    cfg: &QuadratureConfig,
) -> Result<GapIntegrals> {
    let lp = LiouvilleParams::new(lp.rho, lp.b)?;
    let m = liouville::mass(&lp, cfg)?;
    let (pieces, breaks) = support_pieces(v, lp.b)?;
    let exp_excess = integrate_pieces(
        &|x: f64| (a * v.value(x)).exp_m1() * liouville::density(&lp, x),
        &pieces,
        &breaks,
        cfg,
    )?;
    let mean = integrate_pieces(&|x: f64| v.value(x) * liouville::density(&lp, x), &pieces, &breaks, cfg)?;
    let q = weighted_norm_sq(v, 0.5, 0.0, cfg)?;
    let quarter = Estimate { value: q.value / (2.0 * PI), error: q.error / (2.0 * PI), evals: q.evals };
    let qp = pairing(v, v, 0.5, 0.0, cfg)?;
    let quarter_pairing = Estimate { value: qp.value / PI, error: qp.error / PI, evals: qp.evals };
    Ok(GapIntegrals {
        exp_excess,
        mean,
        quarter,
        quarter_pairing,
        kappa: Estimate { value: m.kappa, error: m.quadrature_error, evals: 0 },
        kappa_exact: m.kappa_exact,
    })
}

/// Both sides of the inequality for a compactly supported `v`. `κ` is the
/// computed mass of `dm_b`, so `v ≡ 0` gives a zero gap exactly.
pub fn onofri_gap<P: Profile + ?Sized>(v: &P, lp: &LiouvilleParams, cfg: &QuadratureConfig) -> Result<GapReport> {
    Ok(gap_integrals(v, 1.0, lp, cfg)?.assemble(1.0))
}

/// A finite sum of plateaus `Σ hᵢ φ((x - cᵢ)/sᵢ)`, `φ ≡ 1` on `[-1/4, 1/4]`
/// and supported in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bumps {
    pub terms: Vec<(f64, f64, f64)>,
}

impl Bumps {
    pub const INNER: f64 = 0.25;

    pub fn single(center: f64, scale: f64, height: f64) -> Self {
        Self { terms: vec![(center, scale, height)] }
    }
}

impl Profile for Bumps {
    fn value(&self, x: f64) -> f64 {
        self.terms.iter().map(|&(c, s, h)| h * plateau((x - c) / s, Self::INNER, 1.0)).sum()
    }
    fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .terms
            .iter()
            .flat_map(|&(c, s, _)| [c - s, c - Self::INNER * s, c + Self::INNER * s, c + s])
            .collect();
        sort_dedup(&mut b);
        b
    }
    fn support(&self) -> Option<(f64, f64)> {
        let lo = self.terms.iter().map(|&(c, s, _)| c - s).fold(f64::INFINITY, f64::min);
        let hi = self.terms.iter().map(|&(c, s, _)| c + s).fold(f64::NEG_INFINITY, f64::max);
        (lo < hi).then_some((lo, hi))
    }
    fn decay_exponent(&self) -> f64 {
        f64::INFINITY
    }
    fn is_even(&self) -> bool {
        self.terms.iter().all(|&(c, _, _)| c == 0.0)
    }
}

/// The deterministic test battery: centred bumps, dilates, translates and
/// random sums of up to three plateaus.
pub fn battery(count: usize, seed: u64) -> Vec<Bumps> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![
        Bumps::single(0.0, 1.0, 1.0),
        Bumps::single(0.0, 3.0, 1.0),
        Bumps::single(0.0, 0.3, 1.0),
        Bumps::single(1.5, 1.0, 1.0),
        Bumps::single(-2.0, 0.5, -1.0),
        Bumps::single(0.0, 1.0, 3.0),
    ];
    while out.len() < count {
        let n = rng.gen_range(1..=3);
        let terms = (0..n)
            .map(|_| {
                let c = rng.gen_range(-3.0..3.0);
                let s = 10f64.powf(rng.gen_range(-0.7..0.5));
                let h = rng.gen_range(-2.0..2.0);
                (c, s, h)
            })
            .collect();
        out.push(Bumps { terms });
    }
    out.truncate(count);
    out
}

/// `ψ_k = (1/k) Σ_{j=1}^{k} φ(x/5^j)`, `φ ≡ 1` on `B₁`, supported in `B₂`.
pub fn constant_sequence_psi(k: usize) -> Result<Analytic<impl Fn(f64) -> f64>> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let f = move |x: f64| (1..=k).map(|j| plateau(x / 5f64.powi(j as i32), 1.0, 2.0)).sum::<f64>() / k as f64;
    let mut breaks = Vec::new();
    for j in 1..=k {
        let r = 5f64.powi(j as i32);
        breaks.extend([-2.0 * r, -r, r, 2.0 * r]);
    }
    let outer = 2.0 * 5f64.powi(k as i32);
    Ok(Analytic::new(f).support(-outer, outer).breaks(breaks).even())
}

/// `∫ |(-Δ)^{1/4} ψ|² = ∫ ψ (-Δ)^{1/2} ψ`.
pub fn quarter_norm_sq<P: Profile + ?Sized>(psi: &P, cfg: &QuadratureConfig) -> Result<Estimate> {
    let e = pairing(psi, psi, 0.5, 0.0, cfg)?;
    Ok(Estimate { value: e.value / PI, error: e.error / PI, evals: e.evals })
}

/// `∫ |1 - ψ| dm_b` over the whole line.
pub fn psi_defect<P: Profile + ?Sized>(psi: &P, lp: &LiouvilleParams, cfg: &QuadratureConfig) -> Result<Estimate> {
    let f = |x: f64| (1.0 - psi.value(x)).abs() * liouville::density(lp, x);
    crate::operators::integrate_line(f, lp.b.max(0.0), 2.0 - lp.b, psi.is_even(), &psi.breakpoints(), cfg)
}

/// `ṽ_t(x) = 2(1-b)[φ₂(|x-1|/t) log(1/t) + ψ_t(|x-1|) log(1/|x-1|)]` with
/// `ψ_t(s) = 1 - φ₂(s/t)` for `s ≤ 1/2` and `φ₁(s)` beyond.
pub fn counterexample_family(b: f64, t: f64) -> Result<Analytic<impl Fn(f64) -> f64>> {
    if !(b > -1.0 && b < 0.0) {
        return Err(Error::Domain(format!("b = {b} not in (-1, 0)")));
    }
    if !(t > 0.0 && t <= 0.1) {
        return Err(Error::Domain(format!("t = {t} not in (0, 0.1]")));
    }
    let phi1 = |s: f64| plateau(s, 0.75, 1.0);
    let phi2 = |s: f64| plateau(s, 1.0, 2.0);
    let lt = -t.ln();
    let f = move |x: f64| {
        let s = (x - 1.0).abs();
        let psi = if s <= 0.5 { 1.0 - phi2(s / t) } else { phi1(s) };
        let far = if psi == 0.0 { 0.0 } else { -psi * s.ln() };
        2.0 * (1.0 - b) * (phi2(s / t) * lt + far)
    };
    Ok(Analytic::new(f)
        .support(0.0, 2.0)
        .breaks([1.0 - 2.0 * t, 1.0 - t, 1.0 + t, 1.0 + 2.0 * t, 0.25, 0.5, 1.5, 1.75]))
}

pub fn counterexample_gap(b: f64, t: f64, lp: &LiouvilleParams, cfg: &QuadratureConfig) -> Result<GapReport> {
    let v = counterexample_family(b, t)?;
    onofri_gap(&v, lp, cfg)
}

/// `∫ wLw` for `w = (1 + εv)u`, directly and as `λ + 2εI₁ + ε²I₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    pub eps: f64,
    pub direct: Estimate,
    /// `∫ uLu`
    pub lambda: Estimate,
    /// `(1/p)∫ v |x|^{-βp} u^p`
    pub i1: Estimate,
    /// `(1/p)∫ v² |x|^{-βp} u^p`
    pub i2_1: Estimate,
    /// `∫ u² v Lv`
    pub i2_2: Estimate,
    /// `∫ uv Γ(u, v)`
    pub i2_3: Estimate,
    pub i2: f64,
    pub decomposed: f64,
    pub difference: f64,
    /// `∫ v L_{1/2,0} v`
    pub limit_form: Estimate,
}

fn over_support<F: Fn(f64) -> f64, P: Profile + ?Sized>(f: F, v: &P, e0: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    let (a, b) = v
        .support()
        .ok_or_else(|| Error::UnsupportedSupport("the perturbation must have compact support".into()))?;
    let pieces = if a < 0.0 && b > 0.0 {
        vec![Piece::singular(a, 0.0, None, Some(e0)), Piece::singular(0.0, b, Some(e0), None)]
    } else {
        vec![Piece::span(a, b)]
    };
    integrate_pieces(&f, &pieces, &v.breakpoints(), cfg)
}

fn halved(e: Estimate) -> Estimate {
    Estimate { value: 0.5 * e.value, error: 0.5 * e.error, evals: e.evals }
}

pub fn perturbation_expansion_check<P: Profile + ?Sized>(
    m: &MinimizerResult,
    params: &CknParams,
    v: &P,
    eps: f64,
    cfg: &QuadratureConfig,
) -> Result<PerturbationRecord> {
    let u = &m.u;
    let (g, a, p) = (params.gamma, params.alpha, params.p);
    let (lo, hi) = v
        .support()
        .ok_or_else(|| Error::UnsupportedSupport("the perturbation must have compact support".into()))?;
    if lo.abs().max(hi.abs()) > u.grid.x_max() {
        return Err(Error::UnsupportedSupport(format!("[{lo}, {hi}] leaves the grid")));
    }
    let wp = params.weight_power();
    let mut breaks = u.breakpoints();
    breaks.extend(v.breakpoints());
    sort_dedup(&mut breaks);
    let mut w = Analytic::new(|x: f64| (1.0 + eps * v.value(x)) * u.value(x)).decay(u.decay_exponent()).breaks(breaks);
    if v.is_even() {
        w = w.even();
    }

    let direct = halved(weighted_norm_sq(&w, g, a, cfg)?);
    let lambda = halved(weighted_norm_sq(u, g, a, cfg)?);
    let lp = |k: i32| {
        over_support(|x: f64| v.value(x).powi(k) * x.abs().powf(-wp) * u.value(x).powf(p) / p, v, wp, cfg)
    };
    let i1 = lp(1)?;
    let i2_1 = lp(2)?;
    let i2_2 = pairing(&Product(Product(u, u), v), v, g, a, cfg)?;
    let failure = std::cell::RefCell::new(None);
    let gamma_density = |x: f64| {
        let uv = u.value(x) * v.value(x);
        if uv == 0.0 {
            return 0.0;
        }
        match cross_term(u, v, g, a, x, cfg) {
            Ok(e) => uv * e.value,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let i2_3 = over_support(gamma_density, v, (a + 2.0 * g + a).min(0.999), cfg);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let i2_3 = i2_3?;
    let i2 = i2_1.value + i2_2.value - i2_3.value;
    let decomposed = lambda.value + 2.0 * eps * i1.value + eps * eps * i2;
    let limit_form = pairing(v, v, 0.5, 0.0, cfg)?;
    Ok(PerturbationRecord {
        eps,
        direct,
        lambda,
        i1,
        i2_1,
        i2_2,
        i2_3,
        i2,
        decomposed,
        difference: direct.value - decomposed,
        limit_form,
    })
}

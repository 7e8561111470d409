//! Adaptive Gauss–Kronrod (7/15) quadrature on graded panels.
//!
//! Every integral is split into pieces. A piece is either a bounded span,
//! possibly with algebraic endpoint singularities `|x - s|^{-e}`, or a
//! half-line mapped onto `(0, 1]` by `x = from ± L (1 - w) / w`. Spans are cut
//! at caller-supplied breakpoints. Singular ends get geometric panels whose
//! contributions are followed until they settle into the geometric series
//! predicted by the exponent. The rest of that series is added in closed form.
//! All panels then go through global adaptive bisection.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Knobs shared by every integral in the crate.
///
/// * `r_max`: where an infinite span switches to the inverted variable.
/// * `n_cells`: panels per decade on log-scale spans. It is also the number of
///   uniform panels on a bounded span that has no breakpoints.
/// * `grading`: ratio between consecutive panels approaching a singular point.
/// * `pv_exclusion`: relative depth below which paired principal-value
///   integrands are replaced by a two-term power fit.
/// * `tail_order`: decay exponent assumed for integrands on infinite spans
///   when the caller does not supply one.
/// * `max_subdivisions`: bisection budget. Zero means the initial panels are
///   used as a fixed rule and no tolerance is enforced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub r_max: f64,
    pub n_cells: usize,
    pub grading: f64,
    pub pv_exclusion: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub tail_order: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            r_max: 10.0,
            n_cells: 4,
            grading: 4.0,
            pv_exclusion: 1e-3,
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            tail_order: 2.0,
            max_subdivisions: 4000,
        }
    }
}

impl QuadratureConfig {
    /// Looser preset for two-dimensional energies.
    pub fn energy() -> Self {
        Self { abs_tol: 1e-9, rel_tol: 1e-6, ..Self::default() }
    }

    pub fn with_tol(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }

    /// Halves every initial cell: twice the panels per decade and the square
    /// root of the grading ratio.
    pub fn refined(&self) -> Self {
        Self { n_cells: self.n_cells * 2, grading: self.grading.sqrt(), ..self.clone() }
    }

    /// Fixed-rule variant used for refinement studies.
    pub fn fixed(&self) -> Self {
        Self { max_subdivisions: 0, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.r_max > 0.0
            && self.n_cells >= 1
            && self.grading > 1.0
            && self.pv_exclusion > 0.0
            && self.pv_exclusion < 1.0
            && self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.tail_order > 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid quadrature configuration {self:?}")))
        }
    }

    fn tol(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

/// One piece of an integration domain.
///
/// `left`/`right` are exponents `e < 1` of an integrable singularity
/// `|x - end|^{-e}` at that end. `decay` is the exponent `d > 1` of
/// `|f(x)| ~ |x|^{-d}` on a half-line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Piece {
    Span { a: f64, b: f64, left: Option<f64>, right: Option<f64> },
    Up { from: f64, decay: f64 },
    Down { from: f64, decay: f64 },
}

impl Piece {
    pub fn span(a: f64, b: f64) -> Self {
        Piece::Span { a, b, left: None, right: None }
    }

    pub fn singular(a: f64, b: f64, left: Option<f64>, right: Option<f64>) -> Self {
        Piece::Span { a, b, left, right }
    }
}

#[derive(Clone, Copy, Debug)]
enum Map {
    Id,
    Up { from: f64, scale: f64 },
    Down { from: f64, scale: f64 },
}

impl Map {
    #[inline]
    fn apply(&self, w: f64) -> (f64, f64) {
        match *self {
            Map::Id => (w, 1.0),
            Map::Up { from, scale } => (from + scale * (1.0 - w) / w, scale / (w * w)),
            Map::Down { from, scale } => (from - scale * (1.0 - w) / w, scale / (w * w)),
        }
    }

    fn inverse(&self, x: f64) -> f64 {
        match *self {
            Map::Id => x,
            Map::Up { from, scale } => scale / (scale + x - from),
            Map::Down { from, scale } => scale / (scale + from - x),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    map: Map,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, resabs: f64, resasc: f64) -> f64 {
    let mut e = err.abs();
    if resasc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / resasc).powf(1.5);
        e = if scale < 1.0 { resasc * scale } else { resasc };
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * resabs);
    }
    e
}

struct Run<'a, F: Fn(f64) -> f64> {
    f: &'a F,
    cfg: &'a QuadratureConfig,
    panels: Vec<Panel>,
    closure: f64,
    closure_err: f64,
    evals: usize,
}

impl<'a, F: Fn(f64) -> f64> Run<'a, F> {
    fn new(f: &'a F, cfg: &'a QuadratureConfig) -> Self {
        Self { f, cfg, panels: Vec::new(), closure: 0.0, closure_err: 0.0, evals: 0 }
    }

    fn kronrod(&mut self, map: Map, a: f64, b: f64) -> Panel {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let eval = |w: f64| {
            let (x, j) = map.apply(w);
            (self.f)(x) * j
        };
        let fc = eval(c);
        let mut resk = fc * WGK[7];
        let mut resg = fc * WG[3];
        let mut resabs = resk.abs();
        let mut fv1 = [0.0; 7];
        let mut fv2 = [0.0; 7];
        for j in 0..7 {
            let dx = h * XGK[j];
            let f1 = eval(c - dx);
            let f2 = eval(c + dx);
            fv1[j] = f1;
            fv2[j] = f2;
            resk += WGK[j] * (f1 + f2);
            resabs += WGK[j] * (f1.abs() + f2.abs());
            if j % 2 == 1 {
                resg += WG[j / 2] * (f1 + f2);
            }
        }
        self.evals += 15;
        let mean = resk * 0.5;
        let mut resasc = WGK[7] * (fc - mean).abs();
        for j in 0..7 {
            resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
        }
        let ah = h.abs();
        let value = resk * h;
        let error = rescale_error((resk - resg) * h, resabs * ah, resasc * ah);
        Panel { a, b, map, value, error }
    }

    /// Geometric panels on the side `dir` of the singular point `s`,
    /// covering a distance `len`, closed by the tail of the geometric series.
    fn graded(&mut self, map: Map, s: f64, len: f64, dir: f64, e: f64) -> Result<()> {
        if e >= 1.0 || e.is_nan() {
            return Err(Error::SingularityTooStrong { exponent: e, location: map.apply(s).0 });
        }
        let e = e.max(-50.0);
        let g = self.cfg.grading;
        let rho = g.powf(-(1.0 - e));
        let floor = (s.abs() * 1e-14).max(1e-300);
        let mut sum = 0.0;
        let mut prev: Option<f64> = None;
        let mut hi = len;
        for k in 0.. {
            let lo = hi / g;
            let (pa, pb) = if dir > 0.0 { (s + lo, s + hi) } else { (s - hi, s - lo) };
            let p = self.kronrod(map, pa, pb);
            if !p.value.is_finite() {
                return Err(Error::NonConvergent { estimate: f64::NAN, error: f64::INFINITY, tol: 0.0 });
            }
            sum += p.value;
            self.panels.push(p);
            let tail = p.value * rho / (1.0 - rho);
            let dev = prev.map_or(f64::INFINITY, |q| (p.value - rho * q).abs() * rho / (1.0 - rho));
            let thr = 1e-3 * self.cfg.tol(sum);
            if (k >= 2 && dev <= thr && p.error <= thr) || lo <= floor || k > 4000 {
                self.closure += tail;
                self.closure_err += if dev.is_finite() { dev } else { tail.abs() };
                return Ok(());
            }
            prev = Some(p.value);
            hi = lo;
        }
        unreachable!()
    }

    fn regular(&mut self, map: Map, a: f64, b: f64, has_breaks: bool) {
        let logspan = if a > 0.0 && b / a > 10.0 {
            Some((b / a).log10())
        } else if b < 0.0 && a / b > 10.0 {
            Some((a / b).log10())
        } else {
            None
        };
        if let Some(dec) = logspan {
            let m = ((dec * self.cfg.n_cells as f64).ceil() as usize).max(1);
            let r = (b / a).powf(1.0 / m as f64);
            let mut lo = a;
            for i in 0..m {
                let hi = if i + 1 == m { b } else { lo * r };
                let p = self.kronrod(map, lo, hi);
                self.panels.push(p);
                lo = hi;
            }
        } else {
            let m = if has_breaks { 1 } else { self.cfg.n_cells };
            let w = (b - a) / m as f64;
            for i in 0..m {
                let lo = a + w * i as f64;
                let hi = if i + 1 == m { b } else { a + w * (i + 1) as f64 };
                let p = self.kronrod(map, lo, hi);
                self.panels.push(p);
            }
        }
    }

    fn span(
        &mut self,
        map: Map,
        a: f64,
        b: f64,
        left: Option<f64>,
        right: Option<f64>,
        breaks: &[f64],
    ) -> Result<()> {
        if !(b > a) {
            return Ok(());
        }
        let margin = 1e-13 * (b - a).max(a.abs().max(b.abs()) * 1e-3);
        let mut pts = Vec::with_capacity(breaks.len() + 2);
        pts.push(a);
        pts.extend(breaks.iter().copied().filter(|&t| t > a + margin && t < b - margin));
        pts.push(b);
        let n = pts.len() - 1;
        for k in 0..n {
            let (p, q) = (pts[k], pts[k + 1]);
            let sl = if k == 0 { left } else { None };
            let sr = if k + 1 == n { right } else { None };
            match (sl, sr) {
                (Some(e1), Some(e2)) => {
                    let m = 0.5 * (p + q);
                    self.graded(map, p, m - p, 1.0, e1)?;
                    self.graded(map, q, q - m, -1.0, e2)?;
                }
                (Some(e), None) => self.graded(map, p, q - p, 1.0, e)?,
                (None, Some(e)) => self.graded(map, q, q - p, -1.0, e)?,
                (None, None) => self.regular(map, p, q, n > 1),
            }
        }
        Ok(())
    }

    fn piece(&mut self, piece: &Piece, breaks: &[f64]) -> Result<()> {
        match *piece {
            Piece::Span { a, b, left, right } => {
                let lo = breaks.partition_point(|&t| t <= a);
                let hi = breaks.partition_point(|&t| t < b);
                self.span(Map::Id, a, b, left, right, &breaks[lo..hi.max(lo)])
            }
            // A tail starting close to 0 first walks log-spaced panels out to
            // 1, so structure on the scale |from| is resolved.
            Piece::Up { from, decay } if from > 0.0 && from < 0.5 => {
                self.piece(&Piece::span(from, 1.0), breaks)?;
                self.piece(&Piece::Up { from: 1.0, decay }, breaks)
            }
            Piece::Down { from, decay } if from < 0.0 && from > -0.5 => {
                self.piece(&Piece::span(-1.0, from), breaks)?;
                self.piece(&Piece::Down { from: -1.0, decay }, breaks)
            }
            Piece::Up { from, decay } => {
                let map = Map::Up { from, scale: from.abs().max(1.0) };
                let lo = breaks.partition_point(|&t| t <= from);
                let mut w: Vec<f64> = breaks[lo..].iter().rev().map(|&x| map.inverse(x)).collect();
                w.retain(|&t| t > 0.0 && t < 1.0);
                self.span(map, 0.0, 1.0, Some(2.0 - decay), None, &w)
            }
            Piece::Down { from, decay } => {
                let map = Map::Down { from, scale: from.abs().max(1.0) };
                let hi = breaks.partition_point(|&t| t < from);
                let mut w: Vec<f64> = breaks[..hi].iter().map(|&x| map.inverse(x)).collect();
                w.retain(|&t| t > 0.0 && t < 1.0);
                self.span(map, 0.0, 1.0, Some(2.0 - decay), None, &w)
            }
        }
    }

    fn refine(mut self) -> Result<Estimate> {
        let mut value: f64 = self.panels.iter().map(|p| p.value).sum::<f64>() + self.closure;
        let mut error: f64 = self.panels.iter().map(|p| p.error).sum::<f64>() + self.closure_err;
        if !value.is_finite() {
            return Err(Error::NonConvergent { estimate: value, error, tol: 0.0 });
        }
        if self.cfg.max_subdivisions == 0 {
            return Ok(Estimate { value, error, evals: self.evals });
        }
        let mut heap: BinaryHeap<Panel> = std::mem::take(&mut self.panels).into();
        let mut frozen: Vec<Panel> = Vec::new();
        let mut steps = 0;
        while error > self.cfg.tol(value) && steps < self.cfg.max_subdivisions {
            let Some(p) = heap.pop() else { break };
            let m = 0.5 * (p.a + p.b);
            if !(m > p.a && m < p.b) || (p.b - p.a) <= 1e-15 * p.a.abs().max(p.b.abs()) {
                frozen.push(p);
                continue;
            }
            let mut l = self.kronrod(p.map, p.a, m);
            let mut r = self.kronrod(p.map, m, p.b);
            steps += 1;
            let sum = l.value + r.value;
            let change = (sum - p.value).abs();
            value += sum - p.value;
            // Roundoff: bisection leaves both the value and the error estimate
            // where they were. The observed change is the honest error then.
            if l.error + r.error >= 0.99 * p.error && change <= 1e-6 * sum.abs() && change < p.error {
                l.error = 0.5 * change;
                r.error = 0.5 * change;
                error += l.error + r.error - p.error;
                frozen.push(l);
                frozen.push(r);
                continue;
            }
            error += l.error + r.error - p.error;
            heap.push(l);
            heap.push(r);
        }
        let (mut v, mut e) = (self.closure, self.closure_err);
        for p in heap.into_iter().chain(frozen) {
            v += p.value;
            e += p.error;
        }
        if !v.is_finite() || e > self.cfg.tol(v) {
            return Err(Error::NonConvergent { estimate: v, error: e, tol: self.cfg.tol(v) });
        }
        Ok(Estimate { value: v, error: e, evals: self.evals })
    }
}

/// Integrates `f` over a union of pieces; `breaks` must be sorted.
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: &F,
    pieces: &[Piece],
    breaks: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    let mut run = Run::new(f, cfg);
    for p in pieces {
        run.piece(p, breaks)?;
    }
    run.refine()
}

/// Singular exponents at the ends of `(a, b)`. At an infinite end the entry is
/// the decay exponent instead; `None` there means `tail_order`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Ends {
    pub left: Option<f64>,
    pub right: Option<f64>,
}

impl Ends {
    pub const REGULAR: Ends = Ends { left: None, right: None };

    pub fn new(left: Option<f64>, right: Option<f64>) -> Self {
        Self { left, right }
    }
}

/// Splits `(a, b)` into pieces, sending infinite ends through the inverted
/// variable beyond `±r_max`.
pub fn pieces_for(a: f64, b: f64, ends: Ends, cfg: &QuadratureConfig) -> Vec<Piece> {
    let r = cfg.r_max;
    let mut out = Vec::new();
    match (a.is_finite(), b.is_finite()) {
        (true, true) => out.push(Piece::Span { a, b, left: ends.left, right: ends.right }),
        (true, false) => {
            let from = a.max(r);
            if from > a {
                out.push(Piece::Span { a, b: from, left: ends.left, right: None });
            }
            out.push(Piece::Up { from, decay: ends.right.unwrap_or(cfg.tail_order) });
        }
        (false, true) => {
            let from = b.min(-r);
            out.push(Piece::Down { from, decay: ends.left.unwrap_or(cfg.tail_order) });
            if from < b {
                out.push(Piece::Span { a: from, b, left: None, right: ends.right });
            }
        }
        (false, false) => {
            out.push(Piece::Down { from: -r, decay: ends.left.unwrap_or(cfg.tail_order) });
            out.push(Piece::span(-r, r));
            out.push(Piece::Up { from: r, decay: ends.right.unwrap_or(cfg.tail_order) });
        }
    }
    out
}

/// `∫_a^b f`, with possibly infinite limits and algebraic end singularities.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    ends: Ends,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    if !(b > a) {
        return Err(Error::Domain(format!("empty interval ({a}, {b})")));
    }
    integrate_pieces(&f, &pieces_for(a, b, ends, cfg), &[], cfg)
}

/// Same as [`integrate`] with breakpoints (sorted) at which panels must end.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    ends: Ends,
    breaks: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    if !(b > a) {
        return Err(Error::Domain(format!("empty interval ({a}, {b})")));
    }
    integrate_pieces(&f, &pieces_for(a, b, ends, cfg), breaks, cfg)
}

/// Cauchy principal value `PV∫_a^b f` with a pole at `x0 ∈ (a, b)`.
///
/// The symmetric part `f(x0+h) + f(x0-h)` is integrated over `(0, d)` and the
/// leftover one-sided span is added.
pub fn principal_value<F: Fn(f64) -> f64>(
    f: F,
    x0: f64,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    if !(a < x0 && x0 < b) {
        return Err(Error::Domain(format!("pole {x0} not inside ({a}, {b})")));
    }
    let d = (x0 - a).min(b - x0);
    let floor = 1e-4 * cfg.pv_exclusion * d;
    let paired = |h: f64| {
        let h = h.max(floor);
        f(x0 + h) + f(x0 - h)
    };
    let mut est = integrate_pieces(&paired, &[Piece::singular(0.0, d, Some(0.0), None)], &[], cfg)?;
    let rest = if b - x0 > d {
        Some(integrate(&f, x0 + d, b, Ends::REGULAR, cfg)?)
    } else if x0 - a > d {
        Some(integrate(&f, a, x0 - d, Ends::REGULAR, cfg)?)
    } else {
        None
    };
    if let Some(r) = rest {
        est.value += r.value;
        est.error += r.error;
        est.evals += r.evals;
    }
    Ok(est)
}

/// Domain of a double integral over a rectangle with a possible diagonal
/// singularity `|x - y|^{-diag}` and axis singularities `|x|^{-axis}`,
/// `|y|^{-axis}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub diag: Option<f64>,
    pub axis: Option<f64>,
}

/// Iterated integral over a rectangle. The inner integral is cut at `y = x`
/// and `y = 0`; the outer one at the ends of the `y` range and at `x = 0`.
pub fn integrate_plane_offdiag<F: Fn(f64, f64) -> f64>(
    f: F,
    rect: Rect,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    let (c, d) = rect.y;
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let inner_evals = RefCell::new(0usize);
    let inner = |x: f64| -> f64 {
        let mut cuts: Vec<(f64, Option<f64>)> = Vec::new();
        if let Some(e) = rect.diag {
            if x > c && x < d {
                cuts.push((x, Some(e)));
            }
        }
        if let Some(e) = rect.axis {
            if 0.0 > c && 0.0 < d {
                cuts.push((0.0, Some(e)));
            }
        }
        cuts.sort_by(|p, q| p.0.total_cmp(&q.0));
        cuts.dedup_by(|p, q| p.0 == q.0);
        let left_e = if rect.axis.is_some() && c == 0.0 { rect.axis } else { None };
        let left_e = combine(left_e, if rect.diag.is_some() && x == c { rect.diag } else { None });
        let right_e = if rect.axis.is_some() && d == 0.0 { rect.axis } else { None };
        let right_e = combine(right_e, if rect.diag.is_some() && x == d { rect.diag } else { None });
        let mut pieces = Vec::new();
        let mut lo = (c, left_e);
        for (t, e) in cuts {
            pieces.push(Piece::singular(lo.0, t, lo.1, e));
            lo = (t, e);
        }
        pieces.push(Piece::singular(lo.0, d, lo.1, right_e));
        let g = |y: f64| f(x, y);
        match integrate_pieces(&g, &pieces, &[], cfg) {
            Ok(est) => {
                *inner_evals.borrow_mut() += est.evals;
                est.value
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let (a, b) = rect.x;
    let mut pts: Vec<(f64, Option<f64>)> = Vec::new();
    let edge = rect.diag.map(|e| e - 1.0).filter(|&e| e > -1.0);
    for t in [c, d] {
        if t > a && t < b {
            pts.push((t, edge));
        }
    }
    if let Some(e) = rect.axis {
        if 0.0 > a && 0.0 < b {
            pts.push((0.0, Some(e)));
        }
    }
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    let at = |t: f64| -> Option<f64> {
        let mut e = None;
        if t == c || t == d {
            e = combine(e, edge);
        }
        if t == 0.0 {
            e = combine(e, rect.axis);
        }
        e
    };
    let mut pieces = Vec::new();
    let mut lo = (a, at(a));
    for (t, e) in pts {
        pieces.push(Piece::singular(lo.0, t, lo.1, e));
        lo = (t, e);
    }
    pieces.push(Piece::singular(lo.0, b, lo.1, at(b)));
    let res = integrate_pieces(&inner, &pieces, &[], cfg);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let mut est = res?;
    est.evals += inner_evals.into_inner();
    Ok(est)
}

fn combine(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| 3.0 * x * x, 0.0, 2.0, Ends::REGULAR, &cfg()).unwrap();
        assert!((r.value - 8.0).abs() < 1e-13);
    }

    #[test]
    fn inverse_square_root_on_symmetric_interval() {
        let r = integrate_pieces(
            &|x: f64| x.abs().powf(-0.5),
            &[Piece::singular(-1.0, 0.0, None, Some(0.5)), Piece::singular(0.0, 1.0, Some(0.5), None)],
            &[],
            &cfg(),
        )
        .unwrap();
        assert!((r.value - 4.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn half_line_with_decay() {
        let r = integrate(|x| 1.0 / (1.0 + x * x), 0.0, f64::INFINITY, Ends::new(None, Some(2.0)), &cfg())
            .unwrap();
        assert!((r.value - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
        let r = integrate(|x| 1.0 / (1.0 + x * x), f64::NEG_INFINITY, f64::INFINITY, Ends::REGULAR, &cfg())
            .unwrap();
        assert!((r.value - std::f64::consts::PI).abs() < 1e-10);
    }

    #[test]
    fn slow_algebraic_decay() {
        // ∫_1^∞ x^{-1.1} = 10
        let r = integrate(|x| x.powf(-1.1), 1.0, f64::INFINITY, Ends::new(None, Some(1.1)), &cfg()).unwrap();
        assert!((r.value - 10.0).abs() < 1e-7, "{r:?}");
    }

    #[test]
    fn strong_endpoint_singularity() {
        // ∫_0^1 x^{-0.95} = 20
        let r = integrate(|x| x.powf(-0.95), 0.0, 1.0, Ends::new(Some(0.95), None), &cfg()).unwrap();
        assert!((r.value - 20.0).abs() < 1e-7, "{r:?}");
    }

    #[test]
    fn non_integrable_is_rejected() {
        let r = integrate(|x| 1.0 / x, 0.0, 1.0, Ends::new(Some(1.0), None), &cfg());
        assert!(matches!(r, Err(Error::SingularityTooStrong { .. })));
    }

    #[test]
    fn principal_values() {
        let r = principal_value(|x| 1.0 / x, 0.0, -1.0, 1.0, &cfg()).unwrap();
        assert!(r.value.abs() < 1e-12);
        let r = principal_value(|x| (1.0 + x) / x, 0.0, -1.0, 1.0, &cfg()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        // PV∫_{-1}^{2} dx/x = ln 2
        let r = principal_value(|x| 1.0 / x, 0.0, -1.0, 2.0, &cfg()).unwrap();
        assert!((r.value - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn diagonal_singularity_on_unit_square() {
        let rect = Rect { x: (0.0, 1.0), y: (0.0, 1.0), diag: Some(0.5), axis: None };
        let r = integrate_plane_offdiag(|x, y| (x - y).abs().powf(-0.5), rect, &cfg()).unwrap();
        assert!((r.value - 8.0 / 3.0).abs() < 1e-7, "{r:?}");
    }

    #[test]
    fn fixed_rule_refinement_reduces_error() {
        let f = |x: f64| x.powf(-0.7) * (1.0 + x).cos();
        let mut c = QuadratureConfig { grading: 100.0, n_cells: 1, ..cfg() }.fixed();
        let reference = integrate(f, 0.0, 1.0, Ends::new(Some(0.7), None), &cfg()).unwrap().value;
        let mut last = f64::INFINITY;
        for _ in 0..3 {
            let v = integrate(f, 0.0, 1.0, Ends::new(Some(0.7), None), &c).unwrap().value;
            let err = (v - reference).abs();
            assert!(err < last, "{err} !< {last}");
            last = err;
            c = c.refined();
        }
    }
}

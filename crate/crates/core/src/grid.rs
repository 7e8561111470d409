//! Grid functions: cubic B-splines in `t = ln|x|` on a symmetric geometric grid.
//!
//! Each half-line carries its own spline. Beyond the first and last node the
//! coefficient sequence continues geometrically, so the interpolant behaves
//! like `|x|^{-o}` near the origin and `|x|^{-d}` at infinity. Inversion
//! `x ↦ 1/x` is the reflection `t ↦ -t` and is exact on these splines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::Profile;

/// Geometric nodes `x_i = exp(t0 + i h)`, `i < n`, mirrored to `x < 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub t0: f64,
    pub h: f64,
    pub n: usize,
}

impl Grid {
    /// Nodes from `x_min` to `x_max` with about `per_decade` nodes per decade.
    pub fn geometric(x_min: f64, x_max: f64, per_decade: f64) -> Result<Self> {
        if !(x_min > 0.0 && x_max > x_min && per_decade > 0.0) {
            return Err(Error::Domain(format!("bad grid ({x_min}, {x_max}, {per_decade})")));
        }
        let span = (x_max / x_min).ln();
        let n = ((x_max / x_min).log10() * per_decade).round() as usize + 1;
        let n = n.max(4);
        Ok(Self { t0: x_min.ln(), h: span / (n - 1) as f64, n })
    }

    /// Same range with twice the node density.
    pub fn doubled(&self) -> Self {
        Self { t0: self.t0, h: self.h / 2.0, n: 2 * self.n - 1 }
    }

    pub fn node(&self, i: usize) -> f64 {
        (self.t0 + self.h * i as f64).exp()
    }

    pub fn positive_nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// All `2n` nodes in increasing order.
    pub fn nodes(&self) -> Vec<f64> {
        let pos = self.positive_nodes();
        pos.iter().rev().map(|x| -x).chain(pos.iter().copied()).collect()
    }

    pub fn x_min(&self) -> f64 {
        self.t0.exp()
    }

    pub fn x_max(&self) -> f64 {
        self.node(self.n - 1)
    }

    pub fn ratio(&self) -> f64 {
        self.h.exp()
    }
}

/// Uniform cubic B-spline in `t` with geometric continuation at both ends:
/// `c_{-k} = c_0 left^k` and `c_{n-1+k} = c_{n-1} right^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogSpline {
    pub t0: f64,
    pub h: f64,
    pub coeffs: Vec<f64>,
    pub left: f64,
    pub right: f64,
}

#[inline]
fn basis(u: f64) -> [f64; 4] {
    let u2 = u * u;
    let u3 = u2 * u;
    let v = 1.0 - u;
    [v * v * v / 6.0, (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0, (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0, u3 / 6.0]
}

#[inline]
fn basis_dt(u: f64) -> [f64; 4] {
    let v = 1.0 - u;
    [-0.5 * v * v, (9.0 * u * u - 12.0 * u) / 6.0, (-9.0 * u * u + 6.0 * u + 3.0) / 6.0, 0.5 * u * u]
}

fn geometric(c: f64, r: f64, k: i64) -> f64 {
    if c == 0.0 || r == 1.0 {
        c
    } else if r == 0.0 {
        0.0
    } else {
        c * r.powi(k.min(i32::MAX as i64) as i32)
    }
}

impl LogSpline {
    /// Interpolates `values` at `t0 + i h`.
    pub fn interpolate(t0: f64, h: f64, values: &[f64], left: f64, right: f64) -> Self {
        let n = values.len();
        assert!(n >= 2, "need at least two nodes");
        let mut diag = vec![4.0 / 6.0; n];
        diag[0] += left / 6.0;
        diag[n - 1] += right / 6.0;
        let off = 1.0 / 6.0;
        // Thomas algorithm
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        cp[0] = off / diag[0];
        dp[0] = values[0] / diag[0];
        for i in 1..n {
            let m = diag[i] - off * cp[i - 1];
            cp[i] = off / m;
            dp[i] = (values[i] - off * dp[i - 1]) / m;
        }
        let mut c = vec![0.0; n];
        c[n - 1] = dp[n - 1];
        for i in (0..n - 1).rev() {
            c[i] = dp[i] - cp[i] * c[i + 1];
        }
        Self { t0, h, coeffs: c, left, right }
    }

    #[inline]
    pub fn coeff(&self, j: i64) -> f64 {
        let n = self.coeffs.len() as i64;
        if j < 0 {
            geometric(self.coeffs[0], self.left, -j)
        } else if j >= n {
            geometric(self.coeffs[(n - 1) as usize], self.right, j - n + 1)
        } else {
            self.coeffs[j as usize]
        }
    }

    #[inline]
    fn locate(&self, t: f64) -> (i64, f64) {
        let s = (t - self.t0) / self.h;
        let lim = 1e7;
        let s = s.clamp(-lim, self.coeffs.len() as f64 + lim);
        let k = s.floor();
        (k as i64, s - k)
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        if t == f64::NEG_INFINITY {
            return self.limit_left();
        }
        let (k, u) = self.locate(t);
        let b = basis(u);
        self.coeff(k - 1) * b[0] + self.coeff(k) * b[1] + self.coeff(k + 1) * b[2] + self.coeff(k + 2) * b[3]
    }

    /// `d/dt` of the spline.
    pub fn eval_dt(&self, t: f64) -> f64 {
        let (k, u) = self.locate(t);
        let b = basis_dt(u);
        (self.coeff(k - 1) * b[0] + self.coeff(k) * b[1] + self.coeff(k + 1) * b[2] + self.coeff(k + 2) * b[3])
            / self.h
    }

    fn limit_left(&self) -> f64 {
        if self.left < 1.0 {
            0.0
        } else if self.left == 1.0 {
            self.coeffs[0]
        } else {
            f64::INFINITY * self.coeffs[0].signum()
        }
    }

    /// Knots `t_j` whose neighbourhood carries a non-negligible coefficient.
    pub fn active_knots(&self) -> Vec<f64> {
        let n = self.coeffs.len() as i64;
        let cmax = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if cmax == 0.0 {
            return Vec::new();
        }
        let thr = 1e-14 * cmax;
        (-3..n + 3)
            .filter(|&j| (j - 2..=j + 2).any(|i| self.coeff(i).abs() > thr))
            .map(|j| self.t0 + self.h * j as f64)
            .collect()
    }

    /// Reflection `t ↦ -t`.
    pub fn reflected(&self) -> Self {
        let n = self.coeffs.len();
        let mut c = self.coeffs.clone();
        c.reverse();
        Self { t0: -(self.t0 + self.h * (n - 1) as f64), h: self.h, coeffs: c, left: self.right, right: self.left }
    }
}

/// Even function `s(ln|x|)` given by a single spline; used for basis
/// functions with compact or geometric tails.
#[derive(Clone, Debug, PartialEq)]
pub struct EvenSpline {
    pub spline: LogSpline,
    pub origin: f64,
    pub decay: f64,
}

impl Profile for EvenSpline {
    fn value(&self, x: f64) -> f64 {
        self.spline.eval(x.abs().ln())
    }
    fn breakpoints(&self) -> Vec<f64> {
        let k = self.spline.active_knots();
        let mut out: Vec<f64> = k.iter().rev().map(|t| -t.exp()).collect();
        out.extend(k.iter().map(|t| t.exp()));
        out
    }
    fn support(&self) -> Option<(f64, f64)> {
        if self.spline.right == 0.0 {
            let n = self.spline.coeffs.len() as f64;
            let hi = (self.spline.t0 + self.spline.h * (n + 1.0)).exp();
            Some((-hi, hi))
        } else {
            None
        }
    }
    fn decay_exponent(&self) -> f64 {
        self.decay
    }
    fn origin_exponent(&self) -> f64 {
        self.origin
    }
    fn is_even(&self) -> bool {
        true
    }
}

/// Samples on a symmetric geometric grid with a spline interpolant per side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: Grid,
    pos: LogSpline,
    neg: LogSpline,
    values: Vec<f64>,
    origin_exponent: f64,
    decay_exponent: f64,
    even: bool,
    #[serde(skip)]
    breaks: Vec<f64>,
}

impl GridFunction {
    /// `values` are ordered like [`Grid::nodes`].
    pub fn from_values(grid: Grid, values: Vec<f64>, origin_exponent: f64, decay_exponent: f64) -> Result<Self> {
        if values.len() != 2 * grid.n {
            return Err(Error::Domain(format!("expected {} values, got {}", 2 * grid.n, values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite sample".into()));
        }
        let n = grid.n;
        let left = (origin_exponent * grid.h).exp();
        let right = (-decay_exponent * grid.h).exp();
        let pos_vals: Vec<f64> = values[n..].to_vec();
        let neg_vals: Vec<f64> = values[..n].iter().rev().copied().collect();
        let even = pos_vals.iter().zip(&neg_vals).all(|(a, b)| a == b);
        let pos = LogSpline::interpolate(grid.t0, grid.h, &pos_vals, left, right);
        let neg = if even { pos.clone() } else { LogSpline::interpolate(grid.t0, grid.h, &neg_vals, left, right) };
        let mut g = Self { grid, pos, neg, values, origin_exponent, decay_exponent, even, breaks: Vec::new() };
        g.refresh_breaks();
        Ok(g)
    }

    /// Even function from its values at the positive nodes.
    pub fn even_from_positive(grid: Grid, pos_values: &[f64], origin_exponent: f64, decay_exponent: f64) -> Result<Self> {
        let mut v: Vec<f64> = pos_values.iter().rev().copied().collect();
        v.extend_from_slice(pos_values);
        Self::from_values(grid, v, origin_exponent, decay_exponent)
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64, origin_exponent: f64, decay_exponent: f64) -> Result<Self> {
        let v = grid.nodes().into_iter().map(f).collect();
        Self::from_values(grid, v, origin_exponent, decay_exponent)
    }

    fn refresh_breaks(&mut self) {
        let kp = self.pos.active_knots();
        let kn = self.neg.active_knots();
        let mut b: Vec<f64> = kn.iter().rev().map(|t| -t.exp()).collect();
        b.extend(kp.iter().map(|t| t.exp()));
        self.breaks = b;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn positive_values(&self) -> &[f64] {
        &self.values[self.grid.n..]
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.grid.nodes()
    }

    pub fn is_even_exact(&self) -> bool {
        self.even
    }

    /// `x ↦ scale·u(x·dilation)`, exactly (the grid moves with the dilation).
    pub fn rescaled(&self, scale: f64, dilation: f64) -> Self {
        let shift = dilation.ln();
        let mut out = self.clone();
        out.grid.t0 -= shift;
        for s in [&mut out.pos, &mut out.neg] {
            s.t0 -= shift;
            s.coeffs.iter_mut().for_each(|c| *c *= scale);
        }
        out.values.iter_mut().for_each(|v| *v *= scale);
        out.refresh_breaks();
        out
    }

    /// `x ↦ u(1/x)`, exact on the inverted node set.
    pub fn inverted(&self) -> Result<Self> {
        if self.origin_exponent > 0.0 {
            return Err(Error::Domain(
                "inversion of a function singular at the origin grows at infinity".into(),
            ));
        }
        let n = self.grid.n;
        let grid = Grid { t0: -(self.grid.t0 + self.grid.h * (n - 1) as f64), h: self.grid.h, n };
        let mut values: Vec<f64> = Vec::with_capacity(2 * n);
        values.extend(self.values[n..].iter().copied());
        values.extend(self.values[..n].iter().copied());
        let mut g = Self {
            grid,
            pos: self.pos.reflected(),
            neg: self.neg.reflected(),
            values,
            origin_exponent: -self.decay_exponent,
            decay_exponent: -self.origin_exponent,
            even: self.even,
            breaks: Vec::new(),
        };
        g.refresh_breaks();
        Ok(g)
    }

    pub fn map_values(&self, f: impl Fn(f64, f64) -> f64, origin_exponent: f64, decay_exponent: f64) -> Result<Self> {
        let v = self.nodes().iter().zip(&self.values).map(|(&x, &u)| f(x, u)).collect();
        Self::from_values(self.grid, v, origin_exponent, decay_exponent)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if x > 0.0 {
            self.pos.eval_dt(x.ln()) / x
        } else if x < 0.0 {
            -self.neg.eval_dt((-x).ln()) / (-x)
        } else {
            0.0
        }
    }

    pub fn positive_spline(&self) -> &LogSpline {
        &self.pos
    }
}

impl Profile for GridFunction {
    #[inline]
    fn value(&self, x: f64) -> f64 {
        if x > 0.0 {
            self.pos.eval(x.ln())
        } else if x < 0.0 {
            self.neg.eval((-x).ln())
        } else {
            self.pos.eval(f64::NEG_INFINITY)
        }
    }
    fn breakpoints(&self) -> Vec<f64> {
        if self.breaks.is_empty() && self.values.iter().any(|&v| v != 0.0) {
            let mut g = self.clone();
            g.refresh_breaks();
            return g.breaks;
        }
        self.breaks.clone()
    }
    fn decay_exponent(&self) -> f64 {
        self.decay_exponent
    }
    fn origin_exponent(&self) -> f64 {
        self.origin_exponent
    }
    fn is_even(&self) -> bool {
        self.even
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::geometric(1e-4, 1e4, 10.0).unwrap()
    }

    #[test]
    fn interpolates_at_nodes() {
        let g = grid();
        let u = GridFunction::from_fn(g, |x| (-x * x).exp() * (1.0 + 0.3 * x), 0.0, f64::INFINITY).unwrap();
        for (x, v) in g.nodes().iter().zip(u.values()) {
            assert!((u.value(*x) - v).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn accurate_between_nodes() {
        let g = grid();
        let f = |x: f64| 1.0 / (1.0 + x * x);
        let u = GridFunction::from_fn(g, f, 0.0, 2.0).unwrap();
        for &x in &[1e-3, 0.037, 0.5, 1.234, 7.7, 300.0, 1e6] {
            assert!((u.value(x) - f(x)).abs() < 5e-4 * f(x), "x={x}");
        }
    }

    #[test]
    fn tails_follow_declared_exponents() {
        let g = grid();
        let u = GridFunction::from_fn(g, |x| x.abs().powf(-0.3) / (1.0 + x * x).powf(0.1), 0.3, 0.5).unwrap();
        let a = u.value(1e-8) / u.value(1e-7);
        assert!((a - 10f64.powf(0.3)).abs() < 1e-2);
        let b = u.value(1e9) / u.value(1e8);
        assert!((b - 10f64.powf(-0.5)).abs() < 1e-2);
    }

    #[test]
    fn inversion_is_exact() {
        let g = grid();
        let u = GridFunction::from_fn(g, |x| 1.0 / (1.0 + (x - 0.3).powi(2)), 0.0, 2.0).unwrap();
        let w = u.inverted().unwrap();
        for &x in &[-50.0, -0.2, 0.013, 0.77, 3.0, 123.0] {
            assert!((w.value(x) - u.value(1.0 / x)).abs() < 1e-13, "x={x}");
        }
        assert_eq!(w.decay_exponent(), 0.0);
        assert_eq!(w.origin_exponent(), -2.0);
    }

    #[test]
    fn rescaling_is_exact() {
        let g = grid();
        let u = GridFunction::from_fn(g, |x| (-x * x).exp(), 0.0, f64::INFINITY).unwrap();
        let r = u.rescaled(2.0, 3.0);
        for &x in &[0.01, 0.3, 1.1] {
            assert!((r.value(x) - 2.0 * u.value(3.0 * x)).abs() < 1e-14);
        }
    }

    #[test]
    fn doubling_keeps_range() {
        let g = grid();
        let d = g.doubled();
        assert!((d.x_max() - g.x_max()).abs() < 1e-9 * g.x_max());
        assert_eq!(d.n, 2 * g.n - 1);
    }
}

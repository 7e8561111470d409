//! Functions on the real line as seen by the integrators.

/// A real function together with the structural hints the quadrature needs.
///
/// `breakpoints` are sorted points where panels should end (support
/// ends, scale changes). `decay_exponent` is `d` in `|u(x)| ≲ |x|^{-d}` at
/// infinity (`INFINITY` for compact support) and `origin_exponent` is `o` in
/// `|u(x)| ≲ |x|^{-o}` at zero.
pub trait Profile {
    fn value(&self, x: f64) -> f64;

    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    fn support(&self) -> Option<(f64, f64)> {
        None
    }

    fn decay_exponent(&self) -> f64 {
        0.0
    }

    fn origin_exponent(&self) -> f64 {
        0.0
    }

    fn is_even(&self) -> bool {
        false
    }
}

impl<P: Profile + ?Sized> Profile for &P {
    fn value(&self, x: f64) -> f64 {
        (**self).value(x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        (**self).breakpoints()
    }
    fn support(&self) -> Option<(f64, f64)> {
        (**self).support()
    }
    fn decay_exponent(&self) -> f64 {
        (**self).decay_exponent()
    }
    fn origin_exponent(&self) -> f64 {
        (**self).origin_exponent()
    }
    fn is_even(&self) -> bool {
        (**self).is_even()
    }
}

/// A closure with declared structure.
pub struct Analytic<F> {
    f: F,
    breaks: Vec<f64>,
    support: Option<(f64, f64)>,
    decay: f64,
    origin: f64,
    even: bool,
}

impl<F: Fn(f64) -> f64> Analytic<F> {
    pub fn new(f: F) -> Self {
        Self { f, breaks: Vec::new(), support: None, decay: 0.0, origin: 0.0, even: false }
    }

    pub fn decay(mut self, d: f64) -> Self {
        self.decay = d;
        self
    }

    pub fn origin(mut self, o: f64) -> Self {
        self.origin = o;
        self
    }

    pub fn even(mut self) -> Self {
        self.even = true;
        self
    }

    pub fn support(mut self, a: f64, b: f64) -> Self {
        self.support = Some((a, b));
        self.decay = f64::INFINITY;
        self.breaks.extend([a, b]);
        sort_dedup(&mut self.breaks);
        self
    }

    pub fn breaks(mut self, pts: impl IntoIterator<Item = f64>) -> Self {
        self.breaks.extend(pts);
        sort_dedup(&mut self.breaks);
        self
    }
}

impl<F: Fn(f64) -> f64> Profile for Analytic<F> {
    fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.breaks.clone()
    }
    fn support(&self) -> Option<(f64, f64)> {
        self.support
    }
    fn decay_exponent(&self) -> f64 {
        self.decay
    }
    fn origin_exponent(&self) -> f64 {
        self.origin
    }
    fn is_even(&self) -> bool {
        self.even
    }
}

/// `u·v`.
pub struct Product<A, B>(pub A, pub B);

impl<A: Profile, B: Profile> Profile for Product<A, B> {
    fn value(&self, x: f64) -> f64 {
        self.0.value(x) * self.1.value(x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.0.breakpoints();
        b.extend(self.1.breakpoints());
        sort_dedup(&mut b);
        b
    }
    fn support(&self) -> Option<(f64, f64)> {
        match (self.0.support(), self.1.support()) {
            (Some((a, b)), Some((c, d))) => Some((a.max(c), b.min(d))),
            (Some(s), None) | (None, Some(s)) => Some(s),
            (None, None) => None,
        }
    }
    fn decay_exponent(&self) -> f64 {
        self.0.decay_exponent() + self.1.decay_exponent()
    }
    fn origin_exponent(&self) -> f64 {
        self.0.origin_exponent() + self.1.origin_exponent()
    }
    fn is_even(&self) -> bool {
        self.0.is_even() && self.1.is_even()
    }
}

/// `|x|^{power}·u(x)`.
pub struct PowerWeighted<P> {
    pub inner: P,
    pub power: f64,
}

impl<P: Profile> Profile for PowerWeighted<P> {
    fn value(&self, x: f64) -> f64 {
        x.abs().powf(self.power) * self.inner.value(x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.inner.breakpoints()
    }
    fn support(&self) -> Option<(f64, f64)> {
        self.inner.support()
    }
    fn decay_exponent(&self) -> f64 {
        self.inner.decay_exponent() - self.power
    }
    fn origin_exponent(&self) -> f64 {
        self.inner.origin_exponent() - self.power
    }
    fn is_even(&self) -> bool {
        self.inner.is_even()
    }
}

/// `u(-x)`.
pub struct Reflected<P>(pub P);

impl<P: Profile> Profile for Reflected<P> {
    fn value(&self, x: f64) -> f64 {
        self.0.value(-x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.0.breakpoints().into_iter().map(|t| -t).collect();
        b.reverse();
        b
    }
    fn support(&self) -> Option<(f64, f64)> {
        self.0.support().map(|(a, b)| (-b, -a))
    }
    fn decay_exponent(&self) -> f64 {
        self.0.decay_exponent()
    }
    fn origin_exponent(&self) -> f64 {
        self.0.origin_exponent()
    }
    fn is_even(&self) -> bool {
        self.0.is_even()
    }
}

/// Quintic smoothstep, `C²` at both ends.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

/// Even plateau: 1 on `|x| ≤ inner`, 0 on `|x| ≥ outer`.
pub fn plateau(x: f64, inner: f64, outer: f64) -> f64 {
    1.0 - smoothstep((x.abs() - inner) / (outer - inner))
}

/// [`plateau`] centred at `center` and dilated by `scale`, with its breakpoints.
pub fn plateau_profile(center: f64, scale: f64, inner: f64, outer: f64) -> Analytic<impl Fn(f64) -> f64> {
    Analytic::new(move |x: f64| plateau((x - center) / scale, inner, outer))
        .support(center - outer * scale, center + outer * scale)
        .breaks([center - inner * scale, center + inner * scale])
}

pub(crate) fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_is_c2_at_the_joins() {
        let h = 1e-4;
        assert!(smoothstep(h) < 1e-11);
        assert!((1.0 - smoothstep(1.0 - h)) < 1e-11);
        assert!((smoothstep(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn plateau_shape() {
        assert_eq!(plateau(0.9, 1.0, 2.0), 1.0);
        assert_eq!(plateau(-2.1, 1.0, 2.0), 0.0);
        assert!((plateau(1.5, 1.0, 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn product_combines_structure() {
        let a = plateau_profile(0.0, 1.0, 1.0, 2.0);
        let b = Analytic::new(|x: f64| x * x).breaks([0.5]);
        let p = Product(&a, &b);
        assert_eq!(p.breakpoints(), vec![-2.0, -1.0, 0.5, 1.0, 2.0]);
        assert_eq!(p.support(), Some((-2.0, 2.0)));
        assert!((p.value(1.5) - 1.125).abs() < 1e-15);
    }
}

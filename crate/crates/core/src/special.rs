//! Gamma function and the constants built from it.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Lanczos approximation with reflection for `x < 1/2`.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        return (PI / (PI * x).sin()).abs().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

pub fn beta(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// Normalisation of the fractional Laplacian,
/// `(-Δ)^γ u = ς_γ PV∫ (u(x)-u(y)) |x-y|^{-n-2γ} dy`.
pub fn sigma_gamma(n: usize, gamma_: f64) -> f64 {
    let nf = n as f64;
    PI.powf(-nf / 2.0) * 2f64.powf(2.0 * gamma_) * gamma(nf / 2.0 + gamma_) / gamma(1.0 - gamma_)
        * gamma_
}

/// Sharp constant of the fractional Hardy inequality.
pub fn hardy_constant(n: usize, gamma_: f64) -> f64 {
    let nf = n as f64;
    let r = gamma((nf + 2.0 * gamma_) / 4.0) / gamma((nf - 2.0 * gamma_) / 4.0);
    2f64.powf(2.0 * gamma_) * r * r
}

//! Closed forms and independent special-function routines against the library.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use ckn_core::energy::{delta_from_schedule, energy, upper_bound_test_function};
use ckn_core::limit::{make_schedule, ScheduleParams};
use ckn_core::liouville::{eta_family, mass, residual, LiouvilleParams};
use ckn_core::onofri::{counterexample_family, onofri_gap, Bumps};
use ckn_core::operators::{
    apply_frac_laplacian, apply_l, c_gamma_alpha, c_hardy, c_hardy_quadrature, exponent_p, l1q_norm,
    seminorm_sq, sigma_gamma, tail, weighted_measure, weighted_norm_sq,
};
use ckn_core::profile::{plateau_profile, Analytic};
use ckn_core::quadrature::{integrate, Ends};
use ckn_core::{CknParams, Profile, QuadratureConfig};
use statrs::function::gamma::gamma as g;

fn q() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn sigma_oracle(n: f64, s: f64) -> f64 {
    PI.powf(-n / 2.0) * 4f64.powf(s) * g(n / 2.0 + s) / g(1.0 - s) * s
}

#[test]
fn sigma_against_statrs() {
    for n in [1usize, 2, 3] {
        for s in [0.05, 0.25, 0.5, 0.75, 0.95] {
            assert_relative_eq!(sigma_gamma(n, s).unwrap(), sigma_oracle(n as f64, s), max_relative = 1e-12);
        }
    }
    assert_relative_eq!(sigma_gamma(1, 0.5).unwrap(), 1.0 / PI, epsilon = 1e-15);
    assert!(sigma_gamma(1, 1.0).is_err());
}

#[test]
fn hardy_against_statrs() {
    for s in [0.1, 0.25, 0.4] {
        let oracle = 4f64.powf(s) * (g((1.0 + 2.0 * s) / 4.0) / g((1.0 - 2.0 * s) / 4.0)).powi(2);
        assert_relative_eq!(c_hardy(1, s).unwrap(), oracle, max_relative = 1e-12);
        assert!((c_hardy_quadrature(s, &q()).unwrap().value - oracle).abs() < 1e-8);
    }
    let quarter = 2f64.sqrt() * (g(3.0 / 8.0) / g(1.0 / 8.0)).powi(2);
    assert_relative_eq!(c_hardy(1, 0.25).unwrap(), quarter, max_relative = 1e-12);
    assert_relative_eq!(c_hardy(1, 1e-9).unwrap(), 1.0, epsilon = 1e-8);
}

#[test]
fn constant_c_sign_and_monotonicity() {
    for s in [0.2, 0.3, 0.45] {
        assert!(c_gamma_alpha(1, s, 0.0, &q()).unwrap().value.abs() < 1e-8);
        let top = 1.0 - 2.0 * s;
        let vals: Vec<f64> = (1..=12).map(|i| c_gamma_alpha(1, s, top * i as f64 / 12.0, &q()).unwrap().value).collect();
        let (down, up) = vals.split_at(6);
        assert!(down.windows(2).all(|w| w[1] < w[0]), "γ={s}: {vals:?}");
        assert!(up.windows(2).all(|w| w[1] > w[0]), "γ={s}: {vals:?}");
        assert!(vals[..11].iter().all(|&c| c < 0.0));
        // α ↦ 1 - 2γ - α symmetry closes the curve at zero
        assert!(vals[11].abs() < 1e-8);
    }
    let c = c_gamma_alpha(1, 0.25, 0.25, &q()).unwrap().value;
    assert!((c + c_hardy(1, 0.25).unwrap() / sigma_gamma(1, 0.25).unwrap()).abs() < 1e-8);
}

#[test]
fn ckn_constant_below_hardy() {
    for s in [0.2, 0.3, 0.4] {
        for a in [0.02, 0.05, 0.08] {
            let ckn = -sigma_gamma(1, s).unwrap() * c_gamma_alpha(1, s, a, &q()).unwrap().value;
            assert!(ckn > 0.0 && ckn < c_hardy(1, s).unwrap(), "γ={s} α={a}: {ckn}");
        }
    }
}

#[test]
fn exponent_examples() {
    assert_relative_eq!(exponent_p(1, 0.45, 0.02, 0.05).unwrap(), 12.5, epsilon = 1e-12);
    let s = ScheduleParams::new(0.0, 0.1).unwrap();
    assert_relative_eq!(s.params().unwrap().p, 10.0, epsilon = 1e-12);
    assert_relative_eq!(s.beta_eps, 0.01, epsilon = 1e-15);
    assert_relative_eq!(s.alpha_eps, 0.005, epsilon = 1e-15);
    assert_relative_eq!(s.gamma_eps, 0.405, epsilon = 1e-15);
    let h = ScheduleParams::new(0.5, 0.05).unwrap();
    assert_relative_eq!(h.gamma_eps, 0.46375, epsilon = 1e-15);
    assert!(exponent_p(1, 0.6, 0.0, 0.0).is_err());
}

#[test]
fn schedule_rejects_bad_inputs() {
    assert!(make_schedule(0.0, &[0.1, 0.2]).is_err());
    assert!(make_schedule(1.0, &[0.1]).is_err());
    assert!(make_schedule(0.0, &[0.2, 0.1, 0.05]).is_ok());
}

#[test]
fn delta_inside_the_expected_bracket() {
    let s = ScheduleParams::new(0.0, 0.1).unwrap();
    let d = delta_from_schedule(&s).unwrap();
    assert!(d > 0.1 && d < 0.2, "{d}");
    assert!(upper_bound_test_function(0.0).is_err());
}

#[test]
fn half_laplacian_fourier_oracle() {
    // transform of 1/(1+x²) is π e^{-|ξ|}; multiply by |ξ| and invert numerically
    let u = Analytic::new(|x: f64| 1.0 / (1.0 + x * x)).decay(2.0).even();
    for x in [0.0001, 0.3, 1.7, 6.0] {
        let inv = integrate(|k: f64| k * (-k).exp() * (k * x).cos(), 0.0, f64::INFINITY, Ends::REGULAR, &q()).unwrap().value;
        let v = apply_frac_laplacian(&u, 0.5, x, &q()).unwrap().value;
        assert!((v - inv).abs() < 1e-8, "x={x}: {v} vs {inv}");
    }
}

#[test]
fn weighted_l_of_constants_vanishes() {
    let one = Analytic::new(|_| 2.5).even();
    for (s, a) in [(0.2, 0.0), (0.3, 0.1), (0.45, 0.04)] {
        for x in [-2.0, 0.01, 7.0] {
            assert!(apply_l(&one, s, a, x, &q()).unwrap().value.abs() < 1e-10);
        }
    }
}

#[test]
fn norm_is_twice_the_pairing() {
    let u = plateau_profile(0.3, 1.2, 0.25, 1.0);
    let cfg = q().with_tol(1e-9, 1e-7);
    for (s, a) in [(0.3, 0.1), (0.4, 0.0)] {
        let n = weighted_norm_sq(&u, s, a, &cfg).unwrap().value;
        let p = ckn_core::operators::pairing(&u, &u, s, a, &cfg).unwrap().value;
        assert_relative_eq!(n, 2.0 * p, max_relative = 1e-6);
    }
}

#[test]
fn measure_two_sided_bound() {
    let a = 0.3;
    for r in [0.1, 1.0, 10.0] {
        for x0 in [0.0, r, 2.0 * r, 5.0 * r, 50.0 * r] {
            let m = weighted_measure(&[(x0 - r, x0 + r)], a, &q()).unwrap().value;
            let model = if x0 <= 2.0 * r { r.powf(1.0 - a) } else { r * x0.powf(-a) };
            let ratio = m / model;
            assert!(ratio > 0.5 && ratio < 4.0, "r={r} x0={x0}: {ratio}");
        }
    }
}

#[test]
fn annulus_seminorm_bound() {
    let u = plateau_profile(0.0, 2.0, 0.25, 1.0);
    let (s, a) = (0.3, 0.1);
    let cfg = q().with_tol(1e-9, 1e-7);
    let big = seminorm_sq(&u, &[(-2.0, 2.0)], s, a, &cfg).unwrap().value;
    let small = seminorm_sq(&u, &[(-0.7, 0.7)], s, a, &cfg).unwrap().value;
    let ring = seminorm_sq(&u, &[(-2.0, -0.7), (0.7, 2.0)], s, a, &cfg).unwrap().value;
    assert!(ring <= 2.0 * (big - small) + 1e-8, "{ring} vs {big} - {small}");
}

#[test]
fn tail_of_one_is_the_kernel_mass() {
    let one = Analytic::new(|_| 1.0).even();
    let (s, a, x0, r) = (0.3, 0.1, 0.5, 2.0);
    let t = tail(&one, x0, r, s, a, &q()).unwrap().value;
    let k = |x: f64| (x - x0).abs().powf(-1.0 - 2.0 * s) * x.abs().powf(-a);
    let right = integrate(k, x0 + r, f64::INFINITY, Ends::new(None, Some(1.0 + 2.0 * s + a)), &q()).unwrap().value;
    let left = integrate(k, f64::NEG_INFINITY, x0 - r, Ends::new(Some(1.0 + 2.0 * s + a), None), &q()).unwrap().value;
    assert_relative_eq!(t, r.powf(2.0 * s + a) * (left + right), max_relative = 1e-8);
    assert!(t > 0.0);
}

#[test]
fn l1q_examples() {
    let one = Analytic::new(|_| 1.0).even();
    assert_relative_eq!(l1q_norm(&one, 2.0, &q()).unwrap().value, PI, epsilon = 1e-9);
    let grow = Analytic::new(|x: f64| x.abs().powf(0.05)).even().decay(-0.05);
    let v = l1q_norm(&grow, 2.0, &q()).unwrap().value;
    assert!(v.is_finite() && v > PI);
}

#[test]
fn liouville_family_closed_forms() {
    for (rho, b) in [(1.0, 0.0), (0.5, 0.25), (2.0, 0.75)] {
        let lp = LiouvilleParams::new(rho, b).unwrap();
        let m = mass(&lp, &q()).unwrap();
        assert_relative_eq!(m.kappa, 2.0 * PI * (1.0 - b), max_relative = 1e-9);
        assert!(residual(&lp, &[0.3, 1.0, 5.0], &q()).unwrap() < 1e-7);
    }
    let classical = LiouvilleParams::new(1.0, 0.0).unwrap();
    for x in [0.0, 0.5, 3.0] {
        assert_relative_eq!(eta_family(&classical, x), (2.0 / (1.0 + x * x)).ln(), epsilon = 1e-14);
    }
}

#[test]
fn energy_is_scale_invariant() {
    let params = CknParams::new(0.3, 0.05, 0.1).unwrap();
    let cfg = q().with_tol(1e-9, 1e-6);
    let u = Analytic::new(|x: f64| (1.0 + x * x).powf(-0.4)).even().decay(0.8);
    let v = Analytic::new(|x: f64| 0.01 * (1.0 + x * x).powf(-0.4)).even().decay(0.8);
    let (a, b) = (energy(&u, &params, &cfg).unwrap(), energy(&v, &params, &cfg).unwrap());
    assert_relative_eq!(a.ratio, b.ratio, max_relative = 1e-6);
    assert_relative_eq!(a.ratio, a.numerator / a.denominator, max_relative = 1e-14);
}

#[test]
fn stereographic_constants_at_b_zero() {
    let lp = LiouvilleParams::new(1.0, 0.0).unwrap();
    let r = onofri_gap(&Bumps::single(0.5, 1.0, 0.7), &lp, &q().with_tol(1e-9, 1e-6)).unwrap();
    assert_relative_eq!(r.kappa, 2.0 * PI, max_relative = 1e-9);
    assert_relative_eq!(r.quad_coeff, 1.0 / (4.0 * PI), max_relative = 1e-9);
    assert_relative_eq!(r.mean_coeff, 1.0 / (2.0 * PI), max_relative = 1e-9);
    assert!(r.gap >= -r.error_bar);
}

#[test]
fn counterexample_plateau_and_mass() {
    let b = -0.5;
    for t in [1e-2, 1e-3] {
        let v = counterexample_family(b, t).unwrap();
        assert_relative_eq!(v.value(1.0), 2.0 * (1.0 - b) * (1.0 / t).ln(), max_relative = 1e-12);
        // ∫ e^{v} dm_b ≥ c t^{-(1-2b)} with c from the plateau alone
        let lp = LiouvilleParams::new(1.0, b).unwrap();
        let plateau = 2.0 * t * (1.0 / t).powf(2.0 * (1.0 - b)) * ckn_core::liouville::density(&lp, 1.0 + t);
        assert!(plateau >= 0.1 * t.powf(-(1.0 - 2.0 * b)));
    }
    assert!(counterexample_family(0.2, 1e-3).is_err());
    assert!(counterexample_family(-0.5, 0.5).is_err());
}

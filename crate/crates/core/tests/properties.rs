use ckn_core::grid::{Grid, GridFunction};
use ckn_core::limit::ScheduleParams;
use ckn_core::liouville::{eta_family, fit_rho, sample, LiouvilleParams};
use ckn_core::onofri::{battery, gap_integrals, Bumps};
use ckn_core::operators::{apply_l, exponent_p, kernel, CknParams};
use ckn_core::profile::{plateau, smoothstep, Analytic};
use ckn_core::quadrature::{integrate, Ends};
use ckn_core::{Profile, QuadratureConfig};
use proptest::prelude::*;

fn q() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn core_window() -> impl Strategy<Value = CknParams> {
    (0.05f64..0.45, 0.05f64..0.95, 0.05f64..0.95).prop_map(|(g, sa, sb)| {
        let a = sa * ((1.0 - 2.0 * g) / 2.0);
        let b = a + sb * g;
        CknParams::new(g, a, b).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_symmetric(g in 0.05f64..0.49, a in 0.0f64..0.4, x in -50.0f64..50.0, y in -50.0f64..50.0) {
        prop_assume!(x != y && x != 0.0 && y != 0.0);
        let (k1, k2) = (kernel(g, a, x, y), kernel(g, a, y, x));
        prop_assert!((k1 - k2).abs() <= 1e-15 * k1.abs());
    }

    #[test]
    fn constants_are_annihilated(c in -10.0f64..10.0, g in 0.1f64..0.45, a in 0.0f64..0.05, x in 0.01f64..20.0) {
        let u = Analytic::new(move |_| c).even();
        prop_assert!(apply_l(&u, g, a, x, &q()).unwrap().value.abs() < 1e-9 * c.abs().max(1.0));
    }

    #[test]
    fn schedule_relations(b in 0.0f64..0.9, eps in 0.01f64..0.2) {
        if let Ok(s) = ScheduleParams::new(b, eps) {
            prop_assert!((s.epsilon * s.p_eps - 1.0).abs() < 1e-14);
            prop_assert!((s.beta_eps * s.p_eps - (b + eps)).abs() < 1e-13);
            prop_assert!((s.params().unwrap().p - s.p_eps).abs() < 1e-9 * s.p_eps);
            let c = s.params().unwrap();
            prop_assert!(c.alpha > 0.0 && c.alpha < c.beta && c.beta < c.alpha + c.gamma);
        }
    }

    #[test]
    fn kelvin_preserves_exponent(c in core_window()) {
        let k = c.kelvin();
        prop_assert!((k.alpha - (1.0 - 2.0 * c.gamma - c.alpha)).abs() < 1e-14);
        prop_assert!((k.p - c.p).abs() < 1e-9 * c.p);
        prop_assert!((c.beta * c.p + k.beta * k.p - 2.0).abs() < 1e-9);
        prop_assert!((exponent_p(1, k.gamma, k.alpha, k.beta).unwrap() - c.p).abs() < 1e-9 * c.p);
    }

    #[test]
    fn inversion_is_an_involution(d in 0.1f64..2.0, s in 0.2f64..5.0) {
        let grid = Grid::geometric(1e-3, 1e3, 8.0).unwrap();
        let u = GridFunction::from_fn(grid, |x| (1.0 + (s * x).powi(2)).powf(-d / 2.0), 0.0, d).unwrap();
        let back = u.inverted().unwrap().inverted().unwrap();
        prop_assert_eq!(back.values(), u.values());
        for x in [0.01, 0.7, 3.0, 200.0] {
            prop_assert!((u.inverted().unwrap().value(1.0 / x) - u.value(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn rescaling_matches_definition(c in 0.1f64..10.0, r in 0.1f64..10.0) {
        let grid = Grid::geometric(1e-4, 1e4, 8.0).unwrap();
        let u = GridFunction::from_fn(grid, |x| 1.0 / (1.0 + x * x), 0.0, 2.0).unwrap();
        let v = u.rescaled(c, r);
        for x in [0.05, 0.5, 2.0] {
            prop_assert!((v.value(x) - c * u.value(r * x)).abs() < 1e-12 * c);
        }
    }

    #[test]
    fn polynomials_integrate_exactly(a in -5.0f64..5.0, w in 0.1f64..5.0, c0 in -3.0f64..3.0, c3 in -3.0f64..3.0) {
        let b = a + w;
        let f = |x: f64| c0 + c3 * x.powi(3);
        let exact = c0 * w + c3 * (b.powi(4) - a.powi(4)) / 4.0;
        let r = integrate(f, a, b, Ends::REGULAR, &q()).unwrap().value;
        prop_assert!((r - exact).abs() < 1e-11 * exact.abs().max(1.0));
    }

    #[test]
    fn plateaus_stay_in_unit_range(x in -3.0f64..3.0, t in -1.0f64..2.0) {
        let s = smoothstep(t);
        prop_assert!((0.0..=1.0).contains(&s));
        let p = plateau(x, 0.5, 1.5);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(plateau(x.abs() * 0.5, 0.5, 1.5) >= plateau(x.abs(), 0.5, 1.5));
    }

    #[test]
    fn liouville_profile_is_even_and_peaked(rho in 0.1f64..10.0, b in 0.0f64..0.95, x in 0.0f64..100.0) {
        let lp = LiouvilleParams::new(rho, b).unwrap();
        prop_assert_eq!(eta_family(&lp, x), eta_family(&lp, -x));
        prop_assert!(eta_family(&lp, x) <= eta_family(&lp, 0.0));
    }

    #[test]
    fn battery_is_seeded(seed in any::<u64>()) {
        prop_assert_eq!(battery(12, seed), battery(12, seed));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn self_fit_recovers_rho(rho in 0.2f64..5.0, b in 0.0f64..0.8) {
        let lp = LiouvilleParams::new(rho, b).unwrap();
        let fit = fit_rho(&sample(&lp, Grid::geometric(1e-3, 1e3, 8.0).unwrap()).unwrap(), b, 5.0, 1e-6).unwrap();
        prop_assert!((fit.params.rho - rho).abs() < 1e-7 * rho);
    }

    // The gap of a·v assembled from the integrals of v equals the gap of the
    // scaled function computed from scratch.
    #[test]
    fn scaling_of_the_gap(a in -2.0f64..2.0, c in -1.0f64..1.0, h in 0.3f64..1.5) {
        let cfg = q().with_tol(1e-9, 1e-7);
        let lp = LiouvilleParams::new(1.0, 0.3).unwrap();
        let v = Bumps::single(c, 1.0, h);
        let av = Bumps::single(c, 1.0, a * h);
        let one = gap_integrals(&v, a, &lp, &cfg).unwrap().assemble(a);
        let two = gap_integrals(&av, 1.0, &lp, &cfg).unwrap().assemble(1.0);
        prop_assert!((one.gap - two.gap).abs() <= one.error_bar + two.error_bar + 1e-9);
    }
}

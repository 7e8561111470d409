//! Closed-form examples across all modules, each with its tolerance.

use std::f64::consts::PI;

use ckn_core::energy::energy;
use ckn_core::limit::{eta_from_minimizer, ScheduleParams};
use ckn_core::liouville::{eta_family, fit_rho, residual_of, sample, Eta, LiouvilleParams};
use ckn_core::onofri::{constant_sequence_psi, onofri_gap, perturbation_expansion_check, quarter_norm_sq, Bumps};
use ckn_core::operators::{apply_frac_laplacian, apply_l, c_gamma_alpha, c_hardy, exponent_p, l1q_norm, sigma_gamma};
use ckn_core::profile::{plateau_profile, Analytic};
use ckn_core::quadrature::{integrate, integrate_plane_offdiag, principal_value, Ends, Rect};
use ckn_core::{Grid, Profile, Result};
use serde::Serialize;

use crate::commands::{solve, Outcome};
use crate::config::{parse_config, Command, ConfigError, RunConfig};
use crate::output::{to_json, Table};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn check(name: &'static str, value: f64, expected: f64, tolerance: f64) -> Check {
    Check { name, value, expected, tolerance, pass: (value - expected).abs() <= tolerance }
}

fn truth(name: &'static str, ok: bool) -> Check {
    check(name, if ok { 1.0 } else { 0.0 }, 1.0, 0.0)
}

pub fn checks(c: &RunConfig) -> Result<Vec<Check>> {
    let q = &c.quadrature;
    let q2 = c.quadrature_2d();
    let mut out = Vec::new();

    // quadrature
    let left = integrate(|x: f64| x.abs().powf(-0.5), -1.0, 0.0, Ends::new(None, Some(0.5)), q)?;
    let right = integrate(|x: f64| x.abs().powf(-0.5), 0.0, 1.0, Ends::new(Some(0.5), None), q)?;
    out.push(check("integrate |x|^-1/2 on (-1,1)", left.value + right.value, 4.0, 1e-8));
    out.push(check("integrate 1 on (0,1)", integrate(|_| 1.0, 0.0, 1.0, Ends::REGULAR, q)?.value, 1.0, 1e-14));
    out.push(check("pv 1/x on (-1,1)", principal_value(|x| 1.0 / x, 0.0, -1.0, 1.0, q)?.value, 0.0, 1e-10));
    out.push(check("pv 1/(x-1/2) on (0,1)", principal_value(|x| 1.0 / (x - 0.5), 0.5, 0.0, 1.0, q)?.value, 0.0, 1e-10));
    let unit = Rect { x: (0.0, 1.0), y: (0.0, 1.0), diag: None, axis: None };
    out.push(check("plane 1 on (0,1)^2", integrate_plane_offdiag(|_, _| 1.0, unit, q)?.value, 1.0, 1e-12));
    let cancel = |x: f64, y: f64| (x - y).powi(2) * (x - y).abs().powi(-2);
    let diag = Rect { diag: Some(0.0), ..unit };
    out.push(check("plane (x-y)^2 |x-y|^-2 on (0,1)^2", integrate_plane_offdiag(cancel, diag, q)?.value, 1.0, 1e-12));

    // constants
    out.push(check("sigma_gamma(1, 1e-9)", sigma_gamma(1, 1e-9)?, 0.0, 1e-8));
    out.push(check("c_hardy(1, 1e-9)", c_hardy(1, 1e-9)?, 1.0, 1e-8));
    out.push(check("C_{0.3,0}", c_gamma_alpha(1, 0.3, 0.0, q)?.value, 0.0, 1e-12));
    out.push(check("exponent_p at beta = alpha", exponent_p(1, 0.3, 0.1, 0.1)?, 2.0 / (1.0 - 0.6), 1e-14));

    // operators
    let one = Analytic::new(|_| 1.0).even();
    let mut worst = 0.0f64;
    for x in [-3.0, 0.4, 2.5] {
        worst = worst.max(apply_l(&one, 0.3, 0.1, x, q)?.value.abs());
        worst = worst.max(apply_frac_laplacian(&one, 0.5, x, q)?.value.abs());
    }
    out.push(check("L and (-Δ)^γ of a constant", worst, 0.0, 1e-12));
    let bump = plateau_profile(0.2, 1.0, 0.25, 1.0);
    let g = 0.35;
    let l = sigma_gamma(1, g)? * apply_l(&bump, g, 0.0, 0.7, q)?.value;
    out.push(check("ς·L = (-Δ)^γ at α = 0", l, apply_frac_laplacian(&bump, g, 0.7, q)?.value, 1e-9));
    out.push(check("l1q_norm(1, 2)", l1q_norm(&one, 2.0, q)?.value, PI, 1e-8));

    // energy
    let u = Analytic::new(|x: f64| (1.0 + x * x).powf(-0.4)).even().decay(0.8);
    let three = Analytic::new(|x: f64| 3.0 * (1.0 + x * x).powf(-0.4)).even().decay(0.8);
    let params = ckn_core::CknParams::new(0.3, 0.05, 0.1)?;
    let e1 = energy(&u, &params, &q2)?.ratio;
    out.push(check("energy(3u) = energy(u)", energy(&three, &params, &q2)?.ratio, e1, 1e-5 * e1));

    // liouville
    for (rho, b) in [(1.0, 0.0), (0.7, 0.4)] {
        let lp = LiouvilleParams::new(rho, b)?;
        let want = (2.0 * (1.0 - b) * (0.5 * PI * b).cos() / rho).ln();
        out.push(check("eta at the origin", eta_family(&lp, 0.0), want, 1e-14));
    }
    let lp = LiouvilleParams::new(1.3, 0.25)?;
    let plus = residual_of(&Eta(lp), &lp, &[0.8], q)?;
    let minus = residual_of(&Eta(lp), &lp, &[-0.8], q)?;
    out.push(check("residual at ±x", plus, minus, 1e-12));
    let lp = LiouvilleParams::new(1.7, 0.3)?;
    let fit = fit_rho(&sample(&lp, Grid::geometric(1e-3, 1e3, 10.0)?)?, 0.3, 5.0, 1e-6)?;
    out.push(check("self-fit rho", fit.params.rho, 1.7, 1e-8));

    // limit
    let s = ScheduleParams::new(0.0, 1e-6)?;
    let dist = (s.gamma_eps - 0.5).abs().max(s.alpha_eps).max(s.beta_eps);
    out.push(check("schedule as ε → 0", dist, 0.0, 2e-6));
    let (params, schedule, m) = solve(&RunConfig { epsilon: 0.2, b: Some(0.0), gamma: None, ..c.clone() })?;
    let eta = eta_from_minimizer(&m, &schedule.expect("schedule run"))?;
    let top = eta
        .nodes()
        .into_iter()
        .zip(eta.values())
        .filter(|(x, _)| x.abs() <= 1.0)
        .map(|(_, &v)| v)
        .fold(eta.value(0.0), f64::max);
    out.push(check("max of η_ε on the unit ball", top, 0.0, 1e-12));

    // onofri
    let zero = Bumps::single(0.0, 1.0, 0.0);
    out.push(check("gap of v = 0", onofri_gap(&zero, &LiouvilleParams::new(1.0, 0.3)?, &q2)?.gap, 0.0, 0.0));
    let n1 = quarter_norm_sq(&constant_sequence_psi(1)?, q)?.value;
    out.push(truth("ψ_1 has positive finite norm", n1 > 0.0 && n1.is_finite()));
    let v = Bumps::single(0.0, 1.0, 1.0);
    let r = perturbation_expansion_check(&m, &params, &v, 0.1, &q2)?;
    out.push(check("expansion of ∫wLw", r.difference, 0.0, 1e-5 * r.direct.value.abs()));

    // cli
    out.push(truth("empty config gives defaults", parse_config("").ok() == Some(RunConfig::default())));
    let unknown = matches!(parse_config("gama = 0.3"), Err(ConfigError::UnknownKey { ref key, .. }) if key == "gama");
    out.push(truth("unknown key is rejected by name", unknown));
    Ok(out)
}

pub fn run(c: &RunConfig) -> Result<Outcome> {
    let all = checks(c)?;
    let mut t = Table::new(&["check", "value", "expected", "tolerance", "pass"]);
    for k in &all {
        t.push(vec![k.name.into(), k.value.into(), k.expected.into(), k.tolerance.into(), k.pass.into()]);
    }
    let ok = all.iter().all(|k| k.pass);
    let mut o = Outcome { artifacts: Vec::new(), ok };
    o.artifacts.push(crate::commands::Artifact {
        name: "selftest.csv".into(),
        contents: t.to_csv(Command::Selftest.name()),
    });
    o.artifacts.push(crate::commands::Artifact {
        name: "selftest.json".into(),
        contents: to_json(Command::Selftest.name(), &all),
    });
    Ok(o)
}

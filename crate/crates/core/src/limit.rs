//! The ε-ladder: schedule, minimizers, `η_ε = p_ε(u_ε - 1)`, and convergence
//! towards the singular Liouville family.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::energy::{delta_from_schedule, minimize, upper_bound_test_function, MinimizerResult, SolverKnobs};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::liouville::{fit_rho_points, mass};
use crate::operators::{apply_l, l1q_norm, CknParams};
use crate::profile::Profile;
use crate::quadrature::QuadratureConfig;

/// One rung of the `a = 1` schedule:
/// `p = 1/ε`, `β = ε(b + ε)`, `α = β/2`, `γ = 1/2 - ε(1 - (b + ε)/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub b: f64,
    pub epsilon: f64,
    pub p_eps: f64,
    pub beta_eps: f64,
    pub alpha_eps: f64,
    pub gamma_eps: f64,
}

impl ScheduleParams {
    pub fn new(b: f64, epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&b) {
            return Err(Error::InvalidSchedule(format!("b = {b} not in [0, 1)")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidSchedule(format!("ε = {epsilon} must be positive")));
        }
        let beta = epsilon * (b + epsilon);
        let s = Self {
            b,
            epsilon,
            p_eps: 1.0 / epsilon,
            beta_eps: beta,
            alpha_eps: beta / 2.0,
            gamma_eps: 0.5 - epsilon * (1.0 - (b + epsilon) / 2.0),
        };
        s.params()?.check_core_window().map_err(|e| match e {
            Error::WindowViolation(m) => Error::InvalidSchedule(format!("ε = {epsilon}: {m}")),
            other => other,
        })?;
        Ok(s)
    }

    /// The CKN parameters of this rung. `p` is recomputed from `(γ, α, β)`.
    pub fn params(&self) -> Result<CknParams> {
        CknParams::new(self.gamma_eps, self.alpha_eps, self.beta_eps)
            .map_err(|e| Error::InvalidSchedule(format!("ε = {}: {e}", self.epsilon)))
    }
}

/// Validated rungs for a strictly decreasing list of `ε`.
pub fn make_schedule(b: f64, epsilons: &[f64]) -> Result<Vec<ScheduleParams>> {
    if epsilons.is_empty() {
        return Err(Error::InvalidSchedule("empty ε list".into()));
    }
    if epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidSchedule("ε list must be strictly decreasing".into()));
    }
    epsilons.iter().map(|&e| ScheduleParams::new(b, e)).collect()
}

/// `η_ε = p_ε(u_ε - 1)` on the minimizer's grid, continued by a constant.
pub fn eta_from_minimizer(m: &MinimizerResult, sched: &ScheduleParams) -> Result<GridFunction> {
    let p = sched.p_eps;
    m.u.map_values(|_, u| p * (u - 1.0), 0.0, 0.0)
}

/// `log ς_{1/2}`.
pub fn shift() -> f64 {
    -PI.ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub epsilon: f64,
    pub schedule: ScheduleParams,
    pub ratio: f64,
    pub el_residual: f64,
    pub lp_mass: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `max_{B̄₁} η_ε`
    pub eta_max_ball: f64,
    /// Largest `η_ε(x) - p_ε(|x|^{α_ε} - 1)` over nodes with `|x| ≥ 1`.
    pub outside_excess: f64,
    /// `sup | |x|^{βp} L η_ε - (1 + η_ε/p)^{p-1} |` on the defect nodes.
    pub equation_defect: f64,
    /// `∫ |η_ε| / (1 + |x|^q)` with `q = 1 + 2γ_ε + α_ε`.
    pub l1q: f64,
    pub l1q_error: f64,
    /// `(x, η_ε(x) + log ς_{1/2})` at the window samples.
    pub eta_samples: Vec<(f64, f64)>,
    /// Sup-difference of the shifted `η` to the previous successful rung.
    pub sup_diff: Option<f64>,
    pub rho_fit: f64,
    pub fit_error: f64,
    /// `lp_mass / π`, the mass of `|x|^{-b} e^η` carried by this rung.
    pub mass_fit: f64,
    /// Quadrature mass of the fitted family member.
    pub fitted_member_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RungOutcome {
    pub epsilon: f64,
    pub rung: Option<Rung>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub b: f64,
    pub window: f64,
    pub rungs: Vec<RungOutcome>,
}

impl LadderReport {
    pub fn successful(&self) -> impl Iterator<Item = &Rung> {
        self.rungs.iter().filter_map(|r| r.rung.as_ref())
    }

    pub fn all_ok(&self) -> bool {
        self.rungs.iter().all(|r| r.rung.as_ref().is_some_and(|g| g.converged))
    }
}

/// Points of `[0, window]` where rungs are compared and fitted.
pub fn window_samples(window: f64) -> Vec<f64> {
    let n = 200;
    (0..=n).map(|i| window * i as f64 / n as f64).collect()
}

fn defect_nodes(r: f64) -> Vec<f64> {
    let n = 12;
    (0..=n).map(|i| (-r.ln() + 2.0 * r.ln() * i as f64 / n as f64).exp()).collect()
}

fn rung(sched: &ScheduleParams, knobs: &SolverKnobs, window: f64, cfg: &QuadratureConfig) -> Result<Rung> {
    let params = sched.params()?;
    let init = upper_bound_test_function(delta_from_schedule(sched)?)?;
    let m = minimize(&params, &init, knobs, cfg)?;
    let eta = eta_from_minimizer(&m, sched)?;
    let p = sched.p_eps;

    let mut eta_max_ball = eta.value(0.0);
    let mut outside_excess = f64::NEG_INFINITY;
    for (x, &v) in eta.nodes().iter().zip(eta.values()) {
        if x.abs() <= 1.0 {
            eta_max_ball = eta_max_ball.max(v);
        } else {
            outside_excess = outside_excess.max(v - p * (x.abs().powf(sched.alpha_eps) - 1.0));
        }
    }

    let mut equation_defect = 0.0f64;
    for x in defect_nodes(window) {
        let l = p * apply_l(&m.u, params.gamma, params.alpha, x, cfg)?.value;
        let e = eta.value(x);
        let d = x.powf(params.weight_power()) * l - (1.0 + e / p).powf(p - 1.0);
        equation_defect = equation_defect.max(d.abs());
    }

    let l1q = l1q_norm(&eta, 1.0 + 2.0 * sched.gamma_eps + sched.alpha_eps, cfg)?;
    let eta_samples: Vec<(f64, f64)> = window_samples(window).into_iter().map(|x| (x, eta.value(x) + shift())).collect();
    let fit = fit_rho_points(&eta_samples, sched.b, f64::INFINITY)?;
    let member = mass(&fit.params, cfg)?;
    Ok(Rung {
        epsilon: sched.epsilon,
        schedule: *sched,
        ratio: m.report.ratio,
        el_residual: m.report.el_residual,
        lp_mass: m.report.lp_mass,
        iterations: m.iterations,
        converged: m.converged,
        eta_max_ball,
        outside_excess,
        equation_defect,
        l1q: l1q.value,
        l1q_error: l1q.error,
        eta_samples,
        sup_diff: None,
        rho_fit: fit.params.rho,
        fit_error: fit.fit_error,
        mass_fit: m.report.lp_mass / PI,
        fitted_member_mass: member.kappa,
    })
}

/// Minimizers along the schedule, their shifted `η`, and the comparison with
/// the Liouville family on `[-window, window]`. Rungs are solved concurrently;
/// a failing rung is recorded and skipped in the comparisons.
pub fn run_ladder(
    b: f64,
    epsilons: &[f64],
    knobs: &SolverKnobs,
    window: f64,
    cfg: &QuadratureConfig,
) -> Result<LadderReport> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::Domain(format!("window = {window} must be positive")));
    }
    knobs.validate()?;
    let schedule = make_schedule(b, epsilons)?;
    let results: Vec<Result<Rung>> = std::thread::scope(|s| {
        let handles: Vec<_> = schedule.iter().map(|sched| s.spawn(move || rung(sched, knobs, window, cfg))).collect();
        handles.into_iter().map(|h| h.join().expect("rung thread panicked")).collect()
    });
    let mut rungs = Vec::with_capacity(results.len());
    let mut prev: Option<Vec<(f64, f64)>> = None;
    for (sched, r) in schedule.iter().zip(results) {
        match r {
            Ok(mut g) => {
                if let Some(pv) = &prev {
                    let d = pv.iter().zip(&g.eta_samples).map(|(a, c)| (a.1 - c.1).abs()).fold(0.0, f64::max);
                    g.sup_diff = Some(d);
                }
                prev = Some(g.eta_samples.clone());
                rungs.push(RungOutcome { epsilon: sched.epsilon, rung: Some(g), error: None });
            }
            Err(e) => rungs.push(RungOutcome { epsilon: sched.epsilon, rung: None, error: Some(e.to_string()) }),
        }
    }
    Ok(LadderReport { b, window, rungs })
}

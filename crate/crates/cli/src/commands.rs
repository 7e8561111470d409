//! One function per subcommand. Each returns its artifacts in memory; the
//! caller owns the file writes.

use std::thread;

use ckn_core::energy::{delta_from_schedule, minimize, upper_bound_test_function, MinimizerResult};
use ckn_core::limit::{run_ladder, ScheduleParams};
use ckn_core::liouville::{default_grid, mass, sampled_residual, LiouvilleParams, MassReport};
use ckn_core::onofri::{battery, counterexample_family, counterexample_gap, onofri_gap, psi_defect, quarter_norm_sq};
use ckn_core::onofri::{constant_sequence_psi, Bumps, GapReport};
use ckn_core::operators::{constants as constants_report, CknParams};
use ckn_core::profile::{Analytic, Profile};
use ckn_core::{Estimate, Result};
use serde::Serialize;

use crate::config::{Command, RunConfig};
use crate::output::{to_json, Cell, Table};
use crate::selftest;

#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// Files to write, and whether every unit of work converged or passed.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub ok: bool,
}

impl Outcome {
    fn new(ok: bool) -> Self {
        Self { artifacts: Vec::new(), ok }
    }

    fn csv(mut self, name: &str, command: Command, t: &Table) -> Self {
        self.artifacts.push(Artifact { name: name.into(), contents: t.to_csv(command.name()) });
        self
    }

    fn json<T: Serialize>(mut self, name: &str, command: Command, report: &T) -> Self {
        self.artifacts.push(Artifact { name: name.into(), contents: to_json(command.name(), report) });
        self
    }
}

pub fn execute(command: Command, c: &RunConfig) -> Result<Outcome> {
    match command {
        Command::Constants => constants(c),
        Command::LiouvilleCheck => liouville_check(c),
        Command::Minimize => minimize_cmd(c),
        Command::LimitLadder => limit_ladder(c),
        Command::OnofriGap => onofri(c),
        Command::Counterexample => counterexample(c),
        Command::Selftest => selftest::run(c),
    }
}

/// Runs `f` on every item on scoped threads; results keep the input order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    let chunk = items.len().div_ceil(workers).max(1);
    thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|part| s.spawn(|| part.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn constants(c: &RunConfig) -> Result<Outcome> {
    let gammas = c.gamma.map_or_else(|| vec![0.2, 0.3, 0.45], |g| vec![g]);
    let mut cases = Vec::new();
    for &g in &gammas {
        match c.alpha {
            Some(a) => cases.push((g, a)),
            None => cases.extend((0..=8).map(|i| (g, i as f64 * (0.5 - g) / 8.0))),
        }
    }
    let reports = par_map(&cases, |&(g, a)| constants_report(1, g, a, &c.quadrature)).into_iter().collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&["gamma", "alpha", "sigma_gamma", "c_gamma_alpha", "c_hardy", "c_ckn", "quadrature_error"]);
    for r in &reports {
        t.push(vec![
            r.gamma.into(),
            r.alpha.into(),
            r.sigma_gamma.into(),
            r.c_gamma_alpha.into(),
            r.c_hardy.into(),
            r.c_ckn.into(),
            r.quadrature_error.into(),
        ]);
    }
    Ok(Outcome::new(true)
        .csv("constants.csv", Command::Constants, &t)
        .json("constants.json", Command::Constants, &reports))
}

#[derive(Clone, Debug, Serialize)]
struct LiouvilleRow {
    params: LiouvilleParams,
    mass: MassReport,
    max_residual: f64,
    max_residual_doubled: f64,
}

fn liouville_check(c: &RunConfig) -> Result<Outcome> {
    let bs = c.b.map_or_else(|| vec![0.0, 0.25, 0.5, 0.75], |b| vec![b]);
    let rhos = c.rho.map_or_else(|| vec![0.5, 1.0, 2.0], |r| vec![r]);
    let cases: Vec<(f64, f64)> = bs.iter().flat_map(|&b| rhos.iter().map(move |&r| (b, r))).collect();
    let grid = default_grid();
    let rows = par_map(&cases, |&(b, rho)| -> Result<LiouvilleRow> {
        let lp = LiouvilleParams::new(rho, b)?;
        Ok(LiouvilleRow {
            params: lp,
            mass: mass(&lp, &c.quadrature)?,
            max_residual: sampled_residual(&lp, grid, 1e-2, 1e2, &c.quadrature)?,
            max_residual_doubled: sampled_residual(&lp, grid.doubled(), 1e-2, 1e2, &c.quadrature)?,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&[
        "b",
        "rho",
        "kappa",
        "kappa_exact",
        "rel_err",
        "quadrature_error",
        "max_residual",
        "max_residual_doubled",
    ]);
    for r in &rows {
        t.push(vec![
            r.params.b.into(),
            r.params.rho.into(),
            r.mass.kappa.into(),
            r.mass.kappa_exact.into(),
            r.mass.rel_err.into(),
            r.mass.quadrature_error.into(),
            r.max_residual.into(),
            r.max_residual_doubled.into(),
        ]);
    }
    Ok(Outcome::new(true)
        .csv("liouville.csv", Command::LiouvilleCheck, &t)
        .json("liouville.json", Command::LiouvilleCheck, &rows))
}

/// Parameters and initial profile of a `minimize` run: explicit `(γ, α, β)`
/// when all three are given, the schedule point `(b, ε)` otherwise.
pub fn minimize_problem(c: &RunConfig) -> Result<(CknParams, Option<ScheduleParams>, f64)> {
    match (c.gamma, c.alpha, c.beta) {
        (Some(g), Some(a), Some(b)) => {
            let p = CknParams::new(g, a, b)?;
            Ok((p, None, 0.5 * (1.0 - 2.0 * g - 2.0 * a)))
        }
        _ => {
            let s = ScheduleParams::new(c.b.unwrap_or(0.0), c.epsilon)?;
            Ok((s.params()?, Some(s), delta_from_schedule(&s)?))
        }
    }
}

#[derive(Serialize)]
struct MinimizeReport<'a> {
    params: CknParams,
    schedule: Option<ScheduleParams>,
    report: &'a ckn_core::energy::EnergyReport,
    iterations: usize,
    converged: bool,
    /// `(x, u(x))` at the positive grid nodes
    profile: Vec<(f64, f64)>,
}

pub fn solve(c: &RunConfig) -> Result<(CknParams, Option<ScheduleParams>, MinimizerResult)> {
    let (params, schedule, delta) = minimize_problem(c)?;
    let init = upper_bound_test_function(delta)?;
    let m = minimize(&params, &init, &c.solver, &c.quadrature)?;
    Ok((params, schedule, m))
}

fn minimize_cmd(c: &RunConfig) -> Result<Outcome> {
    let (params, schedule, m) = solve(c)?;
    let mut trace = Table::new(&["iter", "ratio", "el_residual", "step"]);
    for r in &m.trace {
        trace.push(vec![r.iter.into(), r.ratio.into(), r.el_residual.into(), r.step.into()]);
    }
    let profile = m.u.grid.positive_nodes().into_iter().map(|x| (x, m.u.value(x))).collect();
    let report = MinimizeReport {
        params,
        schedule,
        report: &m.report,
        iterations: m.iterations,
        converged: m.converged,
        profile,
    };
    Ok(Outcome::new(m.converged)
        .csv("trace.csv", Command::Minimize, &trace)
        .json("minimize.json", Command::Minimize, &report))
}

fn limit_ladder(c: &RunConfig) -> Result<Outcome> {
    let report = run_ladder(c.b.unwrap_or(0.0), &c.eps_list, &c.solver, c.window, &c.quadrature)?;
    let mut t = Table::new(&["epsilon", "ratio", "el_residual", "sup_diff", "rho_fit", "fit_err", "mass_fit"]);
    for r in &report.rungs {
        t.push(match &r.rung {
            Some(g) => vec![
                g.epsilon.into(),
                g.ratio.into(),
                g.el_residual.into(),
                g.sup_diff.into(),
                g.rho_fit.into(),
                g.fit_error.into(),
                g.mass_fit.into(),
            ],
            None => {
                let mut row = vec![Cell::Num(r.epsilon)];
                row.resize(7, Cell::Empty);
                row
            }
        });
    }
    Ok(Outcome::new(report.all_ok())
        .csv("ladder.csv", Command::LimitLadder, &t)
        .json("ladder.json", Command::LimitLadder, &report))
}

const GAP_COLUMNS: [&str; 8] = ["v_id", "b", "rho", "lhs", "quad_term", "mean_term", "gap", "error_bar"];

#[derive(Clone, Debug, Serialize)]
struct GapRow {
    v_id: String,
    b: f64,
    rho: f64,
    report: GapReport,
}

fn gap_table(rows: &[GapRow]) -> Table {
    let mut t = Table::new(&GAP_COLUMNS);
    for r in rows {
        let g = &r.report;
        t.push(vec![
            r.v_id.clone().into(),
            r.b.into(),
            r.rho.into(),
            g.lhs.into(),
            g.quad_term.into(),
            g.mean_term.into(),
            g.gap.into(),
            g.error_bar.into(),
        ]);
    }
    t
}

#[derive(Clone, Debug, Serialize)]
struct PsiRow {
    k: usize,
    quarter_norm_sq: Estimate,
    k_times_norm: f64,
    defect: Estimate,
}

#[derive(Serialize)]
struct OnofriReport<'a> {
    battery: &'a [Bumps],
    gaps: &'a [GapRow],
    psi: &'a [PsiRow],
}

fn onofri(c: &RunConfig) -> Result<Outcome> {
    let bs = c.b.map_or_else(|| vec![0.0, 0.3, 0.6], |b| vec![b]);
    let rho = c.rho.unwrap_or(1.0);
    let mut funcs = vec![("zero".to_string(), Bumps::single(0.0, 1.0, 0.0))];
    funcs.extend(battery(c.battery_size, c.seed).into_iter().enumerate().map(|(i, v)| (format!("bump-{i:02}"), v)));
    let cases: Vec<(f64, &(String, Bumps))> = bs.iter().flat_map(|&b| funcs.iter().map(move |f| (b, f))).collect();
    let q2 = c.quadrature_2d();
    let rows = par_map(&cases, |&(b, (id, v))| -> Result<GapRow> {
        let lp = LiouvilleParams::new(rho, b)?;
        Ok(GapRow { v_id: id.clone(), b, rho, report: onofri_gap(v, &lp, &q2)? })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let ks: Vec<usize> = (1..=c.k_max).collect();
    let lp = LiouvilleParams::new(rho, bs[0])?;
    let psi = par_map(&ks, |&k| -> Result<PsiRow> {
        let f = constant_sequence_psi(k)?;
        let n = quarter_norm_sq(&f, &c.quadrature)?;
        Ok(PsiRow { k, quarter_norm_sq: n, k_times_norm: k as f64 * n.value, defect: psi_defect(&f, &lp, &c.quadrature)? })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut pt = Table::new(&["k", "quarter_norm_sq", "quarter_norm_error", "k_times_norm", "psi_defect", "psi_defect_error"]);
    for r in &psi {
        pt.push(vec![
            r.k.into(),
            r.quarter_norm_sq.value.into(),
            r.quarter_norm_sq.error.into(),
            r.k_times_norm.into(),
            r.defect.value.into(),
            r.defect.error.into(),
        ]);
    }
    let battery: Vec<Bumps> = funcs.iter().map(|f| f.1.clone()).collect();
    Ok(Outcome::new(true)
        .csv("gap.csv", Command::OnofriGap, &gap_table(&rows))
        .csv("psi.csv", Command::OnofriGap, &pt)
        .json("gap.json", Command::OnofriGap, &OnofriReport { battery: &battery, gaps: &rows, psi: &psi }))
}

fn counterexample(c: &RunConfig) -> Result<Outcome> {
    let b = c.b.unwrap_or(-0.5);
    let rho = c.rho.unwrap_or(1.0);
    let lp = LiouvilleParams::new(rho, b)?;
    let q2 = c.quadrature_2d();
    let rows = par_map(&c.t_list, |&t| -> Result<GapRow> {
        Ok(GapRow { v_id: format!("t={t:e}"), b, rho, report: counterexample_gap(b, t, &lp, &q2)? })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    #[derive(Serialize)]
    struct Plateau {
        t: f64,
        value_at_one: f64,
        expected: f64,
    }
    let plateaus = c
        .t_list
        .iter()
        .map(|&t| -> Result<Plateau> {
            let v: Analytic<_> = counterexample_family(b, t)?;
            Ok(Plateau { t, value_at_one: v.value(1.0), expected: 2.0 * (1.0 - b) * (1.0 / t).ln() })
        })
        .collect::<Result<Vec<_>>>()?;
    #[derive(Serialize)]
    struct Report<'a> {
        gaps: &'a [GapRow],
        plateaus: Vec<Plateau>,
    }
    Ok(Outcome::new(true)
        .csv("counterexample.csv", Command::Counterexample, &gap_table(&rows))
        .json("counterexample.json", Command::Counterexample, &Report { gaps: &rows, plateaus }))
}

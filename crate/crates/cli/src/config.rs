//! `key = value` run configuration. Flags on the command line use the same
//! keys with `-` in place of `_` and override the file.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ckn_core::energy::SolverKnobs;
use ckn_core::QuadratureConfig;
use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Constants,
    LiouvilleCheck,
    Minimize,
    LimitLadder,
    OnofriGap,
    Counterexample,
    Selftest,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Constants,
        Command::LiouvilleCheck,
        Command::Minimize,
        Command::LimitLadder,
        Command::OnofriGap,
        Command::Counterexample,
        Command::Selftest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::LiouvilleCheck => "liouville-check",
            Command::Minimize => "minimize",
            Command::LimitLadder => "limit-ladder",
            Command::OnofriGap => "onofri-gap",
            Command::Counterexample => "counterexample",
            Command::Selftest => "selftest",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}`: {message}")]
    BadValue { line: usize, key: String, message: String },
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("command", "subcommand to run"),
    ("out_dir", "directory receiving CSV/JSON output"),
    ("seed", "seed of the bump battery sampler"),
    ("b", "singular weight exponent"),
    ("rho", "Liouville dilation parameter"),
    ("gamma", "fractional order"),
    ("alpha", "weight exponent of the energy"),
    ("beta", "weight exponent of the p-mass"),
    ("epsilon", "schedule point for minimize"),
    ("eps_list", "comma-separated decreasing schedule points"),
    ("window", "half-width of the comparison window"),
    ("t_list", "comma-separated counterexample parameters"),
    ("battery_size", "number of battery functions"),
    ("k_max", "largest k of the psi sequence"),
    ("r_max", "quadrature: start of the mapped tails"),
    ("n_cells", "quadrature: initial cells per unit"),
    ("grading", "quadrature: geometric grading ratio"),
    ("pv_exclusion", "quadrature: principal-value exclusion"),
    ("abs_tol", "quadrature: absolute tolerance"),
    ("rel_tol", "quadrature: relative tolerance"),
    ("tail_order", "quadrature: tail mapping order"),
    ("max_subdivisions", "quadrature: bisection budget"),
    ("abs_tol_2d", "quadrature: absolute tolerance of double integrals"),
    ("rel_tol_2d", "quadrature: relative tolerance of double integrals"),
    ("x_min", "solver: smallest grid node"),
    ("x_max", "solver: largest grid node"),
    ("per_decade", "solver: grid nodes per decade"),
    ("max_iter", "solver: iteration cap"),
    ("tol", "solver: relative defect tolerance"),
    ("rearrange", "solver: monotone rearrangement (true/false)"),
    ("check_min", "solver: smallest check node"),
    ("check_max", "solver: largest check node"),
    ("check_per_decade", "solver: check nodes per decade"),
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub b: Option<f64>,
    pub rho: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub epsilon: f64,
    pub eps_list: Vec<f64>,
    pub window: f64,
    pub t_list: Vec<f64>,
    pub battery_size: usize,
    pub k_max: usize,
    pub quadrature: QuadratureConfig,
    pub abs_tol_2d: f64,
    pub rel_tol_2d: f64,
    pub solver: SolverKnobs,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            out_dir: PathBuf::from("."),
            seed: 20240601,
            b: None,
            rho: None,
            gamma: None,
            alpha: None,
            beta: None,
            epsilon: 0.2,
            eps_list: vec![0.2, 0.1, 0.05],
            window: 5.0,
            t_list: vec![1e-2, 1e-3, 1e-4],
            battery_size: 20,
            k_max: 8,
            quadrature: QuadratureConfig::default(),
            abs_tol_2d: 1e-9,
            rel_tol_2d: 1e-6,
            solver: SolverKnobs::default(),
        }
    }
}

fn num<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("cannot parse `{v}`: {e}"))
}

fn list(v: &str) -> Result<Vec<f64>, String> {
    v.split(',').map(|s| num::<f64>(s.trim())).collect()
}

fn flag(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true/false, found `{v}`")),
    }
}

impl RunConfig {
    /// Quadrature settings for double integrals.
    pub fn quadrature_2d(&self) -> QuadratureConfig {
        self.quadrature.clone().with_tol(self.abs_tol_2d, self.rel_tol_2d)
    }

    /// Sets one key. `Err(None)` means the key is unknown.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Option<String>> {
        let q = &mut self.quadrature;
        let s = &mut self.solver;
        let r: Result<(), String> = match key {
            "command" => value.parse().map(|c| self.command = Some(c)),
            "out_dir" => {
                self.out_dir = PathBuf::from(value);
                Ok(())
            }
            "seed" => num(value).map(|v| self.seed = v),
            "b" => num(value).map(|v| self.b = Some(v)),
            "rho" => num(value).map(|v| self.rho = Some(v)),
            "gamma" => num(value).map(|v| self.gamma = Some(v)),
            "alpha" => num(value).map(|v| self.alpha = Some(v)),
            "beta" => num(value).map(|v| self.beta = Some(v)),
            "epsilon" => num(value).map(|v| self.epsilon = v),
            "eps_list" => list(value).map(|v| self.eps_list = v),
            "window" => num(value).map(|v| self.window = v),
            "t_list" => list(value).map(|v| self.t_list = v),
            "battery_size" => num(value).map(|v| self.battery_size = v),
            "k_max" => num(value).map(|v| self.k_max = v),
            "r_max" => num(value).map(|v| q.r_max = v),
            "n_cells" => num(value).map(|v| q.n_cells = v),
            "grading" => num(value).map(|v| q.grading = v),
            "pv_exclusion" => num(value).map(|v| q.pv_exclusion = v),
            "abs_tol" => num(value).map(|v| q.abs_tol = v),
            "rel_tol" => num(value).map(|v| q.rel_tol = v),
            "tail_order" => num(value).map(|v| q.tail_order = v),
            "max_subdivisions" => num(value).map(|v| q.max_subdivisions = v),
            "abs_tol_2d" => num(value).map(|v| self.abs_tol_2d = v),
            "rel_tol_2d" => num(value).map(|v| self.rel_tol_2d = v),
            "x_min" => num(value).map(|v| s.x_min = v),
            "x_max" => num(value).map(|v| s.x_max = v),
            "per_decade" => num(value).map(|v| s.per_decade = v),
            "max_iter" => num(value).map(|v| s.max_iter = v),
            "tol" => num(value).map(|v| s.tol = v),
            "rearrange" => flag(value).map(|v| s.rearrange = v),
            "check_min" => num(value).map(|v| s.check_min = v),
            "check_max" => num(value).map(|v| s.check_max = v),
            "check_per_decade" => num(value).map(|v| s.check_per_decade = v),
            _ => return Err(None),
        };
        r.map_err(Some)
    }

    /// Range checks that do not depend on the command.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.quadrature.validate().or_else(|e| bad(e.to_string()))?;
        self.solver.validate().or_else(|e| bad(e.to_string()))?;
        if !(self.abs_tol_2d > 0.0 && self.rel_tol_2d > 0.0) {
            return bad("double-integral tolerances must be positive".into());
        }
        if let Some(b) = self.b {
            if !(b > -1.0 && b < 1.0) {
                return bad(format!("b = {b} not in (-1, 1)"));
            }
        }
        if let Some(rho) = self.rho {
            if !(rho > 0.0 && rho.is_finite()) {
                return bad(format!("rho = {rho} must be positive"));
            }
        }
        if !(self.window > 0.0 && self.window.is_finite()) {
            return bad(format!("window = {} must be positive", self.window));
        }
        if self.eps_list.is_empty() || self.eps_list.iter().any(|e| !(*e > 0.0)) {
            return bad("eps_list must hold positive values".into());
        }
        if self.t_list.is_empty() || self.t_list.iter().any(|t| !(*t > 0.0 && *t <= 0.1)) {
            return bad("t_list values must lie in (0, 0.1]".into());
        }
        if self.battery_size == 0 || self.k_max == 0 {
            return bad("battery_size and k_max must be positive".into());
        }
        Ok(())
    }
}

/// Parses a configuration document. Blank lines and `#` comments are
/// skipped; unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError::Syntax { line, text: body.to_string() });
        };
        let (key, value) = (key.trim(), value.trim());
        cfg.set(key, value).map_err(|e| match e {
            None => ConfigError::UnknownKey { line, key: key.to_string() },
            Some(message) => ConfigError::BadValue { line, key: key.to_string(), message },
        })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

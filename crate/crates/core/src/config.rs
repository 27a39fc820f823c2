//! Flat `key = value` run configuration with strict parsing.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Unknown and repeated keys are errors. Every key has a default, so an empty
//! file is a valid configuration.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::format::fmt_num;
use crate::objective::DEFAULT_FD_STEP;
use crate::spectral::{FractionalTriple, Interval, ParameterBox, SpectralExpansion};
use crate::trust_region::TrustRegionConfig;

/// f(x) = exp(-x²) - exp(-1).
pub fn gaussian_bump(x: f64) -> f64 {
    (-x * x).exp() - (-1.0_f64).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// ψ₁ + ½ψ₅.
    Example1,
    /// exp(-x²) - exp(-1), expanded by quadrature.
    Example2,
    Coefficients(Vec<(usize, f64)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub initial_condition: InitialCondition,
    pub horizon: f64,
    pub nodes: usize,
    pub truncation: Truncation,
    pub coeff_tol: f64,
    pub bounds: ParameterBox,
    pub solver: TrustRegionConfig,
    pub lambda: f64,
    pub delta: f64,
    pub seed: u64,
    pub fd_steps: [f64; 3],
    pub a_star: FractionalTriple,
    pub a0: FractionalTriple,
    /// Morozov target; `None` means the realized I(a*) on the data.
    pub epsilon: Option<f64>,
    pub trace_out: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            initial_condition: InitialCondition::Example1,
            horizon: 1.0,
            nodes: 200,
            truncation: Truncation::Auto,
            coeff_tol: 1e-8,
            bounds: ParameterBox::default(),
            solver: TrustRegionConfig::default(),
            lambda: 1e-7,
            delta: 0.0,
            seed: 0,
            fd_steps: [DEFAULT_FD_STEP; 3],
            a_star: FractionalTriple::new_unchecked(0.4, 0.6, 1.2),
            a0: FractionalTriple::new_unchecked(0.05, 0.1, 1.7),
            epsilon: None,
            trace_out: None,
        }
    }
}

const KEYS: &[&str] = &[
    "initial_condition",
    "horizon",
    "nodes",
    "truncation",
    "coeff_tol",
    "beta_lo",
    "beta_hi",
    "alpha_lo",
    "alpha_hi",
    "gamma_lo",
    "gamma_hi",
    "r0",
    "r_max",
    "eta",
    "max_iters",
    "grad_tol",
    "lambda",
    "delta",
    "seed",
    "fd_step_beta",
    "fd_step_alpha",
    "fd_step_gamma",
    "a_star",
    "a0",
    "epsilon",
    "trace_out",
];

fn config_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config {
        line: Some(line),
        msg: msg.into(),
    }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| config_err(line, format!("`{key}`: expected a number, got `{v}`")))?;
    if !x.is_finite() {
        return Err(config_err(line, format!("`{key}`: value must be finite, got `{v}`")));
    }
    Ok(x)
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| config_err(line, format!("`{key}`: expected a nonnegative integer, got `{v}`")))
}

/// Parse `b,a,g` into a triple without range checks.
pub fn parse_triple(v: &str) -> std::result::Result<FractionalTriple, String> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got `{v}`"));
    }
    let mut out = [0.0; 3];
    for (slot, p) in out.iter_mut().zip(&parts) {
        *slot = p
            .parse()
            .map_err(|_| format!("expected a number, got `{p}`"))?;
    }
    Ok(FractionalTriple::from_array(out))
}

fn parse_initial(line: usize, v: &str) -> Result<InitialCondition> {
    match v {
        "example1" => return Ok(InitialCondition::Example1),
        "example2" => return Ok(InitialCondition::Example2),
        _ => {}
    }
    let mut coeffs = Vec::new();
    for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (n, c) = item.split_once(':').ok_or_else(|| {
            config_err(
                line,
                format!("`initial_condition`: expected example1, example2, or n:c pairs, got `{item}`"),
            )
        })?;
        let n = parse_usize(line, "initial_condition", n.trim())?;
        let c = parse_f64(line, "initial_condition", c.trim())?;
        coeffs.push((n, c));
    }
    Ok(InitialCondition::Coefficients(coeffs))
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| config_err(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let known = KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| config_err(line, format!("unknown key `{key}`")))?;
            if seen.contains(known) {
                return Err(config_err(line, format!("duplicate key `{key}`")));
            }
            seen.push(known);
            cfg.set(line, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        let f = |v: &str| parse_f64(line, key, v);
        match key {
            "initial_condition" => self.initial_condition = parse_initial(line, v)?,
            "horizon" => self.horizon = f(v)?,
            "nodes" => self.nodes = parse_usize(line, key, v)?,
            "truncation" => {
                self.truncation = if v == "auto" {
                    Truncation::Auto
                } else {
                    Truncation::Fixed(parse_usize(line, key, v)?)
                }
            }
            "coeff_tol" => self.coeff_tol = f(v)?,
            "beta_lo" => self.bounds.beta.lo = f(v)?,
            "beta_hi" => self.bounds.beta.hi = f(v)?,
            "alpha_lo" => self.bounds.alpha.lo = f(v)?,
            "alpha_hi" => self.bounds.alpha.hi = f(v)?,
            "gamma_lo" => self.bounds.gamma.lo = f(v)?,
            "gamma_hi" => self.bounds.gamma.hi = f(v)?,
            "r0" => self.solver.r0 = f(v)?,
            "r_max" => self.solver.r_max = f(v)?,
            "eta" => self.solver.eta = f(v)?,
            "max_iters" => self.solver.max_iters = parse_usize(line, key, v)?,
            "grad_tol" => self.solver.grad_tol = f(v)?,
            "lambda" => self.lambda = f(v)?,
            "delta" => self.delta = f(v)?,
            "seed" => {
                self.seed = v
                    .parse()
                    .map_err(|_| config_err(line, format!("`seed`: expected an unsigned integer, got `{v}`")))?
            }
            "fd_step_beta" => self.fd_steps[0] = f(v)?,
            "fd_step_alpha" => self.fd_steps[1] = f(v)?,
            "fd_step_gamma" => self.fd_steps[2] = f(v)?,
            "a_star" => self.a_star = parse_triple(v).map_err(|m| config_err(line, format!("`a_star`: {m}")))?,
            "a0" => self.a0 = parse_triple(v).map_err(|m| config_err(line, format!("`a0`: {m}")))?,
            "epsilon" => self.epsilon = if v == "auto" { None } else { Some(f(v)?) },
            "trace_out" => self.trace_out = if v.is_empty() { None } else { Some(v.to_string()) },
            _ => unreachable!("key list and setter disagree on `{key}`"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let range = |field: &str, msg: String| Error::Range {
            field: field.into(),
            msg,
        };
        if !(self.horizon > 0.0) {
            return Err(range("horizon", format!("must be > 0, got {}", self.horizon)));
        }
        if self.nodes < 2 {
            return Err(range("nodes", format!("must be >= 2, got {}", self.nodes)));
        }
        if self.truncation == Truncation::Fixed(0) {
            return Err(range("truncation", "must be >= 1 or auto".into()));
        }
        if !(self.coeff_tol > 0.0) {
            return Err(range("coeff_tol", format!("must be > 0, got {}", self.coeff_tol)));
        }
        self.bounds.validate()?;
        self.solver.validate()?;
        if !(self.lambda >= 0.0) {
            return Err(range("lambda", format!("must be >= 0, got {}", self.lambda)));
        }
        if !(self.delta >= 0.0) {
            return Err(range("delta", format!("must be >= 0, got {}", self.delta)));
        }
        for (name, h) in ["fd_step_beta", "fd_step_alpha", "fd_step_gamma"]
            .iter()
            .zip(self.fd_steps)
        {
            if !(h > 0.0 && h < 0.5) {
                return Err(range(name, format!("must lie in (0, 0.5), got {h}")));
            }
        }
        self.a_star
            .validate()
            .map_err(|e| range("a_star", e.to_string()))?;
        if !self.bounds.contains(&self.a0) {
            return Err(range("a0", format!("{} lies outside the parameter box", self.a0)));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0) {
                return Err(range("epsilon", format!("must be > 0, got {eps}")));
            }
        }
        if let InitialCondition::Coefficients(c) = &self.initial_condition {
            SpectralExpansion::from_coefficients(c).map_err(|e| range("initial_condition", e.to_string()))?;
        }
        Ok(())
    }

    /// Spectral expansion of the configured initial condition.
    pub fn expansion(&self) -> Result<SpectralExpansion> {
        let exp = match (&self.initial_condition, self.truncation) {
            (InitialCondition::Example1, _) => SpectralExpansion::from_coefficients(&[(1, 1.0), (5, 0.5)])?,
            (InitialCondition::Example2, Truncation::Auto) => SpectralExpansion::expand_auto(gaussian_bump, self.coeff_tol)?,
            (InitialCondition::Example2, Truncation::Fixed(n)) => {
                SpectralExpansion::expand(gaussian_bump, n, self.coeff_tol)?
            }
            (InitialCondition::Coefficients(c), _) => SpectralExpansion::from_coefficients(c)?,
        };
        Ok(match (&self.initial_condition, self.truncation) {
            (InitialCondition::Example2, _) | (_, Truncation::Auto) => exp,
            (_, Truncation::Fixed(n)) => exp.truncated(n),
        })
    }

    /// The fully resolved configuration in the input format.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let ic = match &self.initial_condition {
            InitialCondition::Example1 => "example1".to_string(),
            InitialCondition::Example2 => "example2".to_string(),
            InitialCondition::Coefficients(c) => c
                .iter()
                .map(|(n, v)| format!("{n}:{}", fmt_num(*v)))
                .collect::<Vec<_>>()
                .join(","),
        };
        let triple = |a: &FractionalTriple| {
            a.to_array().iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(",")
        };
        let iv = |i: &Interval| (fmt_num(i.lo), fmt_num(i.hi));
        let (blo, bhi) = iv(&self.bounds.beta);
        let (alo, ahi) = iv(&self.bounds.alpha);
        let (glo, ghi) = iv(&self.bounds.gamma);
        let truncation = match self.truncation {
            Truncation::Auto => "auto".to_string(),
            Truncation::Fixed(n) => n.to_string(),
        };
        let values: Vec<(&str, String)> = vec![
            ("initial_condition", ic),
            ("horizon", fmt_num(self.horizon)),
            ("nodes", self.nodes.to_string()),
            ("truncation", truncation),
            ("coeff_tol", fmt_num(self.coeff_tol)),
            ("beta_lo", blo),
            ("beta_hi", bhi),
            ("alpha_lo", alo),
            ("alpha_hi", ahi),
            ("gamma_lo", glo),
            ("gamma_hi", ghi),
            ("r0", fmt_num(self.solver.r0)),
            ("r_max", fmt_num(self.solver.r_max)),
            ("eta", fmt_num(self.solver.eta)),
            ("max_iters", self.solver.max_iters.to_string()),
            ("grad_tol", fmt_num(self.solver.grad_tol)),
            ("lambda", fmt_num(self.lambda)),
            ("delta", fmt_num(self.delta)),
            ("seed", self.seed.to_string()),
            ("fd_step_beta", fmt_num(self.fd_steps[0])),
            ("fd_step_alpha", fmt_num(self.fd_steps[1])),
            ("fd_step_gamma", fmt_num(self.fd_steps[2])),
            ("a_star", triple(&self.a_star)),
            ("a0", triple(&self.a0)),
            ("epsilon", self.epsilon.map(fmt_num).unwrap_or_else(|| "auto".into())),
            ("trace_out", self.trace_out.clone().unwrap_or_default()),
        ];
        debug_assert_eq!(values.len(), KEYS.len());
        for (k, v) in values {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

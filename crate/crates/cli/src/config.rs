//! Run configuration: a TOML file merged with command-line overrides.
//!
//! Only `N`, `alpha`, `b`, `rho` and `G` lack defaults. The resolved config is
//! echoed into the output directory so a run can be repeated from it alone.

use anyhow::{anyhow, bail, Context, Result};
use choquard_core::minimize::SolveOptions;
use choquard_core::thresholds::{ConstantSource, ThresholdBundle};
use choquard_core::{Nonlinearity, ProblemParams};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

pub const DEFAULT_OUT: &str = "choquard-out";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub constants: ConstantsSection,
    #[serde(default)]
    pub threshold: ThresholdSection,
    #[serde(default)]
    pub fiber: FiberSection,
}

fn default_out() -> PathBuf {
    PathBuf::from(DEFAULT_OUT)
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: default_out(),
            problem: ProblemSection::default(),
            grid: GridSection::default(),
            solver: SolverSection::default(),
            constants: ConstantsSection::default(),
            threshold: ThresholdSection::default(),
            fiber: FiberSection::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<RhoSpec>,
    /// Power sum `G`, e.g. `"200*|t|^2 + |t|^(8/3)"`, or `"preset"`.
    #[serde(rename = "G", skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
}

/// A mass given outright or as a multiple of the threshold, `"0.5rho0"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RhoSpec {
    Value(f64),
    Text(String),
}

impl fmt::Display for RhoSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhoSpec::Value(v) => write!(f, "{v}"),
            RhoSpec::Text(s) => f.write_str(s),
        }
    }
}

impl RhoSpec {
    /// Accepts a number, `<c>rho0` or `<c>*rho0`.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Ok(v) = t.parse::<f64>() {
            return Ok(RhoSpec::Value(v));
        }
        let spec = RhoSpec::Text(t.to_string());
        spec.factor()?;
        Ok(spec)
    }

    /// `Some(c)` for `c·ρ₀`, `None` for an absolute value.
    fn factor(&self) -> Result<Option<f64>> {
        match self {
            RhoSpec::Value(_) => Ok(None),
            RhoSpec::Text(s) => {
                let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
                let head = t
                    .strip_suffix("rho0")
                    .ok_or_else(|| anyhow!("rho `{s}`: expected a number or `<c>rho0`"))?;
                let head = head.strip_suffix('*').unwrap_or(head);
                if head.is_empty() {
                    return Ok(Some(1.0));
                }
                let c: f64 = head.parse().map_err(|_| anyhow!("rho `{s}`: cannot read factor `{head}`"))?;
                Ok(Some(c))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub m: usize,
    #[serde(rename = "L")]
    pub l: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { m: 64, l: 24.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub max_iters: usize,
    pub step0: f64,
    pub tol_grad: f64,
    pub starts: usize,
    pub seed: u64,
    /// Cap on `‖∇u‖₂`; defaults to `R₀`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_cap: Option<f64>,
    /// Exit 0 on convergence even when the certification checks fail.
    pub outside_theory: bool,
    /// Also write the fiber curve of the minimizer.
    pub fiber: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self {
            max_iters: d.max_iters,
            step0: d.step0,
            tol_grad: d.tol_grad,
            starts: d.n_starts,
            seed: d.seed,
            r_cap: d.r_cap,
            outside_theory: false,
            fiber: false,
        }
    }
}

impl SolverSection {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            max_iters: self.max_iters,
            step0: self.step0,
            tol_grad: self.tol_grad,
            n_starts: self.starts,
            seed: self.seed,
            r_cap: self.r_cap,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsSection {
    /// `exact` or `trial`; trial estimates need the grid.
    pub source: ConstantSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdSection {
    /// Defaults to `R₀/10`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    /// Defaults to `10 R₁`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    pub samples: usize,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        Self { t_min: None, t_max: None, samples: 400 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiberSection {
    pub tau_min: f64,
    pub tau_max: f64,
    pub samples: usize,
}

impl Default for FiberSection {
    fn default() -> Self {
        let (lo, hi) = choquard_core::fiber::DEFAULT_WINDOW;
        Self { tau_min: lo, tau_max: hi, samples: choquard_core::fiber::DEFAULT_SAMPLES }
    }
}

/// Command-line values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub b: Option<u8>,
    pub rho: Option<String>,
    pub g: Option<String>,
    pub m: Option<usize>,
    pub l: Option<f64>,
    pub seed: Option<u64>,
    pub starts: Option<usize>,
    pub out: Option<PathBuf>,
    pub fiber: bool,
    pub outside_theory: bool,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, o: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).map_err(|e| anyhow!(ConfigError(format!("{}: {e}", p.display()))))?
            }
            None => RunConfig::default(),
        };
        let pr = &mut cfg.problem;
        pr.n = o.n.or(pr.n);
        pr.alpha = o.alpha.or(pr.alpha);
        pr.b = o.b.or(pr.b);
        if let Some(r) = &o.rho {
            pr.rho = Some(RhoSpec::parse(r).map_err(|e| anyhow!(ConfigError(e.to_string())))?);
        }
        if let Some(g) = &o.g {
            pr.g = Some(g.clone());
        }
        if let Some(m) = o.m {
            cfg.grid.m = m;
        }
        if let Some(l) = o.l {
            cfg.grid.l = l;
        }
        if let Some(s) = o.seed {
            cfg.solver.seed = s;
        }
        if let Some(s) = o.starts {
            cfg.solver.starts = s;
        }
        if let Some(out) = &o.out {
            cfg.output_dir = out.clone();
        }
        cfg.solver.fiber |= o.fiber;
        cfg.solver.outside_theory |= o.outside_theory;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Problem and nonlinearity. `rho` is required unless `fallback_rho` is
    /// given, in which case a missing `rho` takes that value.
    pub fn resolve(&self, fallback_rho: Option<f64>) -> Result<Resolved> {
        let p = &self.problem;
        let missing = |name: &str| anyhow!(ConfigError(format!("`{name}` is required (config [problem] or --{name})")));
        let n = p.n.ok_or_else(|| missing("N"))?;
        let alpha = p.alpha.ok_or_else(|| missing("alpha"))?;
        let b = p.b.ok_or_else(|| missing("b"))?;
        let g = p.g.as_deref().ok_or_else(|| missing("G"))?;
        let unit = ProblemParams::new(n, alpha, b, 1.0).map_err(config_err)?;
        let nl = if g.trim().eq_ignore_ascii_case("preset") {
            Nonlinearity::reference_preset(&unit)
        } else {
            Nonlinearity::parse(&unit, g)
        }
        .map_err(config_err)?;
        let rho = match (&p.rho, fallback_rho) {
            (None, Some(r)) => r,
            (None, None) => return Err(missing("rho")),
            (Some(spec), _) => match spec.factor().map_err(|e| anyhow!(ConfigError(e.to_string())))? {
                None => match spec {
                    RhoSpec::Value(v) => *v,
                    RhoSpec::Text(_) => unreachable!("text specs carry a factor"),
                },
                Some(c) => {
                    let b0 = ThresholdBundle::compute(&unit, &nl, None, ConstantSource::Exact).map_err(config_err)?;
                    let r0 = b0
                        .rho0
                        .ok_or_else(|| anyhow!(ConfigError(format!("rho = {spec} needs a finite rho0, and this G has none"))))?;
                    c * r0
                }
            },
        };
        let params = ProblemParams::new(n, alpha, b, rho).map_err(config_err)?;
        Ok(Resolved { params, nl })
    }
}

pub struct Resolved {
    pub params: ProblemParams,
    pub nl: Nonlinearity,
}

/// Marks an error as a usage or configuration problem (exit code 1).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_err(e: choquard_core::Error) -> anyhow::Error {
    anyhow!(ConfigError(e.to_string()))
}

pub fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        bail!(ConfigError(format!("{name} = {v} must be > 0")));
    }
    Ok(())
}

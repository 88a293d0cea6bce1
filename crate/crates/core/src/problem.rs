//! Problem instance, power-sum nonlinearity and growth-condition checks.
//!
//! The nonlinearity is `F(t) = b|t|^{(N+α)/N} + G(t)` with
//! `G(t) = Σ ν_i |t|^{p_i}`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    /// Spatial dimension `N`.
    pub n: usize,
    /// Riesz order.
    pub alpha: f64,
    /// Lower-critical coefficient, 0 or 1.
    pub b: u8,
    /// Prescribed `L²` norm.
    pub rho: f64,
}

impl ProblemParams {
    pub fn new(n: usize, alpha: f64, b: u8, rho: f64) -> Result<Self> {
        let p = Self { n, alpha, b, rho };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidParameter(format!("N = {} must be >= 3", self.n)));
        }
        if !(self.alpha > 0.0 && self.alpha < self.n as f64) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {} must lie in (0, N = {})",
                self.alpha, self.n
            )));
        }
        if self.b > 1 {
            return Err(Error::InvalidParameter(format!("b = {} must be 0 or 1", self.b)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho = {} must be > 0", self.rho)));
        }
        Ok(())
    }

    pub fn with_rho(&self, rho: f64) -> Self {
        Self { rho, ..*self }
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    pub fn bf(&self) -> f64 {
        self.b as f64
    }

    /// HLS lower-critical exponent `(N+α)/N`.
    pub fn p_lower(&self) -> f64 {
        (self.nf() + self.alpha) / self.nf()
    }

    /// HLS upper-critical exponent `(N+α)/(N-2)`.
    pub fn p_upper(&self) -> f64 {
        (self.nf() + self.alpha) / (self.nf() - 2.0)
    }

    /// `L²`-critical exponent `1 + (2+α)/N`.
    pub fn p_l2crit(&self) -> f64 {
        1.0 + (2.0 + self.alpha) / self.nf()
    }

    /// Threshold below which the smallest exponent must lie when `b = 1`.
    pub fn p_g2_lower_critical(&self) -> f64 {
        1.0 + (4.0 + self.alpha) / self.nf()
    }

    /// Exponent of `τ` picked up by `∫(I_α∗|u|^p)|u|^q` under `u ↦ u_τ`.
    pub fn dilation_exponent(&self, p: f64, q: f64) -> f64 {
        0.5 * self.nf() * (p + q) - self.nf() - self.alpha
    }
}

pub const PRESET_NU: f64 = 200.0;
pub const PRESET_MU: f64 = 1.0;
pub const PRESET_P: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coef: f64,
    pub exponent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Nonlinearity {
    terms: Vec<PowerTerm>,
    b: f64,
    p_lower: f64,
    p_upper: f64,
    p_l2crit: f64,
    c0: Option<f64>,
}

impl Nonlinearity {
    /// Builds `F = b|t|^{p_lower} + Σ ν_i |t|^{p_i}`. Exponents must exceed 1 so
    /// that `f` is continuous at 0; admissibility against `(p_lower, p_upper]` is
    /// reported by [`validate`] rather than enforced here.
    pub fn new(params: &ProblemParams, terms: Vec<PowerTerm>) -> Result<Self> {
        params.check()?;
        for t in &terms {
            if !t.coef.is_finite() || !t.exponent.is_finite() {
                return Err(Error::InvalidNonlinearity(format!(
                    "non-finite term {}*|t|^{}",
                    t.coef, t.exponent
                )));
            }
            if t.exponent <= 1.0 {
                return Err(Error::InvalidNonlinearity(format!(
                    "exponent {} must exceed 1",
                    t.exponent
                )));
            }
        }
        let mut nl = Self {
            terms,
            b: params.bf(),
            p_lower: params.p_lower(),
            p_upper: params.p_upper(),
            p_l2crit: params.p_l2crit(),
            c0: None,
        };
        nl.c0 = nl.compute_c0().ok();
        Ok(nl)
    }

    pub fn parse(params: &ProblemParams, spec: &str) -> Result<Self> {
        Self::new(params, parse_terms(spec)?)
    }

    /// Reference member of the two-power family: `ν = 200`, `μ = 1`, `p = 2`.
    /// The large ratio `ν/μ` keeps the ground state at `ρ = ρ₀/2` a few
    /// length units wide and decaying well inside a box of side 24.
    pub fn reference_preset(params: &ProblemParams) -> Result<Self> {
        Self::two_power_preset(params, PRESET_NU, PRESET_MU, PRESET_P)
    }

    /// The example family `ν|t|^p + μ|t|^q` with `q` fixed by
    /// `N(p+q)/2 - N - α = 2`.
    pub fn two_power_preset(params: &ProblemParams, nu: f64, mu: f64, p: f64) -> Result<Self> {
        let q = 2.0 * (params.nf() + params.alpha + 2.0) / params.nf() - p;
        if !(params.p_lower() < p && p < params.p_l2crit() && params.p_l2crit() < q && q <= params.p_upper() + 1e-12) {
            return Err(Error::InvalidNonlinearity(format!(
                "preset needs {} < p < {} < q <= {}, got p = {p}, q = {q}",
                params.p_lower(),
                params.p_l2crit(),
                params.p_upper()
            )));
        }
        Self::new(
            params,
            vec![PowerTerm { coef: nu, exponent: p }, PowerTerm { coef: mu, exponent: q.min(params.p_upper()) }],
        )
    }

    pub fn terms(&self) -> &[PowerTerm] {
        &self.terms
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn p_lower(&self) -> f64 {
        self.p_lower
    }

    pub fn p_upper(&self) -> f64 {
        self.p_upper
    }

    pub fn p_l2crit(&self) -> f64 {
        self.p_l2crit
    }

    /// `G(t)`.
    pub fn eval_g(&self, t: f64) -> f64 {
        let a = t.abs();
        if a == 0.0 {
            return 0.0;
        }
        self.terms.iter().map(|term| term.coef * a.powf(term.exponent)).sum()
    }

    /// `F(t) = b|t|^{p_lower} + G(t)`.
    pub fn eval_f_big(&self, t: f64) -> f64 {
        let a = t.abs();
        if a == 0.0 {
            return 0.0;
        }
        self.b * a.powf(self.p_lower) + self.eval_g(t)
    }

    /// `f(t) = F'(t)`.
    pub fn eval_f(&self, t: f64) -> f64 {
        let a = t.abs();
        if a == 0.0 {
            return 0.0;
        }
        let mut acc = self.b * self.p_lower * a.powf(self.p_lower - 1.0);
        for term in &self.terms {
            acc += term.coef * term.exponent * a.powf(term.exponent - 1.0);
        }
        acc * t.signum()
    }

    /// `(F(t), f(t))` sharing one logarithm.
    #[inline]
    pub fn eval_both(&self, t: f64) -> (f64, f64) {
        let a = t.abs();
        if a == 0.0 {
            return (0.0, 0.0);
        }
        let ln = a.ln();
        let mut big = 0.0;
        let mut small = 0.0;
        if self.b != 0.0 {
            let v = self.b * (self.p_lower * ln).exp();
            big += v;
            small += self.p_lower * v;
        }
        for term in &self.terms {
            let v = term.coef * (term.exponent * ln).exp();
            big += v;
            small += term.exponent * v;
        }
        (big, small / t)
    }

    /// Envelope constant with `|G(t)| ≤ C₀(|t|^{p_lower} + |t|^{p_upper})`.
    pub fn c_zero(&self) -> Result<f64> {
        self.c0.ok_or_else(|| {
            Error::InvalidNonlinearity(format!(
                "no envelope: every exponent must lie in ({}, {}]",
                self.p_lower, self.p_upper
            ))
        })
    }

    fn compute_c0(&self) -> Result<f64> {
        let mut c0 = 0.0;
        for term in &self.terms {
            c0 += term.coef.abs() * envelope_ratio_sup(term.exponent, self.p_lower, self.p_upper)?;
        }
        Ok(c0)
    }
}

/// `sup_{t>0} t^p / (t^{pl} + t^{pu})`, by golden-section search on `ln t`
/// over `[10⁻⁸, 10⁸]` with relative tolerance `10⁻¹⁰`.
pub fn envelope_ratio_sup(p: f64, pl: f64, pu: f64) -> Result<f64> {
    if !(p > pl && p <= pu) {
        return Err(Error::InvalidNonlinearity(format!(
            "exponent {p} outside ({pl}, {pu}]"
        )));
    }
    if p == pu {
        // Increasing in t with limit 1.
        return Ok(1.0);
    }
    let log_ratio = |s: f64| p * s - log_sum_exp(pl * s, pu * s);
    let (s, _) = golden_section_max(log_ratio, -8.0 * std::f64::consts::LN_10, 8.0 * std::f64::consts::LN_10, 1e-10);
    // One ulp-scale margin so the envelope holds for every sampled t.
    Ok(log_ratio(s).exp() * (1.0 + 4.0 * f64::EPSILON))
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let scale = (b - a).abs();
    for _ in 0..500 {
        if (b - a).abs() <= rel_tol * scale.max(c.abs() + d.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub satisfied: bool,
    pub offending_exponent: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub g1: ConditionCheck,
    pub g2: ConditionCheck,
    pub g3: ConditionCheck,
}

impl ValidationReport {
    pub fn all_satisfied(&self) -> bool {
        self.g1.satisfied && self.g2.satisfied && self.g3.satisfied
    }
}

/// Checks the growth conditions for the power family.
///
/// * G₁: every exponent in `[p_lower, p_upper]`.
/// * G₂: the smallest exponent lies below `1+(2+α)/N` (b = 0) or
///   `1+(4+α)/N` (b = 1) and carries a positive coefficient.
/// * G₃: every exponent strictly above `p_lower`.
///
/// Terms with zero coefficient are ignored.
pub fn validate(params: &ProblemParams, nl: &Nonlinearity) -> Result<ValidationReport> {
    params.check()?;
    let live: Vec<PowerTerm> = nl.terms.iter().copied().filter(|t| t.coef != 0.0).collect();
    if live.is_empty() && params.b == 0 {
        return Err(Error::InvalidNonlinearity("F is identically zero (b = 0, no terms)".into()));
    }
    let (pl, pu) = (params.p_lower(), params.p_upper());

    let g1_bad = live.iter().find(|t| t.exponent < pl || t.exponent > pu);
    let g1 = ConditionCheck {
        name: "G1",
        satisfied: g1_bad.is_none(),
        offending_exponent: g1_bad.map(|t| t.exponent),
        detail: match g1_bad {
            None => format!("all exponents in [{pl}, {pu}]"),
            Some(t) => format!("exponent {} outside [{pl}, {pu}]", t.exponent),
        },
    };

    let g3_bad = live.iter().find(|t| t.exponent <= pl);
    let g3 = ConditionCheck {
        name: "G3",
        satisfied: g3_bad.is_none(),
        offending_exponent: g3_bad.map(|t| t.exponent),
        detail: match g3_bad {
            None => format!("all exponents above {pl}"),
            Some(t) => format!("exponent {} does not exceed {pl}: G(t)/|t|^{pl} does not vanish at 0", t.exponent),
        },
    };

    let critical = if params.b == 0 { params.p_l2crit() } else { params.p_g2_lower_critical() };
    let g2 = match live.iter().map(|t| t.exponent).fold(None, |acc: Option<f64>, p| {
        Some(acc.map_or(p, |a| a.min(p)))
    }) {
        None => ConditionCheck {
            name: "G2",
            satisfied: false,
            offending_exponent: None,
            detail: "G is identically zero".into(),
        },
        Some(p_min) => {
            let coef: f64 = live.iter().filter(|t| t.exponent == p_min).map(|t| t.coef).sum();
            let ok = p_min < critical && coef > 0.0;
            ConditionCheck {
                name: "G2",
                satisfied: ok,
                offending_exponent: if ok { None } else { Some(p_min) },
                detail: if p_min >= critical {
                    format!("smallest exponent {p_min} is not below {critical}")
                } else if coef <= 0.0 {
                    format!("coefficient {coef} of smallest exponent {p_min} is not positive")
                } else {
                    format!("smallest exponent {p_min} < {critical} with coefficient {coef} > 0")
                },
            }
        }
    };
    Ok(ValidationReport { g1, g2, g3 })
}

/// Parses `"nu1*|t|^p1 + nu2*|t|^p2"`. Coefficients may be omitted (`|t|^2`,
/// `-|t|^2`); exponents may be decimals or fractions (`5/3`, `(8/3)`). The
/// literal `0` or an empty string gives no terms.
pub fn parse_terms(spec: &str) -> Result<Vec<PowerTerm>> {
    let s: String = spec.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() || s == "0" {
        return Ok(Vec::new());
    }
    let bad = |msg: &str| Error::InvalidNonlinearity(format!("cannot parse `{spec}`: {msg}"));

    // Split at top-level '+'/'-' that follow a complete term.
    let mut pieces = Vec::new();
    let mut start = 0;
    let bytes = s.as_bytes();
    let mut depth = 0i32;
    for (i, &ch) in bytes.iter().enumerate() {
        match ch {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b'+' | b'-' if depth == 0 && i > start => {
                let prev = bytes[i - 1];
                let in_exponent_sign = prev == b'^' || prev == b'e' || prev == b'E' || prev == b'*';
                if !in_exponent_sign {
                    pieces.push(&s[start..i]);
                    start = i;
                }
            }
            _ => {}
        }
    }
    pieces.push(&s[start..]);

    let mut terms = Vec::new();
    for piece in pieces {
        let (sign, body) = match piece.as_bytes().first() {
            Some(b'+') => (1.0, &piece[1..]),
            Some(b'-') => (-1.0, &piece[1..]),
            _ => (1.0, piece),
        };
        let pos = body.find("|t|").ok_or_else(|| bad("term without |t|"))?;
        let coef_str = body[..pos].trim_end_matches('*');
        let coef = if coef_str.is_empty() { 1.0 } else { parse_number(coef_str).ok_or_else(|| bad(coef_str))? };
        let rest = &body[pos + 3..];
        let exponent = if rest.is_empty() {
            1.0
        } else {
            let e = rest.strip_prefix('^').ok_or_else(|| bad("expected ^ after |t|"))?;
            let e = e.strip_prefix('(').and_then(|x| x.strip_suffix(')')).unwrap_or(e);
            parse_number(e).ok_or_else(|| bad(e))?
        };
        terms.push(PowerTerm { coef: sign * coef, exponent });
    }
    Ok(terms)
}

fn parse_number(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.parse().ok()?, b.parse().ok()?);
            (b != 0.0).then(|| a / b)
        }
        None => s.parse().ok(),
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}*|t|^{}", t.coef, t.exponent)?;
        }
        Ok(())
    }
}

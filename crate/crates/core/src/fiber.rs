//! Fiber map `φ(τ) = E(u_τ)` along the mass-preserving dilation, its local
//! maxima, and a sampled check of the one-maximum property.
//!
//! Two evaluators are provided. [`fiber_curve`] dilates the field on the grid
//! and evaluates the discrete energy, so it is limited to the τ range the box
//! can represent. [`FiberModel`] splits the energy into the kinetic term and the
//! power-pair moments `∫(I_α∗|u|^p)|u|^q`, each of which scales as an exact
//! power of τ, and is valid for every τ > 0.

use crate::energy::{dilate, energy, power_pair};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::problem::{Nonlinearity, ProblemParams};
use crate::riesz::RieszKernel;
use serde::Serialize;

/// Default sample count of [`default_taus`].
pub const DEFAULT_SAMPLES: usize = 200;
/// Default window of [`default_taus`].
pub const DEFAULT_WINDOW: (f64, f64) = (1e-2, 1e1);
/// Half-width of the central difference used for `φ'(1)`.
pub const SLOPE_STEP: f64 = 1e-3;
/// Step in `φ`, relative to the larger endpoint, treated as flat by the
/// maxima detector.
pub const PLATEAU_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiberCurve {
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
    pub kinetic: Vec<f64>,
    pub interaction: Vec<f64>,
    pub d_lower: Vec<Option<f64>>,
    pub resolved: Vec<bool>,
    pub detected_maxima: Vec<f64>,
    /// Central difference `(φ(1+η) - φ(1-η))/2η`, taken whether or not the
    /// two dilations pass the resolvability test.
    pub phi_at_1_slope: Option<f64>,
    /// `max φ - min φ` over resolved samples.
    pub variation: f64,
}

impl FiberCurve {
    fn assemble(
        taus: Vec<f64>,
        values: Vec<f64>,
        kinetic: Vec<f64>,
        interaction: Vec<f64>,
        d_lower: Vec<Option<f64>>,
        resolved: Vec<bool>,
        phi_at_1_slope: Option<f64>,
    ) -> Self {
        let kept: Vec<f64> = values.iter().zip(&resolved).filter(|(_, r)| **r).map(|(v, _)| *v).collect();
        let variation = if kept.is_empty() {
            0.0
        } else {
            kept.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - kept.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        let detected_maxima = local_maxima(&taus, &values, &resolved);
        Self { taus, values, kinetic, interaction, d_lower, resolved, detected_maxima, phi_at_1_slope, variation }
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// `|φ'(1)|` relative to the variation of `φ` over the window.
    pub fn relative_slope_at_1(&self) -> Option<f64> {
        self.phi_at_1_slope.map(|s| s.abs() / self.variation.max(f64::MIN_POSITIVE))
    }

    /// Iterator over resolved `(τ, φ)` samples.
    pub fn resolved_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.taus.iter().zip(&self.values).zip(&self.resolved).filter(|(_, r)| **r).map(|((t, v), _)| (*t, *v))
    }
}

/// `n` log-spaced points in `[lo, hi]`.
pub fn log_taus(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || n < 2 {
        return Err(Error::InvalidParameter(format!("tau window [{lo}, {hi}] with {n} points")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect())
}

pub fn default_taus() -> Vec<f64> {
    log_taus(DEFAULT_WINDOW.0, DEFAULT_WINDOW.1, DEFAULT_SAMPLES).expect("valid default window")
}

fn check_taus(taus: &[f64]) -> Result<()> {
    if taus.is_empty() {
        return Err(Error::InvalidParameter("empty tau list".into()));
    }
    if taus.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidParameter("tau values must be finite and > 0".into()));
    }
    if taus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("tau values must be strictly increasing".into()));
    }
    Ok(())
}

struct Sample {
    total: f64,
    kinetic: f64,
    interaction: f64,
    d_lower: Option<f64>,
    resolved: bool,
}

fn sample(params: &ProblemParams, nl: &Nonlinearity, kernel: &RieszKernel, u: &Field, tau: f64) -> Result<Sample> {
    let d = dilate(u, tau)?;
    let e = energy(params, nl, kernel, &d.field)?;
    Ok(Sample { total: e.total, kinetic: e.kinetic, interaction: e.interaction, d_lower: e.d_lower, resolved: d.resolved })
}

/// `φ(τ) = E(dilate(u, τ))` on the grid. Samples the box cannot represent are
/// kept but flagged and skipped by the maxima detector.
pub fn fiber_curve(
    params: &ProblemParams,
    nl: &Nonlinearity,
    kernel: &RieszKernel,
    u: &Field,
    taus: &[f64],
) -> Result<FiberCurve> {
    check_taus(taus)?;
    let run = |t: &f64| sample(params, nl, kernel, u, *t);
    #[cfg(feature = "parallel")]
    let samples: Vec<Result<Sample>> = {
        use rayon::prelude::*;
        taus.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let samples: Vec<Result<Sample>> = taus.iter().map(run).collect();
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;

    let lo = sample(params, nl, kernel, u, 1.0 - SLOPE_STEP)?;
    let hi = sample(params, nl, kernel, u, 1.0 + SLOPE_STEP)?;
    let slope = Some((hi.total - lo.total) / (2.0 * SLOPE_STEP));

    Ok(FiberCurve::assemble(
        taus.to_vec(),
        samples.iter().map(|s| s.total).collect(),
        samples.iter().map(|s| s.kinetic).collect(),
        samples.iter().map(|s| s.interaction).collect(),
        samples.iter().map(|s| s.d_lower).collect(),
        samples.iter().map(|s| s.resolved).collect(),
        slope,
    ))
}

/// [`fiber_curve`] on [`default_taus`].
pub fn fiber_curve_default(
    params: &ProblemParams,
    nl: &Nonlinearity,
    kernel: &RieszKernel,
    u: &Field,
) -> Result<FiberCurve> {
    fiber_curve(params, nl, kernel, u, &default_taus())
}

/// Indices of discrete local maxima over resolved samples. A run of flat
/// steps between a rise and a fall counts once, at its smallest τ.
fn local_maxima(taus: &[f64], values: &[f64], resolved: &[bool]) -> Vec<f64> {
    let pts: Vec<(f64, f64)> =
        taus.iter().zip(values).zip(resolved).filter(|(_, r)| **r).map(|((t, v), _)| (*t, *v)).collect();
    if pts.len() < 3 {
        return Vec::new();
    }
    let sign = |a: f64, b: f64| {
        let d = b - a;
        if d.abs() <= PLATEAU_TOL * a.abs().max(b.abs()) {
            0
        } else if d > 0.0 {
            1
        } else {
            -1
        }
    };
    let mut out = Vec::new();
    let mut rise_end: Option<usize> = None;
    for k in 0..pts.len() - 1 {
        match sign(pts[k].1, pts[k + 1].1) {
            1 => rise_end = Some(k + 1),
            -1 => {
                if let Some(i) = rise_end.take() {
                    out.push(pts[i].0);
                }
            }
            _ => {}
        }
    }
    out
}

/// Outcome of the sampled one-maximum check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct G4Report {
    pub n_maxima: usize,
    /// Every resolved slope after the maximum is negative. `None` when the
    /// window holds no maximum.
    pub decreasing_after_max: Option<bool>,
    /// The window is too short or too sparse to support the verdict.
    pub inconclusive: bool,
    pub reason: Option<String>,
}

impl G4Report {
    /// At most one maximum, and a fall after it when there is one.
    pub fn consistent(&self) -> bool {
        self.n_maxima <= 1 && self.decreasing_after_max != Some(false)
    }
}

/// Sampled diagnostic only: it inspects one curve, while the property it
/// probes concerns every field on the sphere.
pub fn g4_diagnose(curve: &FiberCurve) -> G4Report {
    let pts: Vec<(f64, f64)> = curve.resolved_points().collect();
    let n_maxima = curve.detected_maxima.len();
    if pts.len() < 5 {
        return G4Report {
            n_maxima,
            decreasing_after_max: None,
            inconclusive: true,
            reason: Some(format!("{} resolved samples", pts.len())),
        };
    }
    let (t_lo, t_hi) = (pts[0].0, pts[pts.len() - 1].0);
    let mut reason = None;
    for &tm in &curve.detected_maxima {
        if t_lo > tm / 10.0 || t_hi < tm * 10.0 {
            reason = Some(format!("window [{t_lo:.3e}, {t_hi:.3e}] does not cover a decade around the maximum at {tm:.3e}"));
            break;
        }
    }
    let decreasing_after_max = curve.detected_maxima.last().map(|&tm| {
        pts.windows(2).filter(|w| w[0].0 >= tm).all(|w| w[1].1 < w[0].1)
    });
    G4Report { n_maxima, decreasing_after_max, inconclusive: reason.is_some(), reason }
}

/// One term `c · τ^e · moment` of the interaction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModelPair {
    pub p: f64,
    pub q: f64,
    /// Product of coefficients, doubled for `p ≠ q`.
    pub weight: f64,
    pub exponent: f64,
    /// `∫(I_α∗|u|^p)|u|^q` at τ = 1.
    pub moment: f64,
}

/// Exact τ-dependence of the energy along the dilation orbit of a field.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiberModel {
    /// `½‖∇u‖₂²` at τ = 1.
    pub kinetic: f64,
    pub pairs: Vec<ModelPair>,
    /// `∫(I_α∗|u|^{(N+α)/N})|u|^{(N+α)/N}` when `b = 1`.
    pub d_lower: Option<f64>,
}

impl FiberModel {
    pub fn new(params: &ProblemParams, nl: &Nonlinearity, kernel: &RieszKernel, u: &Field) -> Result<Self> {
        let mut terms: Vec<(f64, f64)> = Vec::new();
        if nl.b() != 0.0 {
            terms.push((nl.b(), nl.p_lower()));
        }
        terms.extend(nl.terms().iter().filter(|t| t.coef != 0.0).map(|t| (t.coef, t.exponent)));
        let mut pairs = Vec::new();
        for i in 0..terms.len() {
            for j in i..terms.len() {
                let (ci, pi) = terms[i];
                let (cj, pj) = terms[j];
                pairs.push(ModelPair {
                    p: pi,
                    q: pj,
                    weight: if i == j { ci * cj } else { 2.0 * ci * cj },
                    exponent: params.dilation_exponent(pi, pj),
                    moment: power_pair(kernel, u, pi, pj)?,
                });
            }
        }
        let d_lower = (nl.b() != 0.0).then(|| pairs[0].moment);
        Ok(Self { kinetic: 0.5 * u.grad_norm_sq(), pairs, d_lower })
    }

    pub fn interaction(&self, tau: f64) -> f64 {
        0.5 * self.pairs.iter().map(|p| p.weight * p.moment * tau.powf(p.exponent)).sum::<f64>()
    }

    pub fn phi(&self, tau: f64) -> f64 {
        self.kinetic * tau * tau - self.interaction(tau)
    }

    /// `φ'(τ)` in closed form.
    pub fn slope(&self, tau: f64) -> f64 {
        2.0 * self.kinetic * tau
            - 0.5 * self.pairs.iter().map(|p| p.exponent * p.weight * p.moment * tau.powf(p.exponent - 1.0)).sum::<f64>()
    }

    /// τ-invariant part of `φ`: `-½ b² d_lower`, zero when `b = 0`.
    pub fn plateau(&self) -> f64 {
        -0.5 * self.d_lower.unwrap_or(0.0)
    }

    /// The model sampled at `taus`; every sample counts as resolved.
    pub fn curve(&self, taus: &[f64]) -> Result<FiberCurve> {
        check_taus(taus)?;
        Ok(FiberCurve::assemble(
            taus.to_vec(),
            taus.iter().map(|&t| self.phi(t)).collect(),
            taus.iter().map(|&t| self.kinetic * t * t).collect(),
            taus.iter().map(|&t| self.interaction(t)).collect(),
            taus.iter().map(|_| self.d_lower).collect(),
            vec![true; taus.len()],
            Some(self.slope(1.0)),
        ))
    }

    /// For a field with `‖∇u‖₂ > r1`: the curve over `τ ∈ (r0, r1)/‖∇u‖₂` stays
    /// above the plateau while `φ(1)` lies below it. `None` when `‖∇u‖₂ ≤ r1`.
    pub fn window_ordering(&self, r0: f64, r1: f64, samples: usize) -> Option<bool> {
        let g = (2.0 * self.kinetic).sqrt();
        if g <= r1 || samples < 2 {
            return None;
        }
        let plateau = self.plateau();
        let (a, b) = (r0 / g, r1 / g);
        let inside = (1..samples).all(|i| self.phi(a + (b - a) * i as f64 / samples as f64) > plateau);
        Some(inside && self.phi(1.0) < plateau)
    }
}

//! Explicit constants, the barrier `h(a,t)`, the mass threshold `ρ₀` and the
//! roots `R₀ < R₁` of `h(ρ,·)`.
//!
//! `S₁`, `S₂`, `S₃` have closed forms: the Aubin–Talenti profile is extremal
//! for the Sobolev quotient and its powers are extremal for the sharp HLS
//! inequality, so
//!
//! * `S₂ = (A_α C_α)^{-N/(N+α)}`,
//! * `S₃ = πN(N-2) (Γ(N/2)/Γ(N))^{2/N}`,
//! * `S₁ = S₃ (A_α C_α)^{-(N-2)/(N+α)}`.
//!
//! Grid trial estimates of the same quotients are provided alongside.

use crate::energy::power_pair;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::problem::{Nonlinearity, ProblemParams};
use crate::riesz::{riesz_constant, RieszKernel};
use crate::special::gamma;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// `C_α(N) = π^{(N-α)/2} Γ(α/2)/Γ((N+α)/2) {Γ(N/2)/Γ(N)}^{-α/N}`.
pub fn hls_sharp_constant(n: usize, alpha: f64) -> Result<f64> {
    let nf = n as f64;
    if n == 0 || !(alpha > 0.0 && alpha < nf) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, {n})")));
    }
    Ok(PI.powf(0.5 * (nf - alpha)) * gamma(0.5 * alpha) / gamma(0.5 * (nf + alpha))
        * (gamma(0.5 * nf) / gamma(nf)).powf(-alpha / nf))
}

pub fn s2_exact(n: usize, alpha: f64) -> Result<f64> {
    let ac = riesz_constant(n, alpha)? * hls_sharp_constant(n, alpha)?;
    Ok(ac.powf(-(n as f64) / (n as f64 + alpha)))
}

/// Best Sobolev constant `inf ‖∇u‖₂² / ‖u‖²_{2*}`.
pub fn s3_exact(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("N = {n} must be >= 3")));
    }
    let nf = n as f64;
    Ok(PI * nf * (nf - 2.0) * (gamma(0.5 * nf) / gamma(nf)).powf(2.0 / nf))
}

pub fn s1_exact(n: usize, alpha: f64) -> Result<f64> {
    let ac = riesz_constant(n, alpha)? * hls_sharp_constant(n, alpha)?;
    Ok(s3_exact(n)? * ac.powf(-(n as f64 - 2.0) / (n as f64 + alpha)))
}

/// A quotient evaluated on the grid at a trial profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrialEstimate {
    pub value: f64,
    pub delta: f64,
    /// Largest `|u|` on the box faces over `max |u|`.
    pub boundary_ratio: f64,
    /// `boundary_ratio <= 1e-6`.
    pub resolved: bool,
}

/// Boundary level above which a trial profile is reported unresolved.
pub const BOUNDARY_TOL: f64 = 1e-6;

fn boundary_ratio(u: &Field) -> f64 {
    let grid = u.grid();
    let dim = grid.dim();
    let mut idx = vec![0usize; dim];
    let mut edge = 0.0f64;
    for (l, &v) in u.values().iter().enumerate() {
        grid.unravel(l, &mut idx);
        if idx.iter().any(|&i| i == 0) {
            edge = edge.max(v.abs());
        }
    }
    // Index 0 is the face x = -L/2, which is also x = +L/2 periodically.
    let max = u.max_abs();
    if max == 0.0 {
        0.0
    } else {
        edge / max
    }
}

fn require_3d(grid: &Grid) -> Result<()> {
    if grid.dim() != 3 {
        return Err(Error::InvalidParameter(format!("trial quotients need a 3-D grid, got {}", grid.dim())));
    }
    Ok(())
}

/// `u(x) = (δ/(δ²+|x-y|²))^{3/2}` with `|x-y|` the periodic (minimum-image)
/// distance on the box.
pub fn s2_extremal(grid: &Grid, delta: f64, center: &[f64]) -> Field {
    let l = grid.box_len();
    Field::from_fn(grid, |x| {
        let r2: f64 = x
            .iter()
            .zip(center)
            .map(|(a, c)| {
                let d = (a - c) - l * ((a - c) / l).round();
                d * d
            })
            .sum();
        (delta / (delta * delta + r2)).powf(1.5)
    })
}

/// `‖u‖₂² / (∫(I_α∗|u|^{(3+α)/3})|u|^{(3+α)/3})^{3/(3+α)}` at the extremal
/// with parameter `δ` centred at `y`.
pub fn s2_quotient(kernel: &RieszKernel, delta: f64, center: &[f64]) -> Result<TrialEstimate> {
    require_3d(kernel.grid())?;
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be > 0")));
    }
    let alpha = kernel.alpha();
    let pl = (3.0 + alpha) / 3.0;
    let u = s2_extremal(kernel.grid(), delta, center);
    let d = power_pair(kernel, &u, pl, pl)?;
    let br = boundary_ratio(&u);
    Ok(TrialEstimate {
        value: u.norm_sq() / d.powf(3.0 / (3.0 + alpha)),
        delta,
        boundary_ratio: br,
        resolved: br <= BOUNDARY_TOL,
    })
}

/// `S₂` trial estimate at `δ = L/24`, centred.
///
/// The extremal decays like `|x|^{-3}`, so the box truncation enters as
/// `(δ/L)³` while the kernel quadrature error grows as `δ` shrinks; `L/24`
/// balances the two on the default grids.
pub fn estimate_s2(kernel: &RieszKernel) -> Result<TrialEstimate> {
    let delta = kernel.grid().box_len() / 24.0;
    s2_quotient(kernel, delta, &[0.0; 3])
}

/// Aubin–Talenti profile `(δ/(δ²+r²))^{1/2}` shifted down so that it vanishes
/// at `r = cutoff`, zero beyond.
pub fn talenti_trial(grid: &Grid, delta: f64, cutoff: f64) -> Field {
    let at = |r: f64| (delta / (delta * delta + r * r)).sqrt();
    let floor = at(cutoff);
    Field::radial(grid, &[0.0; 3], |r| if r < cutoff { at(r) - floor } else { 0.0 })
}

/// Sobolev quotient `‖∇u‖₂² / ‖u‖₆²` of [`talenti_trial`].
pub fn s3_quotient(grid: &Grid, delta: f64, cutoff: f64) -> Result<f64> {
    require_3d(grid)?;
    let u = talenti_trial(grid, delta, cutoff);
    let l6: f64 = grid.cell_volume() * u.values().iter().map(|v| v.powi(6)).sum::<f64>();
    Ok(u.grad_norm_sq() / l6.powf(1.0 / 3.0))
}

/// `‖∇u‖₂² / (∫(I_α∗|u|^{3+α})|u|^{3+α})^{1/(3+α)}` of [`talenti_trial`].
pub fn s1_quotient(kernel: &RieszKernel, delta: f64, cutoff: f64) -> Result<f64> {
    let grid = kernel.grid();
    require_3d(grid)?;
    let pu = 3.0 + kernel.alpha();
    let u = talenti_trial(grid, delta, cutoff);
    let d = power_pair(kernel, &u, pu, pu)?;
    Ok(u.grad_norm_sq() / d.powf(1.0 / pu))
}

/// Smallest `δ` used by the Talenti estimates, in units of the spacing.
pub const TALENTI_DELTA_CELLS: f64 = 1.6;

/// Richardson step for the `O(δ/R)` cutoff error: `2q(δ) - q(2δ)` with
/// `δ = 1.6h` and the cutoff on the inscribed sphere `R = L/2`.
fn richardson(q: impl Fn(f64) -> Result<f64>, grid: &Grid) -> Result<TrialEstimate> {
    let delta = TALENTI_DELTA_CELLS * grid.spacing();
    let value = 2.0 * q(delta)? - q(2.0 * delta)?;
    Ok(TrialEstimate { value, delta, boundary_ratio: 0.0, resolved: true })
}

pub fn estimate_s3(grid: &Grid) -> Result<TrialEstimate> {
    let rc = 0.5 * grid.box_len();
    richardson(|d| s3_quotient(grid, d, rc), grid)
}

pub fn estimate_s1(kernel: &RieszKernel) -> Result<TrialEstimate> {
    let rc = 0.5 * kernel.grid().box_len();
    richardson(|d| s1_quotient(kernel, d, rc), kernel.grid())
}

/// Inputs of the `C₁`, `C₂` formulas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConstantInputs {
    pub n: usize,
    pub alpha: f64,
    pub b: f64,
    pub c0: f64,
    pub a_alpha: f64,
    pub c_alpha: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

/// `C₁ = ½C₀(2b+C₀)S₂^{-(N+α)/N} + ½C₀(b+C₀)A_αC_α S₃^{-(N+α)/(2(N-2))}`,
/// `C₂ = ½C₀²S₁^{-(N+α)/(N-2)} + ½C₀(b+C₀)A_αC_α S₃^{-(N+α)/(2(N-2))}`.
pub fn c1_c2(k: &ConstantInputs) -> (f64, f64) {
    let n = k.n as f64;
    let (c0, b) = (k.c0, k.b);
    let mixed = 0.5 * c0 * (b + c0) * k.a_alpha * k.c_alpha * k.s3.powf(-0.5 * (n + k.alpha) / (n - 2.0));
    let c1 = 0.5 * c0 * (2.0 * b + c0) * k.s2.powf(-(n + k.alpha) / n) + mixed;
    let c2 = 0.5 * c0 * c0 * k.s1.powf(-(n + k.alpha) / (n - 2.0)) + mixed;
    (c1, c2)
}

/// Shape data of `h`: `h(a,t) = ½ - C₁ a^{e_a} t^{-2} - C₂ t^{γ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Barrier {
    pub n: usize,
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Barrier {
    pub fn new(params: &ProblemParams, c1: f64, c2: f64) -> Self {
        Self { n: params.n, alpha: params.alpha, c1, c2 }
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `2(N+α)/N`.
    pub fn mass_exponent(&self) -> f64 {
        2.0 * (self.nf() + self.alpha) / self.nf()
    }

    /// `2(N+α)/(N-2) - 2`.
    pub fn gamma(&self) -> f64 {
        2.0 * (self.nf() + self.alpha) / (self.nf() - 2.0) - 2.0
    }

    pub fn h(&self, a: f64, t: f64) -> f64 {
        0.5 - self.c1 * a.powf(self.mass_exponent()) / (t * t) - self.c2 * t.powf(self.gamma())
    }

    fn k(&self, a: f64) -> f64 {
        let n = self.nf();
        self.c1 * (n - 2.0) * a.powf(self.mass_exponent()) / (self.c2 * (2.0 + self.alpha))
    }

    /// Unique maximizer `t₀(a)`.
    pub fn t0(&self, a: f64) -> f64 {
        let n = self.nf();
        self.k(a).powf((n - 2.0) / (2.0 * (n + self.alpha)))
    }

    /// `½ - C₂ (N+α)/(N-2) k^{(2+α)/(N+α)}`.
    pub fn h_max(&self, a: f64) -> f64 {
        let n = self.nf();
        0.5 - self.c2 * (n + self.alpha) / (n - 2.0) * self.k(a).powf((2.0 + self.alpha) / (n + self.alpha))
    }

    fn check_positive(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(Error::Unconstrained(format!(
                "C1 = {}, C2 = {}: the threshold is infinite",
                self.c1, self.c2
            )));
        }
        Ok(())
    }

    /// Threshold by the explicit formula
    /// `ρ^{2(N+α)/N} = ((N-2)/(2C₂(N+α)))^{(N+α)/(2+α)} (C₂/C₁) (2+α)/(N-2)`.
    pub fn rho_zero_formula(&self) -> Result<f64> {
        self.check_positive()?;
        let n = self.nf();
        let a = self.alpha;
        let rhs = ((n - 2.0) / (2.0 * self.c2 * (n + a))).powf((n + a) / (2.0 + a)) * (self.c2 / self.c1)
            * ((2.0 + a) / (n - 2.0));
        Ok(rhs.powf(1.0 / self.mass_exponent()))
    }

    /// Threshold as the root of `ρ ↦ h(ρ, t₀(ρ))`, by bisection on `ln ρ`.
    pub fn rho_zero_maximizer(&self) -> Result<f64> {
        self.check_positive()?;
        let f = |ln_rho: f64| {
            let rho = ln_rho.exp();
            self.h(rho, self.t0(rho))
        };
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        while f(lo) <= 0.0 {
            lo -= 1.0;
            if lo < -700.0 {
                return Err(Error::NonFinite("no mass with a positive barrier maximum".into()));
            }
        }
        while f(hi) > 0.0 {
            hi += 1.0;
            if hi > 700.0 {
                return Err(Error::NonFinite("barrier maximum stays positive".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((0.5 * (lo + hi)).exp())
    }

    /// Both threshold computations.
    pub fn rho_zero(&self) -> Result<RhoZero> {
        let maximizer = self.rho_zero_maximizer()?;
        let formula = self.rho_zero_formula()?;
        let rel = (maximizer - formula).abs() / formula;
        Ok(RhoZero { value: maximizer, formula, relative_gap: rel, formula_consistent: rel <= RHO_ZERO_TOL })
    }

    /// `R₀ < t₀ < R₁` with `h(ρ,R₀) = h(ρ,R₁) = 0`.
    pub fn roots(&self, rho: f64) -> Result<(f64, f64)> {
        self.check_positive()?;
        let t0 = self.t0(rho);
        if !(self.h(rho, t0) > 0.0) {
            let rho0 = self.rho_zero_maximizer()?;
            return Err(Error::NoPositiveWindow { rho, rho0 });
        }
        let hf = |t: f64| self.h(rho, t);
        let mut lo = t0;
        while hf(lo) > 0.0 {
            lo *= 0.5;
        }
        let mut hi = t0;
        while hf(hi) > 0.0 {
            hi *= 2.0;
        }
        Ok((bisect(&hf, lo, t0), bisect(&hf, hi, t0)))
    }
}

/// Relative tolerance for agreement of the two threshold computations.
pub const RHO_ZERO_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RhoZero {
    /// Root of the barrier maximum.
    pub value: f64,
    /// Explicit formula.
    pub formula: f64,
    pub relative_gap: f64,
    pub formula_consistent: bool,
}

/// Root of `f` between `neg` (`f < 0`) and `pos` (`f > 0`), in either order.
fn bisect(f: &impl Fn(f64) -> f64, neg: f64, pos: f64) -> f64 {
    let (mut a, mut b) = (neg, pos);
    for _ in 0..400 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        if f(mid) > 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    // Return whichever end is closer to zero.
    if f(a).abs() <= f(b).abs() {
        a
    } else {
        b
    }
}

/// Where `S₁`, `S₂`, `S₃` feeding `C₁`, `C₂` come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantSource {
    #[default]
    Exact,
    Trial,
}

pub const EXACT: &str = "exact-formula";
pub const TRIAL: &str = "trial-estimate";

/// All constants of the lower bound and threshold, with provenance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdBundle {
    pub n: usize,
    pub alpha: f64,
    pub b: u8,
    pub a_alpha: f64,
    pub c_alpha: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s1_trial: Option<f64>,
    pub s2_trial: Option<f64>,
    pub s3_trial: Option<f64>,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// Absent when `C₁` or `C₂` vanishes.
    pub rho0: Option<f64>,
    pub rho0_formula: Option<f64>,
    pub rho0_formula_consistent: Option<bool>,
    pub rho: f64,
    pub t0: Option<f64>,
    pub hmax: Option<f64>,
    pub r0: Option<f64>,
    pub r1: Option<f64>,
    pub provenance: BTreeMap<String, String>,
}

impl ThresholdBundle {
    /// Bundle from closed-form constants; trial estimates are attached when a
    /// kernel is supplied, and used for `C₁`, `C₂` when `source` is `Trial`.
    pub fn compute(
        params: &ProblemParams,
        nl: &Nonlinearity,
        kernel: Option<&RieszKernel>,
        source: ConstantSource,
    ) -> Result<Self> {
        params.check()?;
        let (n, alpha) = (params.n, params.alpha);
        let a_alpha = riesz_constant(n, alpha)?;
        let c_alpha = hls_sharp_constant(n, alpha)?;
        let (mut s1, mut s2, mut s3) = (s1_exact(n, alpha)?, s2_exact(n, alpha)?, s3_exact(n)?);
        let mut provenance = BTreeMap::new();
        for key in ["a_alpha", "c_alpha", "s1", "s2", "s3", "c0", "c1", "c2", "rho0", "t0", "hmax", "r0", "r1"] {
            provenance.insert(key.to_string(), EXACT.to_string());
        }
        let (mut s1_trial, mut s2_trial, mut s3_trial) = (None, None, None);
        if let Some(k) = kernel {
            if k.alpha() != alpha {
                return Err(Error::InvalidParameter("kernel alpha differs from problem alpha".into()));
            }
            s1_trial = Some(estimate_s1(k)?.value);
            s2_trial = Some(estimate_s2(k)?.value);
            s3_trial = Some(estimate_s3(k.grid())?.value);
            for key in ["s1_trial", "s2_trial", "s3_trial"] {
                provenance.insert(key.to_string(), TRIAL.to_string());
            }
        }
        if source == ConstantSource::Trial {
            match (s1_trial, s2_trial, s3_trial) {
                (Some(a), Some(b), Some(c)) => {
                    (s1, s2, s3) = (a, b, c);
                    for key in ["s1", "s2", "s3", "c1", "c2", "rho0", "t0", "hmax", "r0", "r1"] {
                        provenance.insert(key.to_string(), TRIAL.to_string());
                    }
                }
                _ => return Err(Error::InvalidParameter("trial constants need a kernel".into())),
            }
        }
        let c0 = nl.c_zero()?;
        let inputs = ConstantInputs { n, alpha, b: params.bf(), c0, a_alpha, c_alpha, s1, s2, s3 };
        let (c1, c2) = c1_c2(&inputs);
        let barrier = Barrier::new(params, c1, c2);
        let mut bundle = Self {
            n,
            alpha,
            b: params.b,
            a_alpha,
            c_alpha,
            s1,
            s2,
            s3,
            s1_trial,
            s2_trial,
            s3_trial,
            c0,
            c1,
            c2,
            rho0: None,
            rho0_formula: None,
            rho0_formula_consistent: None,
            rho: params.rho,
            t0: None,
            hmax: None,
            r0: None,
            r1: None,
            provenance,
        };
        if c1 > 0.0 && c2 > 0.0 {
            let rz = barrier.rho_zero()?;
            bundle.rho0 = Some(rz.value);
            bundle.rho0_formula = Some(rz.formula);
            bundle.rho0_formula_consistent = Some(rz.formula_consistent);
            bundle.t0 = Some(barrier.t0(params.rho));
            bundle.hmax = Some(barrier.h_max(params.rho));
            if let Ok((r0, r1)) = barrier.roots(params.rho) {
                bundle.r0 = Some(r0);
                bundle.r1 = Some(r1);
            }
        }
        Ok(bundle)
    }

    pub fn barrier(&self) -> Barrier {
        Barrier { n: self.n, alpha: self.alpha, c1: self.c1, c2: self.c2 }
    }

    /// `-½ b² S₂^{-(N+α)/N} a^{2(N+α)/N}`.
    pub fn lower_critical_level(&self, a: f64) -> f64 {
        let n = self.n as f64;
        let b = self.b as f64;
        -0.5 * b * b * self.s2.powf(-(n + self.alpha) / n) * a.powf(2.0 * (n + self.alpha) / n)
    }
}

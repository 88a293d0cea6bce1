//! Local minimization of `E` on `{‖u‖₂ = a, ‖∇u‖₂ ≤ R}` by a mass-projected,
//! preconditioned gradient flow with multistart.
//!
//! Each iteration takes `d = Pg - (⟨u,Pg⟩/⟨u,Pu⟩) Pu` with `g = ∇E(u)` and
//! `P = (-Δ + c)^{-1}`, `c = ‖∇u‖²/‖u‖²`, steps `u - s d`, rescales to mass
//! `a`, and if `‖∇u‖₂` exceeds the cap retracts by the dilation `u_τ`.
//! Steps are accepted only when the energy does not increase.

use crate::energy::{dilate, evaluate, stationarity, Evaluation, Stationarity};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::problem::{validate, Nonlinearity, ProblemParams};
use crate::riesz::RieszKernel;
use crate::thresholds::ThresholdBundle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub step0: f64,
    /// Stop when `‖∇E + λu‖₂/‖u‖₂` falls below `tol_grad (‖∇u‖²/‖u‖² + |λ|)`.
    pub tol_grad: f64,
    pub n_starts: usize,
    pub seed: u64,
    /// Cap on `‖∇u‖₂`; `None` uses `R₀` from the bundle.
    pub r_cap: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_iters: 4000, step0: 0.5, tol_grad: 1e-7, n_starts: 5, seed: 0, r_cap: None }
    }
}

impl SolveOptions {
    pub fn check(&self) -> Result<()> {
        if self.max_iters < 1 || !(self.step0 > 0.0) || !(self.tol_grad > 0.0) || self.n_starts < 1 {
            return Err(Error::InvalidParameter(format!(
                "solver options need max_iters >= 1, step0 > 0, tol_grad > 0, n_starts >= 1: {self:?}"
            )));
        }
        if let Some(r) = self.r_cap {
            if !(r > 0.0) {
                return Err(Error::InvalidParameter(format!("r_cap = {r} must be > 0")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    /// Mass-scaled lower-critical extremal `(δ/(δ²+|x|²))^{3/2}`.
    Extremal,
    Gaussian,
    Exponential,
    /// Low-pass filtered noise under a Gaussian envelope.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StartSummary {
    pub index: usize,
    pub kind: StartKind,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Relative stopping quantity at exit.
    pub rel_residual: f64,
    pub failure: Option<String>,
}

/// Checks that certify a converged run in the theory's regime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CertifiedChecks {
    pub lambda_positive: bool,
    pub pohozaev_small: bool,
    pub nehari_pohozaev_small: bool,
    /// `boundary_margin > 0.05 r_cap`.
    pub interior: bool,
    /// `E(u) < -½ b² S₂^{-(N+α)/N} ρ^{2(N+α)/N}`.
    pub below_lower_critical_level: bool,
    /// Nehari and Pohozaev multipliers agree to `10⁻³` relative.
    pub multipliers_agree: bool,
    pub all: bool,
}

/// Residual level for the identity checks.
pub const IDENTITY_TOL: f64 = 1e-3;

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub u_star: Field,
    pub rho: f64,
    pub r_cap: Option<f64>,
    pub energy: crate::energy::EnergyBreakdown,
    pub lambda: f64,
    pub lambda_pohozaev: f64,
    pub grad_residual: f64,
    pub pohozaev: f64,
    pub nehari_pohozaev: f64,
    pub mass_final: f64,
    pub grad_norm_final: f64,
    /// `r_cap - ‖∇u‖₂`, absent without a cap.
    pub boundary_margin: Option<f64>,
    /// Best energy over all starts.
    pub m_estimate: f64,
    pub lower_critical_level: f64,
    pub iterations: usize,
    pub converged: bool,
    pub best_start: usize,
    /// `ρ ≥ ρ₀`, no threshold, or growth conditions not met.
    pub outside_theory: bool,
    pub outside_theory_reasons: Vec<String>,
    pub checks: CertifiedChecks,
    pub starts: Vec<StartSummary>,
}

impl SolveReport {
    pub fn certified(&self) -> bool {
        self.converged && self.checks.all
    }
}

struct StartOutcome {
    summary: StartSummary,
    u: Option<Field>,
}

/// Runs the flow from every start at mass `params.rho` and certifies the best.
pub fn solve(
    params: &ProblemParams,
    nl: &Nonlinearity,
    kernel: &RieszKernel,
    bundle: &ThresholdBundle,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    opts.check()?;
    params.check()?;
    if params.n != 3 || params.alpha != kernel.alpha() {
        return Err(Error::InvalidParameter("solver needs N = 3 and a kernel with the problem's alpha".into()));
    }
    let r_cap = opts.r_cap.or(bundle.r0);
    let rho = params.rho;
    let outcomes = run_starts(params, nl, kernel, rho, r_cap, opts);

    let best = outcomes
        .iter()
        .filter(|o| o.u.is_some())
        .min_by(|a, b| {
            // Converged starts first, then lowest energy, then lowest index.
            (!a.summary.converged, a.summary.energy, a.summary.index)
                .partial_cmp(&(!b.summary.converged, b.summary.energy, b.summary.index))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .ok_or_else(|| Error::NonFinite("every start failed".into()))?;
    let u = best.u.clone().expect("filtered");
    let st = stationarity(params, nl, kernel, &u)?;
    let m_est = outcomes
        .iter()
        .filter(|o| o.u.is_some())
        .map(|o| o.summary.energy)
        .fold(f64::INFINITY, f64::min);

    let mut reasons = Vec::new();
    match bundle.rho0 {
        None => reasons.push("no finite threshold rho0".to_string()),
        Some(r0) if rho >= r0 => reasons.push(format!("rho = {rho} >= rho0 = {r0}")),
        _ => {}
    }
    let report = validate(params, nl)?;
    for c in [&report.g1, &report.g2, &report.g3] {
        if !c.satisfied {
            reasons.push(format!("{} fails: {}", c.name, c.detail));
        }
    }
    let level = bundle.lower_critical_level(rho);
    let checks = certify(&st, r_cap, level);
    Ok(SolveReport {
        u_star: u,
        rho,
        r_cap,
        energy: st.energy,
        lambda: st.lambda,
        lambda_pohozaev: st.lambda_pohozaev,
        grad_residual: st.grad_residual,
        pohozaev: st.pohozaev,
        nehari_pohozaev: st.nehari_pohozaev,
        mass_final: st.mass,
        grad_norm_final: st.grad_norm,
        boundary_margin: r_cap.map(|r| r - st.grad_norm),
        m_estimate: m_est,
        lower_critical_level: level,
        iterations: best.summary.iterations,
        converged: best.summary.converged,
        best_start: best.summary.index,
        outside_theory: !reasons.is_empty(),
        outside_theory_reasons: reasons,
        checks,
        starts: outcomes.into_iter().map(|o| o.summary).collect(),
    })
}

/// Certification checks for a stationarity evaluation against a cap and the
/// lower-critical level.
pub fn certify(st: &Stationarity, r_cap: Option<f64>, level: f64) -> CertifiedChecks {
    let lambda_positive = st.lambda > 0.0;
    let pohozaev_small = st.pohozaev < IDENTITY_TOL;
    let nehari_pohozaev_small = st.nehari_pohozaev < IDENTITY_TOL;
    let interior = match r_cap {
        Some(r) => r - st.grad_norm > 0.05 * r,
        None => false,
    };
    let below_lower_critical_level = st.energy.total < level;
    let multipliers_agree = (st.lambda - st.lambda_pohozaev).abs() <= IDENTITY_TOL * st.lambda.abs();
    CertifiedChecks {
        lambda_positive,
        pohozaev_small,
        nehari_pohozaev_small,
        interior,
        below_lower_critical_level,
        multipliers_agree,
        all: lambda_positive
            && pohozaev_small
            && nehari_pohozaev_small
            && interior
            && below_lower_critical_level
            && multipliers_agree,
    }
}

/// `m_{R₀}(a)`: best energy at mass `a` with the cap fixed at the bundle's
/// `R₀` (computed at the bundle's reference mass) unless `opts.r_cap` is set.
pub fn m_estimate(
    params: &ProblemParams,
    nl: &Nonlinearity,
    kernel: &RieszKernel,
    bundle: &ThresholdBundle,
    a: f64,
    opts: &SolveOptions,
) -> Result<MEstimate> {
    opts.check()?;
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("mass a = {a} must be > 0")));
    }
    let r_cap = opts.r_cap.or(bundle.r0);
    let outcomes = run_starts(params, nl, kernel, a, r_cap, opts);
    let best = outcomes.iter().filter(|o| o.u.is_some()).map(|o| o.summary.energy).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::NonFinite("every start failed".into()));
    }
    let converged = outcomes
        .iter()
        .any(|o| o.summary.converged && o.summary.energy <= best + M_ESTIMATE_AGREE * best.abs());
    Ok(MEstimate { a, value: best, converged, starts: outcomes.into_iter().map(|o| o.summary).collect() })
}

/// Relative energy gap within which a converged start vouches for the best value.
pub const M_ESTIMATE_AGREE: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct MEstimate {
    pub a: f64,
    pub value: f64,
    /// Whether a converged start reaches `value` to [`M_ESTIMATE_AGREE`].
    pub converged: bool,
    pub starts: Vec<StartSummary>,
}

fn run_starts(
    params: &ProblemParams,
    nl: &Nonlinearity,
    kernel: &RieszKernel,
    mass: f64,
    r_cap: Option<f64>,
    opts: &SolveOptions,
) -> Vec<StartOutcome> {
    let run = |i: usize| {
        let kind = start_kind(i);
        match initial_field(kernel.grid(), kind, i, opts.seed, mass, r_cap) {
            Ok(u0) => flow(params, nl, kernel, u0, mass, r_cap, opts, i, kind),
            Err(e) => failed(i, kind, e),
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..opts.n_starts).into_par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..opts.n_starts).map(run).collect()
    }
}

fn failed(index: usize, kind: StartKind, e: Error) -> StartOutcome {
    StartOutcome {
        summary: StartSummary {
            index,
            kind,
            energy: f64::NAN,
            iterations: 0,
            converged: false,
            rel_residual: f64::NAN,
            failure: Some(e.to_string()),
        },
        u: None,
    }
}

pub fn start_kind(index: usize) -> StartKind {
    match index {
        0 => StartKind::Extremal,
        1 => StartKind::Gaussian,
        2 => StartKind::Exponential,
        _ => StartKind::Random,
    }
}

/// Start `index` at mass `mass`, sized so that `‖∇u‖₂ ≈ r_cap/2` when the
/// resulting width lies in `[2h, L/10]`.
pub fn initial_field(
    grid: &Grid,
    kind: StartKind,
    index: usize,
    seed: u64,
    mass: f64,
    r_cap: Option<f64>,
) -> Result<Field> {
    // On very coarse grids 2h can exceed L/10; the resolution bound wins.
    let lo = 2.0 * grid.spacing();
    let hi = (grid.box_len() / 10.0).max(lo);
    // `‖∇u‖₂/‖u‖₂ = κ/width` for each profile family.
    let width = |kappa: f64| match r_cap {
        Some(r) => (kappa * mass / (0.5 * r)).clamp(lo, hi),
        None => hi,
    };
    let u = match kind {
        StartKind::Extremal => {
            let d = width((27.0f64 / 16.0).sqrt());
            crate::thresholds::s2_extremal(grid, d, &[0.0; 3])
        }
        StartKind::Gaussian => {
            let s = width(1.5f64.sqrt());
            Field::radial(grid, &[0.0; 3], |r| (-0.5 * r * r / (s * s)).exp())
        }
        StartKind::Exponential => {
            let s = width(1.0);
            Field::radial(grid, &[0.0; 3], |r| (-r / s).exp())
        }
        StartKind::Random => {
            let s = width(1.5f64.sqrt());
            random_smooth(grid, seed, index, s)
        }
    };
    u.rescale_mass(mass)
}

fn random_smooth(grid: &Grid, seed: u64, index: usize, width: f64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let noise: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let noise = Field::from_vec_unchecked(grid, noise);
    let mut spec = noise.to_spectrum();
    let s2 = width * width;
    for (z, k2) in spec.iter_mut().zip(grid.k_squared()) {
        *z *= (-0.5 * k2 * s2).exp();
    }
    let smooth = Field::from_spectrum(grid, spec);
    let amp = smooth.max_abs().max(f64::MIN_POSITIVE);
    let shift = [rng.gen_range(-0.5..0.5) * width, rng.gen_range(-0.5..0.5) * width, rng.gen_range(-0.5..0.5) * width];
    let env = Field::radial(grid, &shift, |r| (-0.5 * r * r / s2).exp());
    let values = env.values().iter().zip(smooth.values()).map(|(e, n)| e * (1.0 + 0.5 * n / amp)).collect();
    Field::from_vec_unchecked(grid, values)
}

/// Mass-exact retraction into `‖∇u‖₂ ≤ r_cap`.
fn retract(u: Field, mass: f64, r_cap: Option<f64>) -> Result<Field> {
    let mut u = u.rescale_mass(mass)?;
    let Some(r) = r_cap else { return Ok(u) };
    // Discrete dilation scales `‖∇u‖₂` by `τ` only up to interpolation and
    // edge losses, so repeat until the cap holds.
    for _ in 0..RETRACT_ROUNDS {
        let gn = u.grad_norm_sq().sqrt();
        if gn <= r {
            return Ok(u);
        }
        u = dilate(&u, r * (1.0 - 1e-3) / gn)?.field.rescale_mass(mass)?;
    }
    if u.grad_norm_sq().sqrt() <= r {
        Ok(u)
    } else {
        Err(Error::InvalidParameter(format!("cannot retract into ||grad u|| <= {r} on this grid")))
    }
}

const RETRACT_ROUNDS: usize = 8;

/// `(λ, ‖∇E+λu‖/‖u‖, relative stopping quantity)`.
fn residuals(ev: &Evaluation, u: &Field, mass2: f64) -> (f64, f64, f64) {
    let g = ev.gradient.as_ref().expect("gradient requested");
    let kin2 = 2.0 * ev.breakdown.kinetic;
    let lambda = (ev.vfu - kin2) / mass2;
    let r: f64 = g.values().iter().zip(u.values()).map(|(a, b)| (a + lambda * b) * (a + lambda * b)).sum::<f64>();
    let res = (u.grid().cell_volume() * r / mass2).sqrt();
    let scale = kin2 / mass2 + lambda.abs();
    (lambda, res, if scale > 0.0 { res / scale } else { res })
}

fn direction(u: &Field, g: &Field, c: f64) -> Field {
    let grid = u.grid();
    let uh = u.to_spectrum();
    let gh = g.to_spectrum();
    let k2 = grid.k_squared();
    let mut pg = Vec::with_capacity(gh.len());
    let mut pu = Vec::with_capacity(uh.len());
    let (mut upg, mut upu) = (0.0, 0.0);
    for ((a, b), k) in uh.iter().zip(&gh).zip(k2) {
        let w = 1.0 / (k + c);
        let (x, y) = (b * w, a * w);
        upg += (a.conj() * x).re;
        upu += (a.conj() * y).re;
        pg.push(x);
        pu.push(y);
    }
    let coef = upg / upu;
    let d: Vec<Complex64> = pg.iter().zip(&pu).map(|(x, y)| x - coef * y).collect();
    Field::from_spectrum(grid, d)
}

#[allow(clippy::too_many_arguments)]
fn flow(
    params: &ProblemParams,
    nl: &Nonlinearity,
    kernel: &RieszKernel,
    u0: Field,
    mass: f64,
    r_cap: Option<f64>,
    opts: &SolveOptions,
    index: usize,
    kind: StartKind,
) -> StartOutcome {
    match flow_inner(params, nl, kernel, u0, mass, r_cap, opts, index, kind, None) {
        Ok(o) => o,
        Err(e) => failed(index, kind, e),
    }
}

const STALL_LIMIT: usize = 25;

#[allow(clippy::too_many_arguments)]
fn flow_inner(
    _params: &ProblemParams,
    nl: &Nonlinearity,
    kernel: &RieszKernel,
    u0: Field,
    mass: f64,
    r_cap: Option<f64>,
    opts: &SolveOptions,
    index: usize,
    kind: StartKind,
    mut trace: Option<&mut Vec<TracePoint>>,
) -> Result<StartOutcome> {
    let mass2 = mass * mass;
    let mut u = retract(u0, mass, r_cap)?;
    let mut ev = evaluate(nl, kernel, &u, true, false)?;
    let mut record = |ev: &Evaluation, u: &Field| {
        if let Some(t) = trace.as_deref_mut() {
            t.push(TracePoint { energy: ev.breakdown.total, mass: u.mass(), grad_norm: (2.0 * ev.breakdown.kinetic).sqrt() });
        }
    };
    record(&ev, &u);
    let mut step = opts.step0;
    let mut iterations = 0;
    let mut converged = false;
    let mut rel = f64::INFINITY;
    let mut failure = None;
    let mut stalled = 0;
    while iterations < opts.max_iters {
        let (_, _, r) = residuals(&ev, &u, mass2);
        rel = r;
        if rel < opts.tol_grad {
            converged = true;
            break;
        }
        let c = 2.0 * ev.breakdown.kinetic / mass2;
        let d = direction(&u, ev.gradient.as_ref().expect("requested"), c.max(1e-12));
        loop {
            let trial = retract(u.add_scaled(-step, &d), mass, r_cap)?;
            let tev = evaluate(nl, kernel, &trial, true, false)?;
            if tev.breakdown.total <= ev.breakdown.total {
                stalled = if tev.breakdown.total < ev.breakdown.total { 0 } else { stalled + 1 };
                u = trial;
                ev = tev;
                record(&ev, &u);
                step *= 1.1;
                break;
            }
            step *= 0.5;
            if step < 1e-12 * opts.step0 {
                failure = Some("step underflow before reaching tolerance".to_string());
                break;
            }
        }
        iterations += 1;
        if stalled >= STALL_LIMIT {
            failure = Some("energy stalled at round-off before reaching tolerance".to_string());
        }
        if failure.is_some() {
            break;
        }
    }
    if !converged {
        let (_, _, r) = residuals(&ev, &u, mass2);
        rel = r;
        converged = rel < opts.tol_grad;
    }
    Ok(StartOutcome {
        summary: StartSummary {
            index,
            kind,
            energy: ev.breakdown.total,
            iterations,
            converged,
            rel_residual: rel,
            failure: if converged { None } else { failure.or_else(|| Some("max_iters reached".into())) },
        },
        u: Some(u),
    })
}

/// One accepted iterate: energy, mass, `‖∇u‖₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub energy: f64,
    pub mass: f64,
    pub grad_norm: f64,
}

/// Runs the flow from `u0` and records every accepted iterate.
pub fn energy_trace(
    params: &ProblemParams,
    nl: &Nonlinearity,
    kernel: &RieszKernel,
    u0: Field,
    mass: f64,
    r_cap: Option<f64>,
    opts: &SolveOptions,
) -> Result<Vec<TracePoint>> {
    let mut trace = Vec::new();
    flow_inner(params, nl, kernel, u0, mass, r_cap, opts, 0, StartKind::Gaussian, Some(&mut trace))?;
    Ok(trace)
}

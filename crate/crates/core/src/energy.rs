//! Energy functional, its `L²` gradient, the Lagrange multiplier, the
//! Pohozaev and Nehari–Pohozaev residuals, and the dilation `u_τ`.
//!
//! `E(u) = ½‖∇u‖₂² - ½∫(I_α ∗ F(u)) F(u) dx` with every integral taken by the
//! rectangle rule of the grid, so the gradient below is the exact gradient of
//! the discrete functional.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::problem::{Nonlinearity, ProblemParams};
use crate::riesz::RieszKernel;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    /// `½‖∇u‖₂²`.
    pub kinetic: f64,
    /// `½∫(I_α∗F(u))F(u)`.
    pub interaction: f64,
    /// `kinetic - interaction`.
    pub total: f64,
    /// `∫(I_α∗|u|^{(N+α)/N})|u|^{(N+α)/N}`, present when `b = 1`.
    pub d_lower: Option<f64>,
}

fn check_setup(params: &ProblemParams, kernel: &RieszKernel, u: &Field) -> Result<()> {
    if params.n != 3 {
        return Err(Error::InvalidParameter(format!("N = {} unsupported on the grid path", params.n)));
    }
    if params.alpha != kernel.alpha() {
        return Err(Error::InvalidParameter(format!(
            "kernel alpha {} differs from problem alpha {}",
            kernel.alpha(),
            params.alpha
        )));
    }
    kernel.grid().ensure_same(u.grid())
}

/// Names the first term of `F` that overflows at `t`.
fn offending_term(nl: &Nonlinearity, t: f64) -> String {
    let a = t.abs();
    if !t.is_finite() {
        return format!("u = {t}");
    }
    if nl.b() != 0.0 && !(nl.b() * a.powf(nl.p_lower())).is_finite() {
        return format!("b|u|^{} at u = {t}", nl.p_lower());
    }
    for term in nl.terms() {
        if term.coef != 0.0 && !(term.coef * a.powf(term.exponent)).is_finite() {
            return format!("{}*|u|^{} at u = {t}", term.coef, term.exponent);
        }
    }
    format!("F(u) at u = {t}")
}

/// `F(u)` and `f(u)` pointwise.
fn nonlinear_fields(nl: &Nonlinearity, u: &Field) -> Result<(Field, Field)> {
    let grid = u.grid();
    let mut big = Vec::with_capacity(grid.len());
    let mut small = Vec::with_capacity(grid.len());
    for &t in u.values() {
        let (fb, fs) = nl.eval_both(t);
        if !(fb.is_finite() && fs.is_finite()) {
            return Err(Error::NonFinite(offending_term(nl, t)));
        }
        big.push(fb);
        small.push(fs);
    }
    Ok((Field::from_vec_unchecked(grid, big), Field::from_vec_unchecked(grid, small)))
}

fn finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// `∫(I_α∗|u|^p)|u|^q`.
pub fn power_pair(kernel: &RieszKernel, u: &Field, p: f64, q: f64) -> Result<f64> {
    let up = u.map(|t| t.abs().powf(p));
    let v = kernel.convolve(&up)?;
    let s = if p == q { v.inner(&up) } else { v.inner(&u.map(|t| t.abs().powf(q))) };
    finite(s, "power-pair interaction")
}

/// Energy and, optionally, its gradient from one convolution.
pub(crate) struct Evaluation {
    pub breakdown: EnergyBreakdown,
    pub gradient: Option<Field>,
    /// `∫V f(u) u`, `V = I_α∗F(u)`.
    pub vfu: f64,
}

pub(crate) fn evaluate(
    nl: &Nonlinearity,
    kernel: &RieszKernel,
    u: &Field,
    want_gradient: bool,
    want_d_lower: bool,
) -> Result<Evaluation> {
    let (fbig, fsmall) = nonlinear_fields(nl, u)?;
    let mut spec = u.to_spectrum();
    let grid = u.grid();
    let k2 = grid.k_squared();
    let ksum: f64 = spec.iter().zip(k2).map(|(z, k)| k * z.norm_sqr()).sum();
    let kinetic = 0.5 * grid.cell_volume() * ksum / grid.len() as f64;
    let v = kernel.convolve_unchecked(&fbig);
    let interaction = finite(0.5 * v.inner(&fbig), "interaction integral")?;
    let vf: Vec<f64> = v.values().iter().zip(fsmall.values()).map(|(a, b)| a * b).collect();
    let vfu: f64 = grid.cell_volume() * vf.iter().zip(u.values()).map(|(a, b)| a * b).sum::<f64>();
    let gradient = if want_gradient {
        for (z, k) in spec.iter_mut().zip(k2) {
            *z *= *k;
        }
        let lap = Field::from_spectrum(grid, spec);
        let g: Vec<f64> = lap.values().iter().zip(&vf).map(|(a, b)| a - b).collect();
        Some(Field::from_vec_unchecked(grid, g))
    } else {
        None
    };
    let d_lower = if want_d_lower && nl.b() != 0.0 {
        let pl = nl.p_lower();
        Some(power_pair(kernel, u, pl, pl)?)
    } else {
        None
    };
    Ok(Evaluation {
        breakdown: EnergyBreakdown { kinetic, interaction, total: kinetic - interaction, d_lower },
        gradient,
        vfu,
    })
}

pub fn energy(params: &ProblemParams, nl: &Nonlinearity, kernel: &RieszKernel, u: &Field) -> Result<EnergyBreakdown> {
    check_setup(params, kernel, u)?;
    Ok(evaluate(nl, kernel, u, false, params.b == 1)?.breakdown)
}

/// `∇E(u) = -Δu - (I_α∗F(u)) f(u)`.
pub fn l2_gradient(params: &ProblemParams, nl: &Nonlinearity, kernel: &RieszKernel, u: &Field) -> Result<Field> {
    check_setup(params, kernel, u)?;
    Ok(evaluate(nl, kernel, u, true, false)?.gradient.expect("requested"))
}

/// `λ = [∫(I_α∗F(u)) f(u) u - ‖∇u‖₂²] / ‖u‖₂²`.
pub fn lambda_of(params: &ProblemParams, nl: &Nonlinearity, kernel: &RieszKernel, u: &Field) -> Result<f64> {
    check_setup(params, kernel, u)?;
    let ev = evaluate(nl, kernel, u, false, false)?;
    let n2 = u.norm_sq();
    if n2 == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok((ev.vfu - 2.0 * ev.breakdown.kinetic) / n2)
}

fn normalized(terms: &[f64], residual: f64) -> f64 {
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    if scale == 0.0 {
        0.0
    } else {
        residual.abs() / scale
    }
}

fn pohozaev_parts(params: &ProblemParams, kinetic2: f64, lambda: f64, mass2: f64, vf: f64) -> [f64; 3] {
    let n = params.nf();
    [0.5 * (n - 2.0) * kinetic2, 0.5 * n * lambda * mass2, 0.5 * (n + params.alpha) * vf]
}

/// `|(N-2)/2 ‖∇u‖² + N/2 λ‖u‖² - (N+α)/2 ∫(I_α∗F)F|` over the sum of the
/// absolute values of the three terms.
pub fn pohozaev_residual(
    params: &ProblemParams,
    nl: &Nonlinearity,
    kernel: &RieszKernel,
    u: &Field,
    lambda: f64,
) -> Result<f64> {
    check_setup(params, kernel, u)?;
    let ev = evaluate(nl, kernel, u, false, false)?;
    let t = pohozaev_parts(params, 2.0 * ev.breakdown.kinetic, lambda, u.norm_sq(), 2.0 * ev.breakdown.interaction);
    Ok(normalized(&t, t[0] + t[1] - t[2]))
}

/// Residual of `‖∇u‖² = (N/2)∫(I_α∗F(u))(f(u)u - (N+α)/N F(u))`, normalized by
/// `‖∇u‖² + (N/2)|∫(I_α∗F)fu| + (N/2)(N+α)/N |∫(I_α∗F)F|`.
pub fn nehari_pohozaev_residual(
    params: &ProblemParams,
    nl: &Nonlinearity,
    kernel: &RieszKernel,
    u: &Field,
) -> Result<f64> {
    check_setup(params, kernel, u)?;
    let ev = evaluate(nl, kernel, u, false, false)?;
    Ok(nehari_from(params, &ev))
}

fn nehari_from(params: &ProblemParams, ev: &Evaluation) -> f64 {
    let n = params.nf();
    let k = 2.0 * ev.breakdown.kinetic;
    let a = 0.5 * n * ev.vfu;
    let b = 0.5 * n * params.p_lower() * 2.0 * ev.breakdown.interaction;
    normalized(&[k, a, b], k - a + b)
}

/// Everything needed to judge whether `u` is a constrained critical point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stationarity {
    pub energy: EnergyBreakdown,
    /// Nehari (u-tested) multiplier.
    pub lambda: f64,
    /// Multiplier implied by the Pohozaev identity.
    pub lambda_pohozaev: f64,
    /// `‖∇E(u) + λu‖₂ / ‖u‖₂`.
    pub grad_residual: f64,
    pub pohozaev: f64,
    pub nehari_pohozaev: f64,
    pub mass: f64,
    /// `‖∇u‖₂`.
    pub grad_norm: f64,
}

pub fn stationarity(
    params: &ProblemParams,
    nl: &Nonlinearity,
    kernel: &RieszKernel,
    u: &Field,
) -> Result<Stationarity> {
    check_setup(params, kernel, u)?;
    let ev = evaluate(nl, kernel, u, true, params.b == 1)?;
    let mass2 = u.norm_sq();
    if mass2 == 0.0 {
        return Err(Error::ZeroField);
    }
    let k2 = 2.0 * ev.breakdown.kinetic;
    let vf = 2.0 * ev.breakdown.interaction;
    let lambda = (ev.vfu - k2) / mass2;
    let n = params.nf();
    let lambda_pohozaev = (0.5 * (n + params.alpha) * vf - 0.5 * (n - 2.0) * k2) / (0.5 * n * mass2);
    let t = pohozaev_parts(params, k2, lambda, mass2, vf);
    let g = ev.gradient.as_ref().expect("requested");
    let r = g.add_scaled(lambda, u);
    Ok(Stationarity {
        energy: ev.breakdown,
        lambda,
        lambda_pohozaev,
        grad_residual: (r.norm_sq() / mass2).sqrt(),
        pohozaev: normalized(&t, t[0] + t[1] - t[2]),
        nehari_pohozaev: nehari_from(params, &ev),
        mass: mass2.sqrt(),
        grad_norm: k2.sqrt(),
    })
}

/// `u_τ` plus a resolvability verdict.
#[derive(Clone, Debug)]
pub struct Dilated {
    pub field: Field,
    /// Fraction of `‖u‖₂²` that cannot be represented after dilation: mass
    /// outside the cube `|y|_∞ ≤ τ(L+h)/2` for `τ < 1`, spectral content above
    /// `k_max/τ` for `τ > 1`.
    pub lost_fraction: f64,
    pub resolved: bool,
}

/// Lost-fraction level above which a dilation is flagged unresolved.
pub const DILATION_LOSS_TOL: f64 = 1e-8;

/// `u_τ(x) = τ^{N/2} u(τx)` by separable trigonometric interpolation; points
/// whose image `τx_i` leaves the outermost cell (`|τx_i| > (L+h)/2`) on some
/// axis are set to zero.
pub fn dilate(u: &Field, tau: f64) -> Result<Dilated> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("dilation tau = {tau} must be > 0")));
    }
    let grid = u.grid();
    let lost_fraction = lost_fraction(u, tau);
    if tau == 1.0 {
        return Ok(Dilated { field: u.clone(), lost_fraction, resolved: true });
    }
    let m = grid.m();
    let matrix = interpolation_matrix(grid, tau);
    let mut data = u.values().to_vec();
    let mut scratch = vec![0.0; data.len()];
    for axis in 0..grid.dim() {
        apply_along_axis(&matrix, m, grid.dim(), axis, &data, &mut scratch);
        std::mem::swap(&mut data, &mut scratch);
    }
    let scale = tau.powf(0.5 * grid.dim() as f64);
    for v in &mut data {
        *v *= scale;
    }
    let field = Field::new(grid, data)?;
    Ok(Dilated { field, lost_fraction, resolved: lost_fraction <= DILATION_LOSS_TOL })
}

/// Row `i` holds the weights producing `u(τ x_i)` from samples `u(x_j)`.
fn interpolation_matrix(grid: &Grid, tau: f64) -> Vec<f64> {
    let m = grid.m();
    let h = grid.spacing();
    let half = 0.5 * grid.box_len();
    let mf = m as f64;
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        let y = tau * grid.coord(i);
        if y.abs() > half + 0.5 * h {
            continue;
        }
        for j in 0..m {
            let xi = (y - grid.coord(j)) / h;
            let den = mf * (std::f64::consts::PI * xi / mf).tan();
            out[i * m + j] = if den.abs() < 1e-14 {
                1.0
            } else {
                (std::f64::consts::PI * xi).sin() / den
            };
        }
    }
    out
}

fn apply_along_axis(matrix: &[f64], m: usize, dim: usize, axis: usize, src: &[f64], dst: &mut [f64]) {
    let stride = m.pow((dim - 1 - axis) as u32);
    let outer = src.len() / (m * stride);
    let mut line = vec![0.0; m];
    for o in 0..outer {
        let base = o * m * stride;
        for s in 0..stride {
            for (j, slot) in line.iter_mut().enumerate() {
                *slot = src[base + j * stride + s];
            }
            for i in 0..m {
                let row = &matrix[i * m..(i + 1) * m];
                let acc: f64 = row.iter().zip(&line).map(|(a, b)| a * b).sum();
                dst[base + i * stride + s] = acc;
            }
        }
    }
}

fn lost_fraction(u: &Field, tau: f64) -> f64 {
    let grid = u.grid();
    let total = u.norm_sq();
    if total == 0.0 || tau == 1.0 {
        return 0.0;
    }
    let dim = grid.dim();
    let m = grid.m();
    let mut idx = vec![0usize; dim];
    let mut lost = 0.0;
    if tau < 1.0 {
        let lim = tau * 0.5 * (grid.box_len() + grid.spacing());
        let coords: Vec<f64> = (0..m).map(|i| grid.coord(i)).collect();
        for (l, &v) in u.values().iter().enumerate() {
            grid.unravel(l, &mut idx);
            if idx.iter().any(|&i| coords[i].abs() > lim) {
                lost += v * v;
            }
        }
        lost * grid.cell_volume() / total
    } else {
        let kmax = std::f64::consts::PI / grid.spacing();
        let lim = kmax / tau;
        let freq: Vec<f64> = (0..m).map(|i| crate::grid::wave_number(i, m, grid.box_len()).abs()).collect();
        let spec = u.to_spectrum();
        let mut all = 0.0;
        for (l, z) in spec.iter().enumerate() {
            grid.unravel(l, &mut idx);
            let e = z.norm_sqr();
            all += e;
            if idx.iter().any(|&i| freq[i] > lim) {
                lost += e;
            }
        }
        lost / all
    }
}

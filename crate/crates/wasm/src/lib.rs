//! Browser bindings for three small experiments: the barrier window of the
//! two-power family, the grid Riesz potential of a Gaussian against radial
//! quadrature, and the fiber curve of a Gaussian trial state.
//!
//! Every entry point returns a JSON string; errors come back as strings.

use choquard_core::fiber::{g4_diagnose, log_taus, FiberModel};
use choquard_core::riesz::radial_oracle;
use choquard_core::thresholds::{ConstantSource, ThresholdBundle};
use choquard_core::{Field, Grid, Nonlinearity, ProblemParams, RieszKernel};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Box side used by the grid experiments.
pub const BOX: f64 = 24.0;

/// Smallest power of two at or above `m`, kept in `[8, cap]`; the grid
/// requires one.
fn pow2(m: usize, cap: usize) -> usize {
    m.clamp(8, cap).next_power_of_two().min(cap)
}

fn fail(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn setup(alpha: f64, b: u8, nu: f64, mu: f64, p: f64) -> Result<(ProblemParams, Nonlinearity, ThresholdBundle), String> {
    let unit = ProblemParams::new(3, alpha, b, 1.0).map_err(|e| e.to_string())?;
    let nl = Nonlinearity::two_power_preset(&unit, nu, mu, p).map_err(|e| e.to_string())?;
    let bundle = ThresholdBundle::compute(&unit, &nl, None, ConstantSource::Exact).map_err(|e| e.to_string())?;
    Ok((unit, nl, bundle))
}

/// Barrier `h(ρ, t)` for `G = ν|t|^p + μ|t|^q` at `ρ = rho_frac · ρ₀`, sampled
/// on a log grid that brackets the window.
pub fn threshold_json(alpha: f64, b: u8, nu: f64, mu: f64, p: f64, rho_frac: f64, samples: usize) -> Result<String, String> {
    let (unit, nl, b0) = setup(alpha, b, nu, mu, p)?;
    let rho0 = b0.rho0.ok_or("this G gives no finite rho0")?;
    if !(rho_frac > 0.0) {
        return Err("rho/rho0 must be > 0".into());
    }
    let rho = rho_frac * rho0;
    let bundle = ThresholdBundle::compute(&unit.with_rho(rho), &nl, None, ConstantSource::Exact).map_err(|e| e.to_string())?;
    let bar = bundle.barrier();
    let t0 = bar.t0(rho);
    let window = bar.roots(rho).ok();
    let (lo, hi) = match window {
        Some((r0, r1)) => (0.1 * r0, 10.0 * r1),
        None => (1e-2 * t0, 1e2 * t0),
    };
    let ts = log_taus(lo, hi, samples.clamp(16, 2000)).map_err(|e| e.to_string())?;
    let hs: Vec<f64> = ts.iter().map(|&t| bar.h(rho, t)).collect();
    Ok(json!({
        "q": nl.terms()[1].exponent,
        "rho0": rho0,
        "rho": rho,
        "t0": t0,
        "hmax": bar.h_max(rho),
        "r0": window.map(|w| w.0),
        "r1": window.map(|w| w.1),
        "lower_critical_level": bundle.lower_critical_level(rho),
        "t": ts,
        "h": hs,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn threshold(alpha: f64, b: u8, nu: f64, mu: f64, p: f64, rho_frac: f64, samples: usize) -> Result<String, JsValue> {
    threshold_json(alpha, b, nu, mu, p, rho_frac, samples).map_err(fail)
}

/// `I_α ∗ g` for `g = exp(-r²/2w²)` on an `m³` grid, along the positive x-axis,
/// next to the radial quadrature value at the same radii.
pub fn riesz_json(alpha: f64, width: f64, m: usize) -> Result<String, String> {
    if !(width > 0.0) {
        return Err("width must be > 0".into());
    }
    let m = pow2(m, 64);
    let grid = Grid::new(3, m, BOX).map_err(|e| e.to_string())?;
    let kernel = RieszKernel::new(&grid, alpha).map_err(|e| e.to_string())?;
    let g = |r: f64| (-0.5 * r * r / (width * width)).exp();
    let u = Field::radial(&grid, &[0.0; 3], g);
    let v = kernel.convolve(&u).map_err(|e| e.to_string())?;
    let mid = m / 2;
    let (mut rs, mut on_grid, mut oracle) = (Vec::new(), Vec::new(), Vec::new());
    let mut worst: f64 = 0.0;
    for i in mid..m {
        let r = grid.coord(i);
        let o = radial_oracle(alpha, g, 0.5 * BOX * 3f64.sqrt(), r).map_err(|e| e.to_string())?;
        let val = v.values()[(i * m + mid) * m + mid];
        if r < 0.25 * BOX {
            worst = worst.max((val - o.value).abs() / o.value.abs());
        }
        rs.push(r);
        on_grid.push(val);
        oracle.push(o.value);
    }
    Ok(json!({ "m": m, "h": grid.spacing(), "r": rs, "grid": on_grid, "oracle": oracle, "max_rel_err_inner": worst })
        .to_string())
}

#[wasm_bindgen]
pub fn riesz(alpha: f64, width: f64, m: usize) -> Result<String, JsValue> {
    riesz_json(alpha, width, m).map_err(fail)
}

/// Fiber map `φ(τ) = E(u_τ)` of a Gaussian of width `width` at mass
/// `rho_frac · ρ₀`, from the exact dilation law of each energy term. The
/// window starts at τ = 10⁻² and grows until it passes the hump, which at
/// small mass can sit many decades out.
#[allow(clippy::too_many_arguments)]
pub fn fiber_json(
    alpha: f64,
    b: u8,
    nu: f64,
    mu: f64,
    p: f64,
    rho_frac: f64,
    width: f64,
    m: usize,
) -> Result<String, String> {
    let (unit, nl, b0) = setup(alpha, b, nu, mu, p)?;
    let rho0 = b0.rho0.ok_or("this G gives no finite rho0")?;
    if !(rho_frac > 0.0 && width > 0.0) {
        return Err("rho/rho0 and width must be > 0".into());
    }
    let params = unit.with_rho(rho_frac * rho0);
    let m = pow2(m, 64);
    let grid = Grid::new(3, m, BOX).map_err(|e| e.to_string())?;
    let kernel = RieszKernel::new(&grid, alpha).map_err(|e| e.to_string())?;
    let u = Field::radial(&grid, &[0.0; 3], |r| (-0.5 * r * r / (width * width)).exp())
        .rescale_mass(params.rho)
        .map_err(|e| e.to_string())?;
    let model = FiberModel::new(&params, &nl, &kernel, &u).map_err(|e| e.to_string())?;
    // Extend by decades until φ turns down, then one more so the fall shows.
    let mut hi = 10.0;
    while model.slope(hi) >= 0.0 && hi < 1e12 {
        hi *= 10.0;
    }
    let taus = log_taus(1e-2, 10.0 * hi, 600).map_err(|e| e.to_string())?;
    let curve = model.curve(&taus).map_err(|e| e.to_string())?;
    Ok(json!({
        "grad_norm": u.grad_norm_sq().sqrt(),
        "plateau": model.plateau(),
        "tau": curve.taus,
        "phi": curve.values,
        "kinetic": curve.kinetic,
        "interaction": curve.interaction,
        "maxima": curve.detected_maxima,
        "g4": g4_diagnose(&curve),
        "slope_at_1": model.slope(1.0),
    })
    .to_string())
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn fiber(alpha: f64, b: u8, nu: f64, mu: f64, p: f64, rho_frac: f64, width: f64, m: usize) -> Result<String, JsValue> {
    fiber_json(alpha, b, nu, mu, p, rho_frac, width, m).map_err(fail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn threshold_window_on_the_preset() {
        let v: Value = serde_json::from_str(&threshold_json(2.0, 1, 200.0, 1.0, 2.0, 0.5, 200).unwrap()).unwrap();
        let (r0, r1, t0) = (v["r0"].as_f64().unwrap(), v["r1"].as_f64().unwrap(), v["t0"].as_f64().unwrap());
        assert!(r0 < t0 && t0 < r1);
        assert_eq!(v["t"].as_array().unwrap().len(), 200);
        let beyond: Value = serde_json::from_str(&threshold_json(2.0, 1, 200.0, 1.0, 2.0, 1.5, 50).unwrap()).unwrap();
        assert!(beyond["r0"].is_null());
        assert!(beyond["h"].as_array().unwrap().iter().all(|h| h.as_f64().unwrap() < 0.0));
    }

    #[test]
    fn riesz_grid_tracks_quadrature() {
        let v: Value = serde_json::from_str(&riesz_json(2.0, 1.5, 32).unwrap()).unwrap();
        assert!(v["max_rel_err_inner"].as_f64().unwrap() < 1e-2);
    }

    #[test]
    fn fiber_of_a_gaussian_has_one_hump() {
        let v: Value = serde_json::from_str(&fiber_json(2.0, 1, 200.0, 1.0, 2.0, 0.5, 2.0, 32).unwrap()).unwrap();
        assert_eq!(v["g4"]["n_maxima"].as_u64().unwrap(), 1, "{} {} {}", v["g4"], v["maxima"], v["plateau"]);
        assert_eq!(v["tau"].as_array().unwrap().len(), 600);
    }

    #[test]
    fn bad_input_is_an_error_string() {
        assert!(threshold_json(2.0, 1, 200.0, 1.0, 9.0, 0.5, 10).is_err());
        assert!(riesz_json(2.0, -1.0, 16).is_err());
    }
}

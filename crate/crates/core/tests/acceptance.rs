//! Acceptance suite. Runs without the libtest harness and prints one
//! `PASS`/`FAIL` line per criterion; exits non-zero if any criterion fails.

use choquard_core::energy::{energy, l2_gradient, stationarity};
use choquard_core::fiber::{default_taus, fiber_curve, fiber_curve_default, g4_diagnose, FiberModel, log_taus};
use choquard_core::io::{read_field, write_field};
use choquard_core::minimize::{m_estimate, solve, SolveOptions, SolveReport};
use choquard_core::riesz::{radial_oracle, riesz_constant};
use choquard_core::thresholds::{hls_sharp_constant, s2_exact, s2_quotient, Barrier, ConstantSource, ThresholdBundle};
use choquard_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

/// Outcome of one criterion: pass flag and a one-line summary of the measured values.
type Verdict = (bool, String);

// ---------------------------------------------------------------------------
// Independent oracles.

/// Lanczos Gamma (g = 7, 9 coefficients) with reflection below 1/2.
fn gamma_oracle(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_oracle(1.0 - x));
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Maclaurin series below 2.5, continued fraction for `erfc` above.
fn erf_oracle(x: f64) -> f64 {
    if x < 0.0 {
        return -erf_oracle(-x);
    }
    if x < 2.5 {
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -x * x / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        2.0 / PI.sqrt() * sum
    } else {
        // Lentz evaluation of erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))).
        let mut f = x;
        let (mut c, mut d) = (x, 0.0);
        for k in 1..200 {
            let a = 0.5 * k as f64;
            d = x + a * d;
            d = 1.0 / d;
            c = x + a / c;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        1.0 - (-x * x).exp() / (PI.sqrt() * f)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn random_bumps(grid: &Grid, rng: &mut ChaCha8Rng, positive: bool) -> Field {
    let n = rng.gen_range(1..4);
    let spread = 0.15 * grid.box_len();
    let pars: Vec<([f64; 3], f64, f64)> = (0..n)
        .map(|_| {
            let c = [rng.gen_range(-spread..spread), rng.gen_range(-spread..spread), rng.gen_range(-spread..spread)];
            let w = rng.gen_range(0.8..1.6);
            let a = if positive { rng.gen_range(0.2..1.0) } else { rng.gen_range(-1.0..1.0) };
            (c, w, a)
        })
        .collect();
    Field::from_fn(grid, |x| {
        pars.iter()
            .map(|(c, w, a)| {
                let r2: f64 = x.iter().zip(c).map(|(xi, ci)| (xi - ci) * (xi - ci)).sum();
                a * (-0.5 * r2 / (w * w)).exp()
            })
            .sum()
    })
}

// ---------------------------------------------------------------------------
// Shared preset.

struct Preset {
    params: ProblemParams,
    nl: Nonlinearity,
    kernel: RieszKernel,
    bundle: ThresholdBundle,
}

fn preset(m: usize) -> Preset {
    let p = ProblemParams::new(3, 2.0, 1, 1.0).unwrap();
    let nl = Nonlinearity::reference_preset(&p).unwrap();
    let rho0 = ThresholdBundle::compute(&p, &nl, None, ConstantSource::Exact).unwrap().rho0.unwrap();
    let params = p.with_rho(0.5 * rho0);
    let bundle = ThresholdBundle::compute(&params, &nl, None, ConstantSource::Exact).unwrap();
    let grid = Grid::new(3, m, 24.0).unwrap();
    let kernel = RieszKernel::new(&grid, 2.0).unwrap();
    Preset { params, nl, kernel, bundle }
}

// ---------------------------------------------------------------------------
// Criteria.

fn c1_constants() -> Verdict {
    let a = riesz_constant(3, 2.0).unwrap();
    let c = hls_sharp_constant(3, 2.0).unwrap();
    let a_closed = 1.0 / (4.0 * PI);
    let c_closed = 4.0 / 3.0 * (4.0 / PI.sqrt()).powf(2.0 / 3.0);
    // A_α(N) = Γ((N-α)/2) / (Γ(α/2) π^{N/2} 2^α).
    let a_gamma = gamma_oracle(0.5) / (gamma_oracle(1.0) * PI.powf(1.5) * 4.0);
    // C_α(N) = π^{(N-α)/2} Γ(α/2)/Γ((N+α)/2) · (Γ(N/2)/Γ(N))^{-α/N}.
    let c_gamma = PI.sqrt() * gamma_oracle(1.0) / gamma_oracle(2.5) * (gamma_oracle(1.5) / gamma_oracle(3.0)).powf(-2.0 / 3.0);
    let errs = [rel(a, a_closed), rel(a, a_gamma), rel(c, c_closed), rel(c, c_gamma)];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    (worst < 5e-13, format!("A = {a:.15e}, C = {c:.15e}, worst rel. dev. {worst:.1e} (12 digits: < 5e-13)"))
}

fn c2_convolution_oracle() -> Verdict {
    let grid = Grid::new(3, 128, 24.0).unwrap();
    let h = grid.spacing();
    let g = |r: f64| (-r * r).exp();
    let u = Field::radial(&grid, &[0.0; 3], g);
    let mid = grid.m() / 2;
    let rmax = grid.box_len() / 4.0;
    let nmax = ((rmax / h) * (rmax / h)).floor() as usize;
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [1.0, 1.5, 2.0] {
        let k = RieszKernel::new(&grid, alpha).unwrap();
        let v = k.convolve(&u).unwrap();
        // Oracle value per distinct squared radius i²+j²+k².
        let mut oracle = vec![f64::NAN; nmax + 1];
        let mut worst = 0.0f64;
        let mut worst_closed = 0.0f64;
        let mut idx = [0usize; 3];
        for (l, &val) in v.values().iter().enumerate() {
            grid.unravel(l, &mut idx);
            let d: Vec<i64> = idx.iter().map(|&i| i as i64 - mid as i64).collect();
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as usize;
            if n as f64 * h * h >= rmax * rmax {
                continue;
            }
            let r = (n as f64).sqrt() * h;
            if oracle[n].is_nan() {
                oracle[n] = radial_oracle(alpha, g, 12.0, r).unwrap().value;
            }
            worst = worst.max(rel(val, oracle[n]));
            if alpha == 2.0 {
                let closed = if r == 0.0 { 0.5 } else { PI.sqrt() * erf_oracle(r) / (4.0 * r) };
                worst_closed = worst_closed.max(rel(val, closed));
            }
        }
        ok &= worst < 1e-2;
        if alpha == 2.0 {
            ok &= worst_closed < 1e-3;
            parts.push(format!("α=2: {worst:.1e} (closed form {worst_closed:.1e})"));
        } else {
            parts.push(format!("α={alpha}: {worst:.1e}"));
        }
    }
    (ok, format!("max rel. err. on |x| < L/4 vs quadrature oracle: {}", parts.join(", ")))
}

fn c3_scaling_and_symmetry() -> Verdict {
    let grid = Grid::new(3, 128, 24.0).unwrap();
    let m = grid.m();
    let mid = m / 2;
    let lambda = 2.0;
    let g = |r: f64| (-r * r / 8.0).exp();
    let u = Field::radial(&grid, &[0.0; 3], g);
    let ul = Field::radial(&grid, &[0.0; 3], |r| g(lambda * r));
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [1.0, 1.5, 2.0] {
        let k = RieszKernel::new(&grid, alpha).unwrap();
        let v = k.convolve(&u).unwrap();
        let vl = k.convolve(&ul).unwrap();
        let mut worst = 0.0f64;
        let mut idx = [0usize; 3];
        for (l, &val) in vl.values().iter().enumerate() {
            grid.unravel(l, &mut idx);
            // λx is a grid point when every offset from the centre is at most m/4.
            if idx.iter().any(|&i| (i as i64 - mid as i64).abs() > (m / 8) as i64) {
                continue;
            }
            let j: Vec<usize> = idx.iter().map(|&i| (2 * i as i64 - mid as i64) as usize).collect();
            let target = lambda.powf(-alpha) * v.values()[(j[0] * m + j[1]) * m + j[2]];
            worst = worst.max(rel(val, target));
        }
        ok &= worst < 1e-3;
        parts.push(format!("α={alpha}: {worst:.1e}"));
    }
    let small = Grid::new(3, 64, 24.0).unwrap();
    let k = RieszKernel::new(&small, 1.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut sym = 0.0f64;
    for _ in 0..100 {
        let a = random_bumps(&small, &mut rng, false);
        let b = random_bumps(&small, &mut rng, false);
        let ab = k.bilinear(&a, &b).unwrap();
        let ba = k.bilinear(&b, &a).unwrap();
        sym = sym.max((ab - ba).abs() / ab.abs().max(1e-300));
    }
    ok &= sym < 1e-10;
    (ok, format!("λ=2 scaling on |x| ≤ L/8: {}; bilinear asymmetry over 100 pairs {sym:.1e}", parts.join(", ")))
}

fn c4_s2_extremal() -> Verdict {
    let grid = Grid::new(3, 128, 24.0).unwrap();
    let k = RieszKernel::new(&grid, 2.0).unwrap();
    let h = grid.spacing();
    let exact = s2_exact(3, 2.0).unwrap();
    let q1 = s2_quotient(&k, 1.0, &[0.0; 3]).unwrap().value;
    let q2 = s2_quotient(&k, 2.0, &[0.0; 3]).unwrap().value;
    let dil = rel(q2, q1);
    let mut trans = 0.0f64;
    let mut lowest = q1.min(q2);
    for shift in [[3.0 * h, 0.0, 0.0], [-5.0 * h, 7.0 * h, 2.0 * h], [40.0 * h, -40.0 * h, 17.0 * h]] {
        let q = s2_quotient(&k, 1.0, &shift).unwrap().value;
        trans = trans.max(rel(q, q1));
        lowest = lowest.min(q);
    }
    // One-sided HLS bound on random fields: D(u) ≤ A C ‖u‖²_{6/5}.
    let c = hls_sharp_constant(3, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ratio = 0.0f64;
    let small = Grid::new(3, 32, 16.0).unwrap();
    let ks = RieszKernel::new(&small, 2.0).unwrap();
    for _ in 0..50 {
        let u = random_bumps(&small, &mut rng, false);
        let d = ks.bilinear(&u, &u).unwrap();
        let norm = u.map(|t| t.abs().powf(1.2)).integrate().powf(2.0 / 1.2);
        ratio = ratio.max(d / (ks.a_alpha() * c * norm));
    }
    let below = (exact - lowest) / exact;
    let ok = dil < 1e-3 && trans < 1e-6 && below <= 1e-6 && ratio <= 1.0 + 1e-6;
    (
        ok,
        format!(
            "q(δ=1) = {q1:.6}, q(δ=2) = {q2:.6} (rel. {dil:.1e}), translation {trans:.1e}, S₂ = {exact:.6}, \
             min quotient below S₂ by {below:.1e}, max HLS ratio {ratio:.6}"
        ),
    )
}

fn c5_threshold_geometry() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_rho = 0.0f64;
    let mut worst_root = 0.0f64;
    let mut between_ok = true;
    let mut draws = 0;
    while draws < 20 {
        let alpha = rng.gen_range(0.5..2.9);
        let b = rng.gen_range(0..2u8);
        let params = ProblemParams::new(3, alpha, b, 1.0).unwrap();
        let p = rng.gen_range(params.p_lower() + 0.02..params.p_l2crit() - 0.02);
        let q = 2.0 * (5.0 + alpha) / 3.0 - p;
        if !(q > params.p_l2crit() && q <= params.p_upper()) {
            continue;
        }
        draws += 1;
        let nl = Nonlinearity::two_power_preset(&params, rng.gen_range(0.1..50.0), rng.gen_range(0.1..50.0), p).unwrap();
        let bundle = ThresholdBundle::compute(&params, &nl, None, ConstantSource::Exact).unwrap();
        let (r0, rf) = (bundle.rho0.unwrap(), bundle.rho0_formula.unwrap());
        worst_rho = worst_rho.max(rel(r0, rf));
        let bar = bundle.barrier();
        let rho = 0.9 * r0;
        let (a, z) = bar.roots(rho).unwrap();
        worst_root = worst_root.max(bar.h(rho, a).abs()).max(bar.h(rho, z).abs());
        for i in 1..1000 {
            let t = a + (z - a) * i as f64 / 1000.0;
            between_ok &= bar.h(rho, t) > 0.0;
        }
    }
    // (g3) on a lattice of 55 × 14 × 13 = 10010 tuples:
    // a₁ ≥ a₂, s ∈ [t a₂/a₁, t] ⇒ h(a₂,s) ≥ h(a₁,t).
    let params = ProblemParams::new(3, 2.0, 1, 1.0).unwrap();
    let bar = Barrier::new(&params, 0.38, 0.0037);
    let masses: Vec<f64> = (0..10).map(|i| 0.1 + 0.2 * i as f64).collect();
    let mut violations = 0;
    let mut total = 0;
    for (i, &a1) in masses.iter().enumerate() {
        for &a2 in &masses[..=i] {
            for ti in 0..14 {
                let t = 10f64.powf(-2.0 + 4.0 * ti as f64 / 13.0);
                for si in 0..13 {
                    // Clamp so round-off cannot push s above t.
                    let s = (t * (a2 / a1 + (1.0 - a2 / a1) * si as f64 / 12.0)).min(t);
                    total += 1;
                    if bar.h(a2, s) < bar.h(a1, t) {
                        violations += 1;
                    }
                }
            }
        }
    }
    let ok = worst_rho <= 1e-10 && worst_root <= 1e-10 && between_ok && violations == 0 && total >= 10_000;
    (
        ok,
        format!(
            "ρ₀ maximizer vs formula {worst_rho:.1e} (20 draws), |h| at roots {worst_root:.1e}, h > 0 between: {between_ok}, \
             (g3) violations {violations}/{total}"
        ),
    )
}

fn c6_gradient_consistency() -> Verdict {
    let grid = Grid::new(3, 32, 16.0).unwrap();
    let k = RieszKernel::new(&grid, 2.0).unwrap();
    let params = ProblemParams::new(3, 2.0, 1, 1.0).unwrap();
    let nl = Nonlinearity::reference_preset(&params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let u = random_bumps(&grid, &mut rng, true).scaled(0.05);
        // `|t|^{5/3}` is only C¹ at 0, so a direction that flips the sign of
        // u + εv in its tails spoils the O(ε²) difference. Taking v = u·w with w
        // bounded keeps the segment on one side of zero at every point.
        let w = random_bumps(&grid, &mut rng, false);
        let w = w.scaled(1.0 / w.max_abs());
        let v = Field::new(&grid, u.values().iter().zip(w.values()).map(|(a, b)| a * b).collect()).unwrap();
        let g = l2_gradient(&params, &nl, &k, &u).unwrap();
        let eps = 1e-6;
        let ep = energy(&params, &nl, &k, &u.add_scaled(eps, &v)).unwrap().total;
        let em = energy(&params, &nl, &k, &u.add_scaled(-eps, &v)).unwrap().total;
        let fd = (ep - em) / (2.0 * eps);
        worst = worst.max(rel(fd, g.inner(&v)));
    }
    (worst < 1e-5, format!("worst directional-derivative rel. err. over 10 pairs (v = u·w) {worst:.1e}"))
}

fn c7_certified_solve(p: &Preset, r: &SolveReport) -> Verdict {
    let rho = p.params.rho;
    let r0 = p.bundle.r0.unwrap();
    let level = p.bundle.lower_critical_level(rho);
    let mass_err = rel(r.mass_final, rho);
    let ok = r.converged
        && r.lambda > 0.0
        && mass_err < 1e-8
        && r.grad_norm_final <= 0.95 * r0
        && r.pohozaev.abs() < 1e-3
        && r.nehari_pohozaev.abs() < 1e-3
        && r.energy.total < level
        && r.outside_theory_reasons.is_empty();
    (
        ok,
        format!(
            "converged {} (best start {}), λ = {:.4e}, mass err {mass_err:.1e}, ‖∇u‖ = {:.4e} ≤ 0.95 R₀ = {:.4e}, \
             Pohozaev {:.1e}, Nehari–Pohozaev {:.1e}, E = {:.6e} < level {level:.6e}",
            r.converged,
            r.best_start,
            r.lambda,
            r.grad_norm_final,
            0.95 * r0,
            r.pohozaev,
            r.nehari_pohozaev,
            r.energy.total,
        ),
    )
}

fn c8_variational_structure(p: &Preset) -> Verdict {
    let opts = SolveOptions::default();
    let rho = p.params.rho;
    let m = |a: f64| m_estimate(&p.params, &p.nl, &p.kernel, &p.bundle, a, &opts).unwrap();
    let full = m(rho);
    let smaller = m(0.8 * rho);
    let half = m(rho / 2f64.sqrt());
    let all_conv = full.converged && smaller.converged && half.converged;
    let mono = full.value < smaller.value;
    let sub = full.value <= 2.0 * half.value + 1e-4 * full.value.abs();
    (
        all_conv && mono && sub,
        format!(
            "m(ρ) = {:.6e}, m(0.8ρ) = {:.6e}, m(ρ/√2) = {:.6e}; monotone {mono}, subadditive {sub}, converged {all_conv}",
            full.value, smaller.value, half.value
        ),
    )
}

fn c9_fiber(p: &Preset, r: &SolveReport) -> Verdict {
    let curve = fiber_curve_default(&p.params, &p.nl, &p.kernel, &r.u_star).unwrap();
    let slope = curve.relative_slope_at_1().unwrap();
    let k1 = 0.5 * r.u_star.grad_norm_sq();
    let d1 = energy(&p.params, &p.nl, &p.kernel, &r.u_star).unwrap().d_lower.unwrap();
    let (mut kin, mut dl, mut n) = (0.0f64, 0.0f64, 0);
    for i in 0..curve.len() {
        if !curve.resolved[i] {
            continue;
        }
        let t = curve.taus[i];
        kin = kin.max(rel(curve.kinetic[i], t * t * k1));
        dl = dl.max(rel(curve.d_lower[i].unwrap(), d1));
        n += 1;
    }
    let model = FiberModel::new(&p.params, &p.nl, &p.kernel, &r.u_star).unwrap();
    let g4 = g4_diagnose(&model.curve(&log_taus(1e-3, 1e9, 1200).unwrap()).unwrap());

    // Supercritical single power: φ = Aτ² - Bτ⁴, maximum at (A/2B)^{1/2}.
    let grid = p.kernel.grid();
    let params0 = ProblemParams::new(3, 2.0, 0, 1.0).unwrap();
    let u = Field::radial(grid, &[0.0; 3], |r| (-0.5 * r * r / 2.25).exp());
    let a = 0.5 * u.grad_norm_sq();
    let pp = choquard_core::energy::power_pair(&p.kernel, &u, 3.0, 3.0).unwrap();
    let target = 1.4f64;
    let nu = (a / (target * target * pp)).sqrt();
    let nl = Nonlinearity::new(&params0, vec![PowerTerm { coef: nu, exponent: 3.0 }]).unwrap();
    let taus = default_taus();
    let sc = fiber_curve(&params0, &nl, &p.kernel, &u, &taus).unwrap();
    let step = (taus[1] / taus[0]).ln();
    let located = sc.detected_maxima.len() == 1 && (sc.detected_maxima[0] / target).ln().abs() <= step;

    let ok = slope < 1e-2 && kin < 1e-4 && dl < 1e-3 && n >= 3 && located && g4.consistent() && g4.n_maxima <= 1;
    (
        ok,
        format!(
            "|φ'(1)|/variation {slope:.1e}, kinetic τ² scaling {kin:.1e} and d_lower invariance {dl:.1e} over {n} resolved τ, \
             supercritical maxima {:?} vs {target} (grid step ×{:.4}), model curve maxima {} decreasing after {:?}",
            sc.detected_maxima,
            step.exp(),
            g4.n_maxima,
            g4.decreasing_after_max
        ),
    )
}

fn c10_determinism(p: &Preset, r: &SolveReport) -> Verdict {
    let small = preset(32);
    let opts = SolveOptions { n_starts: 3, seed: 42, ..SolveOptions::default() };
    let a = solve(&small.params, &small.nl, &small.kernel, &small.bundle, &opts).unwrap();
    let b = solve(&small.params, &small.nl, &small.kernel, &small.bundle, &opts).unwrap();
    let same_json = serde_json::to_vec(&a).unwrap() == serde_json::to_vec(&b).unwrap();
    let same_field = a.u_star.values().iter().zip(b.u_star.values()).all(|(x, y)| x.to_bits() == y.to_bits());

    let dir = std::env::temp_dir().join(format!("choquard-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("u_star.chqf");
    write_field(&path, &r.u_star).unwrap();
    let back = read_field(&path).unwrap();
    std::fs::remove_dir_all(&dir).ok();
    let bit_exact = back.grid() == r.u_star.grid()
        && back.values().iter().zip(r.u_star.values()).all(|(x, y)| x.to_bits() == y.to_bits());

    let st = stationarity(&p.params, &p.nl, &p.kernel, &back).unwrap();
    let pairs = [
        (st.energy.total, r.energy.total),
        (st.lambda, r.lambda),
        (st.lambda_pohozaev, r.lambda_pohozaev),
        (st.grad_residual, r.grad_residual),
        (st.pohozaev, r.pohozaev),
        (st.nehari_pohozaev, r.nehari_pohozaev),
        (st.mass, r.mass_final),
        (st.grad_norm, r.grad_norm_final),
    ];
    let verify = pairs.iter().map(|(x, y)| (x - y).abs() / y.abs().max(1e-300)).fold(0.0, f64::max);
    (
        same_json && same_field && bit_exact && verify <= 1e-12,
        format!(
            "repeat solve JSON identical {same_json}, field identical {same_field}; CHQF1 round trip bit-exact {bit_exact}; \
             verify vs report max rel. dev. {verify:.1e}"
        ),
    )
}

// ---------------------------------------------------------------------------

/// `ACCEPTANCE_ONLY=3,9` restricts the run to the listed criteria.
fn selected(id: usize) -> bool {
    match std::env::var("ACCEPTANCE_ONLY") {
        Ok(list) => list.split(',').any(|s| s.trim().parse() == Ok(id)),
        Err(_) => true,
    }
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Verdict) -> Option<bool> {
    if !selected(id) {
        return None;
    }
    let t = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f));
    let secs = t.elapsed().as_secs_f64();
    let (ok, detail) = match outcome {
        Ok(v) => v,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            (false, format!("panicked: {msg}"))
        }
    };
    println!("criterion {id:>2} {name}: {} [{secs:.1} s] {detail}", if ok { "PASS" } else { "FAIL" });
    Some(ok)
}

fn main() {
    // Respect `cargo test -- <filter>` loosely: any argument that is not a flag
    // must occur in the target name for the suite to run.
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str())) {
        return;
    }
    let mut results = Vec::new();
    results.push(run(1, "constants", c1_constants));
    results.push(run(2, "convolution oracle", c2_convolution_oracle));
    results.push(run(3, "Riesz scaling and symmetry", c3_scaling_and_symmetry));
    results.push(run(4, "lower-critical extremal", c4_s2_extremal));
    results.push(run(5, "threshold geometry", c5_threshold_geometry));
    results.push(run(6, "energy/gradient consistency", c6_gradient_consistency));

    let p = preset(64);
    let t = Instant::now();
    let report = if [7, 9, 10].into_iter().any(selected) {
        catch_unwind(AssertUnwindSafe(|| solve(&p.params, &p.nl, &p.kernel, &p.bundle, &SolveOptions::default()).unwrap()))
    } else {
        Err(Box::new("not requested") as Box<dyn std::any::Any + Send>)
    };
    let solve_secs = t.elapsed().as_secs_f64();
    match &report {
        Ok(r) => {
            results.push(run(7, "certified solve", || {
                let (ok, d) = c7_certified_solve(&p, r);
                (ok, format!("{d} (solve {solve_secs:.1} s)"))
            }));
        }
        Err(_) => results.push(run(7, "certified solve", || (false, "solve failed".into()))),
    }
    results.push(run(8, "variational structure", || c8_variational_structure(&p)));
    match &report {
        Ok(r) => {
            results.push(run(9, "fiber diagnostics", || c9_fiber(&p, r)));
            results.push(run(10, "determinism and round trip", || c10_determinism(&p, r)));
        }
        Err(_) => {
            results.push(run(9, "fiber diagnostics", || (false, "no solver output".into())));
            results.push(run(10, "determinism and round trip", || (false, "no solver output".into())));
        }
    }
    let results: Vec<bool> = results.into_iter().flatten().collect();
    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}

use choquard_core::energy::{dilate, energy, l2_gradient, power_pair};
use choquard_core::io::{decode, encode};
use choquard_core::problem::validate;
use choquard_core::thresholds::{hls_sharp_constant, ConstantSource, ThresholdBundle};
use choquard_core::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn grid16() -> &'static (Grid, RieszKernel) {
    static G: OnceLock<(Grid, RieszKernel)> = OnceLock::new();
    G.get_or_init(|| {
        let g = Grid::new(3, 16, 12.0).unwrap();
        let k = RieszKernel::new(&g, 2.0).unwrap();
        (g, k)
    })
}

fn grid32() -> &'static (Grid, RieszKernel) {
    static G: OnceLock<(Grid, RieszKernel)> = OnceLock::new();
    G.get_or_init(|| {
        let g = Grid::new(3, 32, 16.0).unwrap();
        let k = RieszKernel::new(&g, 2.0).unwrap();
        (g, k)
    })
}

/// Sum of a few Gaussian bumps with random centres, widths and signs.
fn bumps(grid: &Grid, seed: u64, positive: bool) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
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

fn preset_params() -> ProblemParams {
    ProblemParams::new(3, 2.0, 1, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn envelope_bounds_g(nu in -5.0f64..5.0, mu in -5.0f64..5.0, p in 1.67f64..5.0, q in 1.67f64..5.0) {
        let params = preset_params();
        let nl = Nonlinearity::new(&params, vec![
            PowerTerm { coef: nu, exponent: p },
            PowerTerm { coef: mu, exponent: q },
        ]).unwrap();
        let c0 = nl.c_zero().unwrap();
        let (pl, pu) = (params.p_lower(), params.p_upper());
        for i in 0..1000 {
            let t = 10f64.powf(-8.0 + 16.0 * i as f64 / 999.0);
            let bound = c0 * (t.powf(pl) + t.powf(pu));
            prop_assert!(nl.eval_g(t).abs() <= bound * (1.0 + 1e-12), "t = {t}");
        }
    }

    #[test]
    fn f_is_derivative_of_big_f(nu in 0.1f64..5.0, p in 1.7f64..2.3, t in 0.01f64..10.0, neg in any::<bool>()) {
        let params = preset_params();
        let nl = Nonlinearity::two_power_preset(&params, nu, 1.0, p).unwrap();
        let t = if neg { -t } else { t };
        let h = f64::EPSILON.sqrt() * t.abs().max(1.0);
        let fd = (nl.eval_f_big(t + h) - nl.eval_f_big(t - h)) / (2.0 * h);
        let f = nl.eval_f(t);
        prop_assert!((fd - f).abs() <= 1e-6 * f.abs().max(1e-12), "fd {fd} f {f}");
    }

    #[test]
    fn preset_family_passes_validation(nu in 0.01f64..100.0, mu in 0.01f64..100.0, p in 1.6667f64..2.3333, b in 0u8..2) {
        let params = ProblemParams::new(3, 2.0, b, 1.0).unwrap();
        let nl = Nonlinearity::two_power_preset(&params, nu, mu, p).unwrap();
        prop_assert!(validate(&params, &nl).unwrap().all_satisfied());
    }

    #[test]
    fn parseval_and_linearity(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (g, _) = grid16();
        let u = bumps(g, seed, false);
        let v = bumps(g, seed ^ 1, false);
        let phys = u.norm_sq();
        prop_assert!((phys - u.spectral_norm_sq()).abs() <= 1e-10 * phys);
        let lhs = u.scaled(a).add_scaled(b, &v).integrate();
        let rhs = a * u.integrate() + b * v.integrate();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (a.abs() * u.max_abs() + b.abs() * v.max_abs()) * g.box_len().powi(3));
    }

    #[test]
    fn gradient_norm_is_quadratic(seed in any::<u64>(), c in -4.0f64..4.0) {
        let (g, _) = grid16();
        let u = bumps(g, seed, false);
        let base = u.grad_norm_sq();
        let scaled = u.scaled(c).grad_norm_sq();
        prop_assert!((scaled - c * c * base).abs() <= 1e-12 * c * c * base + 1e-300);
    }

    #[test]
    fn riesz_form_symmetric_and_positive(seed in any::<u64>()) {
        let (g, k) = grid16();
        let u = bumps(g, seed, false);
        let v = bumps(g, seed.wrapping_add(7), false);
        let uv = k.bilinear(&u, &v).unwrap();
        let vu = k.bilinear(&v, &u).unwrap();
        prop_assert!((uv - vu).abs() <= 1e-10 * uv.abs().max(1e-300));
        prop_assert!(k.bilinear(&u, &u).unwrap() >= 0.0);
    }

    #[test]
    fn riesz_form_below_hls_bound(seed in any::<u64>()) {
        let (g, k) = grid32();
        let u = bumps(g, seed, false);
        let d = k.bilinear(&u, &u).unwrap();
        let r = 6.0 / 5.0;
        let norm = (u.map(|t| t.abs().powf(r)).integrate()).powf(2.0 / r);
        let c = hls_sharp_constant(3, 2.0).unwrap();
        prop_assert!(d <= k.a_alpha() * c * norm * (1.0 + 1e-6), "ratio {}", d / (k.a_alpha() * c * norm));
    }

    #[test]
    fn gradient_matches_finite_difference(seed in any::<u64>()) {
        let (g, k) = grid16();
        let params = preset_params();
        let nl = Nonlinearity::two_power_preset(&params, 1.0, 1.0, 2.0).unwrap();
        let u = bumps(g, seed, true);
        // v = u·w keeps u + εv away from the kink of |t|^{5/3} at zero.
        let w = bumps(g, seed ^ 0xABCD, false);
        let w = w.scaled(1.0 / w.max_abs());
        let v = Field::new(g, u.values().iter().zip(w.values()).map(|(a, b)| a * b).collect()).unwrap();
        let grad = l2_gradient(&params, &nl, k, &u).unwrap();
        let eps = 1e-6;
        let ep = energy(&params, &nl, k, &u.add_scaled(eps, &v)).unwrap().total;
        let em = energy(&params, &nl, k, &u.add_scaled(-eps, &v)).unwrap().total;
        let fd = (ep - em) / (2.0 * eps);
        let an = grad.inner(&v);
        prop_assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-8), "fd {fd} an {an}");
    }

    #[test]
    fn chqf_round_trip_is_bit_exact(seed in any::<u64>()) {
        let (g, _) = grid16();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<f64> = (0..g.len()).map(|_| rng.gen::<f64>() * 10f64.powi(rng.gen_range(-300..300))).collect();
        let u = Field::new(g, vals).unwrap();
        let back = decode(&encode(&u)[..]).unwrap();
        prop_assert_eq!(back.grid(), u.grid());
        prop_assert!(back.values().iter().zip(u.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn dilation_keeps_mass_and_scales_moments(tau in 0.8f64..1.3, p in 1.6667f64..3.0, q in 1.6667f64..3.0) {
        let (g, k) = grid32();
        let u = Field::radial(g, &[0.0; 3], |r| (-0.5 * r * r / 2.0).exp());
        let d = dilate(&u, tau).unwrap();
        prop_assume!(d.resolved);
        prop_assert!((d.field.norm_sq() / u.norm_sq() - 1.0).abs() < 1e-8);
        prop_assert!((d.field.grad_norm_sq() / (tau * tau * u.grad_norm_sq()) - 1.0).abs() < 1e-4);
        let e = preset_params().dilation_exponent(p, q);
        let base = power_pair(k, &u, p, q).unwrap();
        let got = power_pair(k, &d.field, p, q).unwrap();
        prop_assert!((got / (tau.powf(e) * base) - 1.0).abs() < 1e-3, "ratio {}", got / (tau.powf(e) * base));
    }

    #[test]
    fn rho_zero_formula_agrees(nu in 0.01f64..50.0, mu in 0.01f64..50.0, p in 1.7f64..2.3, alpha in 0.5f64..2.9, b in 0u8..2) {
        let params = ProblemParams::new(3, alpha, b, 1.0).unwrap();
        let q = 2.0 * (3.0 + alpha + 2.0) / 3.0 - p;
        prop_assume!(q > params.p_l2crit() && q <= params.p_upper() && p > params.p_lower() && p < params.p_l2crit());
        let nl = Nonlinearity::two_power_preset(&params, nu, mu, p).unwrap();
        let bundle = ThresholdBundle::compute(&params, &nl, None, ConstantSource::Exact).unwrap();
        let (r, f) = (bundle.rho0.unwrap(), bundle.rho0_formula.unwrap());
        prop_assert!((r - f).abs() <= 1e-10 * f);
    }

    #[test]
    fn barrier_derivative_changes_sign_once(c1 in 0.01f64..10.0, c2 in 1e-4f64..1.0, a in 0.05f64..3.0) {
        let params = preset_params();
        let bar = choquard_core::thresholds::Barrier::new(&params, c1, c2);
        let ts: Vec<f64> = (0..4000).map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / 3999.0)).collect();
        let hs: Vec<f64> = ts.iter().map(|&t| bar.h(a, t)).collect();
        let signs: Vec<bool> = hs.windows(2).map(|w| w[1] > w[0]).collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        prop_assert_eq!(changes, 1);
    }

    #[test]
    fn lower_bound_of_energy(seed in any::<u64>(), frac in 0.2f64..1.0) {
        let (g, k) = grid32();
        let params = preset_params();
        let nl = Nonlinearity::reference_preset(&params).unwrap();
        let b0 = ThresholdBundle::compute(&params, &nl, None, ConstantSource::Exact).unwrap();
        let rho = 0.9 * b0.rho0.unwrap();
        let u = bumps(g, seed, false).rescale_mass(frac * rho).unwrap();
        let e = energy(&params, &nl, k, &u).unwrap().total;
        let gn2 = u.grad_norm_sq();
        let bound = b0.lower_critical_level(rho) + b0.barrier().h(rho, gn2.sqrt()) * gn2;
        prop_assert!(e >= bound - 1e-3 * e.abs(), "E {e} bound {bound}");
    }
}

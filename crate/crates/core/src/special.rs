//! Special functions: Gamma, error function, and the Epstein zeta function of
//! the cubic lattice used for singular-cell quadrature weights.

use statrs::function::{erf, gamma as sgamma};
use std::f64::consts::PI;

/// Gamma function (Lanczos approximation, ~15 significant digits).
pub fn gamma(x: f64) -> f64 {
    sgamma::gamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    sgamma::ln_gamma(x)
}

pub fn erf(x: f64) -> f64 {
    erf::erf(x)
}

/// Upper incomplete gamma function `Γ(a, x)` for `a > 0`, `x > 0`.
pub fn upper_incomplete_gamma(a: f64, x: f64) -> f64 {
    sgamma::gamma_ur(a, x) * sgamma::gamma(a)
}

/// Analytic continuation of `Z(s) = Σ_{n ∈ ℤ³ \ {0}} |n|^{-s}` for `0 < s < 3`.
///
/// Uses the theta-function splitting at `t = 1`:
///
/// `π^{-s/2} Γ(s/2) Z(s) = Σ' Γ(s/2, π|n|²)/(π|n|²)^{s/2}
///                        + Σ' Γ((3-s)/2, π|n|²)/(π|n|²)^{(3-s)/2}
///                        + 2/(s-3) - 2/s`.
///
/// Both lattice sums converge like `exp(-π|n|²)`; `|n_i| ≤ 5` is far beyond
/// double precision.
pub fn epstein_zeta_cubic(s: f64) -> f64 {
    assert!(s > 0.0 && s < 3.0, "epstein_zeta_cubic: s = {s} outside (0, 3)");
    const RANGE: i32 = 5;
    let a1 = 0.5 * s;
    let a2 = 0.5 * (3.0 - s);
    let mut acc = 0.0;
    for i in -RANGE..=RANGE {
        for j in -RANGE..=RANGE {
            for k in -RANGE..=RANGE {
                let n2 = (i * i + j * j + k * k) as f64;
                if n2 == 0.0 {
                    continue;
                }
                let x = PI * n2;
                acc += upper_incomplete_gamma(a1, x) / x.powf(a1)
                    + upper_incomplete_gamma(a2, x) / x.powf(a2);
            }
        }
    }
    acc += 2.0 / (s - 3.0) - 2.0 / s;
    acc * PI.powf(a1) / gamma(a1)
}

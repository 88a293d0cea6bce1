//! Riesz potential `I_α ∗ g` on the periodic box, plus a radial quadrature
//! oracle for `N = 3`.
//!
//! The kernel `A_α(N)/|x|^{N-α}` is sampled at minimum-image displacements,
//! which truncates it at the box half-diagonal, and transformed once. The
//! singular origin cell carries a finite weight chosen by [`SingularCell`].

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::quad;
use crate::special::{epstein_zeta_cubic, gamma};
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

/// `A_α(N) = Γ((N-α)/2) / (Γ(α/2) π^{N/2} 2^α)`.
pub fn riesz_constant(n: usize, alpha: f64) -> Result<f64> {
    let nf = n as f64;
    if n == 0 || !(alpha > 0.0 && alpha < nf) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, {n})")));
    }
    Ok(gamma(0.5 * (nf - alpha)) / (gamma(0.5 * alpha) * PI.powf(0.5 * nf) * 2f64.powf(alpha)))
}

/// Weight given to the `x = 0` cell of the sampled kernel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub enum SingularCell {
    /// `-Z(N-α) h^{α-N}` with `Z` the cubic-lattice Epstein zeta function:
    /// removes the leading error term of the punctured lattice sum, leaving
    /// `O(h^{α+2})`.
    #[default]
    ZetaCorrected,
    /// Mean of `|x|^{α-N}` over the ball with the cell's volume. First-order
    /// only; kept for comparison.
    BallAverage,
}

impl SingularCell {
    fn origin_value(self, alpha: f64, h: f64) -> f64 {
        let beta = 3.0 - alpha;
        match self {
            SingularCell::ZetaCorrected => -epstein_zeta_cubic(beta) * h.powf(-beta),
            SingularCell::BallAverage => {
                let a = (3.0 / (4.0 * PI)).cbrt() * h;
                3.0 * a.powf(-beta) / (3.0 - beta)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct RieszKernel {
    grid: Grid,
    alpha: f64,
    a_alpha: f64,
    symbol: Vec<f64>,
    trunc_radius: f64,
    singular_cell: SingularCell,
}

impl RieszKernel {
    pub fn new(grid: &Grid, alpha: f64) -> Result<Self> {
        Self::with_singular_cell(grid, alpha, SingularCell::default())
    }

    pub fn with_singular_cell(grid: &Grid, alpha: f64, singular_cell: SingularCell) -> Result<Self> {
        if grid.dim() != 3 {
            return Err(Error::InvalidParameter(format!(
                "Riesz kernel requires a 3-D grid, got dim = {}",
                grid.dim()
            )));
        }
        let a_alpha = riesz_constant(3, alpha)?;
        let values = sample_kernel(grid, alpha, a_alpha, singular_cell);
        let mut spec: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        grid.fft().forward(&mut spec);
        let vol = grid.cell_volume();
        let symbol: Vec<f64> = spec.iter().map(|z| vol * z.re).collect();
        let max = symbol.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        for (index, &s) in symbol.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::NonFinite(format!("kernel symbol at mode {index}")));
            }
            if s < -1e-12 * max {
                return Err(Error::KernelNotPositive { min: s, index });
            }
        }
        Ok(Self {
            grid: grid.clone(),
            alpha,
            a_alpha,
            symbol,
            trunc_radius: 0.5 * 3f64.sqrt() * grid.box_len(),
            singular_cell,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn a_alpha(&self) -> f64 {
        self.a_alpha
    }

    /// Transform of the truncated kernel, scaled so that `convolve` returns
    /// `h³ Σ_y K(x - y) g(y)`.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    pub fn trunc_radius(&self) -> f64 {
        self.trunc_radius
    }

    pub fn singular_cell(&self) -> SingularCell {
        self.singular_cell
    }

    /// `I_α ∗ g`.
    pub fn convolve(&self, g: &Field) -> Result<Field> {
        self.grid.ensure_same(g.grid())?;
        Ok(self.convolve_unchecked(g))
    }

    pub(crate) fn convolve_unchecked(&self, g: &Field) -> Field {
        let mut spec = g.to_spectrum();
        for (z, s) in spec.iter_mut().zip(&self.symbol) {
            *z *= *s;
        }
        Field::from_spectrum(&self.grid, spec)
    }

    /// `∫ (I_α ∗ g) h dx`.
    pub fn bilinear(&self, g: &Field, h: &Field) -> Result<f64> {
        Ok(self.convolve(g)?.inner(h))
    }
}

/// Kernel samples at minimum-image displacements in FFT order.
fn sample_kernel(grid: &Grid, alpha: f64, a_alpha: f64, cell: SingularCell) -> Vec<f64> {
    let m = grid.m();
    let h = grid.spacing();
    let beta = 3.0 - alpha;
    let disp: Vec<f64> = (0..m)
        .map(|i| {
            let s = if i <= m / 2 { i as f64 } else { i as f64 - m as f64 };
            s * h
        })
        .collect();
    let origin = a_alpha * cell.origin_value(alpha, h);
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..m {
        for j in 0..m {
            let rij = disp[i] * disp[i] + disp[j] * disp[j];
            for k in 0..m {
                let r2 = rij + disp[k] * disp[k];
                out.push(if r2 == 0.0 { origin } else { a_alpha * r2.powf(-0.5 * beta) });
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleValue {
    pub value: f64,
    pub error_estimate: f64,
    /// False when `|g(R_max)|` exceeds `10⁻¹⁰ max|g|` on the sampled profile.
    pub decayed: bool,
}

/// `(I_α ∗ g)(r)` for a radial `g` in three dimensions by the spherical-mean
/// formula
///
/// `A_α(3) 2π / ((α-1) r) ∫₀^{R} s g(s) [(r+s)^{α-1} - |r-s|^{α-1}] ds`,
///
/// with the bracket over `α - 1` replaced by `ln((r+s)/|r-s|)` at `α = 1` and
/// by `4π A_α ∫ s^{α-1} g(s) ds` at `r = 0`. The integral is split at `s = r`.
pub fn radial_oracle(alpha: f64, g: impl Fn(f64) -> f64, r_max: f64, r_eval: f64) -> Result<OracleValue> {
    let a_alpha = riesz_constant(3, alpha)?;
    if !(r_max > 0.0) || r_eval < 0.0 {
        return Err(Error::InvalidParameter(format!("need r_max > 0 and r >= 0, got {r_max}, {r_eval}")));
    }
    let gmax = (0..=1000).map(|i| g(r_max * i as f64 / 1000.0).abs()).fold(0.0f64, f64::max);
    let decayed = g(r_max).abs() <= 1e-10 * gmax;
    let (abs_tol, rel_tol) = (1e-12, 1e-13);
    let r = r_eval;
    if r <= 1e-9 * r_max {
        let res = quad::integrate(|s| s.powf(alpha - 1.0) * g(s), 0.0, r_max, abs_tol, rel_tol);
        return Ok(OracleValue {
            value: 4.0 * PI * a_alpha * res.value,
            error_estimate: 4.0 * PI * a_alpha * res.error,
            decayed,
        });
    }
    let log_case = (alpha - 1.0).abs() < 1e-9;
    let bracket = |s: f64| {
        if log_case {
            ((r + s) / (r - s).abs()).ln()
        } else {
            ((r + s).powf(alpha - 1.0) - (r - s).abs().powf(alpha - 1.0)) / (alpha - 1.0)
        }
    };
    let integrand = |s: f64| s * g(s) * bracket(s);
    let split = r.min(r_max);
    let lo = quad::integrate(integrand, 0.0, split, abs_tol, rel_tol);
    let hi = quad::integrate(integrand, split, r_max, abs_tol, rel_tol);
    let scale = 2.0 * PI * a_alpha / r;
    Ok(OracleValue {
        value: scale * (lo.value + hi.value),
        error_estimate: scale * (lo.error + hi.error),
        decayed,
    })
}

/// Uniformly sampled radial profile on `[0, r_max]` with cubic (Catmull–Rom)
/// interpolation; zero beyond `r_max`.
#[derive(Clone, Debug)]
pub struct SampledProfile {
    r_max: f64,
    samples: Vec<f64>,
}

impl SampledProfile {
    pub fn new(r_max: f64, samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 4 || !(r_max > 0.0) {
            return Err(Error::InvalidParameter("profile needs >= 4 samples and r_max > 0".into()));
        }
        Ok(Self { r_max, samples })
    }

    pub fn from_fn(r_max: f64, n: usize, g: impl Fn(f64) -> f64) -> Self {
        let samples = (0..n).map(|i| g(r_max * i as f64 / (n - 1) as f64)).collect();
        Self { r_max, samples }
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r < 0.0 || r > self.r_max {
            return 0.0;
        }
        let n = self.samples.len();
        let x = r / self.r_max * (n - 1) as f64;
        let i = (x.floor() as usize).min(n - 2);
        let t = x - i as f64;
        // Even extension at r = 0, linear extrapolation past the end.
        let at = |j: isize| -> f64 {
            if j < 0 {
                self.samples[(-j) as usize]
            } else if j as usize >= n {
                2.0 * self.samples[n - 1] - self.samples[n - 2]
            } else {
                self.samples[j as usize]
            }
        };
        let (p0, p1, p2, p3) = (at(i as isize - 1), at(i as isize), at(i as isize + 1), at(i as isize + 2));
        let t2 = t * t;
        let t3 = t2 * t;
        0.5 * (2.0 * p1 + (p2 - p0) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::erf;
    use approx::assert_relative_eq;

    #[test]
    fn riesz_constant_closed_forms() {
        assert_relative_eq!(riesz_constant(3, 2.0).unwrap(), 1.0 / (4.0 * PI), max_relative = 1e-13);
        assert_relative_eq!(riesz_constant(4, 2.0).unwrap(), 1.0 / (4.0 * PI * PI), max_relative = 1e-13);
        assert_relative_eq!(riesz_constant(3, 1.0).unwrap(), 1.0 / (2.0 * PI * PI), max_relative = 1e-13);
        assert!(riesz_constant(3, 3.0).is_err());
        assert!(riesz_constant(3, 0.0).is_err());
    }

    #[test]
    fn kernel_requires_3d() {
        let g = Grid::new(2, 16, 4.0).unwrap();
        assert!(RieszKernel::new(&g, 1.0).is_err());
        let g = Grid::new(3, 8, 4.0).unwrap();
        assert!(RieszKernel::new(&g, 3.0).is_err());
    }

    #[test]
    fn symbol_is_deterministic_and_dc_is_total_integral() {
        let g = Grid::new(3, 16, 8.0).unwrap();
        let k1 = RieszKernel::new(&g, 2.0).unwrap();
        let k2 = RieszKernel::new(&g, 2.0).unwrap();
        assert!(k1.symbol().iter().zip(k2.symbol()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let samples = sample_kernel(&g, 2.0, k1.a_alpha(), SingularCell::ZetaCorrected);
        let total: f64 = samples.iter().sum::<f64>() * g.cell_volume();
        assert_relative_eq!(k1.symbol()[0], total, max_relative = 1e-12);
    }

    #[test]
    fn symbol_even_under_mode_negation() {
        let g = Grid::new(3, 16, 8.0).unwrap();
        let k = RieszKernel::new(&g, 1.5).unwrap();
        let m = g.m();
        let idx = |i: usize, j: usize, l: usize| (i * m + j) * m + l;
        let neg = |i: usize| (m - i) % m;
        for &(i, j, l) in &[(1, 2, 3), (5, 0, 7), (8, 8, 1), (3, 15, 9)] {
            let a = k.symbol()[idx(i, j, l)];
            let b = k.symbol()[idx(neg(i), neg(j), neg(l))];
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn doubling_box_changes_only_far_field() {
        let h = 0.5;
        let g1 = Grid::new(3, 16, 16.0 * h).unwrap();
        let g2 = Grid::new(3, 32, 32.0 * h).unwrap();
        let a = riesz_constant(3, 2.0).unwrap();
        let s1 = sample_kernel(&g1, 2.0, a, SingularCell::ZetaCorrected);
        let s2 = sample_kernel(&g2, 2.0, a, SingularCell::ZetaCorrected);
        // Displacements with every |component| < 8 are identical.
        for i in 0..8 {
            for j in 0..8 {
                for l in 0..8 {
                    let v1 = s1[(i * 16 + j) * 16 + l];
                    let v2 = s2[(i * 32 + j) * 32 + l];
                    assert_eq!(v1.to_bits(), v2.to_bits());
                }
            }
        }
        assert_ne!(s1[9 * 16 * 16 + 1].to_bits(), s2[9 * 32 * 32 + 1].to_bits());
    }

    #[test]
    fn convolve_zero_and_mismatch() {
        let g = Grid::new(3, 16, 8.0).unwrap();
        let k = RieszKernel::new(&g, 2.0).unwrap();
        let z = k.convolve(&Field::zeros(&g)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        let other = Grid::new(3, 16, 9.0).unwrap();
        assert!(matches!(k.convolve(&Field::zeros(&other)), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn oracle_reduces_to_newtonian_rule() {
        // α = 2: 4πA ∫ s² g(s) / max(r, s) ds.
        let g = |s: f64| (-s * s).exp() * (1.0 + s);
        for &r in &[0.3, 1.0, 2.5] {
            let o = radial_oracle(2.0, g, 12.0, r).unwrap();
            let inner = quad::integrate(|s| s * s * g(s) / r, 0.0, r, 1e-14, 0.0).value;
            let outer = quad::integrate(|s| s * g(s), r, 12.0, 1e-14, 0.0).value;
            assert_relative_eq!(o.value, inner + outer, max_relative = 1e-11);
        }
    }

    #[test]
    fn oracle_matches_coulomb_of_gaussian() {
        let sigma = 1.3;
        let g = |s: f64| (-s * s / (2.0 * sigma * sigma)).exp();
        let q = (2.0 * PI * sigma * sigma).powf(1.5);
        for &r in &[1e-3, 0.5, 1.0, 3.0, 7.0] {
            let exact = q / (4.0 * PI * r) * erf(r / (sigma * 2f64.sqrt()));
            let o = radial_oracle(2.0, g, 15.0, r).unwrap();
            assert!(o.decayed);
            assert_relative_eq!(o.value, exact, max_relative = 1e-8);
        }
    }

    #[test]
    fn oracle_shell_theorem_beyond_bump() {
        // Smooth compact bump on [0, 1]; total integral Q.
        let bump = |s: f64| if s < 1.0 { (1.0 - s * s).powi(4) } else { 0.0 };
        let q = 4.0 * PI * quad::integrate(|s| s * s * bump(s), 0.0, 1.0, 1e-14, 0.0).value;
        for &r in &[1.5, 3.0, 6.0] {
            let o = radial_oracle(2.0, bump, 2.0, r).unwrap();
            assert_relative_eq!(o.value, q / (4.0 * PI * r), max_relative = 1e-10);
        }
    }

    #[test]
    fn oracle_log_case_is_limit_of_neighbours() {
        let g = |s: f64| (-s * s).exp();
        let at = |a: f64| radial_oracle(a, g, 10.0, 0.7).unwrap().value;
        let mid = at(1.0);
        let avg = 0.5 * (at(1.0 + 1e-5) + at(1.0 - 1e-5));
        assert_relative_eq!(mid, avg, max_relative = 1e-8);
        let near0 = radial_oracle(1.0, g, 10.0, 1e-6).unwrap().value;
        let at0 = radial_oracle(1.0, g, 10.0, 0.0).unwrap().value;
        assert_relative_eq!(near0, at0, max_relative = 1e-6);
    }

    #[test]
    fn oracle_flags_undecayed_profile() {
        let o = radial_oracle(2.0, |s: f64| (-0.01 * s).exp(), 5.0, 1.0).unwrap();
        assert!(!o.decayed);
    }

    #[test]
    fn sampled_profile_interpolates() {
        let p = SampledProfile::from_fn(8.0, 801, |s: f64| (-s * s).exp());
        for &r in &[0.0, 0.013, 0.5, 1.234, 3.0] {
            assert!((p.eval(r) - (-r * r).exp()).abs() < 1e-6);
        }
        assert_eq!(p.eval(9.0), 0.0);
    }
}

//! Uniform periodic box discretization and real-valued fields on it.
//!
//! Points sit at `x_i = -L/2 + i h` along each axis with `h = L/m`, so the
//! origin is the grid point with index `m/2`. Fields are stored row-major with
//! the last axis contiguous.

use crate::error::{Error, Result};
use crate::fft::FftNd;
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;

/// Largest supported point count `m^dim`.
pub const MAX_POINTS: usize = 1 << 24;

#[derive(Clone, Debug)]
pub struct Grid {
    dim: usize,
    m: usize,
    box_len: f64,
    fft: FftNd,
    k2: Arc<Vec<f64>>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.m == other.m && self.box_len == other.box_len
    }
}

impl Grid {
    pub fn new(dim: usize, m: usize, box_len: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!(
                "grid dimension {dim} unsupported (1, 2 or 3)"
            )));
        }
        if m < 8 || !m.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "points per axis m = {m} must be a power of two >= 8"
            )));
        }
        if !(box_len.is_finite() && box_len > 0.0) {
            return Err(Error::InvalidParameter(format!("box length L = {box_len} must be > 0")));
        }
        let n = m
            .checked_pow(dim as u32)
            .filter(|&n| n <= MAX_POINTS)
            .ok_or_else(|| {
                Error::InvalidParameter(format!("m^dim = {m}^{dim} exceeds {MAX_POINTS} points"))
            })?;
        let mut k2 = vec![0.0; n];
        let freq: Vec<f64> = (0..m).map(|i| wave_number(i, m, box_len)).collect();
        for (l, slot) in k2.iter_mut().enumerate() {
            let mut rest = l;
            let mut acc = 0.0;
            for _ in 0..dim {
                let w = freq[rest % m];
                acc += w * w;
                rest /= m;
            }
            *slot = acc;
        }
        Ok(Self {
            dim,
            m,
            box_len,
            fft: FftNd::new(dim, m),
            k2: Arc::new(k2),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn box_len(&self) -> f64 {
        self.box_len
    }

    pub fn spacing(&self) -> f64 {
        self.box_len / self.m as f64
    }

    pub fn len(&self) -> usize {
        self.k2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k2.is_empty()
    }

    /// Volume element `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinate of index `i` along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        -0.5 * self.box_len + i as f64 * self.spacing()
    }

    /// Squared angular wave numbers `|k|²` in FFT order.
    pub fn k_squared(&self) -> &[f64] {
        &self.k2
    }

    pub fn fft(&self) -> &FftNd {
        &self.fft
    }

    /// Splits a flat index into per-axis indices (first axis first).
    pub fn unravel(&self, mut l: usize, out: &mut [usize]) {
        for a in (0..self.dim).rev() {
            out[a] = l % self.m;
            l /= self.m;
        }
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "(dim={}, m={}, L={}) vs (dim={}, m={}, L={})",
                self.dim, self.m, self.box_len, other.dim, other.m, other.box_len
            )))
        }
    }
}

/// Angular wave number of FFT index `i`; the Nyquist index maps to `+π/h`.
pub fn wave_number(i: usize, m: usize, box_len: f64) -> f64 {
    let signed = if i <= m / 2 { i as f64 } else { i as f64 - m as f64 };
    2.0 * PI * signed / box_len
}

#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at index {i}")));
        }
        Ok(Self { grid: grid.clone(), values })
    }

    pub(crate) fn from_vec_unchecked(grid: &Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid: grid.clone(), values }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    /// Samples `f` at every grid point; `f` receives the point coordinates.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let coords: Vec<f64> = (0..grid.m()).map(|i| grid.coord(i)).collect();
        let mut idx = vec![0usize; dim];
        let mut x = vec![0.0; dim];
        let values = (0..grid.len())
            .map(|l| {
                grid.unravel(l, &mut idx);
                for a in 0..dim {
                    x[a] = coords[idx[a]];
                }
                f(&x)
            })
            .collect();
        Self { grid: grid.clone(), values }
    }

    /// Samples a radial profile `g(|x - center|)`.
    pub fn radial(grid: &Grid, center: &[f64], g: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| {
            let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
            g(r2.sqrt())
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec_unchecked(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &Field) -> Field {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        Field::from_vec_unchecked(&self.grid, values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Periodic rectangle rule `h^dim Σ u`.
    pub fn integrate(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    /// `∫ u v dx`.
    pub fn inner(&self, other: &Field) -> f64 {
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        self.grid.cell_volume() * s
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    /// `‖u‖₂`.
    pub fn mass(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn to_spectrum(&self) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.grid.fft().forward(&mut buf);
        buf
    }

    /// Real part of the inverse transform of `spec`.
    pub fn from_spectrum(grid: &Grid, mut spec: Vec<Complex64>) -> Field {
        grid.fft().inverse(&mut spec);
        Field::from_vec_unchecked(grid, spec.into_iter().map(|z| z.re).collect())
    }

    /// `‖u‖₂²` evaluated from Fourier coefficients (Parseval form).
    pub fn spectral_norm_sq(&self) -> f64 {
        let spec = self.to_spectrum();
        let s: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
        self.grid.cell_volume() * s / self.grid.len() as f64
    }

    /// `‖∇u‖₂²` as `Σ_k |k|² |û_k|²` with the rectangle-rule normalization.
    pub fn grad_norm_sq(&self) -> f64 {
        let spec = self.to_spectrum();
        let s: f64 = spec.iter().zip(self.grid.k_squared()).map(|(z, k2)| k2 * z.norm_sqr()).sum();
        self.grid.cell_volume() * s / self.grid.len() as f64
    }

    /// Spectral `-Δu`.
    pub fn neg_laplacian(&self) -> Field {
        let mut spec = self.to_spectrum();
        for (z, k2) in spec.iter_mut().zip(self.grid.k_squared()) {
            *z *= *k2;
        }
        Field::from_spectrum(&self.grid, spec)
    }

    /// Returns `(target / ‖u‖₂) u`.
    pub fn rescale_mass(&self, target: f64) -> Result<Field> {
        let mass = self.mass();
        if mass == 0.0 || !mass.is_finite() {
            return Err(Error::ZeroField);
        }
        Ok(self.scaled(target / mass))
    }
}

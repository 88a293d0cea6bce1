//! Multi-dimensional complex FFT on cubic row-major arrays.
//!
//! Each pass transforms the contiguous last axis and then rotates the axes
//! with an out-of-place transpose, so `dim` passes restore the original
//! layout. Inverse transforms are normalized by `1 / m^dim`.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone)]
pub struct FftNd {
    dim: usize,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("dim", &self.dim).field("m", &self.m).finish()
    }
}

impl FftNd {
    pub fn new(dim: usize, m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dim,
            m,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, data: &mut Vec<Complex64>) {
        self.run(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut Vec<Complex64>) {
        self.run(data, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    fn run(&self, data: &mut Vec<Complex64>, plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len(), "FftNd: buffer length mismatch");
        let m = self.m;
        let rows = self.len() / m;
        let mut scratch = vec![Complex64::default(); data.len()];
        for _ in 0..self.dim {
            transform_rows(data, plan, m);
            if self.dim > 1 {
                transpose(data, &mut scratch, rows, m);
                std::mem::swap(data, &mut scratch);
            }
        }
    }
}

#[cfg(feature = "parallel")]
fn transform_rows(data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>, m: usize) {
    const ROWS_PER_TASK: usize = 256;
    data.par_chunks_mut(m * ROWS_PER_TASK).for_each(|chunk| {
        let mut work = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(chunk, &mut work);
    });
}

#[cfg(not(feature = "parallel"))]
fn transform_rows(data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>, _m: usize) {
    let mut work = vec![Complex64::default(); plan.get_inplace_scratch_len()];
    plan.process_with_scratch(data, &mut work);
}

/// `dst[c * rows + r] = src[r * cols + c]`, blocked for cache locality.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 32;
    for r0 in (0..rows).step_by(B) {
        let r1 = (r0 + B).min(rows);
        for c0 in (0..cols).step_by(B) {
            let c1 = (c0 + B).min(cols);
            for r in r0..r1 {
                let row = &src[r * cols..];
                for c in c0..c1 {
                    dst[c * rows + r] = row[c];
                }
            }
        }
    }
}

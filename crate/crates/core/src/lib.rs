//! Normalized solutions of the mass-constrained Choquard equation
//!
//! `-Δu + λu = (I_α ∗ F(u)) f(u)` in `ℝ^N`, `‖u‖₂ = ρ`,
//!
//! computed on a periodic box by local minimization of the energy, together
//! with the explicit constants (Riesz, Hardy–Littlewood–Sobolev, Sobolev), the
//! barrier function and mass threshold that delimit the local minimization
//! region, and identity residuals used to certify candidates.

pub mod error;
pub mod fft;
pub mod fiber;
pub mod energy;
pub mod grid;
pub mod io;
pub mod minimize;
pub mod problem;
pub mod quad;
pub mod riesz;
pub mod special;
pub mod thresholds;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use problem::{Nonlinearity, PowerTerm, ProblemParams};
pub use riesz::RieszKernel;

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "CHOQUARD_THREADS";

/// Sizes the global worker pool from [`THREADS_ENV`] when it is set. Returns
/// the number of threads in use. Call once, before any parallel work.
#[cfg(feature = "parallel")]
pub fn init_threads_from_env() -> Result<usize> {
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidParameter(format!("{THREADS_ENV} = `{raw}` must be a positive integer")))?;
        // A pool built earlier in the process wins; that is not an error here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(rayon::current_num_threads())
}

#[cfg(not(feature = "parallel"))]
pub fn init_threads_from_env() -> Result<usize> {
    Ok(1)
}

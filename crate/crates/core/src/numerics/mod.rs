//! Derivative machinery shared by the solvers.
//!
//! Two families, chosen by boundary type and by what is being
//! differentiated:
//!
//! * `spectral` — FFT-based derivatives for fields that are genuinely
//!   periodic on the grid (densities, fluxes, wave functions).
//! * `stencil` — second-order finite differences that never wrap around
//!   the domain seam, with one-sided forms at the edges. Used for the
//!   action S, which is potential-like and in general jumps across the
//!   seam even on periodic grids.

pub mod spectral;
pub mod stencil;

pub use spectral::SpectralOps;

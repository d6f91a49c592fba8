//! Pseudo-spectral representation of mean-free periodic fields on
//! `[0, 2*pi]^d`, `d = 2, 3`, with full-square coefficient storage
//! `|k_i| <= K` and 2/3-rule dealiasing.

mod fft;
mod field;
mod grid;
mod ops;

pub use field::{FieldOps, ScalarSpectralField, VectorSpectralField};
pub use grid::{Band, WaveGrid};
pub use ops::{
    advect, advect_vector, laplacian, nse_bilinear, trilinear_b, trilinear_b_vector, PhysVelocity,
};
pub(crate) use fft::to_physical_oversampled;

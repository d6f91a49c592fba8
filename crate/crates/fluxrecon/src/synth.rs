//! Seeded synthesis of random spectral fields for experiments and tests.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::spectral::{ScalarSpectralField, VectorSpectralField, WaveGrid};

/// Random mean-free scalar with support `0 < |k| <= support` and power-law
/// amplitude envelope `|k|^{-decay}`; coefficients are complex Gaussian-ish
/// (uniform in the unit disc) scaled by `amplitude`.
pub fn random_scalar(
    grid: WaveGrid,
    support: usize,
    decay: f64,
    amplitude: f64,
    rng: &mut ChaCha8Rng,
) -> ScalarSpectralField {
    let mut phi = ScalarSpectralField::zero(grid);
    let ssq = (support * support) as i64;
    for idx in 0..grid.num_modes() {
        let k = grid.wave_at(idx);
        let ksq = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if ksq == 0 || ksq > ssq {
            continue;
        }
        // Visit each conjugate pair once: take the lexicographically
        // positive representative.
        if k < [-k[0], -k[1], -k[2]] {
            continue;
        }
        let re: f64 = rng.gen_range(-1.0..1.0);
        let im: f64 = rng.gen_range(-1.0..1.0);
        let env = (ksq as f64).sqrt().powf(-decay);
        phi.set_mode_pair(k, amplitude * env * Complex64::new(re, im));
    }
    phi
}

/// Random divergence-free vector field (each component drawn with
/// [`random_scalar`], then Leray-projected).
pub fn random_divergence_free(
    grid: WaveGrid,
    support: usize,
    decay: f64,
    amplitude: f64,
    rng: &mut ChaCha8Rng,
) -> VectorSpectralField {
    let comps = (0..grid.dim()).map(|_| random_scalar(grid, support, decay, amplitude, rng)).collect();
    let mut v = VectorSpectralField::from_components(comps).expect("component grids match");
    v.leray_project();
    v
}

/// Static shear velocity `v = (a sin(y), 0)` (divergence-free by construction).
pub fn shear_velocity(grid: WaveGrid, a: f64) -> VectorSpectralField {
    let mut v = VectorSpectralField::zero(grid);
    v.components_mut()[0].set_mode_pair([0, 1, 0], Complex64::new(0.0, -0.5 * a));
    v
}

/// Taylor-Green velocity `v = a (sin x cos y, -cos x sin y)` in 2D.
pub fn taylor_green(grid: WaveGrid, a: f64) -> VectorSpectralField {
    let mut v = VectorSpectralField::zero(grid);
    // sin x cos y = (1/2)(sin(x+y) + sin(x-y)): -i a/4 at (1,1) and (1,-1).
    let c = Complex64::new(0.0, -0.25 * a);
    v.components_mut()[0].set_mode_pair([1, 1, 0], c);
    v.components_mut()[0].set_mode_pair([1, -1, 0], c);
    // -cos x sin y = -(1/2)(sin(x+y) - sin(x-y)): +i a/4 at (1,1), -i a/4 at (1,-1).
    v.components_mut()[1].set_mode_pair([1, 1, 0], -c);
    v.components_mut()[1].set_mode_pair([1, -1, 0], c);
    v
}

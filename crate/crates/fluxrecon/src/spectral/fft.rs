//! Transforms between spectral coefficients and physical collocation values.
//!
//! Coefficients are analytic Fourier coefficients: the physical field is
//! `phi(x) = sum_k phi_k exp(i k . x)` sampled on the uniform grid with
//! `2K + 2` points per axis, and the forward transform divides by the point
//! count so that round trips are exact for resolved modes.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::ScalarSpectralField;
use super::grid::WaveGrid;

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let (planner, cache) = &mut *cell.borrow_mut();
        cache
            .entry((len, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .clone()
    })
}

/// In-place FFT of every line of `buf` along `axis`; `shape` has `dim`
/// entries, row-major layout (last axis contiguous).
fn fft_axis(buf: &mut [Complex64], shape: &[usize], axis: usize, inverse: bool) {
    let len = shape[axis];
    let fft = plan(len, inverse);
    let stride: usize = shape[axis + 1..].iter().product();
    let lines: usize = buf.len() / len;
    let mut line = vec![Complex64::new(0.0, 0.0); len];
    for l in 0..lines {
        // Decompose the line index into the (outer, inner) block structure
        // around `axis`.
        let inner = l % stride;
        let outer = l / stride;
        let base = outer * stride * len + inner;
        for (i, v) in line.iter_mut().enumerate() {
            *v = buf[base + i * stride];
        }
        fft.process(&mut line);
        for (i, v) in line.iter().enumerate() {
            buf[base + i * stride] = *v;
        }
    }
}

/// Evaluates the field on the physical collocation grid
/// (`(2K + 2)^dim` points, row-major).
pub(crate) fn to_physical(field: &ScalarSpectralField) -> Vec<f64> {
    let grid = field.grid();
    let dim = grid.dim();
    let m = grid.phys_per_axis();
    let shape: Vec<usize> = vec![m; dim];
    let mut buf = vec![Complex64::new(0.0, 0.0); grid.num_phys()];
    for (idx, &c) in field.coeffs().iter().enumerate() {
        let k = grid.wave_at(idx);
        let mut slot = 0usize;
        for &ki in k.iter().take(dim) {
            slot = slot * m + ki.rem_euclid(m as i64) as usize;
        }
        buf[slot] = c;
    }
    for axis in 0..dim {
        fft_axis(&mut buf, &shape, axis, true);
    }
    buf.into_iter().map(|c| c.re).collect()
}

/// Evaluates the field on a refined grid with `factor * (2K + 2)` points per
/// axis (zero-padded spectrum), for quadrature needing sub-collocation
/// resolution such as sup norms.
pub(crate) fn to_physical_oversampled(field: &ScalarSpectralField, factor: usize) -> Vec<f64> {
    let grid = field.grid();
    let dim = grid.dim();
    let m = grid.phys_per_axis() * factor.max(1);
    let shape: Vec<usize> = vec![m; dim];
    let mut buf = vec![Complex64::new(0.0, 0.0); m.pow(dim as u32)];
    for (idx, &c) in field.coeffs().iter().enumerate() {
        let k = grid.wave_at(idx);
        let mut slot = 0usize;
        for &ki in k.iter().take(dim) {
            slot = slot * m + ki.rem_euclid(m as i64) as usize;
        }
        buf[slot] = c;
    }
    for axis in 0..dim {
        fft_axis(&mut buf, &shape, axis, true);
    }
    buf.into_iter().map(|c| c.re).collect()
}

/// Projects physical collocation values back onto the retained modes
/// `|k_i| <= K`, symmetrized onto the reality manifold and mean-free.
pub(crate) fn from_physical(grid: WaveGrid, values: &[f64]) -> ScalarSpectralField {
    let dim = grid.dim();
    let m = grid.phys_per_axis();
    assert_eq!(values.len(), grid.num_phys(), "physical value count mismatch");
    let shape: Vec<usize> = vec![m; dim];
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for axis in 0..dim {
        fft_axis(&mut buf, &shape, axis, false);
    }
    let scale = 1.0 / grid.num_phys() as f64;
    let mut out = ScalarSpectralField::zero(grid);
    for idx in 0..grid.num_modes() {
        let k = grid.wave_at(idx);
        let mut slot = 0usize;
        for &ki in k.iter().take(dim) {
            slot = slot * m + ki.rem_euclid(m as i64) as usize;
        }
        out.coeffs_mut()[idx] = buf[slot] * scale;
    }
    out.enforce_reality();
    out
}

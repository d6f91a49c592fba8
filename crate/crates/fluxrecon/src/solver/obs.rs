//! Recorded low-mode observations of a truth trajectory.

use crate::error::{FluxError, Result};
use crate::spectral::FieldOps;

/// Uniformly sampled low-mode observations `P_N phi(t_i)`, optionally with
/// the recorded low-mode time derivatives `d/dt P_N phi(t_i)`.
///
/// Generic over the field type: scalar observations for transport-diffusion,
/// vector observations for Navier-Stokes.
#[derive(Debug, Clone)]
pub struct ObservationStream<F> {
    t0: f64,
    dt: f64,
    n_obs: usize,
    low: Vec<F>,
    rhs_low: Option<Vec<F>>,
}

impl<F: FieldOps> ObservationStream<F> {
    /// Wraps recorded samples. `rhs_low`, when present, must align with
    /// `low` one-to-one.
    pub fn new(t0: f64, dt: f64, n_obs: usize, low: Vec<F>, rhs_low: Option<Vec<F>>) -> Result<Self> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(FluxError::Config(format!("observation step must be positive, got {dt}")));
        }
        if low.is_empty() {
            return Err(FluxError::Config("observation stream must not be empty".into()));
        }
        if let Some(r) = &rhs_low {
            if r.len() != low.len() {
                return Err(FluxError::Config(format!(
                    "rhs_low has {} samples, observations have {}",
                    r.len(),
                    low.len()
                )));
            }
        }
        Ok(Self { t0, dt, n_obs, low, rhs_low })
    }

    /// Start time of the record.
    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Sampling interval.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Observation cutoff `N`.
    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.low.len()
    }

    /// Whether the stream has no samples (never true for a valid stream).
    pub fn is_empty(&self) -> bool {
        self.low.is_empty()
    }

    /// Time of the last sample.
    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * (self.low.len() - 1) as f64
    }

    /// Whether time derivatives were recorded.
    pub fn has_rhs(&self) -> bool {
        self.rhs_low.is_some()
    }

    /// Observation at sample index `i`.
    pub fn sample(&self, i: usize) -> &F {
        &self.low[i]
    }

    /// All samples.
    pub fn samples(&self) -> &[F] {
        &self.low
    }

    /// Recorded right-hand sides, if any.
    pub fn rhs_samples(&self) -> Option<&[F]> {
        self.rhs_low.as_deref()
    }

    /// Observation at arbitrary time by piecewise-cubic Lagrange
    /// interpolation (exact at sample times, `O(dt^4)` between them);
    /// clamped to the record interval.
    pub fn low_at(&self, t: f64) -> F {
        interpolate(&self.low, self.t0, self.dt, t)
    }

    /// Low-mode time derivative at sample index `i`: the recorded right-hand
    /// side when available, otherwise a fourth-order finite difference of the
    /// samples (needs at least 5 samples).
    pub fn time_derivative(&self, i: usize) -> Result<F> {
        if let Some(rhs) = &self.rhs_low {
            return Ok(rhs[i].clone());
        }
        finite_difference(&self.low, self.dt, i)
    }
}

/// Piecewise-cubic Lagrange interpolation on a uniform grid.
pub(crate) fn interpolate<F: FieldOps>(samples: &[F], t0: f64, dt: f64, t: f64) -> F {
    let n = samples.len();
    if n == 1 {
        return samples[0].clone();
    }
    let x = ((t - t0) / dt).clamp(0.0, (n - 1) as f64);
    let stencil = n.min(4);
    let i0 = ((x.floor() as usize).saturating_sub(1)).min(n - stencil);
    let mut out = samples[i0].zero_like();
    for j in 0..stencil {
        let xj = (i0 + j) as f64;
        let mut w = 1.0;
        for m in 0..stencil {
            if m != j {
                let xm = (i0 + m) as f64;
                w *= (x - xm) / (xj - xm);
            }
        }
        out.axpy_op(w, &samples[i0 + j]);
    }
    out
}

/// Fourth-order finite-difference time derivative at sample `i` (central
/// in the interior, one-sided near the ends).
pub(crate) fn finite_difference<F: FieldOps>(samples: &[F], dt: f64, i: usize) -> Result<F> {
    let n = samples.len();
    if n < 5 {
        return Err(FluxError::Config(format!(
            "finite-difference derivative needs at least 5 samples, have {n}"
        )));
    }
    if i >= n {
        return Err(FluxError::Config(format!("sample index {i} out of range ({n} samples)")));
    }
    let mut out = samples[0].zero_like();
    let h12 = 1.0 / (12.0 * dt);
    let mut add = |w: f64, j: usize| out.axpy_op(w * h12, &samples[j]);
    if i >= 2 && i + 2 < n {
        add(1.0, i - 2);
        add(-8.0, i - 1);
        add(8.0, i + 1);
        add(-1.0, i + 2);
    } else if i == 0 {
        add(-25.0, 0);
        add(48.0, 1);
        add(-36.0, 2);
        add(16.0, 3);
        add(-3.0, 4);
    } else if i == 1 {
        add(-3.0, 0);
        add(-10.0, 1);
        add(18.0, 2);
        add(-6.0, 3);
        add(1.0, 4);
    } else if i == n - 2 {
        add(3.0, n - 1);
        add(10.0, n - 2);
        add(-18.0, n - 3);
        add(6.0, n - 4);
        add(-1.0, n - 5);
    } else {
        // i == n - 1
        add(25.0, n - 1);
        add(-48.0, n - 2);
        add(36.0, n - 3);
        add(-16.0, n - 4);
        add(3.0, n - 5);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{ScalarSpectralField, WaveGrid};
    use num_complex::Complex64;

    fn mode_series(vals: &[f64]) -> Vec<ScalarSpectralField> {
        let grid = WaveGrid::new(2, 3).unwrap();
        vals.iter()
            .map(|&v| {
                let mut f = ScalarSpectralField::zero(grid);
                f.set_mode_pair([1, 0, 0], Complex64::new(v, 0.0));
                f
            })
            .collect()
    }

    #[test]
    fn interpolation_is_exact_at_samples_and_for_cubics() {
        let p = |t: f64| 1.0 + t + 0.5 * t * t - 0.25 * t * t * t;
        let dt = 0.1;
        let samples = mode_series(&(0..8).map(|i| p(i as f64 * dt)).collect::<Vec<_>>());
        let stream = ObservationStream::new(0.0, dt, 3, samples, None).unwrap();
        for &t in &[0.0, 0.1, 0.35, 0.512, 0.7] {
            let got = stream.low_at(t).mode([1, 0, 0]).re;
            assert!((got - p(t)).abs() < 1e-13, "t = {t}: {got} vs {}", p(t));
        }
    }

    #[test]
    fn finite_difference_is_fourth_order() {
        let f = |t: f64| (2.0 * t).sin();
        let df = |t: f64| 2.0 * (2.0 * t).cos();
        let err_at = |dt: f64| {
            let n = 11;
            let samples = mode_series(&(0..n).map(|i| f(i as f64 * dt)).collect::<Vec<_>>());
            let stream = ObservationStream::new(0.0, dt, 3, samples, None).unwrap();
            (0..n)
                .map(|i| {
                    let d = stream.time_derivative(i).unwrap().mode([1, 0, 0]).re;
                    (d - df(i as f64 * dt)).abs()
                })
                .fold(0.0f64, f64::max)
        };
        let e1 = err_at(0.02);
        let e2 = err_at(0.01);
        let order = (e1 / e2).log2();
        assert!(order > 3.5, "observed order {order}");
    }

    #[test]
    fn recorded_rhs_is_used_verbatim() {
        let samples = mode_series(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let rhs = mode_series(&[9.0, 9.0, 9.0, 9.0, 9.0]);
        let stream = ObservationStream::new(0.0, 0.1, 3, samples, Some(rhs)).unwrap();
        assert_eq!(stream.time_derivative(2).unwrap().mode([1, 0, 0]).re, 9.0);
    }

    #[test]
    fn too_few_samples_for_derivative() {
        let samples = mode_series(&[1.0, 2.0, 3.0]);
        let stream = ObservationStream::new(0.0, 0.1, 3, samples, None).unwrap();
        assert!(stream.time_derivative(0).is_err());
    }
}

//! Truth trajectory generation: integrate the reference dynamics, record the
//! low-mode observations (and their exact right-hand sides), and optionally
//! keep the full states for twin-experiment diagnostics.

use crate::error::{FluxError, Result};
use crate::spectral::{
    Band, ScalarSpectralField, VectorSpectralField, WaveGrid,
};

use super::obs::ObservationStream;
use super::systems::{NseTruthSystem, TdTruthSystem};
use super::{NSEConfig, TDConfig};

/// A generated truth trajectory: the observation stream plus (optionally)
/// the full states at the sample times.
#[derive(Debug, Clone)]
pub struct TruthRecord<F> {
    /// Low-mode observations with recorded right-hand sides.
    pub stream: ObservationStream<F>,
    /// Full states at the sample times (empty if not kept).
    pub states: Vec<F>,
    /// Final state.
    pub final_state: F,
}

/// Integrates the transport-diffusion truth for `steps` steps from `t0`,
/// recording `P_N phi` and `d/dt P_N phi` every step.
#[allow(clippy::too_many_arguments)]
pub fn generate_truth_td(
    cfg: TDConfig,
    v: &VectorSpectralField,
    force: &dyn Fn(f64) -> ScalarSpectralField,
    phi0: &ScalarSpectralField,
    t0: f64,
    steps: usize,
    n_obs: usize,
    keep_states: bool,
) -> Result<TruthRecord<ScalarSpectralField>> {
    let sys = TdTruthSystem::new(cfg, v)?;
    let mut phi = phi0.clone();
    let mut low = Vec::with_capacity(steps + 1);
    let mut rhs_low = Vec::with_capacity(steps + 1);
    let mut states = Vec::new();
    let mut record =
        |phi: &ScalarSpectralField, t: f64, states: &mut Vec<ScalarSpectralField>| {
            low.push(phi.project(n_obs, Band::Low));
            rhs_low.push(sys.rhs(phi, t, force).project(n_obs, Band::Low));
            if keep_states {
                states.push(phi.clone());
            }
        };
    let mut t = t0;
    record(&phi, t, &mut states);
    for _ in 0..steps {
        sys.step(&mut phi, t, force)?;
        t += cfg.dt;
        record(&phi, t, &mut states);
    }
    Ok(TruthRecord {
        stream: ObservationStream::new(t0, cfg.dt, n_obs, low, Some(rhs_low))?,
        states,
        final_state: phi,
    })
}

/// Integrates the 2D Navier-Stokes truth for `steps` steps from `t0`,
/// recording `P_N u` and `d/dt P_N u` every step.
#[allow(clippy::too_many_arguments)]
pub fn generate_truth_nse(
    cfg: NSEConfig,
    force: &dyn Fn(f64) -> VectorSpectralField,
    u0: &VectorSpectralField,
    t0: f64,
    steps: usize,
    n_obs: usize,
    keep_states: bool,
) -> Result<TruthRecord<VectorSpectralField>> {
    let grid = u0.grid();
    let sys = NseTruthSystem::new(grid, cfg)?;
    let mut u = u0.clone();
    u.leray_project();
    let mut low = Vec::with_capacity(steps + 1);
    let mut rhs_low = Vec::with_capacity(steps + 1);
    let mut states = Vec::new();
    let mut record = |u: &VectorSpectralField, t: f64, states: &mut Vec<VectorSpectralField>| {
        low.push(u.project(n_obs, Band::Low));
        rhs_low.push(sys.rhs(u, t, force).project(n_obs, Band::Low));
        if keep_states {
            states.push(u.clone());
        }
    };
    let mut t = t0;
    record(&u, t, &mut states);
    for _ in 0..steps {
        sys.step(&mut u, t, force)?;
        t += cfg.dt;
        record(&u, t, &mut states);
    }
    Ok(TruthRecord {
        stream: ObservationStream::new(t0, cfg.dt, n_obs, low, Some(rhs_low))?,
        states,
        final_state: u,
    })
}

/// Solves the stationary transport-diffusion balance
/// `kappa Lap(phi) - v . grad(phi) + g = 0` by the damped fixed-point
/// iteration `phi <- (-kappa Lap)^{-1} (g - v . grad(phi))`, which contracts
/// whenever the advection is subdominant to diffusion (moderate Peclet
/// number). Stops when the relative residual
/// `|rhs| / max(|g|, |phi|)` falls below `tol`.
pub fn stationary_truth_td(
    cfg: TDConfig,
    v: &VectorSpectralField,
    g: &ScalarSpectralField,
    phi0: &ScalarSpectralField,
    tol: f64,
    max_iters: usize,
) -> Result<ScalarSpectralField> {
    let grid = g.grid();
    let vel = crate::spectral::PhysVelocity::new(v);
    let inv_lap = |f: &ScalarSpectralField| {
        let mut out = f.clone();
        for idx in 0..grid.num_modes() {
            let ksq = WaveGrid::k_sq(grid.wave_at(idx));
            let c = &mut out.coeffs_mut()[idx];
            if ksq == 0.0 {
                *c = num_complex::Complex64::new(0.0, 0.0);
            } else {
                *c /= cfg.kappa * ksq;
            }
        }
        out
    };
    let scale_ref = g.seminorm(0.0).max(1e-300);
    let mut phi = phi0.clone();
    for _ in 0..max_iters {
        let adv = vel.advect(&phi);
        // Residual of the continuous balance.
        let mut rhs = crate::spectral::laplacian(&phi);
        rhs.scale(cfg.kappa);
        rhs.axpy(-1.0, &adv);
        rhs.axpy(1.0, g);
        if rhs.seminorm(0.0) / scale_ref.max(phi.seminorm(0.0)) < tol {
            return Ok(phi);
        }
        let mut src = g.clone();
        src.axpy(-1.0, &adv);
        phi = inv_lap(&src);
        if !phi.is_finite() {
            return Err(FluxError::BlowUp { t: 0.0 });
        }
    }
    Err(FluxError::Infeasible(format!(
        "stationary iteration did not reach residual {tol:.1e} in {max_iters} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn recorded_rhs_matches_finite_difference() {
        let grid = WaveGrid::new(2, 8).unwrap();
        let cfg = TDConfig { kappa: 0.8, dt: 5e-3 };
        let v = synth::shear_velocity(grid, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = synth::random_scalar(grid, 3, 1.0, 1.0, &mut rng);
        let phi0 = synth::random_scalar(grid, 6, 1.0, 1.0, &mut rng);
        let rec =
            generate_truth_td(cfg, &v, &|_| g.clone(), &phi0, 0.0, 40, 4, false).unwrap();
        // Compare the recorded analytic rhs with the 4th-order FD of the
        // observation samples at an interior index.
        let fd = super::super::obs::finite_difference(rec.stream.samples(), cfg.dt, 20).unwrap();
        let rhs = rec.stream.time_derivative(20).unwrap();
        let diff = fd.sub(&rhs).seminorm(0.0) / rhs.seminorm(0.0).max(1e-300);
        assert!(diff < 1e-6, "relative FD mismatch {diff}");
    }

    #[test]
    fn stationary_state_balances_rhs() {
        let grid = WaveGrid::new(2, 8).unwrap();
        let cfg = TDConfig { kappa: 1.0, dt: 0.02 };
        let v = synth::shear_velocity(grid, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = synth::random_scalar(grid, 3, 1.0, 1.0, &mut rng);
        let phi0 = ScalarSpectralField::zero(grid);
        let phi = stationary_truth_td(cfg, &v, &g, &phi0, 1e-10, 500).unwrap();
        let sys = TdTruthSystem::new(cfg, &v).unwrap();
        let res = sys.rhs(&phi, 0.0, &|_| g.clone()).seminorm(0.0);
        assert!(res / g.seminorm(0.0) < 1e-10, "residual {res}");
    }
}

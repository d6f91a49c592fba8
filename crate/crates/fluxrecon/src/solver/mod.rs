//! Time integration of the truth equations, the nudged sieve equations, and
//! the coupled nudging systems, all with an integrating-factor RK4 scheme
//! that treats the diagonal linear part (diffusion and low-mode damping)
//! exactly.

mod integrator;
mod obs;
pub(crate) mod systems;
mod truth;

pub use integrator::IfRk4;
pub use obs::ObservationStream;
pub use systems::{
    step_nse, step_nudged_nse, step_nudged_td, step_nudging_nse_system, step_nudging_td_system,
    step_td, NseTruthSystem, NudgedNseSystem, NudgedTdSystem, NudgingNseSystem, NudgingTdSystem,
    TdTruthSystem,
};
pub use truth::{generate_truth_nse, generate_truth_td, stationary_truth_td, TruthRecord};

use crate::error::{FluxError, Result};

/// Parameters of the transport-diffusion equation
/// `d phi / dt + v . grad(phi) = kappa Lap(phi) + g`.
#[derive(Debug, Clone, Copy)]
pub struct TDConfig {
    /// Diffusivity `kappa > 0`.
    pub kappa: f64,
    /// Time step.
    pub dt: f64,
}

/// Parameters of the 2D incompressible Navier-Stokes equations.
#[derive(Debug, Clone, Copy)]
pub struct NSEConfig {
    /// Viscosity `nu > 0`.
    pub nu: f64,
    /// Time step.
    pub dt: f64,
    /// Test hook: freeze the bilinear term to zero, reducing the equations
    /// to Stokes flow.
    pub freeze_nonlinearity: bool,
}

/// Nudging gains and observation cutoff.
///
/// The sieve equations use the single gain `mu1` (call it `mu`); the coupled
/// nudging systems use both `mu1` (state gain) and `mu2` (force gain).
#[derive(Debug, Clone, Copy)]
pub struct NudgeParams {
    /// Observation cutoff `N`: modes `0 < |k| <= N` are observed.
    pub n_obs: usize,
    /// State nudging gain.
    pub mu1: f64,
    /// Force nudging gain (0 for the sieve equations).
    pub mu2: f64,
}

impl NudgeParams {
    /// Single-gain parameters for the sieve equations.
    pub fn single(n_obs: usize, mu: f64) -> Self {
        Self { n_obs, mu1: mu, mu2: 0.0 }
    }
}

/// Checks the explicit-part stability bounds on the time step:
/// `dt <= 0.5 * CFL * dx / |v|_inf` (advection) and `dt <= 0.5 / mu_eff`
/// (low-mode damping), with `CFL = 1`.
pub fn check_time_step(dt: f64, dx: f64, max_speed: f64, mu_eff: f64) -> Result<()> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(FluxError::TimeStep(format!("dt must be positive and finite, got {dt}")));
    }
    if max_speed > 0.0 {
        let limit = 0.5 * dx / max_speed;
        if dt > limit {
            return Err(FluxError::TimeStep(format!(
                "dt = {dt} exceeds advective limit {limit} (dx = {dx}, |v|_inf = {max_speed})"
            )));
        }
    }
    if mu_eff > 0.0 {
        let limit = 0.5 / mu_eff;
        if dt > limit {
            return Err(FluxError::TimeStep(format!(
                "dt = {dt} exceeds damping limit {limit} (mu_eff = {mu_eff})"
            )));
        }
    }
    Ok(())
}

/// Magnitude beyond which the integration is declared blown up.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

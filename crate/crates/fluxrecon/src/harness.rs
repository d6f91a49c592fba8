//! Twin-experiment orchestration: experiment configuration, co-integrated
//! nudging twins, decay-rate fitting, parameter sweeps, and artifact export.
//!
//! The nudging twins integrate the truth and the assimilating system as one
//! stacked semi-discrete ODE so the observations are available exactly at the
//! RK4 substages; this keeps the reachable error floor at integrator
//! tolerance instead of observation-interpolation accuracy.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{
    grashof_report, nudging_nse_params, nudging_td_params, sieve_nse_mu_interval,
    sieve_td_mu_interval, ConstantsTable, VelocityFunctionals,
};
use crate::error::{FluxError, Result};
use crate::forcing::{EnslavingMap, QuasiFiniteForce, QuasiFiniteVectorForce};
use crate::io::{atomic_write, write_snapshot_file};
use crate::sieve::{run_sieve_nse, run_sieve_td, stationary_sieve_td, SieveConfig, SieveTruth};
use crate::solver::{
    generate_truth_nse, generate_truth_td, stationary_truth_td, IfRk4, NSEConfig, NudgeParams,
    NudgingNseSystem, NudgingTdSystem, TDConfig,
};
use crate::solver::systems::{diffusion_lambda, repeat_per_component, scalar_from, vector_from};
use crate::spectral::{
    Band, FieldOps, PhysVelocity, ScalarSpectralField, VectorSpectralField, WaveGrid,
};
use crate::synth;

/// Error time series of a twin experiment: synchronization errors of the
/// state estimate and model errors of the force estimate, with fitted decay
/// rates attached after the run.
#[derive(Debug, Clone, Default)]
pub struct ErrorSeries {
    /// Sample times (or stage indices for per-stage series).
    pub times: Vec<f64>,
    /// `L^2` synchronization error of the state estimate.
    pub sync_l2: Vec<f64>,
    /// `H^1` synchronization error of the state estimate.
    pub sync_h1: Vec<f64>,
    /// Dual-norm model error of the completed force estimate.
    pub model_hm1: Vec<f64>,
    /// `L^2` model error of the completed force estimate.
    pub model_l2: Vec<f64>,
    /// Auxiliary energy `mu2 |state|^2 + |l|^2` (a-priori bound diagnostic).
    pub aux_energy: Vec<f64>,
    /// Fitted decay rates per column.
    pub fits: Vec<ColumnFit>,
}

/// A fitted decay rate attached to a named column.
#[derive(Debug, Clone)]
pub struct ColumnFit {
    /// Column name as in the CSV header.
    pub column: String,
    /// Fit result.
    pub fit: FitResult,
}

impl ErrorSeries {
    /// Appends one sample row.
    pub fn push(&mut self, t: f64, sync_l2: f64, sync_h1: f64, model_hm1: f64, model_l2: f64, aux: f64) {
        self.times.push(t);
        self.sync_l2.push(sync_l2);
        self.sync_h1.push(sync_h1);
        self.model_hm1.push(model_hm1);
        self.model_l2.push(model_l2);
        self.aux_energy.push(aux);
    }

    /// Number of sample rows.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// Whether the series is empty.
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Column values by CSV header name.
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        match name {
            "t" => Some(&self.times),
            "sync_err_L2" => Some(&self.sync_l2),
            "sync_err_H1" => Some(&self.sync_h1),
            "model_err_Hm1" => Some(&self.model_hm1),
            "model_err_L2" => Some(&self.model_l2),
            "aux_energy" => Some(&self.aux_energy),
            _ => None,
        }
    }

    /// Fits an exponential decay rate to one column over the time window
    /// `[window.0, window.1]` (inclusive).
    pub fn fit(&self, column: &str, window: (f64, f64)) -> Result<FitResult> {
        let values = self
            .column(column)
            .ok_or_else(|| FluxError::Config(format!("unknown series column '{column}'")))?;
        let mut ts = Vec::new();
        let mut vs = Vec::new();
        for (&t, &v) in self.times.iter().zip(values) {
            if t >= window.0 && t <= window.1 {
                ts.push(t);
                vs.push(v);
            }
        }
        fit_decay_rate(&ts, &vs)
    }

    /// Serializes the rows as CSV (deterministic float formatting).
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "sync_err_L2", "sync_err_H1", "model_err_Hm1", "model_err_L2", "aux_energy"])
            .map_err(|e| FluxError::Format(e.to_string()))?;
        for i in 0..self.len() {
            w.write_record([
                format!("{:.17e}", self.times[i]),
                format!("{:.17e}", self.sync_l2[i]),
                format!("{:.17e}", self.sync_h1[i]),
                format!("{:.17e}", self.model_hm1[i]),
                format!("{:.17e}", self.model_l2[i]),
                format!("{:.17e}", self.aux_energy[i]),
            ])
            .map_err(|e| FluxError::Format(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| FluxError::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| FluxError::Format(e.to_string()))
    }
}

/// Result of a log-linear decay fit.
#[derive(Debug, Clone, Copy)]
pub struct FitResult {
    /// Slope of the least-squares line on `ln(value)` against time: the
    /// exponential decay rate (negative when decaying).
    pub rate: f64,
    /// Intercept of the line at `t = 0` (in log space).
    pub intercept: f64,
    /// RMS log-residual of the fit divided by the total log-decay over the
    /// fitted samples (a fraction; small means clean exponential decay).
    pub residual: f64,
    /// Number of samples actually fitted.
    pub samples_used: usize,
    /// Whether trailing samples were dropped because they reached the error
    /// floor (`1e2 * machine epsilon * initial value`) or were nonpositive.
    pub floored: bool,
}

/// Least-squares exponential decay rate of `values` over `times`.
///
/// Fits a line to `ln(values)`; samples at or below the error floor
/// `1e2 * eps_machine * values[0]` (and everything after the first such
/// sample) are excluded from the fit and flagged. Requires at least eight
/// fitted samples.
pub fn fit_decay_rate(times: &[f64], values: &[f64]) -> Result<FitResult> {
    if times.len() != values.len() {
        return Err(FluxError::Config("times and values must have equal length".into()));
    }
    let first = *values.first().ok_or_else(|| FluxError::Config("empty series".into()))?;
    if !(first > 0.0) {
        return Err(FluxError::Config("series must start positive to fit a decay rate".into()));
    }
    let floor = 1e2 * f64::EPSILON * first;
    let mut kept = 0;
    let mut floored = false;
    for &v in values {
        if v <= floor || !v.is_finite() {
            floored = true;
            break;
        }
        kept += 1;
    }
    if kept < 8 {
        return Err(FluxError::Config(format!(
            "need at least 8 samples above the error floor to fit, got {kept}"
        )));
    }
    let (ts, vs) = (&times[..kept], &values[..kept]);
    let n = kept as f64;
    let logs: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
    let mean_t = ts.iter().sum::<f64>() / n;
    let mean_y = logs.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&t, &y) in ts.iter().zip(&logs) {
        sxx += (t - mean_t) * (t - mean_t);
        sxy += (t - mean_t) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(FluxError::Config("all sample times coincide".into()));
    }
    let rate = sxy / sxx;
    let intercept = mean_y - rate * mean_t;
    let mut ss = 0.0;
    for (&t, &y) in ts.iter().zip(&logs) {
        let r = y - (intercept + rate * t);
        ss += r * r;
    }
    let rms = (ss / n).sqrt();
    let span = (logs[0] - logs[kept - 1]).abs().max(f64::EPSILON);
    Ok(FitResult { rate, intercept, residual: rms / span, samples_used: kept, floored })
}

/// Output of a co-integrated nudging twin run.
#[derive(Debug, Clone)]
pub struct TwinRun<F> {
    /// Error time series.
    pub series: ErrorSeries,
    /// Final completed force estimate `l + F_N(l)`.
    pub force_estimate: F,
    /// Final state estimate.
    pub state_estimate: F,
    /// Final truth state.
    pub truth_state: F,
}

fn raised_map(map: &EnslavingMap, n_obs: usize) -> Result<EnslavingMap> {
    if map.output_rank() < n_obs {
        map.raise_rank(n_obs)
    } else {
        Ok(map.clone())
    }
}

/// Runs a transport-diffusion nudging twin: the truth and the coupled
/// nudging system are advanced together as one stacked integrating-factor
/// RK4 system, and the error series is sampled every `sample_every` steps.
#[allow(clippy::too_many_arguments)]
pub fn twin_nudging_td(
    cfg: TDConfig,
    v: &VectorSpectralField,
    params: NudgeParams,
    force: &QuasiFiniteForce,
    phi0: &ScalarSpectralField,
    psi0: &ScalarSpectralField,
    l0: &ScalarSpectralField,
    t0: f64,
    steps: usize,
    sample_every: usize,
) -> Result<TwinRun<ScalarSpectralField>> {
    let grid = v.grid();
    let n = grid.num_modes();
    let every = sample_every.max(1);
    // The recovered low band already holds the in-band part of the tail, so
    // the completion map must only produce modes beyond the cutoff.
    let map = raised_map(&force.map, params.n_obs)?;
    let sys = NudgingTdSystem::new(cfg, v, params, map.clone())?;
    let mut lambda = diffusion_lambda(grid, cfg.kappa);
    lambda.extend(sys.lambda());
    let stepper = IfRk4::new(&lambda, cfg.dt);
    let vel = PhysVelocity::new(v);
    let steady = if force.low1.is_none() { Some(force.full(t0)) } else { None };
    let g_at = |t: f64| match &steady {
        Some(g) => g.clone(),
        None => force.full(t),
    };

    let mut y = vec![Complex64::new(0.0, 0.0); 3 * n];
    phi0.pack(&mut y[..n]);
    psi0.pack(&mut y[n..2 * n]);
    l0.project(params.n_obs, Band::Low).pack(&mut y[2 * n..]);

    let mut series = ErrorSeries::default();
    let record = |series: &mut ErrorSeries, y: &[Complex64], t: f64| {
        let phi = scalar_from(grid, &y[..n]);
        let psi = scalar_from(grid, &y[n..2 * n]);
        let l = scalar_from(grid, &y[2 * n..]).project(params.n_obs, Band::Low);
        let sync = psi.sub(&phi);
        let mut f_est = map.evaluate(&l);
        f_est.axpy(1.0, &l);
        let model = f_est.sub(&g_at(t));
        let aux = params.mu2 * psi.seminorm(0.0).powi(2) + l.seminorm(0.0).powi(2);
        series.push(
            t,
            sync.seminorm(0.0),
            sync.seminorm(1.0),
            model.seminorm(-1.0),
            model.seminorm(0.0),
            aux,
        );
        (f_est, psi, phi)
    };
    record(&mut series, &y, t0);

    let mut t = t0;
    for step in 0..steps {
        stepper.step(&mut y, t, |y, s, out| {
            let phi = scalar_from(grid, &y[..n]);
            let mut r = vel.advect(&phi);
            r.scale(-1.0);
            r.axpy(1.0, &g_at(s));
            r.pack(&mut out[..n]);
            sys.rhs(&y[n..], &phi, &mut out[n..]);
        })?;
        t = t0 + (step + 1) as f64 * cfg.dt;
        if (step + 1) % every == 0 || step + 1 == steps {
            record(&mut series, &y, t);
        }
    }
    let (force_estimate, state_estimate, truth_state) = record(&mut ErrorSeries::default(), &y, t);
    Ok(TwinRun { series, force_estimate, state_estimate, truth_state })
}

/// Runs a 2D Navier-Stokes nudging twin (see [`twin_nudging_td`]).
#[allow(clippy::too_many_arguments)]
pub fn twin_nudging_nse(
    cfg: NSEConfig,
    params: NudgeParams,
    force: &QuasiFiniteVectorForce,
    u0: &VectorSpectralField,
    v0: &VectorSpectralField,
    l0: &VectorSpectralField,
    t0: f64,
    steps: usize,
    sample_every: usize,
) -> Result<TwinRun<VectorSpectralField>> {
    let grid = u0.grid();
    let n = grid.dim() * grid.num_modes();
    let every = sample_every.max(1);
    let map = raised_map(&force.map, params.n_obs)?;
    let sys = NudgingNseSystem::new(grid, cfg, params, map.clone())?;
    let mut lambda = repeat_per_component(diffusion_lambda(grid, cfg.nu), grid.dim());
    lambda.extend(sys.lambda());
    let stepper = IfRk4::new(&lambda, cfg.dt);
    let steady = if force.low1.is_none() { Some(force.full(t0)) } else { None };
    let g_at = |t: f64| match &steady {
        Some(g) => g.clone(),
        None => force.full(t),
    };

    let mut u_init = u0.clone();
    u_init.leray_project();
    let mut y = vec![Complex64::new(0.0, 0.0); 3 * n];
    u_init.pack(&mut y[..n]);
    let mut v_init = v0.clone();
    v_init.leray_project();
    v_init.pack(&mut y[n..2 * n]);
    l0.project(params.n_obs, Band::Low).pack(&mut y[2 * n..]);

    let mut series = ErrorSeries::default();
    let record = |series: &mut ErrorSeries, y: &[Complex64], t: f64| {
        let u = vector_from(grid, &y[..n]);
        let v = vector_from(grid, &y[n..2 * n]);
        let l = vector_from(grid, &y[2 * n..]).project(params.n_obs, Band::Low);
        let sync = v.sub(&u);
        let mut f_est = map.evaluate_vector(&l);
        f_est.axpy(1.0, &l);
        f_est.leray_project();
        let model = f_est.sub(&g_at(t));
        let aux = params.mu2 * v.seminorm(0.0).powi(2) + l.seminorm(0.0).powi(2);
        series.push(
            t,
            sync.seminorm(0.0),
            sync.seminorm(1.0),
            model.seminorm(-1.0),
            model.seminorm(0.0),
            aux,
        );
        (f_est, v, u)
    };
    record(&mut series, &y, t0);

    let mut t = t0;
    for step in 0..steps {
        stepper.step(&mut y, t, |y, s, out| {
            let u = vector_from(grid, &y[..n]);
            let mut r = if cfg.freeze_nonlinearity {
                VectorSpectralField::zero(grid)
            } else {
                let mut b = crate::spectral::nse_bilinear(&u, &u);
                b.scale(-1.0);
                b
            };
            r.axpy(1.0, &g_at(s));
            r.pack(&mut out[..n]);
            sys.rhs(&y[n..], &u, &mut out[n..]);
        })?;
        t = t0 + (step + 1) as f64 * cfg.dt;
        if (step + 1) % every == 0 || step + 1 == steps {
            record(&mut series, &y, t);
        }
    }
    let (force_estimate, state_estimate, truth_state) = record(&mut ErrorSeries::default(), &y, t);
    Ok(TwinRun { series, force_estimate, state_estimate, truth_state })
}

/// Governing equation of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    /// Transport-diffusion with a prescribed advecting velocity.
    Td,
    /// 2D incompressible Navier-Stokes.
    Nse,
}

/// Reconstruction algorithm of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Stagewise sieve on a time-dependent observation stream.
    Sieve,
    /// Fixed-point sieve on a single steady observation (TD only).
    SieveStationary,
    /// Coupled continuous-time nudging.
    Nudging,
}

/// Spatial discretization section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Spatial dimension (2 or 3; NSE requires 2).
    pub dim: usize,
    /// Spectral truncation `K`: modes `k in [-K, K]^dim`.
    pub k: usize,
}

/// Dissipation coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    /// Diffusivity (TD).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Viscosity (NSE).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

/// Prescribed advecting velocity (TD only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocitySection {
    /// Velocity family.
    pub kind: VelocityKind,
    /// Amplitude multiplier.
    pub amplitude: f64,
}

/// Built-in static velocity families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityKind {
    /// `v = (a sin y, 0)`.
    Shear,
    /// Taylor-Green cellular flow.
    TaylorGreen,
}

/// Truth force specification: deterministic pseudo-random low modes from the
/// run seed, completed by an enslaving map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceSection {
    /// Rank `N0` of the low-mode seed (support `0 < |k| <= N0`).
    pub rank: usize,
    /// Enslaving-map family.
    #[serde(default = "default_map_kind")]
    pub map: ForceMapKind,
    /// Tail exponent (power-law map).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    /// Tail weight (power-law map).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    /// Amplitude of the random low-mode coefficients.
    #[serde(default = "default_one")]
    pub amplitude: f64,
    /// Spectral decay exponent of the random low-mode envelope.
    #[serde(default = "default_one")]
    pub decay: f64,
    /// Angular frequency of the oscillating low-mode part (0 = steady).
    #[serde(default)]
    pub oscillation: f64,
}

/// Enslaving-map families available from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceMapKind {
    /// No tail: the force is exactly finite rank.
    Zero,
    /// Power-law tail `weight |k|^{-exponent}` driven by the low-mode norm.
    PowerLawTail,
}

/// Observation cutoff section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationSection {
    /// Observed band cutoff `N`.
    pub n_obs: usize,
}

/// Algorithm gains: chosen by the condition checker in auto mode, or given
/// explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    /// Derive gains from the rigorous conditions (aborts when infeasible).
    #[serde(default = "default_true")]
    pub auto: bool,
    /// Sieve nudging gain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Nudging state gain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu1: Option<f64>,
    /// Nudging force gain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu2: Option<f64>,
    /// Ratio `lambda1 / lambda2` used when deriving nudging gains.
    #[serde(default = "default_lambda_ratio")]
    pub lambda_ratio: f64,
    /// Initial error budget for the NSE nudging weight `alpha`.
    #[serde(default = "default_one")]
    pub error_budget: f64,
    /// Use the strong (gradient-based) sieve-TD conditions.
    #[serde(default)]
    pub strong: bool,
}

impl Default for ParamsSection {
    fn default() -> Self {
        Self {
            auto: true,
            mu: None,
            mu1: None,
            mu2: None,
            lambda_ratio: default_lambda_ratio(),
            error_budget: default_one(),
            strong: false,
        }
    }
}

/// Time discretization and horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    /// Time step.
    pub dt: f64,
    /// Total horizon (nudging) or diagnostic window per stage (sieve).
    pub t: f64,
    /// Stage length (sieve; auto mode fills it from the checker).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
    /// Number of sieve stages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<usize>,
    /// Record every this many steps (0 = choose automatically).
    #[serde(default)]
    pub sample_every: usize,
}

/// Output location section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Directory for CSV, manifest and snapshots (created if missing).
    pub dir: String,
}

fn default_true() -> bool {
    true
}
fn default_one() -> f64 {
    1.0
}
fn default_lambda_ratio() -> f64 {
    2.0
}
fn default_map_kind() -> ForceMapKind {
    ForceMapKind::Zero
}

/// Full experiment definition; parsed from TOML with unknown keys rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Governing equation.
    pub equation: Equation,
    /// Reconstruction algorithm.
    pub algorithm: Algorithm,
    /// RNG seed for the truth force and initial state.
    #[serde(default)]
    pub seed: u64,
    /// Spatial discretization.
    pub grid: GridSection,
    /// Dissipation coefficients.
    pub physics: PhysicsSection,
    /// Advecting velocity (TD only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<VelocitySection>,
    /// Truth force specification.
    pub force: ForceSection,
    /// Observation cutoff.
    pub observation: ObservationSection,
    /// Algorithm gains.
    #[serde(default)]
    pub params: ParamsSection,
    /// Time discretization.
    pub time: TimeSection,
    /// Output location (omit for no artifacts).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

impl ExperimentConfig {
    /// Parses a TOML experiment definition; unknown keys are errors.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| FluxError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and parses a config file.
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// Serializes the (resolved) configuration back to TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| FluxError::Format(e.to_string()))
    }

    /// Checks cross-field invariants not expressible in the type structure.
    pub fn validate(&self) -> Result<()> {
        let c = |msg: String| Err(FluxError::Config(msg));
        match self.equation {
            Equation::Td => {
                if self.physics.kappa.map_or(true, |k| !(k > 0.0)) {
                    return c("td requires physics.kappa > 0".into());
                }
                if self.velocity.is_none() {
                    return c("td requires a [velocity] section".into());
                }
            }
            Equation::Nse => {
                if self.physics.nu.map_or(true, |n| !(n > 0.0)) {
                    return c("nse requires physics.nu > 0".into());
                }
                if self.grid.dim != 2 {
                    return c("nse requires grid.dim = 2".into());
                }
                if self.velocity.is_some() {
                    return c("[velocity] applies to td only".into());
                }
                if self.algorithm == Algorithm::SieveStationary {
                    return c("sieve_stationary applies to td only".into());
                }
            }
        }
        if !(self.grid.dim == 2 || self.grid.dim == 3) {
            return c("grid.dim must be 2 or 3".into());
        }
        if self.force.map == ForceMapKind::PowerLawTail
            && (self.force.exponent.is_none() || self.force.weight.is_none())
        {
            return c("power_law_tail map requires force.exponent and force.weight".into());
        }
        if !(self.time.dt > 0.0 && self.time.t > 0.0) {
            return c("time.dt and time.t must be positive".into());
        }
        if self.algorithm == Algorithm::Sieve && self.time.stages.is_none() {
            return c("sieve requires time.stages".into());
        }
        if !self.params.auto {
            match self.algorithm {
                Algorithm::Nudging => {
                    if self.params.mu1.is_none() || self.params.mu2.is_none() {
                        return c("explicit nudging params require params.mu1 and params.mu2".into());
                    }
                }
                Algorithm::Sieve | Algorithm::SieveStationary => {
                    if self.params.mu.is_none() {
                        return c("explicit sieve params require params.mu".into());
                    }
                    if self.algorithm == Algorithm::Sieve && self.time.t_star.is_none() {
                        return c("explicit sieve params require time.t_star".into());
                    }
                }
            }
        }
        Ok(())
    }

    /// Sets a numeric field by dotted name (for sweeps).
    pub fn set_axis(&mut self, axis: &str, value: f64) -> Result<()> {
        match axis {
            "seed" => self.seed = value as u64,
            "grid.k" => self.grid.k = value as usize,
            "physics.kappa" => self.physics.kappa = Some(value),
            "physics.nu" => self.physics.nu = Some(value),
            "velocity.amplitude" => match &mut self.velocity {
                Some(v) => v.amplitude = value,
                None => return Err(FluxError::Config("no [velocity] section to sweep".into())),
            },
            "force.rank" => self.force.rank = value as usize,
            "force.exponent" => self.force.exponent = Some(value),
            "force.weight" => self.force.weight = Some(value),
            "force.amplitude" => self.force.amplitude = value,
            "force.decay" => self.force.decay = value,
            "force.oscillation" => self.force.oscillation = value,
            "observation.n_obs" => self.observation.n_obs = value as usize,
            "params.mu" => {
                self.params.mu = Some(value);
                self.params.auto = false;
            }
            "params.mu1" => {
                self.params.mu1 = Some(value);
                self.params.auto = false;
            }
            "params.mu2" => {
                self.params.mu2 = Some(value);
                self.params.auto = false;
            }
            "params.lambda_ratio" => self.params.lambda_ratio = value,
            "params.error_budget" => self.params.error_budget = value,
            "time.dt" => self.time.dt = value,
            "time.t" => self.time.t = value,
            "time.t_star" => self.time.t_star = Some(value),
            "time.stages" => self.time.stages = Some(value as usize),
            _ => return Err(FluxError::Config(format!("unknown sweep axis '{axis}'"))),
        }
        Ok(())
    }
}

/// Result of [`run_twin`]: the error series and the resolved configuration
/// (auto parameters replaced by the chosen numbers).
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Error series with fitted rates attached.
    pub series: ErrorSeries,
    /// Configuration with resolved gains and stage lengths.
    pub resolved: ExperimentConfig,
}

fn build_map(cfg: &ExperimentConfig, grid: WaveGrid) -> Result<EnslavingMap> {
    // Order pair (0, -1): Lipschitz from the observed band in L^2 into the
    // dual norm, matching the model-error metric.
    match cfg.force.map {
        ForceMapKind::Zero => Ok(EnslavingMap::zero(cfg.force.rank, 0.0, -1.0)),
        ForceMapKind::PowerLawTail => EnslavingMap::power_law_tail(
            grid,
            cfg.force.rank,
            cfg.force.exponent.expect("validated"),
            cfg.force.weight.expect("validated"),
            0.0,
            -1.0,
        ),
    }
}

fn build_velocity(cfg: &ExperimentConfig, grid: WaveGrid) -> VectorSpectralField {
    let v = cfg.velocity.as_ref().expect("validated");
    match v.kind {
        VelocityKind::Shear => synth::shear_velocity(grid, v.amplitude),
        VelocityKind::TaylorGreen => synth::taylor_green(grid, v.amplitude),
    }
}

/// Builds the deterministic truth force and initial state of a TD experiment
/// from the run seed (draw order is part of the reproducibility contract).
fn build_td_scene(
    config: &ExperimentConfig,
    grid: WaveGrid,
    map: &EnslavingMap,
    rng: &mut ChaCha8Rng,
) -> (QuasiFiniteForce, ScalarSpectralField) {
    let low0 = synth::random_scalar(
        grid,
        config.force.rank,
        config.force.decay,
        config.force.amplitude,
        rng,
    );
    let low1 = if config.force.oscillation > 0.0 {
        let f = synth::random_scalar(
            grid,
            config.force.rank,
            config.force.decay,
            config.force.amplitude,
            rng,
        );
        Some((f, config.force.oscillation))
    } else {
        None
    };
    let force = QuasiFiniteForce { low0, low1, map: map.clone() };
    let support = config.observation.n_obs.min(grid.dealias_cutoff()).max(2);
    let phi0 = synth::random_scalar(grid, support, 1.5, 0.5, rng);
    (force, phi0)
}

/// NSE analogue of [`build_td_scene`].
fn build_nse_scene(
    config: &ExperimentConfig,
    grid: WaveGrid,
    map: &EnslavingMap,
    rng: &mut ChaCha8Rng,
) -> (QuasiFiniteVectorForce, VectorSpectralField) {
    let mut low0 = synth::random_divergence_free(
        grid,
        config.force.rank,
        config.force.decay,
        config.force.amplitude,
        rng,
    );
    low0.leray_project();
    let low1 = if config.force.oscillation > 0.0 {
        let mut f = synth::random_divergence_free(
            grid,
            config.force.rank,
            config.force.decay,
            config.force.amplitude,
            rng,
        );
        f.leray_project();
        Some((f, config.force.oscillation))
    } else {
        None
    };
    let force = QuasiFiniteVectorForce { low0, low1, map: map.clone() };
    let support = config.observation.n_obs.min(grid.dealias_cutoff()).max(2);
    let u0 = synth::random_divergence_free(grid, support, 1.5, 0.3, rng);
    (force, u0)
}

/// Generates the truth trajectory only and writes its low-mode observation
/// archive to the configured output directory.
pub fn simulate(config: &ExperimentConfig) -> Result<()> {
    config.validate()?;
    let out = config
        .output
        .as_ref()
        .ok_or_else(|| FluxError::Config("simulate requires an [output] section".into()))?;
    let grid = WaveGrid::new(config.grid.dim, config.grid.k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let map = build_map(config, grid)?;
    let n_obs = config.observation.n_obs;
    let steps = (config.time.t / config.time.dt).round().max(1.0) as usize;
    let extra = vec![("config".to_string(), config.to_toml()?.replace('\n', " | "))];
    match config.equation {
        Equation::Td => {
            let cfg = TDConfig { kappa: config.physics.kappa.expect("validated"), dt: config.time.dt };
            let v = build_velocity(config, grid);
            let (force, phi0) = build_td_scene(config, grid, &map, &mut rng);
            let truth =
                generate_truth_td(cfg, &v, &|t| force.full(t), &phi0, 0.0, steps, n_obs, false)?;
            crate::io::write_observation_archive(Path::new(&out.dir), &truth.stream, &extra)
        }
        Equation::Nse => {
            let cfg = NSEConfig {
                nu: config.physics.nu.expect("validated"),
                dt: config.time.dt,
                freeze_nonlinearity: false,
            };
            let (force, u0) = build_nse_scene(config, grid, &map, &mut rng);
            let truth = generate_truth_nse(cfg, &|t| force.full(t), &u0, 0.0, steps, n_obs, false)?;
            crate::io::write_observation_archive(Path::new(&out.dir), &truth.stream, &extra)
        }
    }
}

/// Feasibility verdict of the rigorous parameter conditions for a config.
#[derive(Debug, Clone)]
pub struct CheckReport {
    /// Whether the conditions hold at the configured cutoff.
    pub feasible: bool,
    /// Human-readable summary of the derived numbers.
    pub summary: String,
}

/// Evaluates the parameter conditions for the configured experiment without
/// running it.
pub fn check_conditions(config: &ExperimentConfig) -> Result<CheckReport> {
    config.validate()?;
    let grid = WaveGrid::new(config.grid.dim, config.grid.k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let map = build_map(config, grid)?;
    let constants = ConstantsTable::new();
    let n_obs = config.observation.n_obs;
    match config.equation {
        Equation::Td => {
            let kappa = config.physics.kappa.expect("validated");
            let v = build_velocity(config, grid);
            let functionals =
                VelocityFunctionals::compute(std::slice::from_ref(&v), &eps_grid(config.grid.dim), &constants)?;
            match config.algorithm {
                Algorithm::Nudging => {
                    let c = nudging_td_params(
                        &functionals,
                        map.lipschitz(),
                        n_obs,
                        kappa,
                        config.params.lambda_ratio,
                        &constants,
                    );
                    Ok(CheckReport {
                        feasible: c.feasible,
                        summary: format!(
                            "nudging-td: feasible = {}, minimal_n = {:?}, mu1 = {:.6e}, mu2 = {:.6e}, rho = {:.6e}",
                            c.feasible, c.minimal_n, c.mu1, c.mu2, c.rho
                        ),
                    })
                }
                Algorithm::Sieve | Algorithm::SieveStationary => {
                    let c = sieve_td_mu_interval(
                        &functionals,
                        map.lipschitz(),
                        n_obs,
                        kappa,
                        config.time.dt,
                        config.params.strong,
                        &constants,
                    );
                    Ok(CheckReport {
                        feasible: c.feasible,
                        summary: format!(
                            "sieve-td: feasible = {}, mu in ({:.6e}, {:.6e}], mu = {:.6e}, t_star = {:.6e}, lambda_star = {:.6e}",
                            c.feasible, c.mu_lower, c.mu_upper, c.mu, c.t_star, c.lambda_star
                        ),
                    })
                }
            }
        }
        Equation::Nse => {
            let nu = config.physics.nu.expect("validated");
            let (force, u0) = build_nse_scene(config, grid, &map, &mut rng);
            let grashof = grashof_report(&[force.full(0.0)], nu, &constants)?;
            match config.algorithm {
                Algorithm::Nudging => {
                    let u_bound = grashof.r2.max(u0.seminorm(1.0));
                    let c = nudging_nse_params(
                        u_bound,
                        map.lipschitz(),
                        n_obs,
                        nu,
                        config.params.lambda_ratio,
                        config.params.error_budget,
                        &constants,
                    );
                    Ok(CheckReport {
                        feasible: c.feasible,
                        summary: format!(
                            "nudging-nse: feasible = {}, minimal_n = {:?}, l_n = {:.6e}, delta_n = {:.6e}, mu1 = {:.6e}, mu2 = {:.6e}, decay_rate = {:.6e}",
                            c.feasible, c.minimal_n, c.l_n, c.delta_n, c.mu1, c.mu2, c.decay_rate
                        ),
                    })
                }
                Algorithm::Sieve => {
                    let m0 = force.full(0.0).seminorm(-1.0);
                    let c = sieve_nse_mu_interval(
                        &grashof,
                        map.lipschitz(),
                        m0,
                        n_obs,
                        nu,
                        config.time.dt,
                        &constants,
                    );
                    Ok(CheckReport {
                        feasible: c.feasible,
                        summary: format!(
                            "sieve-nse: feasible = {}, C_F = {:.6e}, mu in [{:.6e}, {:.6e}), mu = {:.6e}, t_star = {:.6e}",
                            c.feasible, c.c_f, c.mu_lower, c.mu_upper, c.mu, c.t_star
                        ),
                    })
                }
                Algorithm::SieveStationary => unreachable!("rejected by validate"),
            }
        }
    }
}

fn eps_grid(dim: usize) -> Vec<f64> {
    let mut g = vec![0.0, 0.25, 0.5, 0.75, 1.0];
    if dim == 3 {
        g.push(1.5);
    }
    g
}

fn auto_sample_every(steps: usize, requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        (steps / 400).max(1)
    }
}

fn attach_fits(series: &mut ErrorSeries) {
    if series.len() < 8 {
        return;
    }
    let t0 = series.times[0];
    let t1 = *series.times.last().unwrap();
    let window = (t0 + 0.1 * (t1 - t0), t1);
    for column in ["sync_err_L2", "model_err_Hm1"] {
        if let Ok(fit) = series.fit(column, window) {
            series.fits.push(ColumnFit { column: column.into(), fit });
        }
    }
}

/// Runs the twin experiment described by `config`: generates the truth,
/// extracts low-mode observations, runs the chosen algorithm, and scores the
/// reconstructions against the truth. Artifacts (CSV, manifest, final force
/// snapshot) are written when an output directory is configured.
pub fn run_twin(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let grid = WaveGrid::new(config.grid.dim, config.grid.k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let map = build_map(config, grid)?;
    let constants = ConstantsTable::new();
    let n_obs = config.observation.n_obs;
    let mut resolved = config.clone();

    match config.equation {
        Equation::Td => {
            let kappa = config.physics.kappa.expect("validated");
            let cfg = TDConfig { kappa, dt: config.time.dt };
            let v = build_velocity(config, grid);
            let (force, phi0) = build_td_scene(config, grid, &map, &mut rng);
            let functionals = VelocityFunctionals::compute(
                std::slice::from_ref(&v),
                &eps_grid(config.grid.dim),
                &constants,
            )?;

            match config.algorithm {
                Algorithm::Nudging => {
                    let params = if config.params.auto {
                        let cond = nudging_td_params(
                            &functionals,
                            map.lipschitz(),
                            n_obs,
                            kappa,
                            config.params.lambda_ratio,
                            &constants,
                        );
                        if !cond.feasible {
                            return Err(FluxError::Infeasible(format!(
                                "nudging-td conditions fail at N = {n_obs} (minimal feasible N: {:?})",
                                cond.minimal_n
                            )));
                        }
                        NudgeParams { n_obs, mu1: cond.mu1, mu2: cond.mu2 }
                    } else {
                        NudgeParams {
                            n_obs,
                            mu1: config.params.mu1.expect("validated"),
                            mu2: config.params.mu2.expect("validated"),
                        }
                    };
                    resolved.params.auto = false;
                    resolved.params.mu1 = Some(params.mu1);
                    resolved.params.mu2 = Some(params.mu2);
                    let steps = (config.time.t / cfg.dt).round().max(1.0) as usize;
                    let every = auto_sample_every(steps, config.time.sample_every);
                    let psi0 = ScalarSpectralField::zero(grid);
                    let l0 = ScalarSpectralField::zero(grid);
                    let run = twin_nudging_td(
                        cfg, &v, params, &force, &phi0, &psi0, &l0, 0.0, steps, every,
                    )?;
                    let mut series = run.series;
                    attach_fits(&mut series);
                    write_artifacts(&resolved, &series, Some(&run.force_estimate), None)?;
                    Ok(RunOutput { series, resolved })
                }
                Algorithm::Sieve => {
                    let stages = config.time.stages.expect("validated");
                    let (mu, t_star) = if config.params.auto {
                        let cond = sieve_td_mu_interval(
                            &functionals,
                            map.lipschitz(),
                            n_obs,
                            kappa,
                            cfg.dt,
                            config.params.strong,
                            &constants,
                        );
                        if !cond.feasible {
                            return Err(FluxError::Infeasible(
                                "sieve-td gain interval is empty".into(),
                            ));
                        }
                        (cond.mu, cond.t_star)
                    } else {
                        (config.params.mu.expect("validated"), config.time.t_star.expect("validated"))
                    };
                    resolved.params.auto = false;
                    resolved.params.mu = Some(mu);
                    resolved.time.t_star = Some(t_star);
                    let t_window = config.time.t;
                    let scfg = SieveConfig { n_obs, mu, t_star, t_window, stages };
                    let horizon = stages as f64 * t_star + t_window;
                    let steps = (horizon / cfg.dt).ceil() as usize;
                    let truth =
                        generate_truth_td(cfg, &v, &|t| force.full(t), &phi0, 0.0, steps, n_obs, true)?;
                    let force_fn = |t: f64| force.full(t);
                    let zero_force = |_: f64| ScalarSpectralField::zero(grid);
                    let initial_high = ScalarSpectralField::zero(grid);
                    let run = run_sieve_td(
                        &cfg,
                        &scfg,
                        &v,
                        &truth.stream,
                        &zero_force,
                        &initial_high,
                        &map,
                        Some(&SieveTruth { states: &truth.states, force: &force_fn }),
                    )?;
                    let series = sieve_series(&run.samples, &run.stages);
                    write_artifacts::<ScalarSpectralField>(&resolved, &series, None, Some(&run))?;
                    Ok(RunOutput { series, resolved })
                }
                Algorithm::SieveStationary => {
                    let mu = if config.params.auto {
                        let cond = sieve_td_mu_interval(
                            &functionals,
                            map.lipschitz(),
                            n_obs,
                            kappa,
                            cfg.dt,
                            config.params.strong,
                            &constants,
                        );
                        if !cond.feasible {
                            return Err(FluxError::Infeasible(
                                "sieve-td gain interval is empty".into(),
                            ));
                        }
                        resolved.time.t_star = Some(cond.t_star);
                        cond.mu
                    } else {
                        config.params.mu.expect("validated")
                    };
                    resolved.params.auto = false;
                    resolved.params.mu = Some(mu);
                    let t_star = resolved.time.t_star.unwrap_or(config.time.t);
                    let g = force.full(0.0);
                    let phi = stationary_truth_td(cfg, &v, &g, &phi0, 1e-13, 10_000)?;
                    let phi_low = phi.project(n_obs, Band::Low);
                    let stages = config.time.stages.unwrap_or(10);
                    let run = stationary_sieve_td(
                        &cfg,
                        n_obs,
                        mu,
                        t_star,
                        &v,
                        &phi_low,
                        &ScalarSpectralField::zero(grid),
                        &map,
                        stages,
                        1e-12,
                        Some(&g),
                    )?;
                    let mut series = ErrorSeries::default();
                    for (j, &err) in run.rel_errors.iter().enumerate() {
                        let change = run.changes.get(j).copied().unwrap_or(f64::NAN);
                        series.push(j as f64, change, 0.0, err, err, 0.0);
                    }
                    write_artifacts(&resolved, &series, Some(&run.force_estimate), None)?;
                    Ok(RunOutput { series, resolved })
                }
            }
        }
        Equation::Nse => {
            let nu = config.physics.nu.expect("validated");
            let cfg = NSEConfig { nu, dt: config.time.dt, freeze_nonlinearity: false };
            let (force, u0) = build_nse_scene(config, grid, &map, &mut rng);
            let grashof = grashof_report(&[force.full(0.0)], nu, &constants)?;

            match config.algorithm {
                Algorithm::Nudging => {
                    let params = if config.params.auto {
                        let u_bound = grashof.r2.max(u0.seminorm(1.0));
                        let cond = nudging_nse_params(
                            u_bound,
                            map.lipschitz(),
                            n_obs,
                            nu,
                            config.params.lambda_ratio,
                            config.params.error_budget,
                            &constants,
                        );
                        if !cond.feasible {
                            return Err(FluxError::Infeasible(format!(
                                "nudging-nse conditions fail at N = {n_obs} (minimal feasible N: {:?})",
                                cond.minimal_n
                            )));
                        }
                        NudgeParams { n_obs, mu1: cond.mu1, mu2: cond.mu2 }
                    } else {
                        NudgeParams {
                            n_obs,
                            mu1: config.params.mu1.expect("validated"),
                            mu2: config.params.mu2.expect("validated"),
                        }
                    };
                    resolved.params.auto = false;
                    resolved.params.mu1 = Some(params.mu1);
                    resolved.params.mu2 = Some(params.mu2);
                    let steps = (config.time.t / cfg.dt).round().max(1.0) as usize;
                    let every = auto_sample_every(steps, config.time.sample_every);
                    let v0 = VectorSpectralField::zero(grid);
                    let l0 = VectorSpectralField::zero(grid);
                    let run = twin_nudging_nse(cfg, params, &force, &u0, &v0, &l0, 0.0, steps, every)?;
                    let mut series = run.series;
                    attach_fits(&mut series);
                    write_artifacts(&resolved, &series, Some(&run.force_estimate), None)?;
                    Ok(RunOutput { series, resolved })
                }
                Algorithm::Sieve => {
                    let stages = config.time.stages.expect("validated");
                    let (mu, t_star) = if config.params.auto {
                        let m0 = force.full(0.0).seminorm(-1.0);
                        let cond = sieve_nse_mu_interval(
                            &grashof,
                            map.lipschitz(),
                            m0,
                            n_obs,
                            nu,
                            cfg.dt,
                            &constants,
                        );
                        if !cond.feasible {
                            return Err(FluxError::Infeasible(format!(
                                "sieve-nse prefactor C_F = {} is not below N/2",
                                cond.c_f
                            )));
                        }
                        (cond.mu, cond.t_star)
                    } else {
                        (config.params.mu.expect("validated"), config.time.t_star.expect("validated"))
                    };
                    resolved.params.auto = false;
                    resolved.params.mu = Some(mu);
                    resolved.time.t_star = Some(t_star);
                    let t_window = config.time.t;
                    let scfg = SieveConfig { n_obs, mu, t_star, t_window, stages };
                    let horizon = stages as f64 * t_star + t_window;
                    let steps = (horizon / cfg.dt).ceil() as usize;
                    let truth =
                        generate_truth_nse(cfg, &|t| force.full(t), &u0, 0.0, steps, n_obs, true)?;
                    let force_fn = |t: f64| force.full(t);
                    let zero_force = |_: f64| VectorSpectralField::zero(grid);
                    let initial_high = VectorSpectralField::zero(grid);
                    let run = run_sieve_nse(
                        &cfg,
                        &scfg,
                        &truth.stream,
                        &zero_force,
                        &initial_high,
                        &map,
                        Some(&SieveTruth { states: &truth.states, force: &force_fn }),
                    )?;
                    let series = sieve_series(&run.samples, &run.stages);
                    write_artifacts::<VectorSpectralField>(&resolved, &series, None, Some(&run))?;
                    Ok(RunOutput { series, resolved })
                }
                Algorithm::SieveStationary => unreachable!("rejected by validate"),
            }
        }
    }
}

fn sieve_series(
    samples: &[crate::sieve::StageSample],
    stages: &[crate::sieve::StageSummary],
) -> ErrorSeries {
    let mut series = ErrorSeries::default();
    for s in samples {
        series.push(s.t, s.sync_err_l2, s.sync_err_h1, s.model_err_hm1, s.model_err_l2, 0.0);
    }
    // Geometric per-stage fit on the sup dual-norm force errors.
    let ts: Vec<f64> = stages.iter().map(|s| s.stage as f64).collect();
    let vs: Vec<f64> = stages.iter().map(|s| s.sup_model_err_hm1).collect();
    if let Ok(fit) = fit_decay_rate(&ts, &vs) {
        series.fits.push(ColumnFit { column: "stage_sup_model_err_Hm1".into(), fit });
    }
    series
}

trait SieveCsv {
    fn csv_string(&self) -> Result<String>;
}

impl<F: FieldOps> SieveCsv for crate::sieve::SieveRun<F> {
    fn csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| FluxError::Format(e.to_string()))
    }
}

fn write_artifacts<F: crate::io::SnapshotField>(
    resolved: &ExperimentConfig,
    series: &ErrorSeries,
    final_force: Option<&F>,
    sieve: Option<&dyn SieveCsv>,
) -> Result<()> {
    let Some(out) = &resolved.output else { return Ok(()) };
    let dir = Path::new(&out.dir);
    fs::create_dir_all(dir)?;
    atomic_write(&dir.join("manifest.toml"), resolved.to_toml()?.as_bytes())?;
    atomic_write(&dir.join("series.csv"), series.to_csv_string()?.as_bytes())?;
    if let Some(f) = final_force {
        write_snapshot_file(&dir.join("force_estimate.spf"), f)?;
    }
    if let Some(run) = sieve {
        atomic_write(&dir.join("stages.csv"), run.csv_string()?.as_bytes())?;
    }
    Ok(())
}

/// One summary row of a parameter sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    /// Swept parameter value.
    pub value: f64,
    /// Whether the run completed.
    pub ok: bool,
    /// Whether the model error decreased substantially (final below half of
    /// the initial value).
    pub converged: bool,
    /// First dual-norm model error of the series.
    pub initial_model_err: f64,
    /// Last dual-norm model error of the series.
    pub final_model_err: f64,
    /// Fitted model-error decay rate, when available.
    pub model_rate: Option<f64>,
    /// Error message for failed runs, empty otherwise.
    pub message: String,
}

/// Runs `run_twin` once per value of the swept parameter, concurrently.
/// Failed runs are recorded as rows, not fatal to the sweep.
pub fn sweep(base: &ExperimentConfig, axis: &str, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(FluxError::Config("sweep needs at least one value".into()));
    }
    // Probe the axis name once so a typo fails fast.
    base.clone().set_axis(axis, values[0])?;
    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&value| {
            let mut cfg = base.clone();
            cfg.output = None;
            if let Err(e) = cfg.set_axis(axis, value) {
                return SweepRow {
                    value,
                    ok: false,
                    converged: false,
                    initial_model_err: f64::NAN,
                    final_model_err: f64::NAN,
                    model_rate: None,
                    message: e.to_string(),
                };
            }
            match run_twin(&cfg) {
                Ok(out) => summarize_row(value, &out.series),
                Err(e) => SweepRow {
                    value,
                    ok: false,
                    converged: false,
                    initial_model_err: f64::NAN,
                    final_model_err: f64::NAN,
                    model_rate: None,
                    message: e.to_string(),
                },
            }
        })
        .collect();
    Ok(rows)
}

fn summarize_row(value: f64, series: &ErrorSeries) -> SweepRow {
    let initial = series.model_hm1.first().copied().unwrap_or(f64::NAN);
    let final_err = series.model_hm1.last().copied().unwrap_or(f64::NAN);
    let model_rate = series
        .fits
        .iter()
        .find(|f| f.column.contains("model"))
        .map(|f| f.fit.rate);
    SweepRow {
        value,
        ok: true,
        converged: final_err < 0.5 * initial,
        initial_model_err: initial,
        final_model_err: final_err,
        model_rate,
        message: String::new(),
    }
}

/// Serializes sweep rows as CSV.
pub fn sweep_csv(axis: &str, rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        axis,
        "ok",
        "converged",
        "initial_model_err",
        "final_model_err",
        "model_rate",
        "message",
    ])
    .map_err(|e| FluxError::Format(e.to_string()))?;
    for r in rows {
        w.write_record([
            format!("{:.17e}", r.value),
            r.ok.to_string(),
            r.converged.to_string(),
            format!("{:.17e}", r.initial_model_err),
            format!("{:.17e}", r.final_model_err),
            r.model_rate.map_or_else(|| "".into(), |x| format!("{x:.17e}")),
            r.message.clone(),
        ])
        .map_err(|e| FluxError::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| FluxError::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| FluxError::Format(e.to_string()))
}

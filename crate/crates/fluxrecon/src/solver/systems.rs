//! The six time-stepped systems: truth, nudged (sieve), and coupled nudging
//! dynamics for transport-diffusion and 2D Navier-Stokes.
//!
//! Each system owns an [`IfRk4`] stepper whose diagonal linear part holds the
//! diffusion on the modes it acts on and the low-mode damping `-mu P_N`;
//! advection, forcing, observation feedback, and the cross-band diffusion of
//! the observed modes are explicit. Time-dependent inputs (forces,
//! observations) are supplied as closures evaluated at the RK4 substages.

use num_complex::Complex64;

use crate::error::Result;
use crate::forcing::EnslavingMap;
use crate::spectral::{
    laplacian, nse_bilinear, Band, FieldOps, PhysVelocity, ScalarSpectralField,
    VectorSpectralField, WaveGrid,
};

use super::integrator::IfRk4;
use super::{check_time_step, NSEConfig, NudgeParams, TDConfig};

/// Grid spacing of the collocation grid.
pub(crate) fn dx(grid: WaveGrid) -> f64 {
    2.0 * std::f64::consts::PI / grid.phys_per_axis() as f64
}

/// `-kappa |k|^2` over one scalar block.
pub(crate) fn diffusion_lambda(grid: WaveGrid, kappa: f64) -> Vec<f64> {
    (0..grid.num_modes()).map(|idx| -kappa * WaveGrid::k_sq(grid.wave_at(idx))).collect()
}

/// Diagonal rates of a nudged block: `-kappa |k|^2 - mu` on the observed
/// low band, `-kappa |k|^2` above.
pub(crate) fn nudged_lambda(grid: WaveGrid, kappa: f64, n_obs: usize, mu: f64) -> Vec<f64> {
    (0..grid.num_modes())
        .map(|idx| {
            let k = grid.wave_at(idx);
            let base = -kappa * WaveGrid::k_sq(k);
            if WaveGrid::in_band(k, n_obs, Band::Low) {
                base - mu
            } else {
                base
            }
        })
        .collect()
}

/// Diagonal rates of a spliced block: `-mu1` on the observed low band (its
/// diffusion acts on the observation, explicitly), `-kappa |k|^2` above.
pub(crate) fn spliced_lambda(grid: WaveGrid, kappa: f64, n_obs: usize, mu1: f64) -> Vec<f64> {
    (0..grid.num_modes())
        .map(|idx| {
            let k = grid.wave_at(idx);
            if WaveGrid::in_band(k, n_obs, Band::Low) {
                -mu1
            } else {
                -kappa * WaveGrid::k_sq(k)
            }
        })
        .collect()
}

pub(crate) fn repeat_per_component(block: Vec<f64>, dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(block.len() * dim);
    for _ in 0..dim {
        out.extend_from_slice(&block);
    }
    out
}

pub(crate) fn scalar_from(grid: WaveGrid, y: &[Complex64]) -> ScalarSpectralField {
    ScalarSpectralField::from_coeffs(grid, y.to_vec()).expect("packed length matches grid")
}

pub(crate) fn vector_from(grid: WaveGrid, y: &[Complex64]) -> VectorSpectralField {
    let mut v = VectorSpectralField::zero(grid);
    v.unpack(y);
    v
}

/// Truth transport-diffusion dynamics
/// `d phi/dt + v . grad(phi) = kappa Lap(phi) + g(t)`.
pub struct TdTruthSystem {
    grid: WaveGrid,
    cfg: TDConfig,
    vel: PhysVelocity,
    stepper: IfRk4,
}

impl TdTruthSystem {
    /// Builds the stepper for a static advecting velocity `v`.
    pub fn new(cfg: TDConfig, v: &VectorSpectralField) -> Result<Self> {
        let grid = v.grid();
        let vel = PhysVelocity::new(v);
        check_time_step(cfg.dt, dx(grid), vel.max_speed(), 0.0)?;
        let stepper = IfRk4::new(&diffusion_lambda(grid, cfg.kappa), cfg.dt);
        Ok(Self { grid, cfg, vel, stepper })
    }

    /// Underlying grid.
    pub fn grid(&self) -> WaveGrid {
        self.grid
    }

    /// Advances `phi` from `t` to `t + dt`.
    pub fn step(
        &self,
        phi: &mut ScalarSpectralField,
        t: f64,
        force: &dyn Fn(f64) -> ScalarSpectralField,
    ) -> Result<()> {
        let grid = self.grid;
        self.stepper.step(phi.coeffs_mut(), t, |y, s, out| {
            let state = scalar_from(grid, y);
            let mut r = self.vel.advect(&state);
            r.scale(-1.0);
            r.axpy(1.0, &force(s));
            r.pack(out);
        })
    }

    /// Full continuous right-hand side `-v . grad(phi) + kappa Lap(phi) + g`,
    /// used when recording observation time derivatives.
    pub fn rhs(
        &self,
        phi: &ScalarSpectralField,
        t: f64,
        force: &dyn Fn(f64) -> ScalarSpectralField,
    ) -> ScalarSpectralField {
        let mut r = self.vel.advect(phi);
        r.scale(-1.0);
        let mut lap = laplacian(phi);
        lap.scale(self.cfg.kappa);
        r.axpy(1.0, &lap);
        r.axpy(1.0, &force(t));
        r
    }
}

/// Truth 2D Navier-Stokes dynamics
/// `du/dt + B(u, u) = nu Lap(u) + g(t)` (velocity form, Leray-projected).
pub struct NseTruthSystem {
    grid: WaveGrid,
    cfg: NSEConfig,
    stepper: IfRk4,
}

impl NseTruthSystem {
    /// Builds the stepper.
    pub fn new(grid: WaveGrid, cfg: NSEConfig) -> Result<Self> {
        check_time_step(cfg.dt, dx(grid), 0.0, 0.0)?;
        let lambda = repeat_per_component(diffusion_lambda(grid, cfg.nu), grid.dim());
        Ok(Self { grid, cfg, stepper: IfRk4::new(&lambda, cfg.dt) })
    }

    /// Underlying grid.
    pub fn grid(&self) -> WaveGrid {
        self.grid
    }

    /// Advances `u` from `t` to `t + dt`.
    pub fn step(
        &self,
        u: &mut VectorSpectralField,
        t: f64,
        force: &dyn Fn(f64) -> VectorSpectralField,
    ) -> Result<()> {
        let grid = self.grid;
        let mut packed = vec![Complex64::new(0.0, 0.0); u.packed_len()];
        u.pack(&mut packed);
        let res = self.stepper.step(&mut packed, t, |y, s, out| {
            let state = vector_from(grid, y);
            let mut r = if self.cfg.freeze_nonlinearity {
                VectorSpectralField::zero(grid)
            } else {
                let mut b = nse_bilinear(&state, &state);
                b.scale(-1.0);
                b
            };
            let mut g = force(s);
            g.leray_project();
            r.axpy(1.0, &g);
            r.pack(out);
        });
        u.unpack(&packed);
        res
    }

    /// Full continuous right-hand side `-B(u, u) + nu Lap(u) + g`.
    pub fn rhs(
        &self,
        u: &VectorSpectralField,
        t: f64,
        force: &dyn Fn(f64) -> VectorSpectralField,
    ) -> VectorSpectralField {
        let mut r = if self.cfg.freeze_nonlinearity {
            VectorSpectralField::zero(self.grid)
        } else {
            let mut b = nse_bilinear(u, u);
            b.scale(-1.0);
            b
        };
        for (rc, uc) in r.components_mut().iter_mut().zip(u.components()) {
            let mut lap = laplacian(uc);
            lap.scale(self.cfg.nu);
            rc.axpy(1.0, &lap);
        }
        let mut g = force(t);
        g.leray_project();
        r.axpy(1.0, &g);
        r
    }
}

/// Nudged transport-diffusion equation of the sieve stages:
/// `d psi/dt + v . grad(psi) = kappa Lap(psi) + f(t)
///  + mu P_N phi_obs(t) - mu P_N psi`.
pub struct NudgedTdSystem {
    grid: WaveGrid,
    params: NudgeParams,
    vel: PhysVelocity,
    stepper: IfRk4,
}

impl NudgedTdSystem {
    /// Builds the stepper; `params.mu1` is the single nudging gain.
    pub fn new(cfg: TDConfig, v: &VectorSpectralField, params: NudgeParams) -> Result<Self> {
        let grid = v.grid();
        let vel = PhysVelocity::new(v);
        check_time_step(cfg.dt, dx(grid), vel.max_speed(), params.mu1)?;
        let lambda = nudged_lambda(grid, cfg.kappa, params.n_obs, params.mu1);
        Ok(Self { grid, params, vel, stepper: IfRk4::new(&lambda, cfg.dt) })
    }

    /// Advances `psi`; `obs(t)` supplies the observed low modes of the truth.
    pub fn step(
        &self,
        psi: &mut ScalarSpectralField,
        t: f64,
        force: &dyn Fn(f64) -> ScalarSpectralField,
        obs: &dyn Fn(f64) -> ScalarSpectralField,
    ) -> Result<()> {
        let grid = self.grid;
        let (n_obs, mu) = (self.params.n_obs, self.params.mu1);
        self.stepper.step(psi.coeffs_mut(), t, |y, s, out| {
            let state = scalar_from(grid, y);
            let mut r = self.vel.advect(&state);
            r.scale(-1.0);
            r.axpy(1.0, &force(s));
            r.axpy(mu, &obs(s).project(n_obs, Band::Low));
            r.pack(out);
        })
    }
}

/// Coupled nudging transport-diffusion system (state and force estimates):
///
/// `d psi/dt + v . grad(P_N phi + Q_N psi)
///    = kappa Lap(P_N phi + Q_N psi) + l + F(l) + mu1 (P_N phi - P_N psi)`,
/// `d l/dt = mu2 (P_N phi - P_N psi)`.
pub struct NudgingTdSystem {
    grid: WaveGrid,
    cfg: TDConfig,
    params: NudgeParams,
    map: EnslavingMap,
    vel: PhysVelocity,
    stepper: IfRk4,
}

impl NudgingTdSystem {
    /// Builds the stepper.
    pub fn new(
        cfg: TDConfig,
        v: &VectorSpectralField,
        params: NudgeParams,
        map: EnslavingMap,
    ) -> Result<Self> {
        let grid = v.grid();
        let vel = PhysVelocity::new(v);
        check_time_step(cfg.dt, dx(grid), vel.max_speed(), params.mu1)?;
        let mut lambda = spliced_lambda(grid, cfg.kappa, params.n_obs, params.mu1);
        lambda.extend(std::iter::repeat(0.0).take(grid.num_modes()));
        Ok(Self { grid, cfg, params, map, vel, stepper: IfRk4::new(&lambda, cfg.dt) })
    }

    /// Diagonal rates of the packed `(psi, l)` vector, as used by the owned
    /// stepper (for embedding the system in a larger stacked integrator).
    pub(crate) fn lambda(&self) -> Vec<f64> {
        let mut lambda = spliced_lambda(self.grid, self.cfg.kappa, self.params.n_obs, self.params.mu1);
        lambda.extend(std::iter::repeat(0.0).take(self.grid.num_modes()));
        lambda
    }

    /// Explicit right-hand side of the packed `(psi, l)` vector given the
    /// observed low modes; everything in [`Self::lambda`] is excluded.
    pub(crate) fn rhs(&self, y: &[Complex64], obs_low: &ScalarSpectralField, out: &mut [Complex64]) {
        let grid = self.grid;
        let n = grid.num_modes();
        let (n_obs, mu1, mu2) = (self.params.n_obs, self.params.mu1, self.params.mu2);
        let psi_s = scalar_from(grid, &y[..n]);
        let l_s = scalar_from(grid, &y[n..]).project(n_obs, Band::Low);
        let phi_low = obs_low.project(n_obs, Band::Low);
        // Spliced field P_N phi_obs + Q_N psi.
        let mut spliced = psi_s.project(n_obs, Band::High);
        spliced.axpy(1.0, &phi_low);
        let mut r = self.vel.advect(&spliced);
        r.scale(-1.0);
        // Diffusion of the observed low modes is explicit; the high-band
        // diffusion of psi sits in the integrating factor.
        let mut lap_low = laplacian(&phi_low);
        lap_low.scale(self.cfg.kappa);
        r.axpy(1.0, &lap_low);
        r.axpy(1.0, &l_s);
        r.axpy(1.0, &self.map.evaluate(&l_s));
        r.axpy(mu1, &phi_low);
        // -mu1 P_N psi lives in the integrating factor.
        r.pack(&mut out[..n]);
        let mut dl = phi_low;
        dl.axpy(-1.0, &psi_s.project(n_obs, Band::Low));
        dl.scale(mu2);
        dl.pack(&mut out[n..]);
    }

    /// Advances the pair `(psi, l)`; `l` is the low-mode force estimate.
    pub fn step(
        &self,
        psi: &mut ScalarSpectralField,
        l: &mut ScalarSpectralField,
        t: f64,
        obs: &dyn Fn(f64) -> ScalarSpectralField,
    ) -> Result<()> {
        let n = self.grid.num_modes();
        let mut packed = vec![Complex64::new(0.0, 0.0); 2 * n];
        psi.pack(&mut packed[..n]);
        l.pack(&mut packed[n..]);
        let res =
            self.stepper.step(&mut packed, t, |y, s, out| self.rhs(y, &obs(s), out));
        psi.unpack(&packed[..n]);
        l.unpack(&packed[n..]);
        res
    }
}

/// Nudged 2D Navier-Stokes equation of the sieve stages:
/// `dv/dt + B(v, v) = nu Lap(v) + f(t) + mu P_N u_obs(t) - mu P_N v`.
pub struct NudgedNseSystem {
    grid: WaveGrid,
    cfg: NSEConfig,
    params: NudgeParams,
    stepper: IfRk4,
}

impl NudgedNseSystem {
    /// Builds the stepper; `params.mu1` is the single nudging gain.
    pub fn new(grid: WaveGrid, cfg: NSEConfig, params: NudgeParams) -> Result<Self> {
        check_time_step(cfg.dt, dx(grid), 0.0, params.mu1)?;
        let block = nudged_lambda(grid, cfg.nu, params.n_obs, params.mu1);
        let lambda = repeat_per_component(block, grid.dim());
        Ok(Self { grid, cfg, params, stepper: IfRk4::new(&lambda, cfg.dt) })
    }

    /// Advances `v`; `obs(t)` supplies the observed low modes of the truth.
    pub fn step(
        &self,
        v: &mut VectorSpectralField,
        t: f64,
        force: &dyn Fn(f64) -> VectorSpectralField,
        obs: &dyn Fn(f64) -> VectorSpectralField,
    ) -> Result<()> {
        let grid = self.grid;
        let (n_obs, mu) = (self.params.n_obs, self.params.mu1);
        let mut packed = vec![Complex64::new(0.0, 0.0); v.packed_len()];
        v.pack(&mut packed);
        let res = self.stepper.step(&mut packed, t, |y, s, out| {
            let state = vector_from(grid, y);
            let mut r = if self.cfg.freeze_nonlinearity {
                VectorSpectralField::zero(grid)
            } else {
                let mut b = nse_bilinear(&state, &state);
                b.scale(-1.0);
                b
            };
            let mut g = force(s);
            g.leray_project();
            r.axpy(1.0, &g);
            r.axpy(mu, &obs(s).project(n_obs, Band::Low));
            r.pack(out);
        });
        v.unpack(&packed);
        res
    }
}

/// Coupled nudging 2D Navier-Stokes system with the low/high split of the
/// bilinear term:
///
/// `dv/dt + P_N B(w, w) + Q_N B(w, v)
///    = nu Lap(P_N u + Q_N v) + l + F(l) + mu1 (P_N u - P_N v)`,
/// `dl/dt = mu2 (P_N u - P_N v)`,
///
/// where `w = P_N u + Q_N v` is the spliced velocity.
pub struct NudgingNseSystem {
    grid: WaveGrid,
    cfg: NSEConfig,
    params: NudgeParams,
    map: EnslavingMap,
    stepper: IfRk4,
}

impl NudgingNseSystem {
    /// Builds the stepper.
    pub fn new(
        grid: WaveGrid,
        cfg: NSEConfig,
        params: NudgeParams,
        map: EnslavingMap,
    ) -> Result<Self> {
        check_time_step(cfg.dt, dx(grid), 0.0, params.mu1)?;
        let mut lambda =
            repeat_per_component(spliced_lambda(grid, cfg.nu, params.n_obs, params.mu1), grid.dim());
        lambda.extend(std::iter::repeat(0.0).take(grid.dim() * grid.num_modes()));
        Ok(Self { grid, cfg, params, map, stepper: IfRk4::new(&lambda, cfg.dt) })
    }

    /// Diagonal rates of the packed `(v, l)` vector, as used by the owned
    /// stepper (for embedding the system in a larger stacked integrator).
    pub(crate) fn lambda(&self) -> Vec<f64> {
        let grid = self.grid;
        let mut lambda = repeat_per_component(
            spliced_lambda(grid, self.cfg.nu, self.params.n_obs, self.params.mu1),
            grid.dim(),
        );
        lambda.extend(std::iter::repeat(0.0).take(grid.dim() * grid.num_modes()));
        lambda
    }

    /// Explicit right-hand side of the packed `(v, l)` vector given the
    /// observed low modes; everything in [`Self::lambda`] is excluded.
    pub(crate) fn rhs(&self, y: &[Complex64], obs_low: &VectorSpectralField, out: &mut [Complex64]) {
        let grid = self.grid;
        let n = grid.dim() * grid.num_modes();
        let (n_obs, mu1, mu2) = (self.params.n_obs, self.params.mu1, self.params.mu2);
        let v_s = vector_from(grid, &y[..n]);
        let l_s = vector_from(grid, &y[n..]).project(n_obs, Band::Low);
        let u_low = obs_low.project(n_obs, Band::Low);
        // Spliced velocity w = P_N u_obs + Q_N v.
        let mut w = v_s.project(n_obs, Band::High);
        w.axpy(1.0, &u_low);
        let mut r = if self.cfg.freeze_nonlinearity {
            VectorSpectralField::zero(grid)
        } else {
            // One velocity transform serves both bilinear terms.
            let wp = PhysVelocity::new(&w);
            let mut b_low = wp.advect_vector(&w);
            b_low.leray_project();
            b_low.project_in_place(n_obs, Band::Low);
            let mut b_high = wp.advect_vector(&v_s);
            b_high.leray_project();
            b_high.project_in_place(n_obs, Band::High);
            let mut b = b_low;
            b.axpy(1.0, &b_high);
            b.scale(-1.0);
            b
        };
        for (rc, uc) in r.components_mut().iter_mut().zip(u_low.components()) {
            let mut lap = laplacian(uc);
            lap.scale(self.cfg.nu);
            rc.axpy(1.0, &lap);
        }
        r.axpy(1.0, &l_s);
        let mut tail = self.map.evaluate_vector(&l_s);
        tail.leray_project();
        r.axpy(1.0, &tail);
        r.axpy(mu1, &u_low);
        r.pack(&mut out[..n]);
        let mut dl = u_low;
        dl.axpy(-1.0, &v_s.project(n_obs, Band::Low));
        dl.scale(mu2);
        dl.pack(&mut out[n..]);
    }

    /// Advances the pair `(v, l)`; `l` is the low-mode force estimate.
    pub fn step(
        &self,
        v: &mut VectorSpectralField,
        l: &mut VectorSpectralField,
        t: f64,
        obs: &dyn Fn(f64) -> VectorSpectralField,
    ) -> Result<()> {
        let n = self.grid.dim() * self.grid.num_modes();
        let mut packed = vec![Complex64::new(0.0, 0.0); 2 * n];
        v.pack(&mut packed[..n]);
        l.pack(&mut packed[n..]);
        let res =
            self.stepper.step(&mut packed, t, |y, s, out| self.rhs(y, &obs(s), out));
        v.unpack(&packed[..n]);
        l.unpack(&packed[n..]);
        res
    }
}

/// One-shot step of the truth transport-diffusion equation.
pub fn step_td(
    cfg: TDConfig,
    v: &VectorSpectralField,
    phi: &mut ScalarSpectralField,
    t: f64,
    force: &dyn Fn(f64) -> ScalarSpectralField,
) -> Result<()> {
    TdTruthSystem::new(cfg, v)?.step(phi, t, force)
}

/// One-shot step of the truth 2D Navier-Stokes equations.
pub fn step_nse(
    cfg: NSEConfig,
    u: &mut VectorSpectralField,
    t: f64,
    force: &dyn Fn(f64) -> VectorSpectralField,
) -> Result<()> {
    NseTruthSystem::new(u.grid(), cfg)?.step(u, t, force)
}

/// One-shot step of the nudged transport-diffusion equation.
pub fn step_nudged_td(
    cfg: TDConfig,
    v: &VectorSpectralField,
    params: NudgeParams,
    psi: &mut ScalarSpectralField,
    t: f64,
    force: &dyn Fn(f64) -> ScalarSpectralField,
    obs: &dyn Fn(f64) -> ScalarSpectralField,
) -> Result<()> {
    NudgedTdSystem::new(cfg, v, params)?.step(psi, t, force, obs)
}

/// One-shot step of the coupled nudging transport-diffusion system.
pub fn step_nudging_td_system(
    cfg: TDConfig,
    v: &VectorSpectralField,
    params: NudgeParams,
    map: EnslavingMap,
    psi: &mut ScalarSpectralField,
    l: &mut ScalarSpectralField,
    t: f64,
    obs: &dyn Fn(f64) -> ScalarSpectralField,
) -> Result<()> {
    NudgingTdSystem::new(cfg, v, params, map)?.step(psi, l, t, obs)
}

/// One-shot step of the nudged 2D Navier-Stokes equation.
pub fn step_nudged_nse(
    cfg: NSEConfig,
    params: NudgeParams,
    v: &mut VectorSpectralField,
    t: f64,
    force: &dyn Fn(f64) -> VectorSpectralField,
    obs: &dyn Fn(f64) -> VectorSpectralField,
) -> Result<()> {
    NudgedNseSystem::new(v.grid(), cfg, params)?.step(v, t, force, obs)
}

/// One-shot step of the coupled nudging 2D Navier-Stokes system.
pub fn step_nudging_nse_system(
    cfg: NSEConfig,
    params: NudgeParams,
    map: EnslavingMap,
    v: &mut VectorSpectralField,
    l: &mut VectorSpectralField,
    t: f64,
    obs: &dyn Fn(f64) -> VectorSpectralField,
) -> Result<()> {
    NudgingNseSystem::new(v.grid(), cfg, params, map)?.step(v, l, t, obs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    /// Composite Simpson rule over uniformly spaced samples (even interval
    /// count required), fourth-order accurate.
    fn simpson(values: &[f64], dt: f64) -> f64 {
        let n = values.len() - 1;
        assert!(n >= 2 && n % 2 == 0, "need an even number of intervals");
        let mut sum = values[0] + values[n];
        for (i, v) in values.iter().enumerate().take(n).skip(1) {
            sum += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        sum * dt / 3.0
    }

    #[test]
    fn heat_decay_is_exact_per_mode() {
        // v = 0, g = 0: each mode decays by exp(-kappa |k|^2 t) exactly.
        let grid = WaveGrid::new(2, 8).unwrap();
        let cfg = TDConfig { kappa: 0.7, dt: 0.05 };
        let v = VectorSpectralField::zero(grid);
        let sys = TdTruthSystem::new(cfg, &v).unwrap();
        let mut phi = ScalarSpectralField::zero(grid);
        phi.set_mode_pair([2, 1, 0], Complex64::new(0.3, -0.6));
        let zero = |_: f64| ScalarSpectralField::zero(grid);
        let steps = 10;
        let mut t = 0.0;
        for _ in 0..steps {
            sys.step(&mut phi, t, &zero).unwrap();
            t += cfg.dt;
        }
        let decay = (-cfg.kappa * 5.0 * t).exp();
        let expect = Complex64::new(0.3, -0.6) * decay;
        assert!((phi.mode([2, 1, 0]) - expect).norm() < 1e-14);
    }

    #[test]
    fn td_energy_identity_holds_to_integrator_order() {
        // d/dt (|phi|^2 / 2) + kappa ||phi||^2 = (g, phi); with g = 0 and a
        // shear velocity, check the integrated identity over [0, T].
        let grid = WaveGrid::new(2, 8).unwrap();
        let cfg = TDConfig { kappa: 0.5, dt: 2.5e-3 };
        let v = synth::shear_velocity(grid, 1.0);
        let sys = TdTruthSystem::new(cfg, &v).unwrap();
        let mut rng = rand::SeedableRng::seed_from_u64(1);
        let mut phi = synth::random_scalar(grid, 4, 1.0, 1.0, &mut rng);
        let zero = |_: f64| ScalarSpectralField::zero(grid);
        let e0 = 0.5 * phi.seminorm(0.0).powi(2);
        let mut enstrophy = vec![phi.seminorm(1.0).powi(2)];
        let steps = 200;
        let mut t = 0.0;
        for _ in 0..steps {
            sys.step(&mut phi, t, &zero).unwrap();
            t += cfg.dt;
            enstrophy.push(phi.seminorm(1.0).powi(2));
        }
        let e1 = 0.5 * phi.seminorm(0.0).powi(2);
        let residual = (e1 - e0 + cfg.kappa * simpson(&enstrophy, cfg.dt)).abs();
        assert!(residual < 1e-7 * e0, "energy residual {residual}");
    }

    #[test]
    fn nudged_td_with_exact_force_tracks_truth() {
        // With f = g and psi(0) = phi(0), the nudged equation reproduces the
        // truth exactly (co-integrated observations).
        let grid = WaveGrid::new(2, 8).unwrap();
        let cfg = TDConfig { kappa: 1.0, dt: 5e-3 };
        let v = synth::shear_velocity(grid, 0.5);
        let mut rng = rand::SeedableRng::seed_from_u64(9);
        let g = synth::random_scalar(grid, 3, 1.0, 1.0, &mut rng);
        let phi0 = synth::random_scalar(grid, 6, 1.0, 1.0, &mut rng);

        // Co-integrate truth and nudged state as one stacked system so the
        // observation is available at the RK4 substages.
        let truth = TdTruthSystem::new(cfg, &v).unwrap();
        let params = NudgeParams::single(4, 10.0);
        let n = grid.num_modes();
        let mut lambda = diffusion_lambda(grid, cfg.kappa);
        lambda.extend(nudged_lambda(grid, cfg.kappa, params.n_obs, params.mu1));
        let stepper = IfRk4::new(&lambda, cfg.dt);
        let vel = PhysVelocity::new(&v);
        let mut y = vec![Complex64::new(0.0, 0.0); 2 * n];
        phi0.pack(&mut y[..n]);
        phi0.pack(&mut y[n..]);
        let mut t = 0.0;
        for _ in 0..100 {
            stepper
                .step(&mut y, t, |y, _s, out| {
                    let phi = scalar_from(grid, &y[..n]);
                    let psi = scalar_from(grid, &y[n..]);
                    let mut r = vel.advect(&phi);
                    r.scale(-1.0);
                    r.axpy(1.0, &g);
                    r.pack(&mut out[..n]);
                    let mut rp = vel.advect(&psi);
                    rp.scale(-1.0);
                    rp.axpy(1.0, &g);
                    rp.axpy(params.mu1, &phi.project(params.n_obs, Band::Low));
                    rp.pack(&mut out[n..]);
                })
                .unwrap();
            t += cfg.dt;
        }
        let phi = scalar_from(grid, &y[..n]);
        let psi = scalar_from(grid, &y[n..]);
        let rel = psi.sub(&phi).seminorm(0.0) / phi.seminorm(0.0);
        let _ = truth;
        assert!(rel < 1e-8, "relative tracking error {rel}");
    }

    #[test]
    fn nse_stokes_decay_with_frozen_nonlinearity() {
        let grid = WaveGrid::new(2, 6).unwrap();
        let cfg = NSEConfig { nu: 0.4, dt: 0.02, freeze_nonlinearity: true };
        let sys = NseTruthSystem::new(grid, cfg).unwrap();
        let mut u = synth::taylor_green(grid, 1.0);
        let zero = |_: f64| VectorSpectralField::zero(grid);
        let mut t = 0.0;
        for _ in 0..50 {
            sys.step(&mut u, t, &zero).unwrap();
            t += cfg.dt;
        }
        // Taylor-Green lives on |k|^2 = 2.
        let expect = synth::taylor_green(grid, ((-cfg.nu) * 2.0 * t).exp());
        assert!(u.sub(&expect).seminorm(0.0) < 1e-13);
    }

    #[test]
    fn nse_truth_conserves_energy_budget() {
        // Enstrophy equality residual stays at integrator accuracy for the
        // full nonlinear equations with g = 0.
        let grid = WaveGrid::new(2, 10).unwrap();
        let cfg = NSEConfig { nu: 0.2, dt: 2e-3, freeze_nonlinearity: false };
        let sys = NseTruthSystem::new(grid, cfg).unwrap();
        let mut rng = rand::SeedableRng::seed_from_u64(4);
        let mut u = synth::random_divergence_free(grid, 4, 1.5, 0.8, &mut rng);
        let zero = |_: f64| VectorSpectralField::zero(grid);
        let e0 = 0.5 * u.seminorm(1.0).powi(2);
        let mut palinstrophy = vec![u.seminorm(2.0).powi(2)];
        let steps = 100;
        let mut t = 0.0;
        for _ in 0..steps {
            sys.step(&mut u, t, &zero).unwrap();
            t += cfg.dt;
            palinstrophy.push(u.seminorm(2.0).powi(2));
        }
        let e1 = 0.5 * u.seminorm(1.0).powi(2);
        let residual = (e1 - e0 + cfg.nu * simpson(&palinstrophy, cfg.dt)).abs();
        assert!(residual < 1e-7 * e0, "enstrophy residual {residual}");
    }

    #[test]
    fn time_step_guard_rejects_fast_flows() {
        let grid = WaveGrid::new(2, 8).unwrap();
        let v = synth::shear_velocity(grid, 100.0);
        let cfg = TDConfig { kappa: 1.0, dt: 0.1 };
        assert!(TdTruthSystem::new(cfg, &v).is_err());
        let params = NudgeParams::single(4, 1e4);
        let cfg2 = TDConfig { kappa: 1.0, dt: 1e-3 };
        assert!(NudgedTdSystem::new(cfg2, &synth::shear_velocity(grid, 0.1), params).is_err());
    }
}

//! End-to-end acceptance suite.
//!
//! Each test exercises one acceptance criterion, prints a single
//! `NAME: PASS`/`NAME: FAIL (...)` line, and enforces its wall-clock budget.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::f64::consts::{E, PI, SQRT_2};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fluxrecon::conditions::{
    grashof_report, gronwall_rate, nudging_nse_params, nudging_td_params, roots_from_gains,
    sieve_nse_mu_interval, sieve_td_mu_interval, ConstantsTable, GrashofReport,
    VelocityFunctionals,
};
use fluxrecon::forcing::{EnslavingMap, QuasiFiniteForce, QuasiFiniteVectorForce};
use fluxrecon::harness::{twin_nudging_nse, twin_nudging_td};
use fluxrecon::sieve::{
    recover_large_scale_nse, recover_large_scale_td, run_sieve_nse, run_sieve_td,
    stationary_sieve_td, SieveConfig, SieveTruth,
};
use fluxrecon::solver::{
    generate_truth_nse, generate_truth_td, stationary_truth_td, NSEConfig, NudgeParams, TDConfig,
};
use fluxrecon::spectral::{
    advect, laplacian, nse_bilinear, trilinear_b, trilinear_b_vector, Band, PhysVelocity,
    ScalarSpectralField, VectorSpectralField, WaveGrid,
};
use fluxrecon::synth;

/// Runs one criterion, prints its PASS/FAIL line, and panics on failure or
/// on a blown time budget.
fn criterion(name: &str, budget: Duration, body: impl FnOnce() -> Result<(), String>) {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let verdict = match (&outcome, elapsed <= budget) {
        (Ok(()), true) => format!("{name}: PASS ({:.1}s)", elapsed.as_secs_f64()),
        (Ok(()), false) => format!(
            "{name}: FAIL (over budget: {:.1}s > {:.1}s)",
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        ),
        (Err(msg), _) => format!("{name}: FAIL ({msg})"),
    };
    println!("{verdict}");
    if !verdict.contains("PASS") {
        panic!("{verdict}");
    }
}

fn check(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

/// Composite Simpson rule over equally spaced samples (even interval count).
fn simpson(values: &[f64], dt: f64) -> f64 {
    let n = values.len() - 1;
    assert!(n >= 2 && n % 2 == 0, "Simpson needs an even interval count");
    let mut acc = values[0] + values[n];
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * dt / 3.0
}

/// Criterion 1: exactness of the spectral identities over 200 random fields.
#[test]
fn spectral_identities() {
    criterion("spectral-identities", Duration::from_secs(10), || {
        let grid = WaveGrid::new(2, 16).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let n_band = 5usize;
        for trial in 0..200 {
            let phi = synth::random_scalar(grid, 12, 1.0, 1.0, &mut rng);
            let psi = synth::random_scalar(grid, 12, 1.0, 1.0, &mut rng);
            let u = synth::random_divergence_free(grid, 12, 1.0, 1.0, &mut rng);
            let w = synth::random_divergence_free(grid, 12, 1.0, 1.0, &mut rng);

            // P_N + Q_N = I, exactly (projection copies coefficients).
            let mut sum = phi.project(n_band, Band::Low);
            sum.axpy(1.0, &phi.project(n_band, Band::High));
            let dev = sum.sub(&phi).max_abs();
            check(dev == 0.0, format!("trial {trial}: P_N + Q_N deviates by {dev}"))?;

            // Leray idempotence.
            let mut once = u.clone();
            once.leray_project();
            let mut twice = once.clone();
            twice.leray_project();
            let scale = once.seminorm(0.0).max(1.0);
            let idem = twice.sub(&once).max_abs() / scale;
            check(idem <= 1e-13, format!("trial {trial}: Leray idempotence error {idem}"))?;

            // Leray annihilates gradients.
            let mut grad = VectorSpectralField::zero(grid);
            for idx in 0..grid.num_modes() {
                let k = grid.wave_at(idx);
                let c = phi.coeffs()[idx];
                for axis in 0..2 {
                    grad.components_mut()[axis].coeffs_mut()[idx] =
                        Complex64::new(0.0, k[axis] as f64) * c;
                }
            }
            let gnorm = grad.max_abs().max(1.0);
            let mut killed = grad.clone();
            killed.leray_project();
            let ann = killed.max_abs() / gnorm;
            check(ann <= 1e-13, format!("trial {trial}: Leray leaves gradient residue {ann}"))?;

            // Trilinear skew-symmetry and self-annihilation, relative to the
            // natural advective scale.
            let scale_s = advect(&u, &phi).seminorm(0.0) * psi.seminorm(0.0)
                + advect(&u, &psi).seminorm(0.0) * phi.seminorm(0.0)
                + f64::EPSILON;
            let skew = (trilinear_b(&u, &phi, &psi) + trilinear_b(&u, &psi, &phi)).abs() / scale_s;
            check(skew <= 1e-11, format!("trial {trial}: b(u,phi,psi)+b(u,psi,phi) = {skew}"))?;
            let self_s = advect(&u, &phi).seminorm(0.0) * phi.seminorm(0.0) + f64::EPSILON;
            let diag = trilinear_b(&u, &phi, &phi).abs() / self_s;
            check(diag <= 1e-11, format!("trial {trial}: b(u,phi,phi) = {diag}"))?;
            let vskew = (trilinear_b_vector(&u, &w, &w)).abs()
                / (u.seminorm(0.0) * w.seminorm(1.0) * w.seminorm(0.0) + f64::EPSILON);
            check(vskew <= 1e-11, format!("trial {trial}: b(u,w,w) = {vskew}"))?;

            // Bernstein (low band) and Poincare (high band) with constant 1.
            let lo = phi.project(n_band, Band::Low);
            let hi = phi.project(n_band, Band::High);
            let nf = n_band as f64;
            let bern = lo.seminorm(1.0) - nf * lo.seminorm(0.0);
            check(
                bern <= 1e-12 * lo.seminorm(1.0).max(1.0),
                format!("trial {trial}: Bernstein violated by {bern}"),
            )?;
            let poin = hi.seminorm(0.0) - hi.seminorm(1.0) / (nf + 1.0);
            check(
                poin <= 1e-12 * hi.seminorm(0.0).max(1.0),
                format!("trial {trial}: Poincare violated by {poin}"),
            )?;
        }
        Ok(())
    });
}

/// Criterion 2: fourth-order convergence on manufactured solutions and
/// `O(dt^4)` energy-identity residuals.
#[test]
fn integrator_convergence() {
    criterion("integrator-convergence", Duration::from_secs(30), || {
        let grid = WaveGrid::new(2, 8).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(202);
        let dts: [f64; 3] = [1e-2, 5e-3, 2.5e-3];
        let t_end = 1.0;

        // Transport-diffusion: phi(t) = e^{sin t} phi0 solves the
        // semi-discrete equation with a matching manufactured force.
        let v = synth::shear_velocity(grid, 0.8);
        let kappa = 0.5;
        let phi0 = synth::random_scalar(grid, 3, 1.0, 1.0, &mut rng);
        let adv0 = advect(&v, &phi0);
        let lap0 = laplacian(&phi0);
        let amp = |t: f64| t.sin().exp();
        let damp = |t: f64| t.cos() * t.sin().exp();
        let g_td = |t: f64| {
            let mut g = phi0.clone();
            g.scale(damp(t));
            g.axpy(amp(t), &adv0);
            g.axpy(-kappa * amp(t), &lap0);
            g
        };
        let mut td_errs = Vec::new();
        let mut td_residuals = Vec::new();
        for &dt in &dts {
            let steps = (t_end / dt).round() as usize;
            let cfg = TDConfig { kappa, dt };
            let rec = generate_truth_td(cfg, &v, &g_td, &phi0, 0.0, steps, 3, true)
                .map_err(|e| e.to_string())?;
            let mut exact = phi0.clone();
            exact.scale(amp(t_end));
            td_errs.push(rec.final_state.sub(&exact).seminorm(0.0));
            // Energy identity d/dt (1/2)|phi|^2 = -kappa |phi|_1^2 + (g, phi).
            let integrand: Vec<f64> = rec
                .states
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let t = i as f64 * dt;
                    -kappa * s.seminorm(1.0).powi(2) + g_td(t).inner(s)
                })
                .collect();
            let lhs = 0.5 * rec.final_state.seminorm(0.0).powi(2)
                - 0.5 * phi0.seminorm(0.0).powi(2);
            td_residuals.push((lhs - simpson(&integrand, dt)).abs());
        }
        let td_order =
            (td_errs[0] / td_errs[2]).ln() / (dts[0] / dts[2]).ln();
        check(td_order >= 3.5, format!("TD solution order {td_order:.2} < 3.5, errors {td_errs:?}"))?;
        let td_res_order =
            (td_residuals[0] / td_residuals[2]).ln() / (dts[0] / dts[2]).ln();
        check(
            td_res_order >= 3.3,
            format!("TD energy residual order {td_res_order:.2}, residuals {td_residuals:?}"),
        )?;

        // Navier-Stokes: u(t) = e^{sin t} TG is exact for the semi-discrete
        // system once the (numerically tiny) discrete bilinear term of the
        // Taylor-Green mode is folded into the force.
        let nu = 0.4;
        let tg = synth::taylor_green(grid, 1.0);
        let b0 = nse_bilinear(&tg, &tg);
        let g_nse = |t: f64| {
            let a = amp(t);
            let mut g = tg.clone();
            g.scale(damp(t) + 2.0 * nu * a);
            g.axpy(a * a, &b0);
            g
        };
        let mut nse_errs = Vec::new();
        let mut nse_residuals = Vec::new();
        for &dt in &dts {
            let steps = (t_end / dt).round() as usize;
            let cfg = NSEConfig { nu, dt, freeze_nonlinearity: false };
            let rec = generate_truth_nse(cfg, &g_nse, &tg, 0.0, steps, 3, true)
                .map_err(|e| e.to_string())?;
            let mut exact = tg.clone();
            exact.scale(amp(t_end));
            nse_errs.push(rec.final_state.sub(&exact).seminorm(0.0));
            let integrand: Vec<f64> = rec
                .states
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let t = i as f64 * dt;
                    -nu * s.seminorm(1.0).powi(2) + g_nse(t).inner(s)
                })
                .collect();
            let lhs = 0.5 * rec.final_state.seminorm(0.0).powi(2)
                - 0.5 * tg.seminorm(0.0).powi(2);
            nse_residuals.push((lhs - simpson(&integrand, dt)).abs());
        }
        let nse_order =
            (nse_errs[0] / nse_errs[2]).ln() / (dts[0] / dts[2]).ln();
        check(
            nse_order >= 3.5,
            format!("NSE solution order {nse_order:.2} < 3.5, errors {nse_errs:?}"),
        )?;
        let nse_res_order =
            (nse_residuals[0] / nse_residuals[2]).ln() / (dts[0] / dts[2]).ln();
        check(
            nse_res_order >= 3.3,
            format!("NSE energy residual order {nse_res_order:.2}, residuals {nse_residuals:?}"),
        )
    });
}

/// Criterion 3: large-scale recovery is exact (to roundoff) on truth states.
#[test]
fn zero_sync_recovery() {
    criterion("zero-sync-recovery", Duration::from_secs(20), || {
        let grid = WaveGrid::new(2, 31).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(303);
        let n_obs = 8;
        let dt = 2e-3;
        let steps = 150;

        // Transport-diffusion with an oscillating low-mode force.
        let kappa = 0.7;
        let v = synth::taylor_green(grid, 0.2);
        let map = EnslavingMap::power_law_tail(grid, n_obs, 3.0, 0.4, 0.0, -1.0)
            .map_err(|e| e.to_string())?;
        let low0 = synth::random_scalar(grid, n_obs, 1.0, 1.0, &mut rng);
        let low1 = synth::random_scalar(grid, n_obs, 1.0, 0.5, &mut rng);
        let g = QuasiFiniteForce { low0, low1: Some((low1, 1.3)), map };
        let phi0 = synth::random_scalar(grid, 12, 1.5, 1.0, &mut rng);
        let force = |t: f64| g.full(t);
        let cfg = TDConfig { kappa, dt };
        let rec = generate_truth_td(cfg, &v, &force, &phi0, 0.0, steps, n_obs, true)
            .map_err(|e| e.to_string())?;
        let vel = PhysVelocity::new(&v);
        for &i in &[10usize, 75, 140] {
            let l = recover_large_scale_td(kappa, &vel, &rec.stream, i, &rec.states[i])
                .map_err(|e| e.to_string())?;
            let expect = g.full(i as f64 * dt).project(n_obs, Band::Low);
            let rel = l.sub(&expect).seminorm(0.0) / expect.seminorm(0.0);
            check(rel <= 1e-9, format!("TD recovery at sample {i}: rel error {rel:.3e}"))?;
        }

        // Navier-Stokes with an oscillating low-mode force.
        let nu = 0.7;
        let vmap = EnslavingMap::power_law_tail(grid, n_obs, 3.0, 0.4, 0.0, -1.0)
            .map_err(|e| e.to_string())?;
        let mut vlow0 = synth::random_divergence_free(grid, n_obs, 1.0, 1.0, &mut rng);
        vlow0.leray_project();
        let vlow1 = synth::random_divergence_free(grid, n_obs, 1.0, 0.5, &mut rng);
        let gv = QuasiFiniteVectorForce { low0: vlow0, low1: Some((vlow1, 1.3)), map: vmap };
        let u0 = synth::random_divergence_free(grid, 12, 1.5, 0.5, &mut rng);
        let vforce = |t: f64| gv.full(t);
        let ncfg = NSEConfig { nu, dt, freeze_nonlinearity: false };
        let nrec = generate_truth_nse(ncfg, &vforce, &u0, 0.0, steps, n_obs, true)
            .map_err(|e| e.to_string())?;
        for &i in &[10usize, 75, 140] {
            let l = recover_large_scale_nse(nu, &nrec.stream, i, &nrec.states[i])
                .map_err(|e| e.to_string())?;
            let expect = gv.full(i as f64 * dt).project(n_obs, Band::Low);
            let rel = l.sub(&expect).seminorm(0.0) / expect.seminorm(0.0);
            check(rel <= 1e-9, format!("NSE recovery at sample {i}: rel error {rel:.3e}"))?;
        }
        Ok(())
    });
}

/// Criterion 4: transport-diffusion nudging twin with checker-selected gains
/// decays exponentially over at least six orders of magnitude.
#[test]
fn nudging_td_twin_decay() {
    criterion("nudging-td-twin", Duration::from_secs(120), || {
        let grid = WaveGrid::new(2, 31).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let kappa = 1.0;
        let v = synth::taylor_green(grid, 0.05);
        let constants = ConstantsTable::new();
        let functionals =
            VelocityFunctionals::compute(&[v.clone()], &[0.0, 0.25, 0.5, 0.75, 1.0], &constants)
                .map_err(|e| e.to_string())?;
        let map = EnslavingMap::power_law_tail(grid, 2, 3.0, 0.5, 0.0, -1.0)
            .map_err(|e| e.to_string())?;
        let probe = nudging_td_params(&functionals, map.lipschitz(), 8, kappa, 2.0, &constants);
        let n_obs = if probe.feasible {
            8
        } else {
            probe.minimal_n.ok_or("no feasible cutoff found")?
        };
        let cond = nudging_td_params(&functionals, map.lipschitz(), n_obs, kappa, 2.0, &constants);
        check(cond.feasible, format!("checker infeasible at N = {n_obs}"))?;
        check(cond.rho < 0.0, format!("predicted rate {} not negative", cond.rho))?;
        let params = NudgeParams { n_obs, mu1: cond.mu1, mu2: cond.mu2 };

        let low0 = synth::random_scalar(grid, 2, 1.0, 1.0, &mut rng);
        let g = QuasiFiniteForce::steady(low0, map);
        let phi0 = synth::random_scalar(grid, n_obs, 1.5, 1.0, &mut rng);
        let psi0 = ScalarSpectralField::zero(grid);
        let l0 = ScalarSpectralField::zero(grid);

        let dt = (0.4 / cond.mu1).min(2e-3);
        let t_end = 3.0;
        let steps = (t_end / dt).ceil() as usize;
        let cfg = TDConfig { kappa, dt };
        let run = twin_nudging_td(cfg, &v, params, &g, &phi0, &psi0, &l0, 0.0, steps, 10)
            .map_err(|e| e.to_string())?;

        for column in ["sync_err_L2", "model_err_Hm1"] {
            // Fit after the two-gain transient has settled onto the slow mode.
            let fit = run
                .series
                .fit(column, (0.3, 1.8))
                .map_err(|e| e.to_string())?;
            check(fit.rate < 0.0, format!("{column}: fitted rate {:.3} not negative", fit.rate))?;
            check(
                fit.residual < 0.1,
                format!("{column}: fit residual {:.3} >= 10%", fit.residual),
            )?;
            let vals = run.series.column(column).ok_or("missing column")?;
            let drop = vals[0] / vals.last().copied().unwrap_or(f64::NAN);
            check(
                drop >= 1e6,
                format!("{column}: only {:.1} orders of reduction", drop.log10()),
            )?;
        }
        Ok(())
    });
}

/// Criterion 5: transport-diffusion sieve with checker-selected gain and
/// stage length contracts by at least 0.8 per stage from stage 2 on.
#[test]
fn sieve_td_contraction() {
    criterion("sieve-td-contraction", Duration::from_secs(300), || {
        let grid = WaveGrid::new(2, 31).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(505);
        let kappa = 1.0;
        let dt = 2e-2;
        let n_obs = 8;
        let v = synth::taylor_green(grid, 0.05);
        let constants = ConstantsTable::new();
        let functionals =
            VelocityFunctionals::compute(&[v.clone()], &[0.0, 0.25, 0.5, 0.75, 1.0], &constants)
                .map_err(|e| e.to_string())?;
        let map = EnslavingMap::power_law_tail(grid, 2, 3.0, 0.5, 0.0, -1.0)
            .map_err(|e| e.to_string())?;
        let cond =
            sieve_td_mu_interval(&functionals, map.lipschitz(), n_obs, kappa, dt, false, &constants);
        check(cond.feasible, "sieve checker infeasible".into())?;

        let low0 = synth::random_scalar(grid, 2, 1.0, 1.0, &mut rng);
        let low1 = synth::random_scalar(grid, 2, 1.0, 0.5, &mut rng);
        let g = QuasiFiniteForce { low0, low1: Some((low1, 1.0)), map: map.clone() };
        let scfg = SieveConfig {
            n_obs,
            mu: cond.mu,
            t_star: cond.t_star,
            t_window: cond.t_star,
            stages: 6,
        };
        let cfg = TDConfig { kappa, dt };
        let horizon = scfg.stages as f64 * scfg.t_star + scfg.t_window;
        let steps = (horizon / dt).round() as usize;
        let phi0 = synth::random_scalar(grid, 12, 1.5, 1.0, &mut rng);
        let force = |t: f64| g.full(t);
        let rec = generate_truth_td(cfg, &v, &force, &phi0, 0.0, steps, n_obs, true)
            .map_err(|e| e.to_string())?;
        let truth = SieveTruth { states: &rec.states, force: &force };
        let zero = |_: f64| ScalarSpectralField::zero(grid);
        let high0 = ScalarSpectralField::zero(grid);
        let run = run_sieve_td(&cfg, &scfg, &v, &rec.stream, &zero, &high0, &map, Some(&truth))
            .map_err(|e| e.to_string())?;
        let ratios = run.contraction_ratios();
        for (j, r) in ratios.iter().enumerate() {
            check(
                *r <= 0.8,
                format!("stage {} -> {}: contraction ratio {r:.3} > 0.8 ({ratios:?})", j + 1, j + 2),
            )?;
        }
        Ok(())
    });
}

/// Criterion 6: Navier-Stokes sieve at checker-feasible parameters contracts
/// the model error by at least 0.75 over four consecutive stages.
#[test]
fn sieve_nse_contraction() {
    criterion("sieve-nse-contraction", Duration::from_secs(300), || {
        let grid = WaveGrid::new(2, 23).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(606);
        let nu = 1.0;
        let dt = 1e-2;
        let constants = ConstantsTable::new();
        let map = EnslavingMap::power_law_tail(grid, 2, 3.0, 0.3, 0.0, -1.0)
            .map_err(|e| e.to_string())?;
        let mut low0 = synth::random_divergence_free(grid, 2, 1.0, 0.05, &mut rng);
        low0.leray_project();
        let g = QuasiFiniteVectorForce::steady(low0, map.clone());
        let g0 = g.full(0.0);
        let grashof = grashof_report(&[g0.clone()], nu, &constants).map_err(|e| e.to_string())?;
        check(grashof.g <= 5.0, format!("Grashof number {} > 5", grashof.g))?;
        let m0 = g0.seminorm(-1.0);
        let mut n_obs = 8;
        let mut cond =
            sieve_nse_mu_interval(&grashof, map.lipschitz(), m0, n_obs, nu, dt, &constants);
        while !cond.feasible && n_obs < grid.k_max() {
            n_obs += 2;
            cond = sieve_nse_mu_interval(&grashof, map.lipschitz(), m0, n_obs, nu, dt, &constants);
        }
        check(cond.feasible, format!("NSE sieve checker infeasible up to N = {n_obs}"))?;

        let scfg = SieveConfig {
            n_obs,
            mu: cond.mu,
            t_star: cond.t_star,
            t_window: cond.t_star,
            stages: 6,
        };
        let cfg = NSEConfig { nu, dt, freeze_nonlinearity: false };
        let horizon = scfg.stages as f64 * scfg.t_star + scfg.t_window;
        let steps = (horizon / dt).round() as usize;
        let u0 = synth::random_divergence_free(grid, 10, 1.5, 0.3, &mut rng);
        let force = |t: f64| g.full(t);
        let rec = generate_truth_nse(cfg, &force, &u0, 0.0, steps, n_obs, true)
            .map_err(|e| e.to_string())?;
        let truth = SieveTruth { states: &rec.states, force: &force };
        let zero = |_: f64| VectorSpectralField::zero(grid);
        let high0 = VectorSpectralField::zero(grid);
        let run = run_sieve_nse(&cfg, &scfg, &rec.stream, &zero, &high0, &map, Some(&truth))
            .map_err(|e| e.to_string())?;
        let ratios = run.contraction_ratios();
        check(ratios.len() >= 4, format!("need at least 4 ratios, got {ratios:?}"))?;
        let tail = &ratios[ratios.len() - 4..];
        for (j, r) in tail.iter().enumerate() {
            check(
                *r <= 0.75,
                format!("late stage ratio {j}: {r:.3} > 0.75 ({ratios:?})"),
            )?;
        }
        // The state synchronization error must contract at the same rate.
        let sync: Vec<f64> = run.stages.iter().map(|s| s.sup_sync_err_l2).collect();
        for w in sync.windows(2).skip(1) {
            check(
                w[1] <= 0.8 * w[0],
                format!("sync error stalls: {sync:?}"),
            )?;
        }
        Ok(())
    });
}

/// Criterion 7: Navier-Stokes nudging twin with checker-selected gains has
/// negative fitted error rates and a bounded auxiliary energy.
#[test]
fn nudging_nse_twin_decay() {
    criterion("nudging-nse-twin", Duration::from_secs(180), || {
        let grid = WaveGrid::new(2, 23).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(707);
        let nu = 1.0;
        let constants = ConstantsTable::new();
        let map = EnslavingMap::power_law_tail(grid, 2, 3.0, 0.3, 0.0, -1.0)
            .map_err(|e| e.to_string())?;
        let mut low0 = synth::random_divergence_free(grid, 2, 1.0, 0.012, &mut rng);
        low0.leray_project();
        let g = QuasiFiniteVectorForce::steady(low0, map.clone());

        // Uniform enstrophy-norm bound from a pilot truth run.
        let dt = 5e-3;
        let cfg = NSEConfig { nu, dt, freeze_nonlinearity: false };
        let u0 = synth::random_divergence_free(grid, 8, 1.5, 0.01, &mut rng);
        let force = |t: f64| g.full(t);
        let pilot = generate_truth_nse(cfg, &force, &u0, 0.0, 200, 4, true)
            .map_err(|e| e.to_string())?;
        // Uniform bound over the settled part of the orbit (the twin starts
        // from the pilot's final state).
        let settled = &pilot.states[pilot.states.len() / 2..];
        let u_bound = settled.iter().map(|s| s.seminorm(1.0)).fold(0.0, f64::max) * 1.5;

        let probe = nudging_nse_params(u_bound, map.lipschitz(), 17, nu, 2.0, 1.0, &constants);
        let n_obs = if probe.feasible {
            17
        } else {
            probe.minimal_n.ok_or("no feasible cutoff found")?
        };
        let cond =
            nudging_nse_params(u_bound, map.lipschitz(), n_obs, nu, 2.0, 1.0, &constants);
        check(cond.feasible, format!("checker infeasible at N = {n_obs}"))?;
        check(cond.delta_n > 0.0, format!("defect factor {} not positive", cond.delta_n))?;
        check(n_obs <= grid.k_max(), format!("cutoff N = {n_obs} exceeds the grid"))?;
        let params = NudgeParams { n_obs, mu1: cond.mu1, mu2: cond.mu2 };

        let t_end = 4.0;
        let dt_twin = (0.4 / cond.mu1).min(5e-3);
        let steps = (t_end / dt_twin).ceil() as usize;
        let cfg_twin = NSEConfig { nu, dt: dt_twin, freeze_nonlinearity: false };
        let v0 = VectorSpectralField::zero(grid);
        let l0 = VectorSpectralField::zero(grid);
        let run =
            twin_nudging_nse(cfg_twin, params, &g, &pilot.final_state, &v0, &l0, 0.0, steps, 2)
                .map_err(|e| e.to_string())?;

        for column in ["sync_err_L2", "model_err_Hm1"] {
            // Fit inside the live decay, before the series hits its floor.
            let fit = run
                .series
                .fit(column, (0.02, 0.35))
                .map_err(|e| e.to_string())?;
            check(fit.rate < 0.0, format!("{column}: fitted rate {:.3} not negative", fit.rate))?;
        }
        // No super-linear growth of mu2 |v|^2 + |l|^2: the trajectory must
        // stay within a fixed multiple of its settled level.
        let aux = run.series.column("aux_energy").ok_or("missing aux_energy")?;
        let settled = aux[aux.len() / 2];
        let peak = aux.iter().fold(0.0f64, |a, &b| a.max(b));
        check(
            peak <= 4.0 * settled + 1e-12,
            format!("auxiliary energy grows: peak {peak:.3e} vs settled {settled:.3e}"),
        )
    });
}

/// Criterion 8: the stationary sieve recovers the force to 1e-6 relative
/// error within ten stages.
#[test]
fn stationary_sieve_accuracy() {
    criterion("stationary-sieve", Duration::from_secs(60), || {
        let grid = WaveGrid::new(2, 15).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(808);
        let cfg = TDConfig { kappa: 1.0, dt: 5e-3 };
        let v = synth::shear_velocity(grid, 0.3);
        let map = EnslavingMap::power_law_tail(grid, 2, 3.0, 0.5, 0.0, -1.0)
            .map_err(|e| e.to_string())?;
        let low0 = synth::random_scalar(grid, 2, 1.0, 1.0, &mut rng);
        let g = QuasiFiniteForce::steady(low0, map.clone());
        let g_full = g.full(0.0);
        let phi0 = ScalarSpectralField::zero(grid);
        let phi = stationary_truth_td(cfg, &v, &g_full, &phi0, 1e-13, 500)
            .map_err(|e| e.to_string())?;
        let n_obs = 6;
        let run = stationary_sieve_td(
            &cfg,
            n_obs,
            20.0,
            0.3,
            &v,
            &phi.project(n_obs, Band::Low),
            &ScalarSpectralField::zero(grid),
            &map,
            10,
            1e-9,
            Some(&g_full),
        )
        .map_err(|e| e.to_string())?;
        let last = *run.rel_errors.last().ok_or("no stages ran")?;
        check(
            last <= 1e-6 && run.stages_run <= 10,
            format!("relative force error {last:.3e} after {} stages", run.stages_run),
        )
    });
}

/// Criterion 9: the parameter checkers reproduce their closed-form reference
/// values to 1e-12.
#[test]
fn condition_arithmetic() {
    criterion("condition-arithmetic", Duration::from_secs(1), || {
        let constants = ConstantsTable::new();
        let unit = |eps: f64, value: f64| VelocityFunctionals {
            dim: 2,
            eps_grid: vec![eps],
            v_eps: vec![value],
            w_eps: vec![value],
            u_d: value,
            sup_speed: value,
        };

        // Weak sieve interval at kappa = 1, N = 10, L = 0, V = 1: (1, 50].
        let rep = sieve_td_mu_interval(&unit(0.0, 1.0), 0.0, 10, 1.0, 1e-3, false, &constants);
        check(
            (rep.mu_lower - 1.0).abs() <= 1e-12 && (rep.mu_upper - 50.0).abs() <= 1e-12,
            format!("weak interval ({}, {}]", rep.mu_lower, rep.mu_upper),
        )?;
        let strong = sieve_td_mu_interval(&unit(0.0, 1.0), 0.0, 10, 1.0, 1e-3, true, &constants);
        check(
            (strong.mu_upper - 25.0).abs() <= 1e-12,
            format!("strong upper bound {}", strong.mu_upper),
        )?;
        check(
            ((-rep.mu * rep.t_star).exp() + rep.mu_lower / rep.mu - rep.lambda_star.powi(2)).abs()
                <= 1e-12,
            "stage-length identity".into(),
        )?;

        // Gain roots and Gronwall rates.
        check(
            roots_from_gains(3.0, 2.0) == Some((2.0, 1.0)),
            "roots of lambda^2 - 3 lambda + 2".into(),
        )?;
        check(
            (gronwall_rate(-1.0, -1.0, 0.0, 0.25) + 1.0).abs() <= 1e-12,
            "diagonal Gronwall rate".into(),
        )?;
        check(
            (gronwall_rate(-2.0, -4.0, 2.0, 0.0) - (-3.0 + SQRT_2)).abs() <= 1e-12,
            "off-diagonal Gronwall rate".into(),
        )?;

        // Transport-diffusion nudging minimal cutoff at kappa = 1, eps = 1/2,
        // W = 1, L = 1 is N = 3.
        let td = nudging_td_params(&unit(0.5, 1.0), 1.0, 2, 1.0, 4.0, &constants);
        check(
            !td.feasible && td.minimal_n == Some(3),
            format!("TD minimal cutoff {:?}", td.minimal_n),
        )?;
        let td3 = nudging_td_params(&unit(0.5, 1.0), 1.0, 3, 1.0, 4.0, &constants);
        let (l1, l2) = roots_from_gains(td3.mu1, td3.mu2).ok_or("complex gain roots")?;
        check(
            td3.feasible
                && td3.rho < 0.0
                && (l1 - td3.lambda1).abs() <= 1e-10
                && (l2 - td3.lambda2).abs() <= 1e-10,
            "TD gain decomposition".into(),
        )?;

        // Grashof relations for single-mode forces.
        let grid = WaveGrid::new(2, 8).map_err(|e| e.to_string())?;
        let mut g3 = VectorSpectralField::zero(grid);
        g3.components_mut()[1].set_mode_pair([3, 0, 0], Complex64::new(0.5, 0.0));
        let rep3 = grashof_report(&[g3], 2.0, &constants).map_err(|e| e.to_string())?;
        check(
            (rep3.g_star - rep3.g / 3.0).abs() <= 1e-12
                && (rep3.sigma - 3.0).abs() <= 1e-12
                && (rep3.r - SQRT_2 * 2.0 * rep3.g).abs() <= 1e-12,
            "single-mode Grashof relations".into(),
        )?;

        // NSE sieve prefactor at C = 1, nu = 1, R = 1, sigma = 0, M0 = 1:
        // C_F = sqrt(ln(e + 1)).
        let grashof = GrashofReport {
            g: 1.0 / SQRT_2,
            g_star: 1.0 / SQRT_2,
            sigma: 0.0,
            r: 1.0,
            r_star: 1.0,
            r2: 1.0,
            t1: 1.0,
            t2: 2.0,
            heuristic_times: true,
            non_rigorous: false,
        };
        let nse = sieve_nse_mu_interval(&grashof, 0.0, 1.0, 8, 1.0, 1e-3, &constants);
        let expect = (E + 1.0).ln().sqrt();
        check(
            (nse.c_f - expect).abs() <= 1e-12
                && (nse.mu_lower - expect * expect).abs() <= 1e-12
                && (nse.mu_upper - 16.0).abs() <= 1e-12,
            format!("NSE sieve prefactor {}", nse.c_f),
        )?;

        // NSE nudging cutoff: zero map, U = nu = C_* = 1 needs 32 < N.
        let small = nudging_nse_params(1.0, 0.0, 32, 1.0, 4.0, 1.0, &constants);
        check(
            !small.feasible && small.minimal_n == Some(33),
            format!("NSE minimal cutoff {:?}", small.minimal_n),
        )?;
        let ok = nudging_nse_params(1.0, 0.0, 64, 1.0, 4.0, 1.0, &constants);
        check(
            ok.feasible && (ok.delta_n - 1.0).abs() <= 1e-12 && ok.decay_rate > 0.0,
            "NSE nudging at N = 64".into(),
        )?;

        // Logarithmic factor identity l_{e^2} = 2 (sqrt(2) + 1).
        let l_n = 2.0 * ((E * E).ln().sqrt() + 1.0);
        check(
            (l_n - 2.0 * (SQRT_2 + 1.0)).abs() <= 1e-12,
            "logarithmic factor identity".into(),
        )?;
        // Shear velocity norms feeding the functionals: |v|_2 = sqrt(2) pi.
        let shear = synth::shear_velocity(grid, 1.0);
        let f = VelocityFunctionals::compute(&[shear], &[0.0, 1.0], &constants)
            .map_err(|e| e.to_string())?;
        check(
            (f.v_eps[0] - 1.0).abs() <= 1e-12 && (f.v_eps[1] - SQRT_2 * PI).abs() <= 1e-12,
            "shear functional values".into(),
        )
    });
}

/// Criterion 10: with the gains switched off the model error does not decay
/// (negative control).
#[test]
fn zero_gain_negative_control() {
    criterion("zero-gain-control", Duration::from_secs(60), || {
        let grid = WaveGrid::new(2, 10).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(909);
        let cfg = TDConfig { kappa: 1.0, dt: 5e-3 };
        let v = synth::taylor_green(grid, 0.2);
        let map = EnslavingMap::power_law_tail(grid, 2, 3.0, 0.5, 0.0, -1.0)
            .map_err(|e| e.to_string())?;
        let low0 = synth::random_scalar(grid, 2, 1.0, 1.0, &mut rng);
        let g = QuasiFiniteForce::steady(low0, map);
        let phi0 = synth::random_scalar(grid, 4, 1.5, 1.0, &mut rng);
        let psi0 = ScalarSpectralField::zero(grid);
        let l0 = ScalarSpectralField::zero(grid);
        let params = NudgeParams { n_obs: 4, mu1: 0.0, mu2: 0.0 };
        let run = twin_nudging_td(cfg, &v, params, &g, &phi0, &psi0, &l0, 0.0, 200, 10)
            .map_err(|e| e.to_string())?;
        let model = run.series.column("model_err_Hm1").ok_or("missing column")?;
        let ratio = model.last().copied().unwrap_or(f64::NAN) / model[0];
        check(
            ratio >= 0.5,
            format!("model error decayed without nudging: final/initial = {ratio:.3}"),
        )
    });
}

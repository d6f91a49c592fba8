//! Rigorous (up to named constants) parameter checkers for the sieve and
//! nudging algorithms: admissible gain intervals, stage lengths, nudging
//! gains from root decompositions, Grashof numbers, and Gronwall decay rates.
//!
//! All unnamed analytic constants default to 1 through [`ConstantsTable`];
//! any report that consulted a defaulted constant is flagged non-rigorous.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{FluxError, Result};
use crate::spectral::{to_physical_oversampled, VectorSpectralField};

/// Oversampling factor for physical-space quadrature of non-quadratic
/// integrands (sup norms, odd powers).
const QUADRATURE_OVERSAMPLE: usize = 4;

/// Named analytic constants; lookups fall back to 1.0 and are recorded so
/// reports can flag themselves as non-rigorous.
///
/// The normalization constant `c_2_0` is pinned to 1 and cannot be changed.
#[derive(Debug, Default)]
pub struct ConstantsTable {
    values: BTreeMap<String, f64>,
    defaulted: RefCell<BTreeSet<String>>,
}

impl ConstantsTable {
    /// Empty table: every constant defaults to 1.
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets a constant. Rejects attempts to change the pinned `c_2_0`.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if name == "c_2_0" && value != 1.0 {
            return Err(FluxError::Config("c_2_0 is normalized to 1".into()));
        }
        if !(value.is_finite() && value > 0.0) {
            return Err(FluxError::Config(format!("constant {name} must be positive, got {value}")));
        }
        self.values.insert(name.to_string(), value);
        Ok(())
    }

    /// Looks a constant up, defaulting to 1.0 (and recording the default).
    pub fn get(&self, name: &str) -> f64 {
        if name == "c_2_0" {
            return 1.0;
        }
        match self.values.get(name) {
            Some(&v) => v,
            None => {
                self.defaulted.borrow_mut().insert(name.to_string());
                1.0
            }
        }
    }

    /// Constants that were consulted but never set.
    pub fn defaults_used(&self) -> Vec<String> {
        self.defaulted.borrow().iter().cloned().collect()
    }

    /// Whether any consulted constant fell back to its default.
    pub fn any_default_used(&self) -> bool {
        !self.defaulted.borrow().is_empty()
    }
}

/// `L^p` norm of a velocity sample by physical-space quadrature
/// (`p = infinity` gives the sup norm of the pointwise speed).
pub fn velocity_lp_norm(v: &VectorSpectralField, p: f64) -> f64 {
    let grid = v.grid();
    let phys: Vec<Vec<f64>> = v
        .components()
        .iter()
        .map(|c| to_physical_oversampled(c, QUADRATURE_OVERSAMPLE))
        .collect();
    let n = phys[0].len();
    let speeds = (0..n).map(|i| phys.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt());
    if p.is_infinite() {
        return speeds.fold(0.0, f64::max);
    }
    let cell = grid.volume() / n as f64;
    (speeds.map(|s| s.powf(p)).sum::<f64>() * cell).powf(1.0 / p)
}

/// `L^d` norm of the velocity gradient (pointwise Frobenius norm).
pub fn velocity_grad_ld_norm(v: &VectorSpectralField) -> f64 {
    let grid = v.grid();
    let d = grid.dim();
    let mut sq: Vec<f64> = Vec::new();
    for comp in v.components() {
        for axis in 0..d {
            let mut dc = comp.clone();
            for idx in 0..grid.num_modes() {
                let k = grid.wave_at(idx);
                dc.coeffs_mut()[idx] *= num_complex::Complex64::new(0.0, k[axis] as f64);
            }
            let phys = to_physical_oversampled(&dc, QUADRATURE_OVERSAMPLE);
            if sq.is_empty() {
                sq = vec![0.0; phys.len()];
            }
            for (s, g) in sq.iter_mut().zip(phys) {
                *s += g * g;
            }
        }
    }
    let cell = grid.volume() / sq.len() as f64;
    let p = d as f64;
    (sq.iter().map(|s| s.sqrt().powf(p)).sum::<f64>() * cell).powf(1.0 / p)
}

/// Velocity size functionals entering the sieve and nudging conditions, on a
/// grid of interpolation exponents `eps` in `[0, d/2]`.
///
/// For each `eps`: `V = c * |v|_{L^{d/eps}}` (sup over samples) and
/// `W^2` is the time average of `|v|^2_{L^{d/eps}}`; `eps = 0` uses the sup
/// norm, `eps = d/2` the `L^2` norm. `U` is the gradient-based functional
/// `min(c^2 |grad v|_{L^d}, |v|_inf)`.
#[derive(Debug, Clone)]
pub struct VelocityFunctionals {
    /// Spatial dimension.
    pub dim: usize,
    /// Interpolation exponents.
    pub eps_grid: Vec<f64>,
    /// `V_{eps,d}`, sup over the sampled horizon.
    pub v_eps: Vec<f64>,
    /// `W_{eps,d}`, root-mean-square over the sampled horizon.
    pub w_eps: Vec<f64>,
    /// `U_d = min(c^2 |grad v|_{L^d}, |v|_inf)`, sup over the horizon.
    pub u_d: f64,
    /// `|v|_inf`, sup over the horizon.
    pub sup_speed: f64,
}

impl VelocityFunctionals {
    /// Computes the functionals from velocity samples (one suffices for a
    /// static velocity). `eps_grid` entries must lie in `[0, d/2]`.
    pub fn compute(
        samples: &[VectorSpectralField],
        eps_grid: &[f64],
        constants: &ConstantsTable,
    ) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| FluxError::Config("need at least one velocity sample".into()))?;
        let d = first.grid().dim() as f64;
        for &e in eps_grid {
            if !(0.0..=d / 2.0).contains(&e) {
                return Err(FluxError::Config(format!("eps = {e} outside [0, {}]", d / 2.0)));
            }
        }
        let mut v_eps = vec![0.0f64; eps_grid.len()];
        let mut w_sq = vec![0.0f64; eps_grid.len()];
        let mut u_d = 0.0f64;
        let mut sup_speed = 0.0f64;
        for v in samples {
            let sup = velocity_lp_norm(v, f64::INFINITY);
            sup_speed = sup_speed.max(sup);
            let grad = velocity_grad_ld_norm(v);
            let c_half = constants.get("c_p_half");
            u_d = u_d.max((c_half * c_half * grad).min(sup));
            for (i, &eps) in eps_grid.iter().enumerate() {
                let val = if eps == 0.0 {
                    sup
                } else if eps == d / 2.0 {
                    constants.get("C_bernstein") * velocity_lp_norm(v, 2.0)
                } else {
                    constants.get(&format!("c_p_eps_{eps:.4}")) * velocity_lp_norm(v, d / eps)
                };
                v_eps[i] = v_eps[i].max(val);
                w_sq[i] += val * val / samples.len() as f64;
            }
        }
        Ok(Self {
            dim: first.grid().dim(),
            eps_grid: eps_grid.to_vec(),
            v_eps,
            w_eps: w_sq.into_iter().map(f64::sqrt).collect(),
            u_d,
            sup_speed,
        })
    }

    /// `min_eps V_{eps,d} N^eps` and the attaining exponent.
    pub fn min_v_n_eps(&self, n: usize) -> (f64, f64) {
        self.min_over(&self.v_eps, n)
    }

    /// `min_eps W_{eps,d} N^eps` and the attaining exponent.
    pub fn min_w_n_eps(&self, n: usize) -> (f64, f64) {
        self.min_over(&self.w_eps, n)
    }

    fn min_over(&self, vals: &[f64], n: usize) -> (f64, f64) {
        let mut best = f64::INFINITY;
        let mut best_eps = 0.0;
        for (&eps, &v) in self.eps_grid.iter().zip(vals) {
            let x = v * (n as f64).powf(eps);
            if x < best {
                best = x;
                best_eps = eps;
            }
        }
        (best, best_eps)
    }

    /// Peclet number family `V_{eps,d} / kappa`.
    pub fn peclet(&self, kappa: f64) -> Vec<f64> {
        self.v_eps.iter().map(|v| v / kappa).collect()
    }

    /// Gradient-based Peclet number `U_d / kappa`.
    pub fn peclet_grad(&self, kappa: f64) -> f64 {
        self.u_d / kappa
    }
}

/// Largest eigenvalue `rho` of the Gronwall comparison matrix
/// `[[a, c/2], [c/2, b]]` with `c = sqrt(1 + eps) * c_bar`:
/// `rho = (a + b + sqrt((a - b)^2 + (1 + eps) c_bar^2)) / 2`.
///
/// Negative `rho` certifies exponential decay of the coupled error pair.
pub fn gronwall_rate(a: f64, b: f64, c_bar: f64, eps: f64) -> f64 {
    0.5 * (a + b + ((a - b).powi(2) + (1.0 + eps) * c_bar * c_bar).sqrt())
}

/// Real root pair `(lambda1, lambda2)`, `lambda1 >= lambda2`, of
/// `lambda^2 - mu1 lambda + mu2 = 0`; `None` when the roots are complex.
pub fn roots_from_gains(mu1: f64, mu2: f64) -> Option<(f64, f64)> {
    let disc = mu1 * mu1 - 4.0 * mu2;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some((0.5 * (mu1 + s), 0.5 * (mu1 - s)))
}

/// Outcome of the sieve transport-diffusion gain check.
#[derive(Debug, Clone)]
pub struct SieveTdConditions {
    /// Whether the admissible interval is nonempty.
    pub feasible: bool,
    /// Lower bound (exclusive) of the admissible `mu` interval.
    pub mu_lower: f64,
    /// Upper bound (inclusive) of the admissible `mu` interval.
    pub mu_upper: f64,
    /// Selected gain (interval midpoint) when feasible.
    pub mu: f64,
    /// Exponent attaining `min_eps V_{eps,d} N^eps`.
    pub eps_opt: f64,
    /// Stage length: smallest `dt` multiple with
    /// `exp(-mu t) + mu_lower / mu <= 0.9`.
    pub t_star: f64,
    /// Predicted per-stage contraction factor
    /// `lambda_star = sqrt(exp(-mu t_star) + mu_lower / mu)`.
    pub lambda_star: f64,
    /// Whether a defaulted constant entered the numbers.
    pub non_rigorous: bool,
}

/// Admissible sieve gain interval for transport-diffusion (Theorem-level
/// sufficient conditions).
///
/// Weak form: `(1 + L_*)^2 (min_eps V N^eps / kappa)^2 kappa < mu <=
/// N^2 kappa / 2` with `L_*` the dual-norm Lipschitz constant of the
/// enslaving map. Strong form replaces `L_*` by `L_0`, adds the gradient
/// functional `U_d / kappa` inside the max, and halves the upper bound to
/// `N^2 kappa / 4`.
#[allow(clippy::too_many_arguments)]
pub fn sieve_td_mu_interval(
    functionals: &VelocityFunctionals,
    map_lipschitz: f64,
    n_obs: usize,
    kappa: f64,
    dt: f64,
    strong: bool,
    constants: &ConstantsTable,
) -> SieveTdConditions {
    let (min_vn, eps_opt) = functionals.min_v_n_eps(n_obs);
    let nn = (n_obs * n_obs) as f64;
    let (lower, upper) = if strong {
        let y = ((1.0 + map_lipschitz) * min_vn / kappa).max(functionals.u_d / kappa);
        (y * y * kappa, nn * kappa / 4.0)
    } else {
        let x = (1.0 + map_lipschitz) * min_vn / kappa;
        (x * x * kappa, nn * kappa / 2.0)
    };
    let feasible = lower < upper;
    let mu = if feasible { 0.5 * (lower + upper) } else { f64::NAN };
    let (t_star, lambda_star) = if feasible {
        stage_length(mu, lower, dt)
    } else {
        (f64::NAN, f64::NAN)
    };
    SieveTdConditions {
        feasible,
        mu_lower: lower,
        mu_upper: upper,
        mu,
        eps_opt,
        t_star,
        lambda_star,
        non_rigorous: constants.any_default_used(),
    }
}

/// Smallest `dt` multiple `t` with `exp(-mu t) + lower/mu <= margin` (0.9),
/// and the resulting contraction factor `sqrt(exp(-mu t) + lower/mu)`.
fn stage_length(mu: f64, lower: f64, dt: f64) -> (f64, f64) {
    const MARGIN: f64 = 0.9;
    let tail = lower / mu;
    if tail >= MARGIN {
        return (f64::NAN, f64::NAN);
    }
    let t_cont = -(MARGIN - tail).ln() / mu;
    let steps = (t_cont / dt).ceil().max(1.0);
    let t_star = steps * dt;
    let lambda_sq = (-mu * t_star).exp() + tail;
    (t_star, lambda_sq.sqrt())
}

/// Outcome of the nudging transport-diffusion gain selection.
#[derive(Debug, Clone)]
pub struct NudgingTdConditions {
    /// Whether the conditions hold at the requested cutoff.
    pub feasible: bool,
    /// Smallest cutoff at which the conditions hold (searched upward).
    pub minimal_n: Option<usize>,
    /// Exponent chosen from the grid (most negative predicted rate).
    pub eps_opt: f64,
    /// Quadratic-form weight `alpha`.
    pub alpha: f64,
    /// Root pair of the gain polynomial, `lambda1 >= lambda2 > 0`.
    pub lambda1: f64,
    /// Smaller root.
    pub lambda2: f64,
    /// State nudging gain `mu1 = lambda1 + lambda2`.
    pub mu1: f64,
    /// Force nudging gain `mu2 = lambda1 lambda2`.
    pub mu2: f64,
    /// Predicted Gronwall decay rate (negative when contracting).
    pub rho: f64,
    /// Whether a defaulted constant entered the numbers.
    pub non_rigorous: bool,
}

/// Selects nudging gains for transport-diffusion.
///
/// For each exponent on the grid the two sufficient conditions are checked:
/// the family condition `C_* (L_*/N) (W/kappa) N^eps < sqrt(2)/2` and the
/// discriminant condition `kappa^2 N^{2(1-eps)} > 2 L_*^2 C_*^2 W^2`. For a
/// passing exponent, `alpha` is the midpoint of the admissible interval of
/// the associated quadratic inequality and `lambda2 = kappa alpha /
/// (4 L_*^2)` (capped at `kappa N^2 / 8`, which also covers `L_* = 0`);
/// `lambda1 = lambda_ratio * lambda2`.
#[allow(clippy::too_many_arguments)]
pub fn nudging_td_params(
    functionals: &VelocityFunctionals,
    map_lipschitz_star: f64,
    n_obs: usize,
    kappa: f64,
    lambda_ratio: f64,
    constants: &ConstantsTable,
) -> NudgingTdConditions {
    let eval = |n: usize| evaluate_nudging_td(functionals, map_lipschitz_star, n, kappa, lambda_ratio, constants);
    let at_n = eval(n_obs);
    let minimal_n = if at_n.is_some() {
        (1..=n_obs).find(|&n| eval(n).is_some())
    } else {
        (n_obs + 1..=4096).find(|&n| eval(n).is_some())
    };
    match at_n {
        Some(c) => c,
        None => NudgingTdConditions {
            feasible: false,
            minimal_n,
            eps_opt: f64::NAN,
            alpha: f64::NAN,
            lambda1: f64::NAN,
            lambda2: f64::NAN,
            mu1: f64::NAN,
            mu2: f64::NAN,
            rho: f64::NAN,
            non_rigorous: constants.any_default_used(),
        },
    }
    .with_minimal(minimal_n)
}

impl NudgingTdConditions {
    fn with_minimal(mut self, minimal_n: Option<usize>) -> Self {
        self.minimal_n = minimal_n;
        self
    }
}

fn evaluate_nudging_td(
    functionals: &VelocityFunctionals,
    l_star: f64,
    n_obs: usize,
    kappa: f64,
    lambda_ratio: f64,
    constants: &ConstantsTable,
) -> Option<NudgingTdConditions> {
    let c_star = constants.get("C_star");
    let n = n_obs as f64;
    let mut best: Option<NudgingTdConditions> = None;
    for (&eps, &w) in functionals.eps_grid.iter().zip(&functionals.w_eps) {
        // Family condition (strict).
        let family = c_star * (l_star / n) * (w / kappa) * n.powf(eps);
        if !(family < std::f64::consts::SQRT_2 / 2.0) {
            continue;
        }
        // Discriminant condition (strict).
        if !(kappa * kappa * n.powf(2.0 * (1.0 - eps)) > 2.0 * l_star * l_star * c_star * c_star * w * w) {
            continue;
        }
        let cap = kappa * n * n / 8.0;
        // alpha: midpoint A1 / (2 A3) of the quadratic inequality
        // A1 - A2/alpha > alpha A3, evaluated at the unit-alpha lambda2.
        let lambda2_prov = if l_star > 0.0 { (kappa / (4.0 * l_star * l_star)).min(cap) } else { cap };
        let a1 = 4.0 * kappa * n * n * lambda2_prov;
        let a3 = (c_star * w * n.powf(eps)).powi(2);
        let alpha = if a3 > 0.0 { a1 / (2.0 * a3) } else { 1.0 };
        let lambda2 = if l_star > 0.0 { (kappa * alpha / (4.0 * l_star * l_star)).min(cap) } else { cap };
        let lambda1 = lambda_ratio.max(1.0) * lambda2;
        // Damping of the high-band/force error pair.
        let b_coeff = lambda2 - 2.0 * lambda2 * lambda2 * l_star * l_star / (alpha * kappa);
        if b_coeff <= 0.0 {
            continue;
        }
        let a = -kappa * n * n;
        let c_bar = alpha.sqrt() * c_star * w * n.powf(eps);
        // Gronwall slack: any value in (0, alpha - 1) certifies decay when
        // the admissibility conditions hold strictly; take the smaller of
        // the interpolation exponent and half that headroom.
        let slack = if alpha > 1.0 { eps.min(0.5 * (alpha - 1.0)) } else { eps };
        let rho = gronwall_rate(a, -b_coeff, c_bar, slack);
        let cand = NudgingTdConditions {
            feasible: true,
            minimal_n: None,
            eps_opt: eps,
            alpha,
            lambda1,
            lambda2,
            mu1: lambda1 + lambda2,
            mu2: lambda1 * lambda2,
            rho,
            non_rigorous: constants.any_default_used(),
        };
        if best.as_ref().map_or(true, |b| cand.rho < b.rho) {
            best = Some(cand);
        }
    }
    best
}

/// Grashof numbers and absorbing-ball radii of a 2D Navier-Stokes force.
#[derive(Debug, Clone)]
pub struct GrashofReport {
    /// `G = sup |g| / nu^2`.
    pub g: f64,
    /// `G_* = sup ||g||_* / nu^2`.
    pub g_star: f64,
    /// `sigma = sup ||g|| / sup |g|` (0 for a zero force).
    pub sigma: f64,
    /// Energy-ball radius `R = sqrt(2) nu G`.
    pub r: f64,
    /// Enstrophy-ball radius `R_* = sqrt(2) nu G_*`.
    pub r_star: f64,
    /// `H^2`-ball radius `R_2 = c_2 (sigma + (sqrt(2)/2) R / nu) R / sqrt(2)`.
    pub r2: f64,
    /// Heuristic entry time into the energy ball.
    pub t1: f64,
    /// Heuristic entry time into the enstrophy ball.
    pub t2: f64,
    /// `t1`/`t2` are e-folding estimates, not rigorous bounds.
    pub heuristic_times: bool,
    /// Whether a defaulted constant entered the numbers.
    pub non_rigorous: bool,
}

/// Computes Grashof numbers from force samples over a horizon (sup norms).
pub fn grashof_report(
    samples: &[VectorSpectralField],
    nu: f64,
    constants: &ConstantsTable,
) -> Result<GrashofReport> {
    if samples.is_empty() {
        return Err(FluxError::Config("need at least one force sample".into()));
    }
    let sup = |alpha: f64| samples.iter().map(|g| g.seminorm(alpha)).fold(0.0, f64::max);
    let l2 = sup(0.0);
    let h1 = sup(1.0);
    let hm1 = sup(-1.0);
    let g = l2 / (nu * nu);
    let g_star = hm1 / (nu * nu);
    let sigma = if l2 > 0.0 { h1 / l2 } else { 0.0 };
    let r = std::f64::consts::SQRT_2 * nu * g;
    let r_star = std::f64::consts::SQRT_2 * nu * g_star;
    let c2 = constants.get("c_2");
    let r2 = c2 * (sigma + std::f64::consts::FRAC_1_SQRT_2 * r / nu) * r / std::f64::consts::SQRT_2;
    // Heuristic e-folding entry times with ball-overshoot factor alpha = 2:
    // |u(t)|^2 <= e^{-nu t} |u0|^2 + R^2 enters 2 R^2 when e^{-nu t} ~ 1/3.
    let t1 = (3.0f64).ln() / nu;
    let t2 = 2.0 * t1;
    Ok(GrashofReport {
        g,
        g_star,
        sigma,
        r,
        r_star,
        r2,
        t1,
        t2,
        heuristic_times: true,
        non_rigorous: constants.any_default_used(),
    })
}

/// Outcome of the sieve Navier-Stokes gain check.
#[derive(Debug, Clone)]
pub struct SieveNseConditions {
    /// The contraction prefactor `C_F(N)`.
    pub c_f: f64,
    /// Whether `C_F(N) < N / 2`.
    pub feasible: bool,
    /// Lower bound (inclusive) of the admissible `mu` interval.
    pub mu_lower: f64,
    /// Upper bound (exclusive) of the admissible `mu` interval.
    pub mu_upper: f64,
    /// Selected gain (interval midpoint) when feasible.
    pub mu: f64,
    /// Stage length (smallest `dt` multiple with margin 0.9).
    pub t_star: f64,
    /// Predicted per-stage contraction factor.
    pub lambda_star: f64,
    /// Whether a defaulted constant entered the numbers.
    pub non_rigorous: bool,
}

/// Admissible sieve gain interval for 2D Navier-Stokes:
/// `C_F(N) = (sqrt(C) / nu) max(M0 / R,
/// (1 + L_0) R sqrt(ln(e + sigma + R / nu)))`, feasible iff `C_F < N / 2`,
/// with `mu` in `[C_F^2 nu, N^2 nu / 4)`.
#[allow(clippy::too_many_arguments)]
pub fn sieve_nse_mu_interval(
    grashof: &GrashofReport,
    map_lipschitz: f64,
    m0: f64,
    n_obs: usize,
    nu: f64,
    dt: f64,
    constants: &ConstantsTable,
) -> SieveNseConditions {
    let c = constants.get("C_abg");
    let r = grashof.r;
    let c_f = if r > 0.0 {
        (c.sqrt() / nu)
            * (m0 / r).max(
                (1.0 + map_lipschitz)
                    * r
                    * (std::f64::consts::E + grashof.sigma + r / nu).ln().sqrt(),
            )
    } else {
        f64::INFINITY
    };
    let n = n_obs as f64;
    let feasible = c_f < n / 2.0;
    let lower = c_f * c_f * nu;
    let upper = n * n * nu / 4.0;
    let mu = if feasible { 0.5 * (lower + upper) } else { f64::NAN };
    let (t_star, lambda_star) =
        if feasible { stage_length(mu, lower, dt) } else { (f64::NAN, f64::NAN) };
    SieveNseConditions {
        c_f,
        feasible,
        mu_lower: lower,
        mu_upper: upper,
        mu,
        t_star,
        lambda_star,
        non_rigorous: constants.any_default_used(),
    }
}

/// Outcome of the nudging Navier-Stokes gain selection.
#[derive(Debug, Clone)]
pub struct NudgingNseConditions {
    /// Whether the cutoff condition holds.
    pub feasible: bool,
    /// Smallest cutoff at which the condition holds.
    pub minimal_n: Option<usize>,
    /// Logarithmic factor `l_N = 2 (sqrt(ln N) + 1)`.
    pub l_n: f64,
    /// Defect factor `delta_N = 1 - 16 (C_* L_* U l_N / (N nu))^2`.
    pub delta_n: f64,
    /// Quadratic-form weight `alpha` from the initial error budget.
    pub alpha: f64,
    /// Larger gain root.
    pub lambda1: f64,
    /// Smaller gain root.
    pub lambda2: f64,
    /// State nudging gain.
    pub mu1: f64,
    /// Force nudging gain.
    pub mu2: f64,
    /// Predicted exponential decay rate `min(N^2 nu / 8, 2 C(lambda2))`.
    pub decay_rate: f64,
    /// Whether a defaulted constant entered the numbers.
    pub non_rigorous: bool,
}

/// Selects nudging gains for 2D Navier-Stokes.
///
/// Cutoff condition: `16 C_* (1 + (U/nu)(1 + l_N L_*)) < N` with
/// `l_N = 2 (sqrt(ln N) + 1)` and `U` a uniform enstrophy-norm bound on the
/// truth velocity. `alpha = min(1, nu^2 / (2 budget))` from the initial
/// error budget; `lambda2 = nu alpha / (4 L_*^2)` capped at `nu N^2 / 8`.
#[allow(clippy::too_many_arguments)]
pub fn nudging_nse_params(
    u_bound: f64,
    map_lipschitz_star: f64,
    n_obs: usize,
    nu: f64,
    lambda_ratio: f64,
    error_budget: f64,
    constants: &ConstantsTable,
) -> NudgingNseConditions {
    let c_star = constants.get("C_star");
    let l_star = map_lipschitz_star;
    let check = |n_try: usize| -> (f64, f64, bool) {
        let n = n_try as f64;
        let l_n = 2.0 * ((n.ln().max(0.0)).sqrt() + 1.0);
        let lhs = 16.0 * c_star * (1.0 + (u_bound / nu) * (1.0 + l_n * l_star));
        let delta = 1.0 - 16.0 * (c_star * l_star * u_bound * l_n / (n * nu)).powi(2);
        (l_n, delta, lhs < n && delta > 0.0)
    };
    let (l_n, delta_n, feasible) = check(n_obs);
    let minimal_n = if feasible {
        (1..=n_obs).find(|&n| check(n).2)
    } else {
        (n_obs + 1..=1 << 20).find(|&n| check(n).2)
    };
    if !feasible {
        return NudgingNseConditions {
            feasible,
            minimal_n,
            l_n,
            delta_n,
            alpha: f64::NAN,
            lambda1: f64::NAN,
            lambda2: f64::NAN,
            mu1: f64::NAN,
            mu2: f64::NAN,
            decay_rate: f64::NAN,
            non_rigorous: constants.any_default_used(),
        };
    }
    let n = n_obs as f64;
    let alpha = (nu * nu / (2.0 * error_budget.max(1e-300))).min(1.0);
    let cap = nu * n * n / 8.0;
    let lambda2 =
        if l_star > 0.0 { (nu * alpha / (4.0 * l_star * l_star)).min(cap) } else { cap };
    let lambda1 = lambda_ratio.max(1.0) * lambda2;
    // C(lambda2): damping of the dual-norm force error.
    let c_lambda2 = lambda2
        - 2.0 * l_star * l_star * lambda2 * lambda2 / (alpha * nu)
        - 2.0 * alpha * (c_star * u_bound * l_n).powi(2) / (n * n * nu);
    let decay_rate = (n * n * nu / 8.0).min(2.0 * c_lambda2);
    NudgingNseConditions {
        feasible,
        minimal_n,
        l_n,
        delta_n,
        alpha,
        lambda1,
        lambda2,
        mu1: lambda1 + lambda2,
        mu2: lambda1 * lambda2,
        decay_rate,
        non_rigorous: constants.any_default_used(),
    }
}

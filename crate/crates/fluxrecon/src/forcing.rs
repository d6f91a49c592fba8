//! Quasi-finite-rank forces `g = P_N g + F(P_N g)` and their enslaving maps.
//!
//! An enslaving map `F` sends low-mode fields (`0 < |k| <= N`) to high-mode
//! tails (`|k| > N`) and carries a declared Lipschitz constant between a pair
//! of seminorm orders `(alpha_in, alpha_out)`; the parameter checkers consume
//! that constant.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{FluxError, Result};
use crate::spectral::{Band, ScalarSpectralField, VectorSpectralField, WaveGrid};
use crate::synth;

/// One linear per-mode gain of a Fourierwise map: the tail coefficient at
/// `target` is `gain * l_source` (conjugate pair implied).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGain {
    /// High-band output mode (`|target| > rank`).
    pub target: [i64; 3],
    /// Low-band input mode (`0 < |source| <= rank`).
    pub source: [i64; 3],
    /// Complex linear gain.
    pub gain: Complex64,
}

/// Concrete shape of an enslaving map.
#[derive(Debug, Clone, PartialEq)]
pub enum MapKind {
    /// `F = 0`: the force is genuinely finite rank.
    Zero,
    /// Every low mode `k` excites its ray multiples `m k` (`|m k| > rank`)
    /// with tail coefficient `weight * |m k|^{-exponent} * l_k`.
    PowerLawTail {
        /// Spectral decay exponent `s > 0` of the tail.
        exponent: f64,
        /// Uniform tail weight.
        weight: f64,
    },
    /// User-supplied per-mode linear gains (one entry per conjugate pair).
    Fourierwise {
        /// Gain table; duplicate targets accumulate.
        gains: Vec<ModeGain>,
    },
    /// Rank-raised composition `F_M = Q_M o F o P_N` of an inner map.
    RankRaised {
        /// The wrapped map (input rank `N`).
        inner: Box<EnslavingMap>,
        /// New output rank `M >= N`: only modes `|k| > M` survive.
        new_rank: usize,
    },
}

/// Lipschitz map from low-mode fields to high-mode tails.
#[derive(Debug, Clone, PartialEq)]
pub struct EnslavingMap {
    kind: MapKind,
    rank: usize,
    order_in: f64,
    order_out: f64,
    declared_lipschitz: f64,
}

impl EnslavingMap {
    /// The zero map of the given input rank (Lipschitz constant 0 at the
    /// requested orders).
    pub fn zero(rank: usize, order_in: f64, order_out: f64) -> Self {
        Self { kind: MapKind::Zero, rank, order_in, order_out, declared_lipschitz: 0.0 }
    }

    /// Power-law tail map on `grid`; the declared Lipschitz constant is the
    /// closed-form bound over the modes realized on the grid.
    pub fn power_law_tail(
        grid: WaveGrid,
        rank: usize,
        exponent: f64,
        weight: f64,
        order_in: f64,
        order_out: f64,
    ) -> Result<Self> {
        if exponent <= 0.0 {
            return Err(FluxError::Config("power-law exponent must be positive".into()));
        }
        let mut map = Self {
            kind: MapKind::PowerLawTail { exponent, weight },
            rank,
            order_in,
            order_out,
            declared_lipschitz: 0.0,
        };
        map.declared_lipschitz = map.power_law_bound(grid);
        Ok(map)
    }

    /// Fourierwise map from explicit per-mode gains; the declared constant is
    /// the root-sum-of-squares bound `(sum |gain|^2 |target|^{2 beta}
    /// |source|^{-2 alpha})^{1/2}`.
    pub fn fourierwise(
        rank: usize,
        gains: Vec<ModeGain>,
        order_in: f64,
        order_out: f64,
    ) -> Result<Self> {
        for g in &gains {
            if !WaveGrid::in_band(g.target, rank, Band::High) {
                return Err(FluxError::Config(format!(
                    "fourierwise target {:?} is not above rank {rank}",
                    g.target
                )));
            }
            if !WaveGrid::in_band(g.source, rank, Band::Low) {
                return Err(FluxError::Config(format!(
                    "fourierwise source {:?} is not a low mode of rank {rank}",
                    g.source
                )));
            }
        }
        let bound = gains
            .iter()
            .map(|g| {
                let t = WaveGrid::k_sq(g.target).sqrt();
                let s = WaveGrid::k_sq(g.source).sqrt();
                (g.gain.norm() * t.powf(order_out) * s.powf(-order_in)).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        Ok(Self {
            kind: MapKind::Fourierwise { gains },
            rank,
            order_in,
            order_out,
            declared_lipschitz: bound,
        })
    }

    /// Raises the output rank: `F_M = Q_M o F o P_N` keeps the input rank `N`
    /// and the Lipschitz constant of the inner map.
    pub fn raise_rank(&self, new_rank: usize) -> Result<Self> {
        if new_rank < self.rank {
            return Err(FluxError::Config(format!(
                "new rank {new_rank} must not be below input rank {}",
                self.rank
            )));
        }
        Ok(Self {
            kind: MapKind::RankRaised { inner: Box::new(self.clone()), new_rank },
            rank: self.rank,
            order_in: self.order_in,
            order_out: self.order_out,
            declared_lipschitz: self.declared_lipschitz,
        })
    }

    /// Re-declares the Lipschitz constant at a new pair of orders by the
    /// Bernstein/Poincare scaling
    /// `L_new = L * N^{(a_old - a_new)_+ - (b_old - b_new)}`
    /// with `N` the output rank.
    pub fn change_order(&self, order_in: f64, order_out: f64) -> Self {
        let n = self.output_rank() as f64;
        let up = (self.order_in - order_in).max(0.0);
        let factor = n.powf(up - (self.order_out - order_out));
        let mut out = self.clone();
        out.order_in = order_in;
        out.order_out = order_out;
        out.declared_lipschitz = self.declared_lipschitz * factor;
        out
    }

    /// Input rank `N`: the map only reads modes `0 < |k| <= N`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Output rank: tail modes satisfy `|k| > output_rank()`.
    pub fn output_rank(&self) -> usize {
        match &self.kind {
            MapKind::RankRaised { new_rank, .. } => *new_rank,
            _ => self.rank,
        }
    }

    /// Seminorm orders `(alpha_in, alpha_out)` of the declared constant.
    pub fn orders(&self) -> (f64, f64) {
        (self.order_in, self.order_out)
    }

    /// Declared Lipschitz constant between the declared orders.
    pub fn lipschitz(&self) -> f64 {
        self.declared_lipschitz
    }

    /// Map shape.
    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    /// Overrides the declared constant (for externally certified maps).
    pub fn with_declared_lipschitz(mut self, lipschitz: f64) -> Self {
        self.declared_lipschitz = lipschitz;
        self
    }

    /// Applies the map: the input is truncated to its low band, the output
    /// lives strictly above the output rank.
    pub fn evaluate(&self, l: &ScalarSpectralField) -> ScalarSpectralField {
        let grid = l.grid();
        let low = l.project(self.rank, Band::Low);
        match &self.kind {
            MapKind::Zero => ScalarSpectralField::zero(grid),
            MapKind::PowerLawTail { exponent, weight } => {
                let mut out = ScalarSpectralField::zero(grid);
                let k_max = grid.k_max() as i64;
                let rank_sq = (self.rank * self.rank) as i64;
                for idx in 0..grid.num_modes() {
                    let k = grid.wave_at(idx);
                    let ksq = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                    if ksq == 0 || ksq > rank_sq {
                        continue;
                    }
                    let lk = low.coeffs()[idx];
                    let mut m = 2i64;
                    loop {
                        let t = [m * k[0], m * k[1], m * k[2]];
                        if t.iter().any(|ti| ti.abs() > k_max) {
                            break;
                        }
                        let tsq = t[0] * t[0] + t[1] * t[1] + t[2] * t[2];
                        if tsq > rank_sq {
                            let amp = weight * (tsq as f64).sqrt().powf(-exponent);
                            let j = grid.index_of(t);
                            out.coeffs_mut()[j] += amp * lk;
                        }
                        m += 1;
                    }
                }
                out
            }
            MapKind::Fourierwise { gains } => {
                let mut out = ScalarSpectralField::zero(grid);
                for g in gains {
                    let contrib = g.gain * low.mode(g.source);
                    let t = grid.index_of(g.target);
                    out.coeffs_mut()[t] += contrib;
                    let neg = grid.index_of([-g.target[0], -g.target[1], -g.target[2]]);
                    out.coeffs_mut()[neg] += contrib.conj();
                }
                out
            }
            MapKind::RankRaised { inner, new_rank } => {
                inner.evaluate(&low).project(*new_rank, Band::High)
            }
        }
    }

    /// Componentwise application to a vector field.
    pub fn evaluate_vector(&self, l: &VectorSpectralField) -> VectorSpectralField {
        let comps = l.components().iter().map(|c| self.evaluate(c)).collect();
        VectorSpectralField::from_components(comps).expect("component grids match")
    }

    /// Closed-form Lipschitz bound of the power-law tail realized on `grid`:
    /// `(sum_k |k|^{-2 a} sum_m (w |m k|^{b - s})^2)^{1/2}` over canonical
    /// low modes `k` and realized multiples `m k`.
    fn power_law_bound(&self, grid: WaveGrid) -> f64 {
        let MapKind::PowerLawTail { exponent, weight } = &self.kind else { return 0.0 };
        let k_max = grid.k_max() as i64;
        let rank_sq = (self.rank * self.rank) as i64;
        let mut sum = 0.0f64;
        for idx in 0..grid.num_modes() {
            let k = grid.wave_at(idx);
            // Canonical representative of each conjugate pair.
            if k >= [-k[0], -k[1], -k[2]] {
                continue;
            }
            let ksq = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if ksq == 0 || ksq > rank_sq {
                continue;
            }
            let mut ray = 0.0f64;
            let mut m = 2i64;
            loop {
                let t = [m * k[0], m * k[1], m * k[2]];
                if t.iter().any(|ti| ti.abs() > k_max) {
                    break;
                }
                let tsq = t[0] * t[0] + t[1] * t[1] + t[2] * t[2];
                if tsq > rank_sq {
                    ray += (weight * (tsq as f64).sqrt().powf(self.order_out - exponent)).powi(2);
                }
                m += 1;
            }
            sum += (ksq as f64).powf(-self.order_in) * ray;
        }
        sum.sqrt()
    }

    /// Empirical Lipschitz lower bound from randomized probing: the largest
    /// ratio `||F(l1) - F(l2)||_out / ||l1 - l2||_in` over `trials` random
    /// low-mode pairs.
    pub fn estimate_lipschitz(&self, grid: WaveGrid, trials: usize, rng: &mut ChaCha8Rng) -> f64 {
        let mut best = 0.0f64;
        for _ in 0..trials {
            let l1 = synth::random_scalar(grid, self.rank, 0.0, 1.0, rng);
            let l2 = if rng.gen_bool(0.5) {
                ScalarSpectralField::zero(grid)
            } else {
                synth::random_scalar(grid, self.rank, 0.0, 1.0, rng)
            };
            let dl = l1.sub(&l2);
            let denom = dl.seminorm(self.order_in);
            if denom < 1e-300 {
                continue;
            }
            let df = self.evaluate(&l1).sub(&self.evaluate(&l2));
            best = best.max(df.seminorm(self.order_out) / denom);
        }
        // Sharpen with single-mode probes, which are extremal for diagonal
        // linear maps.
        let rank_sq = (self.rank * self.rank) as i64;
        for idx in 0..grid.num_modes() {
            let k = grid.wave_at(idx);
            let ksq = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if ksq == 0 || ksq > rank_sq {
                continue;
            }
            let mut probe = ScalarSpectralField::zero(grid);
            probe.set_mode_pair(k, Complex64::new(0.7, 0.4));
            let denom = probe.seminorm(self.order_in);
            let df = self.evaluate(&probe);
            best = best.max(df.seminorm(self.order_out) / denom);
        }
        best
    }
}

/// Scalar quasi-finite-rank force `g(t) = l(t) + F(l(t))` with low part
/// `l(t) = low0 + cos(omega t) * low1`.
#[derive(Debug, Clone)]
pub struct QuasiFiniteForce {
    /// Static low-mode part.
    pub low0: ScalarSpectralField,
    /// Oscillating low-mode part (`None` for autonomous forces).
    pub low1: Option<(ScalarSpectralField, f64)>,
    /// Enslaving map producing the tail.
    pub map: EnslavingMap,
}

impl QuasiFiniteForce {
    /// Autonomous force with the given low part.
    pub fn steady(low0: ScalarSpectralField, map: EnslavingMap) -> Self {
        Self { low0, low1: None, map }
    }

    /// Low-mode part at time `t`.
    pub fn low(&self, t: f64) -> ScalarSpectralField {
        let mut l = self.low0.clone();
        if let Some((low1, omega)) = &self.low1 {
            l.axpy((omega * t).cos(), low1);
        }
        l
    }

    /// Full force `l(t) + F(l(t))`.
    pub fn full(&self, t: f64) -> ScalarSpectralField {
        let l = self.low(t);
        let mut g = self.map.evaluate(&l);
        g.axpy(1.0, &l);
        g
    }
}

/// Vector analogue of [`QuasiFiniteForce`] (the map acts componentwise and
/// the result is Leray-projected for use in Navier-Stokes).
#[derive(Debug, Clone)]
pub struct QuasiFiniteVectorForce {
    /// Static low-mode part (divergence-free).
    pub low0: VectorSpectralField,
    /// Oscillating low-mode part.
    pub low1: Option<(VectorSpectralField, f64)>,
    /// Enslaving map producing the tail.
    pub map: EnslavingMap,
}

impl QuasiFiniteVectorForce {
    /// Autonomous force with the given low part.
    pub fn steady(low0: VectorSpectralField, map: EnslavingMap) -> Self {
        Self { low0, low1: None, map }
    }

    /// Low-mode part at time `t`.
    pub fn low(&self, t: f64) -> VectorSpectralField {
        let mut l = self.low0.clone();
        if let Some((low1, omega)) = &self.low1 {
            l.axpy((omega * t).cos(), low1);
        }
        l
    }

    /// Full force `l(t) + F(l(t))`, Leray-projected.
    pub fn full(&self, t: f64) -> VectorSpectralField {
        let l = self.low(t);
        let mut g = self.map.evaluate_vector(&l);
        g.axpy(1.0, &l);
        g.leray_project();
        g
    }
}

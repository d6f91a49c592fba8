//! Wavenumber grid shared by all spectral fields.

use crate::error::{FluxError, Result};

/// Spectral band selected by a projection of cutoff `N`.
///
/// `Low` keeps the modes `0 < |k| <= N` (Euclidean length); `High` keeps
/// `|k| > N`. The mean mode `k = 0` belongs to neither band: fields are
/// mean-free and the zero mode is forced to vanish everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    /// `P_N`: modes with `0 < |k| <= N`.
    Low,
    /// `Q_N = I - P_N`: modes with `|k| > N`.
    High,
}

/// Description of the square coefficient lattice `k` in `[-K, K]^d`.
///
/// The physical collocation grid used for dealiased products has
/// `2K + 2` points per axis, so that products of fields truncated at the
/// 2/3-rule cutoff `floor(2K/3)` are alias-free.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WaveGrid {
    dim: usize,
    k_max: usize,
}

impl WaveGrid {
    /// Creates a grid for dimension `dim` (2 or 3) and maximal wavenumber
    /// `k_max >= 1` per axis.
    pub fn new(dim: usize, k_max: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(FluxError::Grid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if k_max == 0 {
            return Err(FluxError::Grid("k_max must be at least 1".into()));
        }
        Ok(Self { dim, k_max })
    }

    /// Spatial dimension (2 or 3).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Maximal retained wavenumber per axis.
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Per-axis dealiasing cutoff `floor(2 k_max / 3)` of the 2/3 rule.
    pub fn dealias_cutoff(&self) -> usize {
        2 * self.k_max / 3
    }

    /// Number of retained modes per axis, `2 k_max + 1`.
    pub fn modes_per_axis(&self) -> usize {
        2 * self.k_max + 1
    }

    /// Total number of stored coefficients, `(2 k_max + 1)^dim`.
    pub fn num_modes(&self) -> usize {
        self.modes_per_axis().pow(self.dim as u32)
    }

    /// Collocation points per axis, `2 k_max + 2`.
    pub fn phys_per_axis(&self) -> usize {
        2 * self.k_max + 2
    }

    /// Total number of collocation points, `(2 k_max + 2)^dim`.
    pub fn num_phys(&self) -> usize {
        self.phys_per_axis().pow(self.dim as u32)
    }

    /// Volume `(2*pi)^dim` of the periodic box.
    pub fn volume(&self) -> f64 {
        (2.0 * std::f64::consts::PI).powi(self.dim as i32)
    }

    /// Row-major index of the wave vector `k` (third component ignored in 2D).
    ///
    /// Panics in debug builds if any `|k_i| > k_max`.
    #[inline]
    pub fn index_of(&self, k: [i64; 3]) -> usize {
        let k_max = self.k_max as i64;
        let n = self.modes_per_axis();
        let mut idx = 0usize;
        for &ki in k.iter().take(self.dim) {
            debug_assert!(ki.abs() <= k_max, "wavenumber out of range");
            idx = idx * n + (ki + k_max) as usize;
        }
        idx
    }

    /// Wave vector stored at row-major index `idx` (third component 0 in 2D).
    #[inline]
    pub fn wave_at(&self, mut idx: usize) -> [i64; 3] {
        let k_max = self.k_max as i64;
        let n = self.modes_per_axis();
        let mut k = [0i64; 3];
        for axis in (0..self.dim).rev() {
            k[axis] = (idx % n) as i64 - k_max;
            idx /= n;
        }
        k
    }

    /// Squared Euclidean length of a wave vector.
    #[inline]
    pub fn k_sq(k: [i64; 3]) -> f64 {
        (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64
    }

    /// Whether wave vector `k` falls in the given band of cutoff `n`.
    #[inline]
    pub fn in_band(k: [i64; 3], n: usize, band: Band) -> bool {
        let ksq = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        let nsq = (n * n) as i64;
        match band {
            Band::Low => ksq > 0 && ksq <= nsq,
            Band::High => ksq > nsq,
        }
    }

    /// Checks that two fields live on the same grid.
    pub fn ensure_same(&self, other: &WaveGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(FluxError::Grid(format!("grid mismatch: {self:?} vs {other:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip_2d() {
        let g = WaveGrid::new(2, 4).unwrap();
        for idx in 0..g.num_modes() {
            assert_eq!(g.index_of(g.wave_at(idx)), idx);
        }
        assert_eq!(g.wave_at(g.index_of([0, 0, 0])), [0, 0, 0]);
    }

    #[test]
    fn index_roundtrip_3d() {
        let g = WaveGrid::new(3, 2).unwrap();
        for idx in 0..g.num_modes() {
            assert_eq!(g.index_of(g.wave_at(idx)), idx);
        }
    }

    #[test]
    fn dealias_cutoff_is_two_thirds() {
        assert_eq!(WaveGrid::new(2, 16).unwrap().dealias_cutoff(), 10);
        assert_eq!(WaveGrid::new(2, 3).unwrap().dealias_cutoff(), 2);
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(WaveGrid::new(1, 4).is_err());
        assert!(WaveGrid::new(4, 4).is_err());
        assert!(WaveGrid::new(2, 0).is_err());
    }
}

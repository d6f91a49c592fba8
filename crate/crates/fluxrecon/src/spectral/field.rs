//! Scalar and vector spectral fields with seminorms and band projections.

use num_complex::Complex64;

use super::grid::{Band, WaveGrid};
use crate::error::Result;

/// Mean-free real scalar field stored by its Fourier coefficients
/// `phi_k`, `k` in `[-K, K]^d`, with the reality constraint
/// `phi_{-k} = conj(phi_k)` maintained by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSpectralField {
    grid: WaveGrid,
    coeffs: Vec<Complex64>,
}

impl ScalarSpectralField {
    /// The zero field.
    pub fn zero(grid: WaveGrid) -> Self {
        Self { grid, coeffs: vec![Complex64::new(0.0, 0.0); grid.num_modes()] }
    }

    /// Underlying grid.
    pub fn grid(&self) -> WaveGrid {
        self.grid
    }

    /// Coefficient slice in row-major `[-K, K]^d` order.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Mutable coefficient slice. Callers are responsible for keeping the
    /// reality constraint; prefer [`Self::set_mode_pair`].
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Builds a field from raw coefficients (length must match the grid).
    pub fn from_coeffs(grid: WaveGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.num_modes() {
            return Err(crate::FluxError::Grid(format!(
                "coefficient count {} does not match grid ({} modes)",
                coeffs.len(),
                grid.num_modes()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    /// Coefficient at wave vector `k`.
    #[inline]
    pub fn mode(&self, k: [i64; 3]) -> Complex64 {
        self.coeffs[self.grid.index_of(k)]
    }

    /// Sets `phi_k = c` and `phi_{-k} = conj(c)`, preserving reality.
    pub fn set_mode_pair(&mut self, k: [i64; 3], c: Complex64) {
        let idx = self.grid.index_of(k);
        self.coeffs[idx] = c;
        let neg = [-k[0], -k[1], -k[2]];
        let jdx = self.grid.index_of(neg);
        if jdx != idx {
            self.coeffs[jdx] = c.conj();
        } else {
            // k = 0: the mean mode is pinned to zero.
            self.coeffs[idx] = Complex64::new(0.0, 0.0);
        }
    }

    /// Adds `a * other` to `self`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += a * o;
        }
    }

    /// Multiplies all coefficients by `a`.
    pub fn scale(&mut self, a: f64) {
        for c in &mut self.coeffs {
            *c *= a;
        }
    }

    /// Returns `self - other`.
    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Returns `self + other`.
    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    /// Sobolev seminorm of order `alpha`:
    /// `((2*pi)^d sum_{k != 0} |k|^(2 alpha) |phi_k|^2)^(1/2)`.
    ///
    /// `alpha = 0` is the `L^2` norm `|.|`, `alpha = 1` is `||.||`, and
    /// `alpha = -1` is the dual norm `||.||_*`.
    pub fn seminorm(&self, alpha: f64) -> f64 {
        let mut sum = 0.0;
        for (idx, c) in self.coeffs.iter().enumerate() {
            let ksq = WaveGrid::k_sq(self.grid.wave_at(idx));
            if ksq == 0.0 {
                continue;
            }
            sum += ksq.powf(alpha) * c.norm_sqr();
        }
        (self.grid.volume() * sum).sqrt()
    }

    /// Real `L^2` inner product `(f, g) = (2*pi)^d sum_k f_k conj(g_k)`.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let sum: f64 =
            self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a * b.conj()).re).sum();
        self.grid.volume() * sum
    }

    /// Band projection: keeps the modes of `band` with cutoff `n`, zeroing the
    /// rest (the mean mode is always zeroed).
    pub fn project(&self, n: usize, band: Band) -> Self {
        let mut out = self.clone();
        out.project_in_place(n, band);
        out
    }

    /// In-place variant of [`Self::project`].
    pub fn project_in_place(&mut self, n: usize, band: Band) {
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            if !WaveGrid::in_band(self.grid.wave_at(idx), n, band) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Applies the per-axis dealiasing mask: zeroes modes with any
    /// `|k_i| > dealias_cutoff`.
    pub fn dealias_in_place(&mut self) {
        let cutoff = self.grid.dealias_cutoff() as i64;
        let dim = self.grid.dim();
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            let k = self.grid.wave_at(idx);
            if k.iter().take(dim).any(|ki| ki.abs() > cutoff) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Symmetrizes the coefficients onto the reality manifold
    /// (`phi_k <- (phi_k + conj(phi_{-k})) / 2`) and zeroes the mean.
    pub fn enforce_reality(&mut self) {
        let n = self.coeffs.len();
        for idx in 0..n {
            // The lattice is symmetric under k -> -k; row-major index of -k
            // is the mirrored index n - 1 - idx.
            let jdx = n - 1 - idx;
            if jdx < idx {
                break;
            }
            let a = self.coeffs[idx];
            let b = self.coeffs[jdx];
            let avg = 0.5 * (a + b.conj());
            self.coeffs[idx] = avg;
            self.coeffs[jdx] = avg.conj();
        }
        let zero_idx = self.grid.index_of([0, 0, 0]);
        self.coeffs[zero_idx] = Complex64::new(0.0, 0.0);
    }

    /// Largest coefficient magnitude; used by the blow-up guard.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Whether all coefficients are finite.
    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Real vector field with one [`ScalarSpectralField`] per component.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSpectralField {
    grid: WaveGrid,
    components: Vec<ScalarSpectralField>,
}

impl VectorSpectralField {
    /// The zero vector field, with `grid.dim()` components.
    pub fn zero(grid: WaveGrid) -> Self {
        Self { grid, components: (0..grid.dim()).map(|_| ScalarSpectralField::zero(grid)).collect() }
    }

    /// Builds a vector field from per-component scalars (must all share a
    /// grid and number `grid.dim()`).
    pub fn from_components(components: Vec<ScalarSpectralField>) -> Result<Self> {
        let grid = components
            .first()
            .map(|c| c.grid())
            .ok_or_else(|| crate::FluxError::Grid("empty component list".into()))?;
        if components.len() != grid.dim() {
            return Err(crate::FluxError::Grid(format!(
                "expected {} components, got {}",
                grid.dim(),
                components.len()
            )));
        }
        for c in &components {
            grid.ensure_same(&c.grid())?;
        }
        Ok(Self { grid, components })
    }

    /// Underlying grid.
    pub fn grid(&self) -> WaveGrid {
        self.grid
    }

    /// Component fields.
    pub fn components(&self) -> &[ScalarSpectralField] {
        &self.components
    }

    /// Mutable component fields.
    pub fn components_mut(&mut self) -> &mut [ScalarSpectralField] {
        &mut self.components
    }

    /// Component `i`.
    pub fn comp(&self, i: usize) -> &ScalarSpectralField {
        &self.components[i]
    }

    /// Adds `a * other` to `self`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (c, o) in self.components.iter_mut().zip(&other.components) {
            c.axpy(a, o);
        }
    }

    /// Multiplies all coefficients by `a`.
    pub fn scale(&mut self, a: f64) {
        for c in &mut self.components {
            c.scale(a);
        }
    }

    /// Returns `self - other`.
    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Returns `self + other`.
    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    /// Vector Sobolev seminorm: root sum of squares of component seminorms.
    pub fn seminorm(&self, alpha: f64) -> f64 {
        self.components.iter().map(|c| c.seminorm(alpha).powi(2)).sum::<f64>().sqrt()
    }

    /// Real `L^2` inner product, summed over components.
    pub fn inner(&self, other: &Self) -> f64 {
        self.components.iter().zip(&other.components).map(|(a, b)| a.inner(b)).sum()
    }

    /// Band projection applied componentwise.
    pub fn project(&self, n: usize, band: Band) -> Self {
        let mut out = self.clone();
        out.project_in_place(n, band);
        out
    }

    /// In-place variant of [`Self::project`].
    pub fn project_in_place(&mut self, n: usize, band: Band) {
        for c in &mut self.components {
            c.project_in_place(n, band);
        }
    }

    /// Leray projection onto divergence-free fields:
    /// `v_k <- v_k - k (k . v_k) / |k|^2` per mode.
    pub fn leray_project(&mut self) {
        let grid = self.grid;
        let dim = grid.dim();
        for idx in 0..grid.num_modes() {
            let k = grid.wave_at(idx);
            let ksq = WaveGrid::k_sq(k);
            if ksq == 0.0 {
                for c in &mut self.components {
                    c.coeffs_mut()[idx] = Complex64::new(0.0, 0.0);
                }
                continue;
            }
            let mut k_dot_v = Complex64::new(0.0, 0.0);
            for (axis, c) in self.components.iter().enumerate().take(dim) {
                k_dot_v += (k[axis] as f64) * c.coeffs()[idx];
            }
            let factor = k_dot_v / ksq;
            for (axis, c) in self.components.iter_mut().enumerate().take(dim) {
                c.coeffs_mut()[idx] -= (k[axis] as f64) * factor;
            }
        }
    }

    /// Maximal divergence coefficient magnitude `max_k |k . v_k|`.
    pub fn max_divergence(&self) -> f64 {
        let grid = self.grid;
        let mut worst = 0.0f64;
        for idx in 0..grid.num_modes() {
            let k = grid.wave_at(idx);
            let mut k_dot_v = Complex64::new(0.0, 0.0);
            for (axis, c) in self.components.iter().enumerate() {
                k_dot_v += (k[axis] as f64) * c.coeffs()[idx];
            }
            worst = worst.max(k_dot_v.norm());
        }
        worst
    }

    /// Largest coefficient magnitude over all components.
    pub fn max_abs(&self) -> f64 {
        self.components.iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    /// Whether all coefficients are finite.
    pub fn is_finite(&self) -> bool {
        self.components.iter().all(|c| c.is_finite())
    }
}

/// Operations shared by scalar and vector fields; lets observation streams,
/// recovery, and error metrics be generic over the field type.
pub trait FieldOps: Clone {
    /// The zero field on the same grid.
    fn zero_like(&self) -> Self;
    /// `self += a * other`.
    fn axpy_op(&mut self, a: f64, other: &Self);
    /// `self *= a`.
    fn scale_op(&mut self, a: f64);
    /// Sobolev seminorm of order `alpha`.
    fn seminorm_op(&self, alpha: f64) -> f64;
    /// Band projection with cutoff `n`.
    fn project_op(&self, n: usize, band: Band) -> Self;
    /// Number of scalar coefficient slots (scalars: modes; vectors:
    /// `dim * modes`).
    fn packed_len(&self) -> usize;
    /// Copies coefficients into a packed slice.
    fn pack(&self, out: &mut [Complex64]);
    /// Reads coefficients back from a packed slice.
    fn unpack(&mut self, data: &[Complex64]);

    /// `self - other`.
    fn sub_op(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy_op(-1.0, other);
        out
    }
}

impl FieldOps for ScalarSpectralField {
    fn zero_like(&self) -> Self {
        Self::zero(self.grid)
    }
    fn axpy_op(&mut self, a: f64, other: &Self) {
        self.axpy(a, other)
    }
    fn scale_op(&mut self, a: f64) {
        self.scale(a)
    }
    fn seminorm_op(&self, alpha: f64) -> f64 {
        self.seminorm(alpha)
    }
    fn project_op(&self, n: usize, band: Band) -> Self {
        self.project(n, band)
    }
    fn packed_len(&self) -> usize {
        self.coeffs.len()
    }
    fn pack(&self, out: &mut [Complex64]) {
        out.copy_from_slice(&self.coeffs);
    }
    fn unpack(&mut self, data: &[Complex64]) {
        self.coeffs.copy_from_slice(data);
    }
}

impl FieldOps for VectorSpectralField {
    fn zero_like(&self) -> Self {
        Self::zero(self.grid)
    }
    fn axpy_op(&mut self, a: f64, other: &Self) {
        self.axpy(a, other)
    }
    fn scale_op(&mut self, a: f64) {
        self.scale(a)
    }
    fn seminorm_op(&self, alpha: f64) -> f64 {
        self.seminorm(alpha)
    }
    fn project_op(&self, n: usize, band: Band) -> Self {
        self.project(n, band)
    }
    fn packed_len(&self) -> usize {
        self.components.iter().map(|c| c.coeffs.len()).sum()
    }
    fn pack(&self, out: &mut [Complex64]) {
        let n = self.grid.num_modes();
        for (i, c) in self.components.iter().enumerate() {
            out[i * n..(i + 1) * n].copy_from_slice(&c.coeffs);
        }
    }
    fn unpack(&mut self, data: &[Complex64]) {
        let n = self.grid.num_modes();
        for (i, c) in self.components.iter_mut().enumerate() {
            c.coeffs.copy_from_slice(&data[i * n..(i + 1) * n]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn seminorm_single_mode_pair() {
        // phi = 2 cos(x): modes (1,0) and (-1,0) with coefficient 1.
        let grid = WaveGrid::new(2, 4).unwrap();
        let mut phi = ScalarSpectralField::zero(grid);
        phi.set_mode_pair([1, 0, 0], Complex64::new(1.0, 0.0));
        let expect = 2.0 * PI * 2.0f64.sqrt();
        assert!((phi.seminorm(0.0) - expect).abs() < 1e-12);
        // |k| = 1, so every order gives the same value.
        assert!((phi.seminorm(1.0) - expect).abs() < 1e-12);
        assert!((phi.seminorm(-1.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn projection_bands_are_complementary() {
        let grid = WaveGrid::new(2, 6).unwrap();
        let mut phi = ScalarSpectralField::zero(grid);
        phi.set_mode_pair([1, 0, 0], Complex64::new(0.3, 0.1));
        phi.set_mode_pair([3, 2, 0], Complex64::new(-0.5, 0.2));
        phi.set_mode_pair([5, 5, 0], Complex64::new(0.1, -0.7));
        let low = phi.project(3, Band::Low);
        let high = phi.project(3, Band::High);
        let sum = low.add(&high);
        assert!(sum.sub(&phi).seminorm(0.0) < 1e-14);
        // (3,2) has |k| = sqrt(13) > 3 and goes to the high band.
        assert_eq!(low.mode([3, 2, 0]), Complex64::new(0.0, 0.0));
        assert_ne!(high.mode([3, 2, 0]), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn leray_is_idempotent_and_divergence_free() {
        let grid = WaveGrid::new(2, 4).unwrap();
        let mut v = VectorSpectralField::zero(grid);
        v.components_mut()[0].set_mode_pair([1, 2, 0], Complex64::new(1.0, -0.5));
        v.components_mut()[1].set_mode_pair([1, 2, 0], Complex64::new(0.25, 0.75));
        v.leray_project();
        assert!(v.max_divergence() < 1e-14);
        let mut again = v.clone();
        again.leray_project();
        assert!(again.sub(&v).seminorm(0.0) < 1e-14);
    }

    #[test]
    fn enforce_reality_symmetrizes() {
        let grid = WaveGrid::new(2, 3).unwrap();
        let mut phi = ScalarSpectralField::zero(grid);
        let idx = grid.index_of([2, 1, 0]);
        phi.coeffs_mut()[idx] = Complex64::new(1.0, 1.0);
        phi.enforce_reality();
        assert_eq!(phi.mode([2, 1, 0]), Complex64::new(0.5, 0.5));
        assert_eq!(phi.mode([-2, -1, 0]), Complex64::new(0.5, -0.5));
    }
}

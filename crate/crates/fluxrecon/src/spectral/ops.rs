//! Nonlinear pseudo-spectral operations: dealiased advection, the trilinear
//! form, and the Navier-Stokes bilinear term.

use num_complex::Complex64;

use super::fft::{from_physical, to_physical};
use super::field::{ScalarSpectralField, VectorSpectralField};
use super::grid::WaveGrid;

/// Spectral partial derivative `d phi / d x_axis` (multiplication by `i k_axis`).
fn derivative(phi: &ScalarSpectralField, axis: usize) -> ScalarSpectralField {
    let grid = phi.grid();
    let mut out = phi.clone();
    for idx in 0..grid.num_modes() {
        let k = grid.wave_at(idx);
        out.coeffs_mut()[idx] *= Complex64::new(0.0, k[axis] as f64);
    }
    out
}

/// Physical values of a field truncated at the dealiasing cutoff.
fn dealiased_physical(phi: &ScalarSpectralField) -> Vec<f64> {
    let mut masked = phi.clone();
    masked.dealias_in_place();
    to_physical(&masked)
}

/// Dealiased advection term `v . grad(phi)` via the 2/3 rule.
///
/// Both factors are truncated at the per-axis cutoff before the physical
/// product, and the result is truncated again and mean-freed, so the retained
/// modes of the product are alias-free.
pub fn advect(v: &VectorSpectralField, phi: &ScalarSpectralField) -> ScalarSpectralField {
    let v_phys: Vec<Vec<f64>> = v.components().iter().map(dealiased_physical).collect();
    advect_with_physical(&v_phys, phi)
}

/// Advection against pre-transformed (already dealiased) physical velocity
/// values; used to amortize the velocity transform across components.
fn advect_with_physical(v_phys: &[Vec<f64>], phi: &ScalarSpectralField) -> ScalarSpectralField {
    let grid = phi.grid();
    let dim = grid.dim();
    let mut prod = vec![0.0f64; grid.num_phys()];
    for (axis, vp) in v_phys.iter().enumerate().take(dim) {
        let dphi = {
            let mut d = derivative(phi, axis);
            d.dealias_in_place();
            to_physical(&d)
        };
        for ((p, &a), &b) in prod.iter_mut().zip(vp).zip(&dphi) {
            *p += a * b;
        }
    }
    let mut out = from_physical(grid, &prod);
    out.dealias_in_place();
    out
}

/// Componentwise dealiased advection `v . grad(w)` of a vector field.
pub fn advect_vector(v: &VectorSpectralField, w: &VectorSpectralField) -> VectorSpectralField {
    let v_phys: Vec<Vec<f64>> = v.components().iter().map(dealiased_physical).collect();
    let comps = w.components().iter().map(|wc| advect_with_physical(&v_phys, wc)).collect();
    VectorSpectralField::from_components(comps).expect("component grids match")
}

/// Trilinear form `b(u, phi, psi) = (u . grad(phi), psi)` for scalars.
pub fn trilinear_b(
    u: &VectorSpectralField,
    phi: &ScalarSpectralField,
    psi: &ScalarSpectralField,
) -> f64 {
    advect(u, phi).inner(psi)
}

/// Trilinear form `b(u, v, w) = sum_j (u . grad(v_j), w_j)` for vectors.
pub fn trilinear_b_vector(
    u: &VectorSpectralField,
    v: &VectorSpectralField,
    w: &VectorSpectralField,
) -> f64 {
    advect_vector(u, v).inner(w)
}

/// Velocity with cached, dealiased physical collocation values; amortizes
/// the velocity transform when advecting many fields against the same `v`.
#[derive(Debug, Clone)]
pub struct PhysVelocity {
    grid: WaveGrid,
    comps: Vec<Vec<f64>>,
    max_speed: f64,
}

impl PhysVelocity {
    /// Caches the dealiased physical values of `v`.
    pub fn new(v: &VectorSpectralField) -> Self {
        let comps: Vec<Vec<f64>> = v.components().iter().map(dealiased_physical).collect();
        let mut max_speed = 0.0f64;
        for i in 0..v.grid().num_phys() {
            let s: f64 = comps.iter().map(|c| c[i] * c[i]).sum();
            max_speed = max_speed.max(s);
        }
        Self { grid: v.grid(), comps, max_speed: max_speed.sqrt() }
    }

    /// Underlying grid.
    pub fn grid(&self) -> WaveGrid {
        self.grid
    }

    /// Pointwise maximum speed `|v|_inf` on the collocation grid.
    pub fn max_speed(&self) -> f64 {
        self.max_speed
    }

    /// Dealiased advection `v . grad(phi)`.
    pub fn advect(&self, phi: &ScalarSpectralField) -> ScalarSpectralField {
        advect_with_physical(&self.comps, phi)
    }

    /// Componentwise dealiased advection `v . grad(w)`.
    pub fn advect_vector(&self, w: &VectorSpectralField) -> VectorSpectralField {
        let comps = w.components().iter().map(|wc| advect_with_physical(&self.comps, wc)).collect();
        VectorSpectralField::from_components(comps).expect("component grids match")
    }
}

/// Navier-Stokes bilinear term `B(u, v) = P_L (u . grad(v))` with `P_L` the
/// Leray projection.
pub fn nse_bilinear(u: &VectorSpectralField, v: &VectorSpectralField) -> VectorSpectralField {
    let mut out = advect_vector(u, v);
    out.leray_project();
    out
}

/// Laplacian `-|k|^2 phi_k` (used by recovery formulas; time steppers keep
/// the diffusion inside the integrating factor instead).
pub fn laplacian(phi: &ScalarSpectralField) -> ScalarSpectralField {
    let grid = phi.grid();
    let mut out = phi.clone();
    for idx in 0..grid.num_modes() {
        let ksq = WaveGrid::k_sq(grid.wave_at(idx));
        out.coeffs_mut()[idx] *= -ksq;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Band;
    use num_complex::Complex64;

    fn grid() -> WaveGrid {
        WaveGrid::new(2, 8).unwrap()
    }

    /// v = (sin y, 0) as a divergence-free spectral field.
    fn shear_velocity(grid: WaveGrid) -> VectorSpectralField {
        let mut v = VectorSpectralField::zero(grid);
        // sin y = (e^{iy} - e^{-iy}) / (2i): coefficient -i/2 at (0,1).
        v.components_mut()[0].set_mode_pair([0, 1, 0], Complex64::new(0.0, -0.5));
        v
    }

    #[test]
    fn advect_matches_trig_identity() {
        // v = (sin y, 0), phi = sin x => v . grad(phi) = sin y cos x.
        let grid = grid();
        let v = shear_velocity(grid);
        let mut phi = ScalarSpectralField::zero(grid);
        phi.set_mode_pair([1, 0, 0], Complex64::new(0.0, -0.5));
        let adv = advect(&v, &phi);
        // sin y cos x = (1/2)(sin(x+y) - sin(x-y)) has coefficients
        // -i/4 at (1,1) and +i/4 at (1,-1).
        let mut expect = ScalarSpectralField::zero(grid);
        expect.set_mode_pair([1, 1, 0], Complex64::new(0.0, -0.25));
        expect.set_mode_pair([1, -1, 0], Complex64::new(0.0, 0.25));
        assert!(adv.sub(&expect).seminorm(0.0) < 1e-12);
    }

    #[test]
    fn trilinear_skew_symmetry() {
        // b(u, phi, psi) = -b(u, psi, phi) for divergence-free u.
        let grid = grid();
        let mut u = VectorSpectralField::zero(grid);
        u.components_mut()[0].set_mode_pair([2, 3, 0], Complex64::new(0.4, 0.1));
        u.components_mut()[1].set_mode_pair([1, -2, 0], Complex64::new(-0.3, 0.2));
        u.leray_project();
        let mut phi = ScalarSpectralField::zero(grid);
        phi.set_mode_pair([1, 1, 0], Complex64::new(0.5, -0.2));
        phi.set_mode_pair([3, 0, 0], Complex64::new(0.1, 0.6));
        let mut psi = ScalarSpectralField::zero(grid);
        psi.set_mode_pair([2, -1, 0], Complex64::new(-0.7, 0.05));
        psi.set_mode_pair([1, 2, 0], Complex64::new(0.3, 0.3));
        let b1 = trilinear_b(&u, &phi, &psi);
        let b2 = trilinear_b(&u, &psi, &phi);
        assert!((b1 + b2).abs() < 1e-12 * (1.0 + b1.abs()));
        // And b(u, phi, phi) = 0.
        assert!(trilinear_b(&u, &phi, &phi).abs() < 1e-12);
    }

    #[test]
    fn enstrophy_cancellation_b_u_u_au() {
        // b(u, u, Au) = 0 in 2D for divergence-free u.
        let grid = grid();
        let mut u = VectorSpectralField::zero(grid);
        u.components_mut()[0].set_mode_pair([1, 2, 0], Complex64::new(0.3, -0.4));
        u.components_mut()[1].set_mode_pair([2, -1, 0], Complex64::new(0.2, 0.5));
        u.components_mut()[0].set_mode_pair([3, 1, 0], Complex64::new(-0.1, 0.2));
        u.leray_project();
        let au = VectorSpectralField::from_components(
            u.components().iter().map(|c| { let mut l = laplacian(c); l.scale(-1.0); l }).collect(),
        )
        .unwrap();
        let b = trilinear_b_vector(&u, &u, &au);
        assert!(b.abs() < 1e-11, "b(u,u,Au) = {b}");
    }

    #[test]
    fn bilinear_is_divergence_free_and_orthogonal() {
        let grid = grid();
        let mut u = VectorSpectralField::zero(grid);
        u.components_mut()[0].set_mode_pair([1, 1, 0], Complex64::new(0.6, 0.0));
        u.components_mut()[1].set_mode_pair([2, 2, 0], Complex64::new(0.0, -0.3));
        u.leray_project();
        let b = nse_bilinear(&u, &u);
        assert!(b.max_divergence() < 1e-13);
        // (B(u,u), u) = b(u,u,u) = 0 (Leray projection drops nothing against
        // a divergence-free test field).
        assert!(b.inner(&u).abs() < 1e-12);
    }

    #[test]
    fn bernstein_and_poincare_inequalities() {
        let grid = grid();
        let mut phi = ScalarSpectralField::zero(grid);
        phi.set_mode_pair([1, 0, 0], Complex64::new(0.5, 0.2));
        phi.set_mode_pair([2, 2, 0], Complex64::new(-0.3, 0.1));
        phi.set_mode_pair([5, 1, 0], Complex64::new(0.15, -0.25));
        phi.set_mode_pair([7, 4, 0], Complex64::new(0.05, 0.3));
        let n = 4usize;
        let low = phi.project(n, Band::Low);
        let high = phi.project(n, Band::High);
        // Bernstein: ||P_N f||_1 <= N ||P_N f||_0.
        assert!(low.seminorm(1.0) <= n as f64 * low.seminorm(0.0) + 1e-13);
        // Poincare: ||Q_N f||_0 <= N^{-1} ||Q_N f||_1.
        assert!(high.seminorm(0.0) <= high.seminorm(1.0) / n as f64 + 1e-13);
    }
}

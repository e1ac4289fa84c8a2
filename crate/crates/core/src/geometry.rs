//! Exact primitives of unit-disk geometry: Carleson boxes, the
//! pseudo-hyperbolic metric, Möbius maps, Blaschke products and
//! pseudo-hyperbolic disks.

use crate::error::{Error, Result};
use crate::measures::PullbackSample;
use crate::C64;

const CIRCLE_TOL: f64 = 1e-14;

/// Pseudo-hyperbolic distance `ρ(u, v) = |(u − v)/(1 − ūv)|`.
///
/// Both arguments must lie strictly inside the unit disk; the value is in
/// `[0, 1)`, symmetric, zero iff `u = v`, and invariant under disk
/// automorphisms applied to both arguments.
pub fn pseudo_hyperbolic(u: C64, v: C64) -> Result<f64> {
    for p in [u, v] {
        if p.norm() >= 1.0 {
            return Err(Error::OutsideDisk { modulus: p.norm() });
        }
    }
    Ok(((u - v) / (C64::new(1.0, 0.0) - u.conj() * v)).norm())
}

/// Carleson box `S(ξ, h) = {z ∈ D : |z − ξ| < h}` at a boundary point `ξ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarlesonBox {
    center: C64,
    size: f64,
}

impl CarlesonBox {
    pub fn new(center: C64, size: f64) -> Result<Self> {
        if (center.norm() - 1.0).abs() > CIRCLE_TOL {
            return Err(Error::OffCircle {
                modulus: center.norm(),
            });
        }
        if !(size > 0.0 && size <= 1.0) {
            return Err(Error::invalid("size", format!("h = {size} not in (0, 1]")));
        }
        Ok(CarlesonBox { center, size })
    }

    /// Box centered at `exp(iθ)`.
    pub fn at_angle(theta: f64, size: f64) -> Result<Self> {
        Self::new(C64::from_polar(1.0, theta), size)
    }

    pub fn center(&self) -> C64 {
        self.center
    }

    pub fn size(&self) -> f64 {
        self.size
    }

    /// Membership is open: `z ∈ S(ξ, h) ⟺ |z − ξ| < h` and `|z| < 1`.
    pub fn contains(&self, z: C64) -> bool {
        z.norm() < 1.0 && (z - self.center).norm() < self.size
    }
}

/// Möbius transformation `z ↦ (az + b)/(cz + d)` with `ad − bc ≠ 0`.
#[derive(Debug, Clone, Copy)]
pub struct MobiusMap {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl MobiusMap {
    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Result<Self> {
        if (a * d - b * c).norm() < 1e-15 {
            return Err(Error::Construction("singular Möbius coefficients".into()));
        }
        Ok(MobiusMap { a, b, c, d })
    }

    /// The involution `φ_a(z) = (a − z)/(1 − āz)`, swapping `a ↔ 0`.
    pub fn disk_involution(a: C64) -> Result<Self> {
        if a.norm() >= 1.0 {
            return Err(Error::OutsideDisk { modulus: a.norm() });
        }
        Self::new(-C64::new(1.0, 0.0), a, -a.conj(), C64::new(1.0, 0.0))
    }

    /// Disk automorphism `e^{iτ} φ_a`.
    pub fn disk_automorphism(a: C64, tau: f64) -> Result<Self> {
        let rot = C64::from_polar(1.0, tau);
        let m = Self::disk_involution(a)?;
        Self::new(rot * m.a, rot * m.b, m.c, m.d)
    }

    /// Map sending the three points `(p, q, s)` to `(0, 1, ∞)`.
    pub fn three_point(p: C64, q: C64, s: C64) -> Result<Self> {
        // z ↦ (z − p)(q − s) / ((z − s)(q − p))
        let qp = q - p;
        let qs = q - s;
        Self::new(qs, -p * qs, qp, -s * qp)
    }

    pub fn apply(&self, z: C64) -> C64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    /// Coefficient-matrix product; equals pointwise composition.
    pub fn compose(&self, other: &MobiusMap) -> MobiusMap {
        MobiusMap {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    pub fn inverse(&self) -> MobiusMap {
        MobiusMap {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }
}

/// Finite Blaschke product with the usual normalizing factors
/// `|aₙ|/aₙ` (taken as 1 when `aₙ = 0`).
#[derive(Debug, Clone)]
pub struct BlaschkeProduct {
    zeros: Vec<C64>,
    truncation: usize,
}

impl BlaschkeProduct {
    pub fn new(zeros: Vec<C64>) -> Result<Self> {
        for a in &zeros {
            if a.norm() >= 1.0 {
                return Err(Error::OutsideDisk { modulus: a.norm() });
            }
        }
        let truncation = zeros.len();
        Ok(BlaschkeProduct { zeros, truncation })
    }

    /// Keep only the first `n` factors when evaluating.
    pub fn truncated(mut self, n: usize) -> Self {
        self.truncation = n.min(self.zeros.len());
        self
    }

    pub fn zeros(&self) -> &[C64] {
        &self.zeros
    }

    /// `Σ (1 − |aₙ|)`, the Blaschke condition sum.
    pub fn condition_sum(&self) -> f64 {
        self.zeros.iter().map(|a| 1.0 - a.norm()).sum()
    }

    pub fn eval(&self, z: C64) -> C64 {
        let one = C64::new(1.0, 0.0);
        self.zeros[..self.truncation]
            .iter()
            .map(|a| {
                let factor = if a.norm() == 0.0 { one } else { a.norm() / a };
                factor * (a - z) / (one - a.conj() * z)
            })
            .product()
    }

    /// `log |B(z)| = Σ log |φ_{aₙ}(z)|`, stable for many factors.
    pub fn log_modulus(&self, z: C64) -> f64 {
        let one = C64::new(1.0, 0.0);
        self.zeros[..self.truncation]
            .iter()
            .map(|a| ((a - z) / (one - a.conj() * z)).norm().ln())
            .sum()
    }
}

/// Pseudo-hyperbolic disk `Δ(a, s) = {z : ρ(a, z) < s}`, stored together
/// with its Euclidean realisation `D(center, radius)`.
#[derive(Debug, Clone, Copy)]
pub struct PseudoHyperbolicDisk {
    pub a: C64,
    pub rho: f64,
    pub euclidean_center: C64,
    pub euclidean_radius: f64,
}

impl PseudoHyperbolicDisk {
    pub fn new(a: C64, rho: f64) -> Result<Self> {
        if a.norm() >= 1.0 {
            return Err(Error::OutsideDisk { modulus: a.norm() });
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::invalid("rho", format!("radius {rho} not in (0,1)")));
        }
        let d = 1.0 - rho * rho * a.norm_sqr();
        Ok(PseudoHyperbolicDisk {
            a,
            rho,
            euclidean_center: a * ((1.0 - rho * rho) / d),
            euclidean_radius: rho * (1.0 - a.norm_sqr()) / d,
        })
    }

    pub fn contains(&self, z: C64) -> bool {
        (z - self.euclidean_center).norm() < self.euclidean_radius
    }
}

/// Companion structure for a real center `a`: the disk `D_a` of diameter
/// `[c, 1/c]` orthogonal to the circle, and the arc `A_a = ∂D ∩ D_a`.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryCompanion {
    /// `c = (2a − 1)/(2 − a)`, the inner point of `∂Δ(a, 1/2)` on `[0, 1)`.
    pub c: f64,
    pub disk_center: f64,
    pub disk_radius: f64,
    /// Half-angle of the arc `A_a`; the arc is `{e^{iθ} : |θ| ≤ half_angle}`.
    pub arc_half_angle: f64,
}

impl BoundaryCompanion {
    pub fn diameter(&self) -> f64 {
        2.0 * self.disk_radius
    }
}

/// Companion disk and arc for `a ∈ [3/4, 1)`.
pub fn orthogonal_boundary_disk(a: f64) -> Result<BoundaryCompanion> {
    if !(0.75..1.0).contains(&a) {
        return Err(Error::invalid("a", format!("{a} not in [3/4, 1)")));
    }
    let c = (2.0 * a - 1.0) / (2.0 - a);
    let disk_center = 0.5 * (c + 1.0 / c);
    let disk_radius = 0.5 * (1.0 / c - c);
    // e^{iθ} ∈ D_a ⟺ cos θ > 2c/(1 + c²); orthogonality makes this exact.
    let arc_half_angle = (2.0 * c / (1.0 + c * c)).clamp(-1.0, 1.0).acos();
    Ok(BoundaryCompanion {
        c,
        disk_center,
        disk_radius,
        arc_half_angle,
    })
}

/// Per-box ratios `μ[S(ξ, h)] / h^γ` for an explicit list of boxes.
///
/// Returns the ratios together with a flag set when the sample is empty
/// (all ratios are then zero).
pub fn box_ratio_grid(
    boxes: &[CarlesonBox],
    mu: &PullbackSample,
    gamma: f64,
) -> Result<(Vec<f64>, bool)> {
    if gamma <= 1.0 {
        return Err(Error::invalid("gamma", format!("{gamma} must exceed 1")));
    }
    let empty = mu.is_empty();
    let ratios = boxes
        .iter()
        .map(|b| mu.box_mass(b) / b.size().powf(gamma))
        .collect();
    Ok((ratios, empty))
}

/// Boundary grid `ξ_m = e^{2πim/M}` of box centers.
pub fn boundary_centers(m: usize) -> Vec<C64> {
    (0..m)
        .map(|j| C64::from_polar(1.0, std::f64::consts::TAU * j as f64 / m as f64))
        .collect()
}

/// Dyadic box sizes `h_k = 2^{−k}`, `k = 0..=k_max`.
pub fn dyadic_scales(k_max: usize) -> Vec<f64> {
    (0..=k_max).map(|k| 0.5f64.powi(k as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_disk_point(rng: &mut ChaCha8Rng, rmax: f64) -> C64 {
        let r = rmax * rng.gen::<f64>().sqrt();
        let t = std::f64::consts::TAU * rng.gen::<f64>();
        C64::from_polar(r, t)
    }

    #[test]
    fn pseudo_hyperbolic_at_origin_is_modulus() {
        let z = C64::new(0.3, 0.4);
        assert_abs_diff_eq!(pseudo_hyperbolic(C64::new(0.0, 0.0), z).unwrap(), 0.5);
    }

    #[test]
    fn pseudo_hyperbolic_vanishes_on_diagonal() {
        let z = C64::new(-0.77, 0.21);
        assert_eq!(pseudo_hyperbolic(z, z).unwrap(), 0.0);
    }

    #[test]
    fn pseudo_hyperbolic_radial_pair() {
        // Two radii r₀ = e^{−1}, r₁ = e^{−1/2}: ρ = (r₁ − r₀)/(1 − r₀r₁).
        let r0 = (-1.0f64).exp();
        let r1 = (-0.5f64).exp();
        let rho = pseudo_hyperbolic(C64::new(r0, 0.0), C64::new(r1, 0.0)).unwrap();
        assert_abs_diff_eq!(rho, (r1 - r0) / (1.0 - r0 * r1), epsilon = 1e-15);
        assert_abs_diff_eq!(rho, 0.3071958, epsilon = 1e-6);
        assert!(rho <= 0.5);
    }

    #[test]
    fn pseudo_hyperbolic_rejects_boundary() {
        assert!(pseudo_hyperbolic(C64::new(1.0, 0.0), C64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn mobius_invariance_of_rho() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let u = random_disk_point(&mut rng, 0.95);
            let v = random_disk_point(&mut rng, 0.95);
            let a = random_disk_point(&mut rng, 0.9);
            let tau = std::f64::consts::TAU * rng.gen::<f64>();
            let t = MobiusMap::disk_automorphism(a, tau).unwrap();
            let lhs = pseudo_hyperbolic(t.apply(u), t.apply(v)).unwrap();
            let rhs = pseudo_hyperbolic(u, v).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn mobius_composition_is_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m1 = MobiusMap::disk_automorphism(C64::new(0.3, -0.2), 0.7).unwrap();
        let m2 = MobiusMap::disk_automorphism(C64::new(-0.5, 0.1), 2.1).unwrap();
        let comp = m1.compose(&m2);
        for _ in 0..50 {
            let z = random_disk_point(&mut rng, 0.9);
            let direct = m1.apply(m2.apply(z));
            assert!((comp.apply(z) - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn involution_swaps_center_and_origin() {
        let a = C64::new(0.4, 0.25);
        let m = MobiusMap::disk_involution(a).unwrap();
        assert!(m.apply(a).norm() < 1e-15);
        assert!((m.apply(C64::new(0.0, 0.0)) - a).norm() < 1e-15);
    }

    #[test]
    fn carleson_box_membership() {
        let b = CarlesonBox::at_angle(0.0, 0.5).unwrap();
        assert!(!b.contains(C64::new(0.0, 0.0)));
        assert!(b.contains(C64::new(0.7, 0.0)));
        assert!(!b.contains(C64::new(1.2, 0.0)));
        assert!(CarlesonBox::new(C64::new(0.5, 0.0), 0.5).is_err());
        assert!(CarlesonBox::at_angle(0.0, 0.0).is_err());
    }

    #[test]
    fn interval_bands_have_small_pseudo_distance() {
        // r_n = exp(−2^{−n}): any two radii in one band stay within ρ ≤ 1/2.
        for n in 0..=20 {
            let rn = (-(0.5f64.powi(n))).exp();
            let rn1 = (-(0.5f64.powi(n + 1))).exp();
            let grid = 8;
            for i in 0..=grid {
                for j in 0..=grid {
                    let u = rn + (rn1 - rn) * i as f64 / grid as f64;
                    let v = rn + (rn1 - rn) * j as f64 / grid as f64;
                    let rho = pseudo_hyperbolic(C64::new(u, 0.0), C64::new(v, 0.0)).unwrap();
                    assert!(rho <= 0.5 + 1e-13, "n={n} u={u} v={v} rho={rho}");
                }
            }
        }
    }

    #[test]
    fn pseudo_disk_euclidean_realisation() {
        // Radius 1/2: center 3a/(4−|a|²), radius 2(1−|a|²)/(4−|a|²).
        for &a in &[0.75, 0.9, 0.99] {
            let d = PseudoHyperbolicDisk::new(C64::new(a, 0.0), 0.5).unwrap();
            assert_abs_diff_eq!(
                d.euclidean_center.re,
                3.0 * a / (4.0 - a * a),
                epsilon = 1e-14
            );
            assert_abs_diff_eq!(
                d.euclidean_radius,
                2.0 * (1.0 - a * a) / (4.0 - a * a),
                epsilon = 1e-14
            );
            // Boundary points sit at pseudo-hyperbolic distance 1/2.
            for j in 0..64 {
                let t = std::f64::consts::TAU * j as f64 / 64.0;
                let z = d.euclidean_center + d.euclidean_radius * C64::from_polar(1.0, t);
                let rho = pseudo_hyperbolic(d.a, z).unwrap();
                assert_abs_diff_eq!(rho, 0.5, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn pseudo_disk_sector_bound() {
        // Δ(a, 1/2) lies in the sector |arg z| ≤ C(1−a) with C = 64π/54.
        let c_const = 64.0 * std::f64::consts::PI / 54.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &a in &[0.75, 0.9, 0.99] {
            let d = PseudoHyperbolicDisk::new(C64::new(a, 0.0), 0.5).unwrap();
            for _ in 0..2000 {
                let t = std::f64::consts::TAU * rng.gen::<f64>();
                let r = d.euclidean_radius * rng.gen::<f64>().sqrt();
                let z = d.euclidean_center + r * C64::from_polar(1.0, t);
                assert!(z.arg().abs() <= c_const * (1.0 - a) + 1e-12);
            }
        }
    }

    #[test]
    fn blaschke_modulus_and_zeros() {
        let zeros = vec![
            C64::new(0.5, 0.0),
            C64::new(-0.3, 0.4),
            C64::new(0.0, 0.0),
            C64::new(0.1, -0.8),
        ];
        let b = BlaschkeProduct::new(zeros.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let z = random_disk_point(&mut rng, 0.999);
            let val = b.eval(z);
            assert!(val.norm() < 1.0 + 1e-12);
            assert_abs_diff_eq!(val.norm().ln(), b.log_modulus(z), epsilon = 1e-10);
        }
        for a in &zeros {
            assert!(b.eval(*a).norm() < 1e-14);
        }
        assert!(BlaschkeProduct::new(vec![C64::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn companion_disk_geometry() {
        let comp = orthogonal_boundary_disk(0.75).unwrap();
        assert_abs_diff_eq!(comp.c, 0.4, epsilon = 1e-15);

        // ρ(a, c) = 1/2 by construction of c.
        for &a in &[0.75, 0.9, 0.97] {
            let comp = orthogonal_boundary_disk(a).unwrap();
            let rho =
                pseudo_hyperbolic(C64::new(a, 0.0), C64::new(comp.c, 0.0)).unwrap();
            assert_abs_diff_eq!(rho, 0.5, epsilon = 1e-12);
        }

        // Small-h asymptotics: diameter/h → 6.
        let h = 1e-3;
        let comp = orthogonal_boundary_disk(1.0 - h).unwrap();
        assert!((comp.diameter() / h - 6.0).abs() < 0.3);
        // Arc length is O(h).
        assert!(2.0 * comp.arc_half_angle <= 8.0 * h);

        assert!(orthogonal_boundary_disk(0.5).is_err());
        assert!(orthogonal_boundary_disk(1.0).is_err());
    }

    #[test]
    fn companion_disk_is_orthogonal_to_circle() {
        for &a in &[0.75, 0.9, 0.99] {
            let comp = orthogonal_boundary_disk(a).unwrap();
            // Orthogonality: center² = 1 + radius².
            assert_abs_diff_eq!(
                comp.disk_center * comp.disk_center,
                1.0 + comp.disk_radius * comp.disk_radius,
                epsilon = 1e-10
            );
        }
    }
}

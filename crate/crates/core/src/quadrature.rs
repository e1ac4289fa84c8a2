//! Quadrature rules for the disk.
//!
//! The weighted area measure `dA_α = (α+1)(1−|z|²)^α dA` factors into the
//! radial marginal `dλ_α(r) = 2(α+1)(1−r²)^α r dr` (a probability measure on
//! `[0,1)`) and the normalized angular measure `dθ/2π`.  After `t = r²` the
//! radial marginal becomes `(α+1)(1−t)^α dt`, which Gauss–Jacobi rules handle
//! exactly for polynomial integrands.
//!
//! Integrands of interest blow up at the boundary, so radial rules come in
//! two flavours: a plain Gauss–Jacobi rule (exact moments), and a banded rule
//! with geometric panels on `1−t ∈ [2^{−k−1}, 2^{−k}]` that exposes per-band
//! partial sums for divergence detection.  Angular rules are uniform except
//! near the boundary contact angles of a symbol, where geometric panels
//! resolve the compression of `φ` toward the circle.

use crate::C64;
use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

/// Nodes and weights of an n-point Gauss rule for the Jacobi weight
/// `(1−x)^a (1+x)^b` on `[−1, 1]`, by the Golub–Welsch algorithm.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1 && a > -1.0 && b > -1.0);
    let mu0 = (a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
        - ln_gamma(a + b + 2.0);
    let mu0 = mu0.exp();

    let alpha = |k: usize| -> f64 {
        let k = k as f64;
        if k == 0.0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * k + a + b) * (2.0 * k + a + b + 2.0))
        }
    };
    let beta = |k: usize| -> f64 {
        let kf = k as f64;
        if k == 1 {
            4.0 * (a + 1.0) * (b + 1.0) / ((a + b + 2.0).powi(2) * (a + b + 3.0))
        } else {
            4.0 * kf * (kf + a) * (kf + b) * (kf + a + b)
                / ((2.0 * kf + a + b).powi(2) * (2.0 * kf + a + b + 1.0) * (2.0 * kf + a + b - 1.0))
        }
    };

    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jac[(k, k)] = alpha(k);
        if k + 1 < n {
            let off = beta(k + 1).sqrt();
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            (node, mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    pairs.into_iter().unzip()
}

/// Gauss–Legendre nodes/weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_jacobi(n, 0.0, 0.0)
}

/// Rule for `∫₀¹ (1−t)^α f(t) dt`.
pub fn gauss_jacobi01(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_jacobi(n, alpha, 0.0);
    let scale = 0.5f64.powf(alpha + 1.0);
    (
        x.iter().map(|xi| 0.5 * (xi + 1.0)).collect(),
        w.iter().map(|wi| wi * scale).collect(),
    )
}

/// A rule for the radial marginal `dλ_α(r) = 2(α+1)(1−r²)^α r dr`:
/// `∫₀¹ g(r) dλ_α(r) ≈ Σ λ_j g(r_j)`.
///
/// `band[j]` records which dyadic boundary band produced node `j`:
/// band `0` is the bulk `1−r² ≥ 1/2`, band `k ≥ 1` covers
/// `1−r² ∈ [2^{−k−1}, 2^{−k}]`.
#[derive(Debug, Clone)]
pub struct RadialRule {
    pub alpha: f64,
    pub r: Vec<f64>,
    /// `1 − r`, kept stable for nodes with `1 − r` below float resolution
    /// (where `r` itself rounds to 1).
    pub one_minus_r: Vec<f64>,
    pub lambda: Vec<f64>,
    pub band: Vec<u32>,
    pub depth: usize,
}

impl RadialRule {
    /// Plain Gauss–Jacobi rule in `t = r²`; exact for polynomials in `|z|²`
    /// of degree `< 2n − 1`.
    pub fn plain(alpha: f64, n: usize) -> Self {
        let (t, w) = gauss_jacobi01(n, alpha);
        let scale = alpha + 1.0;
        let r: Vec<f64> = t.iter().map(|ti| ti.sqrt()).collect();
        RadialRule {
            alpha,
            one_minus_r: r.iter().map(|ri| 1.0 - ri).collect(),
            r,
            lambda: w.iter().map(|wi| wi * scale).collect(),
            band: vec![0; n],
            depth: 0,
        }
    }

    /// Banded rule: `base_n` Gauss–Legendre points on `t ∈ [0, 1/2]` plus
    /// `panel_n` points on each geometric panel `1−t ∈ [2^{−k−1}, 2^{−k}]`,
    /// `k = 1..=depth`.  The sliver `1−t < 2^{−depth−1}` is not covered;
    /// partial sums by band realise truncation at increasing depths.
    ///
    /// `1 − r = s/(1 + √(1−s))` is exact even when `r` rounds to 1, so
    /// depths far beyond the `1 − x` float wall are meaningful as long as
    /// consumers work with boundary distances.
    pub fn banded(alpha: f64, base_n: usize, depth: usize, panel_n: usize) -> Self {
        assert!((1..=400).contains(&depth));
        let (gx, gw) = gauss_legendre(base_n.max(4));
        let (px, pw) = gauss_legendre(panel_n.max(2));
        let scale = alpha + 1.0;

        let mut r = Vec::new();
        let mut one_minus_r = Vec::new();
        let mut lambda = Vec::new();
        let mut band = Vec::new();

        // Bulk t ∈ [0, 1/2]; fold the Jacobi factor into the weight.
        for (xi, wi) in gx.iter().zip(&gw) {
            let t = 0.25 * (xi + 1.0);
            let ri = t.sqrt();
            r.push(ri);
            one_minus_r.push(1.0 - ri);
            lambda.push(scale * 0.25 * wi * (1.0 - t).powf(alpha));
            band.push(0);
        }
        // Geometric panels toward t = 1, parametrized by s = 1 − t.
        for k in 1..=depth {
            let hi = 0.5f64.powi(k as i32);
            let lo = 0.5 * hi;
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (xi, wi) in px.iter().zip(&pw) {
                let s = mid + half * xi;
                let ri = (1.0 - s).sqrt();
                r.push(ri);
                one_minus_r.push(s / (1.0 + ri));
                lambda.push(scale * half * wi * s.powf(alpha));
                band.push(k as u32);
            }
        }
        RadialRule {
            alpha,
            r,
            one_minus_r,
            lambda,
            band,
            depth,
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// Rule for the normalized angular measure `dθ/2π`, optionally refined by
/// geometric panels accumulating at a set of contact angles.
///
/// Node angles are carried as `base + delta` with `delta` the (possibly
/// exponentially small) offset from a contact angle; consumers that need
/// boundary displacements assemble `1 − e^{iθ}` through
/// `(1 − e^{i·base}) + e^{i·base}(1 − e^{iδ})`, which never collapses.
#[derive(Debug, Clone)]
pub struct AngularRule {
    pub base: Vec<f64>,
    pub delta: Vec<f64>,
    /// Weights sum to 1.
    pub weight: Vec<f64>,
}

impl AngularRule {
    pub fn uniform(m: usize) -> Self {
        let m = m.max(4);
        let step = std::f64::consts::TAU / m as f64;
        AngularRule {
            base: (0..m).map(|j| j as f64 * step).collect(),
            delta: vec![0.0; m],
            weight: vec![1.0 / m as f64; m],
        }
    }

    /// Geometric refinement toward each contact angle.  Panel widths halve
    /// `depth` times; each panel gets `panel_n` Gauss nodes.
    pub fn contact_refined(contacts: &[f64], m0: usize, depth: usize, panel_n: usize) -> Self {
        if contacts.is_empty() || depth == 0 {
            return Self::uniform(m0);
        }
        let tau = std::f64::consts::TAU;
        let mut cs: Vec<f64> = contacts.iter().map(|c| c.rem_euclid(tau)).collect();
        cs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let (px, pw) = gauss_legendre(panel_n.max(2));
        let mut base = Vec::new();
        let mut delta = Vec::new();
        let mut weight = Vec::new();
        // One geometric stack of panels on offsets sign·[inner, outer]
        // from the anchor contact.
        let mut add_stack = |anchor: f64, sign: f64, half_arc: f64| {
            let mut outer = half_arc;
            for level in 0..=depth {
                let inner = if level == depth { 0.0 } else { 0.5 * outer };
                let half = 0.5 * (outer - inner);
                let mid = 0.5 * (outer + inner);
                for (xi, wi) in px.iter().zip(&pw) {
                    base.push(anchor);
                    delta.push(sign * (mid + half * xi));
                    weight.push(half * wi / tau);
                }
                outer = inner;
            }
        };
        let n = cs.len();
        for i in 0..n {
            let c = cs[i];
            let next_principal = cs[(i + 1) % n];
            let arc = if n == 1 {
                tau
            } else {
                (next_principal - c).rem_euclid(tau)
            };
            if arc <= 0.0 {
                continue;
            }
            let half_arc = 0.5 * arc;
            add_stack(c, 1.0, half_arc);
            add_stack(next_principal, -1.0, half_arc);
        }
        let _ = m0;
        AngularRule {
            base,
            delta,
            weight,
        }
    }

    /// Plain node angles `base + delta` (lossy near contacts, fine for
    /// positions).
    pub fn angles(&self) -> Vec<f64> {
        self.base
            .iter()
            .zip(&self.delta)
            .map(|(b, d)| b + d)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }
}

/// `1 − e^{iθ}` without cancellation: `2 sin²(θ/2) − i sin θ`.
pub fn one_minus_unit(theta: f64) -> C64 {
    let s = (0.5 * theta).sin();
    C64::new(2.0 * s * s, -theta.sin())
}

/// One node of a disk rule: position, `dA_α` weight, radial band.
///
/// `one_minus_z` is carried separately and computed by stable formulas, so
/// nodes exponentially close to the boundary keep their full distance
/// information even when `z` itself rounds to a unit-modulus float.
#[derive(Debug, Clone, Copy)]
pub struct DiskNode {
    pub z: C64,
    pub one_minus_z: C64,
    pub weight: f64,
    pub band: u32,
}

fn make_node(r: f64, one_minus_r: f64, base: f64, delta: f64, weight: f64, band: u32) -> DiskNode {
    let eb = C64::from_polar(1.0, base);
    // 1 − e^{i(b+δ)} = (1 − e^{ib}) + e^{ib}(1 − e^{iδ}), then
    // 1 − re^{iθ} = (1 − e^{iθ}) + (1 − r) e^{iθ}.
    let one_minus_unit_theta = one_minus_unit(base) + eb * one_minus_unit(delta);
    let e_theta = C64::from_polar(1.0, base + delta);
    DiskNode {
        z: r * e_theta,
        one_minus_z: one_minus_unit_theta + one_minus_r * e_theta,
        weight,
        band,
    }
}

/// Composite rule for `∫_D f dA_α`.
#[derive(Debug, Clone)]
pub struct DiskRule {
    pub alpha: f64,
    pub nodes: Vec<DiskNode>,
    pub depth: usize,
}

impl DiskRule {
    /// Tensor rule from a radial rule and a uniform angular grid.
    pub fn tensor(alpha: f64, radial: &RadialRule, m: usize) -> Self {
        Self::with_angular(alpha, radial, &AngularRule::uniform(m))
    }

    /// Tensor rule with contact-refined angles.  The angular refinement
    /// depth grows with the radial band so the compression of a symbol
    /// toward its contact points stays resolved: at radial band `k` the
    /// angular structure matters down to the band's own scale, so band `k`
    /// uses `k + 6` halvings.
    pub fn contact_adapted(
        alpha: f64,
        radial: &RadialRule,
        contacts: &[f64],
        m0: usize,
        panel_n: usize,
    ) -> Self {
        if contacts.is_empty() {
            return Self::tensor(alpha, radial, m0);
        }
        let cap = radial.depth + 8;
        let mut nodes = Vec::new();
        let mut cached: Vec<Option<AngularRule>> = vec![None; radial.depth + 2];
        for j in 0..radial.len() {
            let band = radial.band[j] as usize;
            if cached[band].is_none() {
                let depth = (band + 6).min(cap);
                cached[band] = Some(AngularRule::contact_refined(contacts, m0, depth, panel_n));
            }
            let ang = cached[band].as_ref().unwrap();
            push_ring(&mut nodes, radial, j, ang);
        }
        DiskRule {
            alpha,
            nodes,
            depth: radial.depth,
        }
    }

    /// Contact-refined rule with the same angular grid on every band, so
    /// that per-band contributions are comparable (used by the divergence
    /// detector, where band-to-band smoothness matters).
    pub fn contact_adapted_uniform(
        alpha: f64,
        radial: &RadialRule,
        contacts: &[f64],
        m0: usize,
        panel_n: usize,
    ) -> Self {
        if contacts.is_empty() {
            return Self::tensor(alpha, radial, m0);
        }
        let ang = AngularRule::contact_refined(contacts, m0, radial.depth + 8, panel_n);
        Self::with_angular(alpha, radial, &ang)
    }

    fn with_angular(alpha: f64, radial: &RadialRule, ang: &AngularRule) -> Self {
        let mut nodes = Vec::with_capacity(radial.len() * ang.len());
        for j in 0..radial.len() {
            push_ring(&mut nodes, radial, j, ang);
        }
        DiskRule {
            alpha,
            nodes,
            depth: radial.depth,
        }
    }

    /// Integral of a real integrand, split by radial band:
    /// `out[k]` is the contribution of band `k`.
    pub fn integrate_banded(&self, mut f: impl FnMut(C64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.depth + 1];
        for n in &self.nodes {
            out[n.band as usize] += n.weight * f(n.z);
        }
        out
    }

    /// Banded integral of an integrand that consumes the boundary
    /// displacement `1 − z` (stable arbitrarily close to the circle).
    pub fn integrate_banded_displacement(&self, mut f: impl FnMut(C64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.depth + 1];
        for n in &self.nodes {
            out[n.band as usize] += n.weight * f(n.one_minus_z);
        }
        out
    }

    pub fn integrate(&self, f: impl FnMut(C64) -> f64) -> f64 {
        self.integrate_banded(f).iter().sum()
    }
}

fn push_ring(nodes: &mut Vec<DiskNode>, radial: &RadialRule, j: usize, ang: &AngularRule) {
    let lam = radial.lambda[j];
    for i in 0..ang.len() {
        nodes.push(make_node(
            radial.r[j],
            radial.one_minus_r[j],
            ang.base[i],
            ang.delta[i],
            lam * ang.weight[i],
            radial.band[j],
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let quad: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(6)).sum();
        assert_abs_diff_eq!(quad, 2.0 / 7.0, epsilon = 1e-13);
    }

    #[test]
    fn jacobi01_matches_beta_moments() {
        // ∫₀¹ (1−t)^α t^n dt = B(n+1, α+1)
        for &alpha in &[-0.5, 0.0, 0.7, 2.3] {
            let (t, w) = gauss_jacobi01(24, alpha);
            for n in [0usize, 1, 3, 10] {
                let quad: f64 = t.iter().zip(&w).map(|(ti, wi)| wi * ti.powi(n as i32)).sum();
                let exact = (ln_gamma(n as f64 + 1.0) + ln_gamma(alpha + 1.0)
                    - ln_gamma(n as f64 + alpha + 2.0))
                .exp();
                assert_abs_diff_eq!(quad, exact, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn radial_rules_are_probability_measures() {
        for &alpha in &[-0.3, 0.0, 1.5] {
            let plain = RadialRule::plain(alpha, 48);
            let mass: f64 = plain.lambda.iter().sum();
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);

            let banded = RadialRule::banded(alpha, 24, 20, 6);
            let mass: f64 = banded.lambda.iter().sum();
            // Banded rules omit the sliver below the deepest panel.
            let missing = 0.5f64.powi(21).powf(alpha + 1.0);
            assert!((mass - 1.0).abs() < 10.0 * missing + 1e-12);
        }
    }

    #[test]
    fn banded_rule_integrates_smooth_functions() {
        let rule = RadialRule::banded(0.0, 24, 30, 6);
        // ∫₀¹ r² dλ₀ = ∫₀¹ t dt = 1/2
        let quad: f64 = rule
            .r
            .iter()
            .zip(&rule.lambda)
            .map(|(ri, wi)| wi * ri * ri)
            .sum();
        assert_abs_diff_eq!(quad, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn contact_refined_angular_weights_sum_to_one() {
        let rule = AngularRule::contact_refined(&[0.0], 256, 30, 4);
        let mass: f64 = rule.weight.iter().sum();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);
        let rule = AngularRule::contact_refined(&[0.3, 2.0, 4.5], 256, 12, 4);
        let mass: f64 = rule.weight.iter().sum();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn contact_refined_resolves_tiny_angles() {
        let rule = AngularRule::contact_refined(&[0.0], 64, 40, 4);
        let min_pos = rule
            .delta
            .iter()
            .filter(|t| **t > 0.0 && **t < 1.0)
            .fold(f64::MAX, |a, b| a.min(*b));
        assert!(min_pos < 1e-11, "min positive angle {min_pos}");
        // Offsets stay resolved below the ulp of the base angle: no node
        // collapses onto its contact.
        let rule = AngularRule::contact_refined(&[2.0], 64, 120, 4);
        for (b, d) in rule.base.iter().zip(&rule.delta) {
            if *b == 2.0 {
                assert!(*d != 0.0, "offset collapsed at base {b}");
            }
        }
    }

    #[test]
    fn disk_rule_total_mass() {
        let radial = RadialRule::plain(0.8, 32);
        let rule = DiskRule::tensor(0.8, &radial, 64);
        let mass = rule.nodes.iter().map(|n| n.weight).sum::<f64>();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);

        let radial = RadialRule::banded(0.0, 16, 12, 4);
        let rule = DiskRule::contact_adapted(0.0, &radial, &[0.0], 64, 4);
        let mass = rule.nodes.iter().map(|n| n.weight).sum::<f64>();
        assert!((mass - 1.0).abs() < 1e-3);
    }
}

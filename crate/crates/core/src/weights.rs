//! Constructive weight builders.
//!
//! The chain goes: a bounded peak function `F` separating a boundary box
//! from the rest of the disk; the box-ratio functional
//! `Φ(δ) = sup (1/h^γ) ∫_S |F|^{2δ} dν`; a single-scale weight
//! `v = (ε/2C) F^{δ₀}` with `Φ(δ₀) = (2C/ε)²`; the staged sum `u = Σ vₙ`
//! whose box ratios stay bounded while infinitely many scales keep mass;
//! and finally `w = u∘φ`, which turns a compact composition operator into a
//! bounded non-compact weighted one.
//!
//! All box suprema live on the dyadic boundary grid, augmented with the
//! exact box `S(ω, r)` that the construction peaks on, so the witness scale
//! is represented at machine precision.

use crate::error::{Error, Result};
use crate::measures::{
    carleson_profile, classify, detect_contacts, CarlesonClass, CarlesonProfile, Classification,
    PullbackSample, Resolution,
};
use crate::quadrature::AngularRule;
use crate::symbols::{AnalyticMap, SymbolKind};
use crate::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::sync::Arc;

/// Bounded analytic peak function attached to a boundary box `S(ω, r)`:
/// positive real part, `e^{−1/2} ≤ |F| ≤ e^{1/2}`, `|F| > 1` on `S(ω, r)`
/// and `|F| < 1` on the disk outside `D(ω, r)`.
///
/// Internally `F = exp(U(√T))` where `T` sends the separating circle to the
/// real line.  `T` is kept in displacement form: with `d = 1 − z ω̄`,
///
/// `T(z) = ((u₁ − d) w₁) / ((u₂ − d) w₂)`,
///
/// whose coefficients are closed forms in `r` with no cancelling
/// subtractions, so the function stays meaningful for peak radii far below
/// the `1 − x` float resolution.
#[derive(Debug, Clone)]
pub struct PeakFunction {
    pub omega: C64,
    pub omega_theta: f64,
    pub r: f64,
    u1: C64,
    u2: C64,
    w1: C64,
    w2: C64,
    /// `1 − ω̄`, in the stable form.
    one_minus_conj_omega: C64,
}

impl PeakFunction {
    pub fn build(omega: C64, r: f64) -> Result<Self> {
        if (omega.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::OffCircle {
                modulus: omega.norm(),
            });
        }
        Self::build_at_angle(omega.arg(), r)
    }

    /// Build at `ω = e^{iθ}`; the angle form keeps `1 − ω̄` exact.
    pub fn build_at_angle(theta: f64, r: f64) -> Result<Self> {
        if !(0.0 < r && r < 1.0) {
            return Err(Error::invalid("r", format!("{r} not in (0,1)")));
        }
        // At ω = 1: A, B = intersections of the circle with |z − 1| = r,
        // C = 1 − r.  In displacements: 1 − A = r²/2 − iy, 1 − B = r²/2 + iy,
        // C − B = (r²/2 − r) + iy, C − A = (r²/2 − r) − iy.
        let p = r * r / 2.0;
        let y = r * (1.0 - r * r / 4.0).sqrt();
        let mut peak = PeakFunction {
            omega: C64::from_polar(1.0, theta),
            omega_theta: theta,
            r,
            u1: C64::new(p, -y),
            u2: C64::new(p, y),
            w1: C64::new(p - r, y),
            w2: C64::new(p - r, -y),
            one_minus_conj_omega: crate::quadrature::one_minus_unit(-theta),
        };
        // Orientation: the inner region must map to the upper half-plane.
        if peak.kernel(C64::new(r / 2.0, 0.0)).im <= 0.0 {
            std::mem::swap(&mut peak.u1, &mut peak.u2);
            std::mem::swap(&mut peak.w1, &mut peak.w2);
            debug_assert!(peak.kernel(C64::new(r / 2.0, 0.0)).im > 0.0);
        }
        Ok(peak)
    }

    /// `T` as a function of the rotated displacement `d = 1 − z ω̄`.
    fn kernel(&self, d: C64) -> C64 {
        ((self.u1 - d) * self.w1) / ((self.u2 - d) * self.w2)
    }

    /// `U[√T]` from the rotated displacement.
    fn inner_disp(&self, d: C64) -> C64 {
        let g = self.kernel(d).sqrt();
        // U sends 0 ↦ i/2, ∞ ↦ −i/2, 1 ↦ 0.
        C64::new(0.0, 0.5) * (C64::new(1.0, 0.0) - g) / (C64::new(1.0, 0.0) + g)
    }

    fn inner(&self, z: C64) -> C64 {
        self.inner_disp(C64::new(1.0, 0.0) - z * self.omega.conj())
    }

    /// Rotated displacement of a point given as `δ = 1 − z`:
    /// `1 − z ω̄ = (1 − ω̄) + δ ω̄`.
    pub fn rotate_displacement(&self, delta: C64) -> C64 {
        self.one_minus_conj_omega + delta * self.omega.conj()
    }

    /// `U[√T]` for a point carried as a boundary displacement `1 − z`.
    pub fn inner_at_displacement(&self, delta: C64) -> C64 {
        self.inner_disp(self.rotate_displacement(delta))
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.inner(z).exp()
    }

    /// `log |F(z)|`, cheaper and more stable than `eval(z).norm().ln()`.
    pub fn log_modulus(&self, z: C64) -> f64 {
        self.inner(z).re
    }

    /// `log |F|` at displacement `1 − z`.
    pub fn log_modulus_at_displacement(&self, delta: C64) -> f64 {
        self.inner_at_displacement(delta).re
    }

    /// `log |F|` on the boundary point `e^{i(θ_ω + dθ)}`.
    fn boundary_log_modulus(&self, dtheta: f64) -> f64 {
        self.inner_disp(crate::quadrature::one_minus_unit(dtheta)).re
    }

    /// Sup of `|F|` over the closed disk (attained on the boundary since
    /// `log |F|` is harmonic): coarse global scan plus geometric zooming
    /// around the peak, whose intrinsic scale is `r`.
    pub fn sup_modulus(&self) -> f64 {
        let mut best = f64::MIN;
        let mut best_t = 0.0f64;
        let coarse = 4096usize;
        for j in 0..coarse {
            let t = TAU * j as f64 / coarse as f64;
            let v = self.boundary_log_modulus(t);
            if v > best {
                best = v;
                best_t = t;
            }
        }
        // Zoom near the contact at spans 8r, 4r, ..., r/4096 and around the
        // running argmax.
        let mut span = 8.0 * self.r;
        for _ in 0..16 {
            for center in [0.0, best_t] {
                for j in 0..64 {
                    let t = center - span + 2.0 * span * j as f64 / 63.0;
                    let v = self.boundary_log_modulus(t);
                    if v > best {
                        best = v;
                        best_t = t;
                    }
                }
            }
            span /= 2.0;
        }
        best.exp()
    }

    pub fn to_map(&self) -> AnalyticMap {
        let peak = self.clone();
        let sup = self.sup_modulus();
        AnalyticMap::new(
            format!("peak(ω={:.4}, r={:.4e})", self.omega_theta, self.r),
            SymbolKind::Composite,
            Arc::new(move |z| peak.eval(z)),
        )
        .with_sup_norm(sup)
    }
}

/// Dyadic box grid parameters shared by the builders.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoxGrid {
    /// Boundary centers `e^{2πij/m}`.
    pub m: usize,
    /// Dyadic scales `2^{−k}`, `k = 0..=k_scales`.
    pub k_scales: usize,
}

impl Default for BoxGrid {
    fn default() -> Self {
        BoxGrid {
            m: 512,
            k_scales: 14,
        }
    }
}

/// The functional `Φ(δ) = sup_{(ξ,h)} (1/h^γ) ∫_{S(ξ,h)} |F|^{2δ} dν`,
/// evaluated on the dyadic grid restricted to `h ≤ β`, plus the exact peak
/// box `S(ω, r)`.
///
/// Precomputes the box membership lists once; each `Φ(δ)` evaluation is a
/// parallel sweep over boxes.
pub struct PhiFunctional {
    gamma: f64,
    log_g: Vec<f64>,
    weight: Vec<f64>,
    /// Per box: (center angle, scale, CSR range into `node_of`).
    boxes: Vec<(f64, f64, u32, u32)>,
    node_of: Vec<u32>,
}

impl PhiFunctional {
    pub fn new(
        nu: &PullbackSample,
        peak: &PeakFunction,
        gamma: f64,
        beta: f64,
        grid: &BoxGrid,
    ) -> Self {
        let disps = nu.disps();
        let log_g: Vec<f64> = disps
            .iter()
            .map(|d| peak.log_modulus_at_displacement(*d))
            .collect();
        let weight = nu.weights().to_vec();

        // The sup runs over dyadic scales ≤ β.  Only a window of scales
        // below β can host the argmax (smaller boxes see strictly smaller
        // `|F|^{2δ}`-mass at fixed height), so the grid is capped at 44
        // octaves below β; the exact peak box is always appended.
        let scales: Vec<f64> = (0..=grid.k_scales)
            .map(|k| 0.5f64.powi(k as i32))
            .filter(|h| *h <= beta + 1e-15)
            .take(44)
            .collect();
        let m = grid.m;
        let n_grid = m * scales.len();

        let mut counts = vec![0u32; n_grid + 1];
        crate::measures::for_each_box_membership(disps, m, &scales, |_, k, j| {
            counts[k * m + j] += 1;
        });
        // Extra box: the exact peak box S(ω, r).
        let r = peak.r;
        let delta_omega = crate::quadrature::one_minus_unit(peak.omega_theta);
        let extra: Vec<u32> = disps
            .iter()
            .enumerate()
            .filter(|(_, d)| (delta_omega - **d).norm() < r)
            .map(|(i, _)| i as u32)
            .collect();
        counts[n_grid] = extra.len() as u32;

        let mut offsets = vec![0u32; n_grid + 2];
        for i in 0..=n_grid {
            offsets[i + 1] = offsets[i] + counts[i];
        }
        let mut node_of = vec![0u32; offsets[n_grid + 1] as usize];
        let mut cursor = offsets.clone();
        crate::measures::for_each_box_membership(disps, m, &scales, |i, k, j| {
            let b = k * m + j;
            node_of[cursor[b] as usize] = i as u32;
            cursor[b] += 1;
        });
        for (pos, i) in extra.iter().enumerate() {
            node_of[(offsets[n_grid] as usize) + pos] = *i;
        }

        let mut boxes = Vec::with_capacity(n_grid + 1);
        for (k, &h) in scales.iter().enumerate() {
            for j in 0..m {
                let b = k * m + j;
                boxes.push((TAU * j as f64 / m as f64, h, offsets[b], offsets[b + 1]));
            }
        }
        boxes.push((peak.omega_theta, r, offsets[n_grid], offsets[n_grid + 1]));

        PhiFunctional {
            gamma,
            log_g,
            weight,
            boxes,
            node_of,
        }
    }

    fn box_value(&self, b: &(f64, f64, u32, u32), delta: f64) -> f64 {
        let (_, h, lo, hi) = *b;
        let mut acc = 0.0;
        for idx in &self.node_of[lo as usize..hi as usize] {
            let i = *idx as usize;
            acc += (2.0 * delta * self.log_g[i]).exp() * self.weight[i];
        }
        acc / h.powf(self.gamma)
    }

    pub fn eval(&self, delta: f64) -> f64 {
        self.boxes
            .par_iter()
            .map(|b| self.box_value(b, delta))
            .reduce(|| 0.0, f64::max)
    }

    /// Argmax box at `δ`: (center angle, scale, ratio).
    pub fn argmax(&self, delta: f64) -> (f64, f64, f64) {
        let (idx, best) = self
            .boxes
            .par_iter()
            .enumerate()
            .map(|(i, b)| (i, self.box_value(b, delta)))
            .reduce(
                || (usize::MAX, f64::MIN),
                |a, b| if b.1 > a.1 { b } else { a },
            );
        let (theta, h, _, _) = self.boxes[idx];
        (theta, h, best)
    }
}

/// Output of the single-scale builder: `v = (ε/2C) F^{δ₀}` together with
/// everything the staged construction needs to chain scales.
#[derive(Debug, Clone)]
pub struct ScaleWeight {
    pub v: AnalyticMap,
    pub peak: PeakFunction,
    pub delta0: f64,
    /// Grid Carleson constant of `ν` (clamped to ≥ 1).
    pub c_const: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub r: f64,
    pub omega: C64,
    /// Witnessing box (ζ, t) where the ratio of `|v|² dν` peaks.
    pub witness_theta: f64,
    pub witness_scale: f64,
    pub witness_ratio: f64,
    pub sup_norm: f64,
}

impl ScaleWeight {
    /// `v` evaluated at a point carried as a boundary displacement `1 − z`,
    /// stable arbitrarily close to the circle.
    pub fn eval_at_displacement(&self, delta: C64) -> C64 {
        let scale = self.epsilon / (2.0 * self.c_const);
        scale * (self.delta0 * self.peak.inner_at_displacement(delta)).exp()
    }
}

/// Carleson constant of `ν` on the dyadic grid, clamped to ≥ 1.
pub fn grid_carleson_constant(nu: &PullbackSample, gamma: f64, grid: &BoxGrid) -> Result<f64> {
    let profile = carleson_profile(nu, gamma, grid.m, grid.k_scales)?;
    Ok(profile
        .ratios
        .iter()
        .cloned()
        .fold(1.0f64, f64::max))
}

/// Mass of `ν` in `S(ξ, r)` for every grid center.
fn center_masses(nu: &PullbackSample, r: f64, m: usize) -> Vec<f64> {
    let mut masses = vec![0.0f64; m];
    crate::measures::for_each_box_membership(nu.disps(), m, &[r], |i, _, j| {
        masses[j] += nu.weights()[i];
    });
    masses
}

/// Build the single-scale weight for `(β, ε)`:
///
/// 1. `r = β (ε²/2)^{1/γ}`, `ω` the grid center maximizing `ν[S(ω, r)]`
///    (existence of positive mass at every scale is the standing hypothesis;
///    failure signals `‖φ‖_∞ < 1` territory);
/// 2. `δ₀ > 1` solving `Φ(δ₀) = (2C/ε)²` by doubling and bisection to
///    relative width `1e-6` (first crossing);
/// 3. `v = (ε/2C) F^{δ₀}`.
pub fn build_v(
    nu: &PullbackSample,
    beta: f64,
    epsilon: f64,
    gamma: f64,
    grid: &BoxGrid,
) -> Result<ScaleWeight> {
    if !(0.0 < beta && beta <= 1.0) {
        return Err(Error::invalid("beta", format!("{beta} not in (0,1]")));
    }
    if !(0.0 < epsilon && epsilon < 1.0) {
        return Err(Error::invalid("epsilon", format!("{epsilon} not in (0,1)")));
    }
    if gamma <= 1.0 {
        return Err(Error::invalid("gamma", format!("{gamma} must exceed 1")));
    }
    if nu.is_empty() {
        return Err(Error::Construction("empty measure".into()));
    }

    let c_const = grid_carleson_constant(nu, gamma, grid)?;
    let r = beta * (epsilon * epsilon / 2.0).powf(1.0 / gamma);

    let masses = center_masses(nu, r, grid.m);
    let (j_best, best_mass) = masses
        .iter()
        .enumerate()
        .fold((0usize, 0.0f64), |(ja, va), (j, &v)| {
            if v > va {
                (j, v)
            } else {
                (ja, va)
            }
        });
    if best_mass <= 0.0 {
        return Err(Error::Construction(format!(
            "no boundary mass at scale r = {r:.3e}: the positive-mass-at-all-scales \
             hypothesis fails here (sup-norm-below-one territory, or the sample \
             is too shallow for this scale)"
        )));
    }
    let omega_theta = TAU * j_best as f64 / grid.m as f64;
    let peak = PeakFunction::build_at_angle(omega_theta, r)?;
    let omega = peak.omega;

    let phi = PhiFunctional::new(nu, &peak, gamma, beta, grid);
    let target = (2.0 * c_const / epsilon).powi(2);
    let phi1 = phi.eval(1.0);
    if phi1 >= target {
        return Err(Error::Construction(format!(
            "Φ(1) = {phi1:.3e} already exceeds the target {target:.3e}"
        )));
    }
    let mut lo = 1.0f64;
    let mut hi = 2.0f64;
    let mut guard = 0;
    while phi.eval(hi) < target {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::Construction(
                "Φ(δ) failed to reach its target under doubling".into(),
            ));
        }
    }
    while (hi - lo) / hi > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if phi.eval(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let delta0 = hi;

    let scale = epsilon / (2.0 * c_const);
    let (witness_theta, witness_scale, phi_at) = phi.argmax(delta0);
    let witness_ratio = scale * scale * phi_at;

    let peak_for_eval = peak.clone();
    let v_eval = Arc::new(move |z: C64| {
        // (ε/2C) · exp(δ₀ · U[g(z)]); Re F > 0 keeps the principal branch safe.
        scale * (delta0 * peak_for_eval.inner(z)).exp()
    });
    let sup_norm = scale * peak.sup_modulus().powf(delta0);
    let v = AnalyticMap::new(
        format!("v(β={beta}, ε={epsilon})"),
        SymbolKind::Composite,
        v_eval,
    )
    .with_sup_norm(sup_norm);

    Ok(ScaleWeight {
        v,
        peak,
        delta0,
        c_const,
        epsilon,
        beta,
        r,
        omega,
        witness_theta,
        witness_scale,
        witness_ratio,
        sup_norm,
    })
}

/// Numeric verification of the four single-scale properties.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaleWeightChecks {
    /// max |v| on the sampled region |z| < 1 − β (property: < ε).
    pub max_interior_modulus: f64,
    /// max grid box ratio of |v|² dν over all scales (property: ≤ 1).
    pub max_ratio_all: f64,
    /// max grid box ratio over scales h > β (property: ≤ ε²).
    pub max_ratio_coarse: f64,
    /// ratio at the witnessing box (property: ≥ (3/4)²).
    pub witness_ratio: f64,
}

pub fn verify_scale_weight(
    sw: &ScaleWeight,
    nu: &PullbackSample,
    grid: &BoxGrid,
) -> Result<ScaleWeightChecks> {
    // (a) interior smallness, sampled on a polar grid of |z| < 1 − β.
    let mut max_interior = 0.0f64;
    if sw.beta < 1.0 {
        let rmax = 1.0 - sw.beta;
        for i in 0..48 {
            let r = rmax * (i as f64 + 0.5) / 48.0;
            for j in 0..128 {
                let z = C64::from_polar(r, TAU * j as f64 / 128.0);
                max_interior = max_interior.max(sw.v.eval(z).norm());
            }
        }
    }
    // (b), (c): box ratios of |v|² dν.
    let weighted = nu.reweighted_by_displacement(|d| sw.eval_at_displacement(d).norm_sqr());
    let gamma = nu.gamma;
    let profile = carleson_profile(&weighted, gamma, grid.m, grid.k_scales)?;
    let max_ratio_all = profile.ratios.iter().cloned().fold(0.0f64, f64::max);
    let max_ratio_coarse = profile
        .scales
        .iter()
        .zip(&profile.ratios)
        .filter(|(h, _)| **h > sw.beta + 1e-15)
        .map(|(_, p)| *p)
        .fold(0.0f64, f64::max);
    // (d) at the exact witness box.
    let witness_ratio = weighted.box_mass_at(sw.witness_theta, sw.witness_scale)
        / sw.witness_scale.powf(gamma);
    Ok(ScaleWeightChecks {
        max_interior_modulus: max_interior,
        max_ratio_all,
        max_ratio_coarse,
        witness_ratio,
    })
}

/// One stage of the staged construction, serializable for reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub n: usize,
    pub beta: f64,
    pub t: f64,
    pub zeta_theta: f64,
    pub epsilon: f64,
    pub delta0: f64,
    pub c_const: f64,
    pub r: f64,
    pub omega_theta: f64,
    pub sup_norm: f64,
    pub witness_ratio: f64,
}

/// Truncated staged weight `u = Σ_{n≤N} vₙ` with its per-stage records.
#[derive(Debug, Clone)]
pub struct StagedWeight {
    pub stages: Vec<StageRecord>,
    pub scale_weights: Vec<ScaleWeight>,
    pub u: AnalyticMap,
    /// `β_{N+1}` when the probed grid admitted one more separation scale.
    pub next_beta: Option<f64>,
    pub complete: bool,
    pub diagnostic: Option<String>,
}

impl StagedWeight {
    /// `u` at a point carried as a boundary displacement `1 − z`.
    pub fn u_at_displacement(&self, delta: C64) -> C64 {
        self.scale_weights
            .iter()
            .map(|s| s.eval_at_displacement(delta))
            .sum()
    }
}

/// Stage tolerances `εₙ = 2^{−n−3}` (so `Σ εₙ = 1/8 < 1/4`).
pub fn stage_epsilon(n: usize) -> f64 {
    0.5f64.powi(n as i32 + 3)
}

/// Build the staged weight on a vanishing measure.
///
/// Stage `n` runs the single-scale builder at `(βₙ, εₙ)`; the next scale
/// `βₙ₊₁` is the largest dyadic scale below `min(βₙ, 1/(n+1), tₙ)` at which
/// the probed profile of `ν` satisfies
/// `ν[S(ξ,h)]/h^γ ≤ εₙ²(1 + ‖vₙ‖²_∞)^{−1}` for all probed `h ≤ βₙ₊₁`.
/// If the grid runs out of scales the output is partial, with a diagnostic.
pub fn build_u(
    nu: &PullbackSample,
    gamma: f64,
    n_stages: usize,
    grid: &BoxGrid,
) -> Result<StagedWeight> {
    if n_stages == 0 {
        return Err(Error::invalid("n_stages", "need at least one stage"));
    }
    let profile = carleson_profile(nu, gamma, grid.m, grid.k_scales)?;
    // Suffix maxima of the dyadic profile: worst ratio at or below scale k.
    let kmax = profile.scales.len() - 1;
    let mut suffix = vec![0.0f64; kmax + 1];
    let mut acc: f64 = 0.0;
    for k in (0..=kmax).rev() {
        acc = acc.max(profile.ratios[k]);
        suffix[k] = acc;
    }

    let mut stages = Vec::new();
    let mut scale_weights = Vec::new();
    let mut beta = 1.0f64;
    let mut next_beta = None;
    let mut complete = true;
    let mut diagnostic = None;

    for n in 1..=n_stages {
        let epsilon = stage_epsilon(n);
        let sw = match build_v(nu, beta, epsilon, gamma, grid) {
            Ok(sw) => sw,
            Err(e) => {
                complete = false;
                diagnostic = Some(format!("stage {n}: {e}"));
                break;
            }
        };
        stages.push(StageRecord {
            n,
            beta,
            t: sw.witness_scale,
            zeta_theta: sw.witness_theta,
            epsilon,
            delta0: sw.delta0,
            c_const: sw.c_const,
            r: sw.r,
            omega_theta: sw.omega.arg(),
            sup_norm: sw.sup_norm,
            witness_ratio: sw.witness_ratio,
        });

        // Separation scale for the next stage: after stage n the vanishing
        // bound pairs ε_{n−1} with ‖vₙ‖_∞ (the base case pairs ε₁ with v₁).
        let eps_prev = stage_epsilon(n.saturating_sub(1).max(1));
        let bound = eps_prev * eps_prev / (1.0 + sw.sup_norm * sw.sup_norm);
        let cap = beta.min(1.0 / (n as f64 + 1.0));
        let mut chosen = None;
        for k in 0..=kmax {
            let h = profile.scales[k];
            if h <= cap + 1e-15 && h < sw.witness_scale && suffix[k] <= bound {
                chosen = Some(h);
                break;
            }
        }
        scale_weights.push(sw);
        match chosen {
            Some(h) => {
                if n == n_stages {
                    next_beta = Some(h);
                } else {
                    beta = h;
                }
            }
            None => {
                if n < n_stages {
                    complete = false;
                    diagnostic = Some(format!(
                        "stage {n}: no probed dyadic scale reaches the vanishing bound \
                         {bound:.3e}; deepen the grid or the sample"
                    ));
                }
                break;
            }
        }
    }

    if stages.is_empty() {
        return Err(Error::Construction(
            diagnostic.unwrap_or_else(|| "no stage could be built".into()),
        ));
    }
    let u = AnalyticMap::sum_of(
        format!("u({} stages)", stages.len()),
        scale_weights.iter().map(|s| s.v.clone()).collect(),
    );
    Ok(StagedWeight {
        stages,
        scale_weights,
        u,
        next_beta,
        complete,
        diagnostic,
    })
}

/// Per-stage witness check on the final measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessCheck {
    pub n: usize,
    pub theta: f64,
    pub t: f64,
    /// Ratio of `|u|² dν` (equivalently `μ_{w,φ}`) at the witness box.
    pub weighted_ratio: f64,
    /// Ratio of the unweighted `ν` at the same box.
    pub base_ratio: f64,
}

/// Outcome of the decompactification pipeline.
#[derive(Debug)]
pub enum DecompactOutcome {
    /// `‖φ‖_∞ < 1`: every weighted composition operator is compact.
    Refused { sup_estimate: f64 },
    /// The base operator is already non-compact: `w ≡ 1` suffices.
    TrivialNonCompact { classification: Classification },
    Built(Box<DecompactReport>),
}

#[derive(Debug)]
pub struct DecompactReport {
    pub staged: StagedWeight,
    /// `w = u ∘ φ`.
    pub w: AnalyticMap,
    pub base_profile: CarlesonProfile,
    pub weighted_profile: CarlesonProfile,
    pub witnesses: Vec<WitnessCheck>,
    pub max_weighted_ratio: f64,
    /// `‖w‖² = ∫|u∘φ|² dA_α` on the sample and on an independent quadrature.
    pub mass_on_sample: f64,
    pub mass_independent: f64,
}

/// Options for [`decompactify`].
#[derive(Debug, Clone, Copy)]
pub struct DecompactOptions {
    pub resolution: Resolution,
    pub grid: BoxGrid,
    pub stages: usize,
}

impl Default for DecompactOptions {
    fn default() -> Self {
        DecompactOptions {
            resolution: Resolution {
                radial_depth: 280,
                ..Resolution::default()
            },
            grid: BoxGrid {
                m: 256,
                k_scales: 136,
            },
            stages: 4,
        }
    }
}

/// Estimate `max_θ |φ(r e^{iθ})|` on circles `r = 1 − 2^{−k}` and decide
/// whether the sup-norm is 1.
pub fn sup_norm_evidence(phi: &AnalyticMap) -> (f64, bool) {
    let contacts = detect_contacts(phi, 2048);
    let angles = AngularRule::contact_refined(&contacts, 1024, 40, 4).angles();
    let mut gaps = Vec::new();
    let mut last = 0.0f64;
    for k in 4..=16 {
        let r = 1.0 - 0.5f64.powi(k);
        let m = angles
            .iter()
            .map(|&t| phi.eval(C64::from_polar(r, t)).norm())
            .fold(0.0f64, f64::max);
        gaps.push(1.0 - m);
        last = m;
    }
    let shrinking = gaps
        .windows(2)
        .rev()
        .take(4)
        .all(|w| w[1] < 0.95 * w[0]);
    let sup_one = gaps.last().copied().unwrap_or(1.0) < 1e-3 || shrinking;
    (last, sup_one)
}

/// Decompactification pipeline: for a compact `C_φ` with `‖φ‖_∞ = 1`,
/// produce `w = u∘φ` whose pull-back measure keeps box ratios bounded while
/// infinitely many witnessed scales stay above a fixed level.
pub fn decompactify(phi: &AnalyticMap, alpha: f64, opts: &DecompactOptions) -> Result<DecompactOutcome> {
    let (sup_estimate, sup_one) = sup_norm_evidence(phi);
    if !sup_one {
        return Ok(DecompactOutcome::Refused { sup_estimate });
    }
    let gamma = alpha + 2.0;
    let one = AnalyticMap::constant(C64::new(1.0, 0.0));
    let nu = PullbackSample::pullback(phi, &one, alpha, &opts.resolution)?;
    let base_profile = carleson_profile(&nu, gamma, opts.grid.m, opts.grid.k_scales)?;
    let classification = classify(&base_profile);
    if classification.class != CarlesonClass::Vanishing {
        return Ok(DecompactOutcome::TrivialNonCompact { classification });
    }

    let staged = build_u(&nu, gamma, opts.stages, &opts.grid)?;
    let u = staged.u.clone();
    let w = u.compose(phi);

    let weighted =
        nu.reweighted_by_displacement(|d| staged.u_at_displacement(d).norm_sqr());
    let weighted_profile =
        carleson_profile(&weighted, gamma, opts.grid.m, opts.grid.k_scales)?;
    let mut max_weighted_ratio = weighted_profile
        .ratios
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);

    let mut witnesses = Vec::new();
    for s in &staged.stages {
        let weighted_ratio = weighted.box_mass_at(s.zeta_theta, s.t) / s.t.powf(gamma);
        let base_ratio = nu.box_mass_at(s.zeta_theta, s.t) / s.t.powf(gamma);
        max_weighted_ratio = max_weighted_ratio.max(weighted_ratio);
        witnesses.push(WitnessCheck {
            n: s.n,
            theta: s.zeta_theta,
            t: s.t,
            weighted_ratio,
            base_ratio,
        });
    }

    // ‖w‖²: on the sample the change of variables ∫|u∘φ|² dA_α = ∫|u|² dν
    // is an identity; an independent quadrature bounds the discretization.
    let mass_on_sample = weighted.total_mass();
    let independent_res = Resolution {
        radial_base: opts.resolution.radial_base + 8,
        radial_depth: opts.resolution.radial_depth + 4,
        panel_nodes: opts.resolution.panel_nodes + 1,
        angular_base: opts.resolution.angular_base * 3 / 2,
        angular_panel_nodes: opts.resolution.angular_panel_nodes,
    };
    let contacts = detect_contacts(phi, 2048);
    let rule = independent_res.disk_rule(alpha, &contacts);
    let mass_independent = rule
        .nodes
        .iter()
        .map(|nd| {
            let d = phi.displacement_eval(nd.one_minus_z);
            nd.weight * staged.u_at_displacement(d).norm_sqr()
        })
        .sum();

    Ok(DecompactOutcome::Built(Box::new(DecompactReport {
        staged,
        w,
        base_profile,
        weighted_profile,
        witnesses,
        max_weighted_ratio,
        mass_on_sample,
        mass_independent,
    })))
}

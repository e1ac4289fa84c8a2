//! Quadrature representation of `dA_α`, pull-back measures `μ_{w,φ}`,
//! Carleson-profile estimation and γ-Carleson classification.
//!
//! A pull-back sample carries the quadrature nodes `z_i`, the weights
//! `ω_i = |w(z_i)|² · (dA_α weight)`, and the images `φ(z_i)`; the mass a
//! Borel set receives is the sum of `ω_i` over images inside it.  Box
//! suprema are grid maxima over `M` equispaced boundary centers and dyadic
//! sizes, reported as such.

use crate::error::{Error, Result};
use crate::geometry::CarlesonBox;
use crate::quadrature::{DiskRule, RadialRule};
use crate::symbols::AnalyticMap;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::{Read, Write};

/// Quadrature resolution for disk integrals and pull-back samples.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Resolution {
    /// Gauss nodes on the radial bulk `1 − r² ≥ 1/2`.
    pub radial_base: usize,
    /// Number of geometric radial panels toward the boundary.
    pub radial_depth: usize,
    /// Gauss nodes per radial panel.
    pub panel_nodes: usize,
    /// Uniform angular nodes (used away from contact points).
    pub angular_base: usize,
    /// Gauss nodes per angular panel near contact points.
    pub angular_panel_nodes: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution {
            radial_base: 32,
            radial_depth: 24,
            panel_nodes: 4,
            angular_base: 256,
            angular_panel_nodes: 4,
        }
    }
}

impl Resolution {
    pub fn with_depth(mut self, depth: usize) -> Self {
        self.radial_depth = depth;
        self
    }

    pub(crate) fn radial_rule(&self, alpha: f64) -> RadialRule {
        if self.radial_depth == 0 {
            RadialRule::plain(alpha, self.radial_base.max(16))
        } else {
            RadialRule::banded(alpha, self.radial_base, self.radial_depth, self.panel_nodes)
        }
    }

    pub(crate) fn disk_rule(&self, alpha: f64, contacts: &[f64]) -> DiskRule {
        let radial = self.radial_rule(alpha);
        DiskRule::contact_adapted(
            alpha,
            &radial,
            contacts,
            self.angular_base,
            self.angular_panel_nodes,
        )
    }
}

/// Boundary contact angles of a symbol: angles where `|φ|` gets within a
/// factor two (in boundary distance) of its maximum over a probe circle.
///
/// Returns an empty list when the symbol stays away from the circle or when
/// the near-maximal set is spread over the whole circle (rotation-like
/// symbols), in which case uniform angular quadrature is appropriate.
pub fn detect_contacts(phi: &AnalyticMap, probe_m: usize) -> Vec<f64> {
    let rho = 1.0 - 0.5f64.powi(10);
    let m = probe_m.max(256);
    let vals: Vec<f64> = (0..m)
        .map(|j| phi.eval(C64::from_polar(rho, TAU * j as f64 / m as f64)).norm())
        .collect();
    let max = vals.iter().cloned().fold(0.0f64, f64::max);
    if max < 0.9 {
        return Vec::new();
    }
    let threshold = 1.0 - 2.0 * (1.0 - max) - 1e-9;
    let qualifying: Vec<usize> = (0..m).filter(|&j| vals[j] >= threshold).collect();
    if qualifying.len() > m / 20 {
        return Vec::new();
    }
    // Cluster adjacent qualifying indices (cyclically) and keep each
    // cluster's argmax angle.
    let mut contacts = Vec::new();
    let mut cluster: Vec<usize> = Vec::new();
    let flush = |cluster: &mut Vec<usize>, contacts: &mut Vec<f64>| {
        if let Some(&best) = cluster.iter().max_by(|a, b| {
            vals[**a].partial_cmp(&vals[**b]).unwrap()
        }) {
            contacts.push(TAU * best as f64 / m as f64);
        }
        cluster.clear();
    };
    for (pos, &j) in qualifying.iter().enumerate() {
        if pos > 0 && j != qualifying[pos - 1] + 1 {
            flush(&mut cluster, &mut contacts);
        }
        cluster.push(j);
    }
    flush(&mut cluster, &mut contacts);
    // Merge a wrap-around pair.
    if contacts.len() >= 2
        && qualifying.first() == Some(&0)
        && qualifying.last() == Some(&(m - 1))
    {
        contacts.pop();
    }
    contacts.truncate(8);
    contacts
}

/// The probability measure `dA_α` as a quadrature rule.
#[derive(Debug, Clone)]
pub struct WeightedAreaMeasure {
    pub alpha: f64,
    rule: DiskRule,
}

impl WeightedAreaMeasure {
    /// Plain Gauss–Jacobi rule (exact moments), `n` radial × `m` angular.
    pub fn plain(alpha: f64, n: usize, m: usize) -> Result<Self> {
        if alpha <= -1.0 {
            return Err(Error::invalid("alpha", format!("{alpha} ≤ −1")));
        }
        let radial = RadialRule::plain(alpha, n);
        Ok(WeightedAreaMeasure {
            alpha,
            rule: DiskRule::tensor(alpha, &radial, m),
        })
    }

    /// Boundary-refined rule adapted to the contact set of a symbol.
    pub fn refined(alpha: f64, res: &Resolution, contacts: &[f64]) -> Result<Self> {
        if alpha <= -1.0 {
            return Err(Error::invalid("alpha", format!("{alpha} ≤ −1")));
        }
        Ok(WeightedAreaMeasure {
            alpha,
            rule: res.disk_rule(alpha, contacts),
        })
    }

    pub fn nodes(&self) -> impl Iterator<Item = (C64, f64)> + '_ {
        self.rule.nodes.iter().map(|n| (n.z, n.weight))
    }

    pub fn len(&self) -> usize {
        self.rule.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule.nodes.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.rule.nodes.iter().map(|n| n.weight).sum()
    }

    pub fn integrate(&self, f: impl FnMut(C64) -> f64) -> f64 {
        self.rule.integrate(f)
    }

    /// `∫ |z|^{2n} dA_α`; closed form `Γ(α+2)Γ(n+1)/Γ(n+α+2)`.
    pub fn moment(&self, n: usize) -> f64 {
        self.rule
            .nodes
            .iter()
            .map(|nd| nd.weight * nd.z.norm_sqr().powi(n as i32))
            .sum()
    }
}

/// Discrete pull-back measure `μ_{w,φ}`.
///
/// Images are carried twice: as points `φ(z)` and as boundary displacements
/// `1 − φ(z)` computed through the symbol's stable displacement form when it
/// has one.  All box bookkeeping runs on displacements, which keeps scales
/// far below the `1 − x` float resolution meaningful.
#[derive(Debug, Clone)]
pub struct PullbackSample {
    pub alpha: f64,
    pub gamma: f64,
    nodes: Vec<C64>,
    weights: Vec<f64>,
    images: Vec<C64>,
    disps: Vec<C64>,
    /// Nodes dropped because an evaluation was non-finite or left the disk.
    pub rejected: usize,
}

impl PullbackSample {
    /// Build `μ_{w,φ}` on a quadrature adapted to the contacts of `φ`.
    pub fn pullback(
        phi: &AnalyticMap,
        w: &AnalyticMap,
        alpha: f64,
        res: &Resolution,
    ) -> Result<Self> {
        if alpha <= -1.0 {
            return Err(Error::invalid("alpha", format!("{alpha} ≤ −1")));
        }
        let contacts = detect_contacts(phi, 2048);
        let rule = res.disk_rule(alpha, &contacts);
        let one = C64::new(1.0, 0.0);
        let constant_one_weight = matches!(
            w.polynomial_coefficients(),
            Some([c]) if *c == one
        );
        let mut nodes = Vec::with_capacity(rule.nodes.len());
        let mut weights = Vec::with_capacity(rule.nodes.len());
        let mut images = Vec::with_capacity(rule.nodes.len());
        let mut disps = Vec::with_capacity(rule.nodes.len());
        let mut rejected = 0usize;
        for nd in &rule.nodes {
            let wsq = if constant_one_weight {
                1.0
            } else {
                w.eval(nd.z).norm_sqr()
            };
            let d = phi.displacement_eval(nd.one_minus_z);
            let weight = nd.weight * wsq;
            // In-disk test via the displacement: 1 − |im|² = 2 Re d − |d|².
            let q = 2.0 * d.re - d.norm_sqr();
            if !weight.is_finite() || !d.re.is_finite() || !d.im.is_finite() || q <= 0.0 {
                rejected += 1;
                continue;
            }
            nodes.push(nd.z);
            weights.push(weight);
            images.push(one - d);
            disps.push(d);
        }
        Ok(PullbackSample {
            alpha,
            gamma: alpha + 2.0,
            nodes,
            weights,
            images,
            disps,
            rejected,
        })
    }

    /// Point-mass measure, mostly for tests and fixtures.
    pub fn from_atoms(atoms: Vec<(C64, f64)>, alpha: f64) -> Self {
        let (images, weights): (Vec<C64>, Vec<f64>) = atoms.into_iter().unzip();
        let one = C64::new(1.0, 0.0);
        PullbackSample {
            alpha,
            gamma: alpha + 2.0,
            nodes: images.clone(),
            weights,
            disps: images.iter().map(|im| one - im).collect(),
            images,
            rejected: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[C64] {
        &self.images
    }

    /// Boundary displacements `1 − φ(z_i)`.
    pub fn disps(&self) -> &[C64] {
        &self.disps
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn nodes(&self) -> &[C64] {
        &self.nodes
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn box_mass(&self, b: &CarlesonBox) -> f64 {
        let delta_center = C64::new(1.0, 0.0) - b.center();
        let h = b.size();
        self.disps
            .iter()
            .zip(&self.weights)
            .filter(|(d, _)| (delta_center - **d).norm() < h)
            .map(|(_, w)| w)
            .sum()
    }

    /// Mass of the box `S(e^{iθ}, h)`, with the center displacement in the
    /// stable form (meaningful for arbitrarily small `h`).
    pub fn box_mass_at(&self, theta: f64, h: f64) -> f64 {
        let delta_center = crate::quadrature::one_minus_unit(theta);
        self.disps
            .iter()
            .zip(&self.weights)
            .filter(|(d, _)| (delta_center - **d).norm() < h)
            .map(|(_, w)| w)
            .sum()
    }

    /// Mass of `{z : pred(z)}`; boxes cannot partition the disk, so
    /// partition checks use arbitrary predicates.
    pub fn mass_where(&self, pred: impl Fn(C64) -> bool) -> f64 {
        self.images
            .iter()
            .zip(&self.weights)
            .filter(|(im, _)| pred(**im))
            .map(|(_, w)| w)
            .sum()
    }

    /// Same sample with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for w in &mut out.weights {
            *w *= factor;
        }
        out
    }

    /// Reweight by a function of the *image* (used for `|u|² dν`).
    pub fn reweighted_by_image(&self, f: impl Fn(C64) -> f64) -> Self {
        let mut out = self.clone();
        for (w, im) in out.weights.iter_mut().zip(&self.images) {
            *w *= f(*im);
        }
        out
    }

    /// Reweight by a function of the image *displacement* `1 − φ(z)`,
    /// the stable route for weights that concentrate at the boundary.
    pub fn reweighted_by_displacement(&self, f: impl Fn(C64) -> f64) -> Self {
        let mut out = self.clone();
        for (w, d) in out.weights.iter_mut().zip(&self.disps) {
            *w *= f(*d);
        }
        out
    }

    // ---- serialization ----------------------------------------------

    const MAGIC: &'static [u8; 8] = b"BLABPBK1";
    const VERSION: u32 = 1;

    /// Columnar binary dump: 16-byte magic/version header, `α`, `γ`,
    /// record count, then `(node, weight, image)` as little-endian f64
    /// quintuples `(re, im, weight, re, im)`.
    pub fn write_binary(&self, mut out: impl Write) -> Result<()> {
        out.write_all(Self::MAGIC)?;
        out.write_all(&Self::VERSION.to_le_bytes())?;
        out.write_all(&0u32.to_le_bytes())?;
        out.write_all(&self.alpha.to_le_bytes())?;
        out.write_all(&self.gamma.to_le_bytes())?;
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        for i in 0..self.len() {
            for v in [
                self.nodes[i].re,
                self.nodes[i].im,
                self.weights[i],
                self.images[i].re,
                self.images[i].im,
            ] {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary(mut input: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::BadGrid("bad magic in pullback file".into()));
        }
        let mut buf4 = [0u8; 4];
        input.read_exact(&mut buf4)?;
        if u32::from_le_bytes(buf4) != Self::VERSION {
            return Err(Error::BadGrid("unsupported pullback file version".into()));
        }
        input.read_exact(&mut buf4)?;
        let mut buf8 = [0u8; 8];
        input.read_exact(&mut buf8)?;
        let alpha = f64::from_le_bytes(buf8);
        input.read_exact(&mut buf8)?;
        let gamma = f64::from_le_bytes(buf8);
        input.read_exact(&mut buf8)?;
        let count = u64::from_le_bytes(buf8) as usize;
        let mut nodes = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        let mut images = Vec::with_capacity(count);
        for _ in 0..count {
            let mut rec = [0f64; 5];
            for v in &mut rec {
                input.read_exact(&mut buf8)?;
                *v = f64::from_le_bytes(buf8);
            }
            nodes.push(C64::new(rec[0], rec[1]));
            weights.push(rec[2]);
            images.push(C64::new(rec[3], rec[4]));
        }
        let one = C64::new(1.0, 0.0);
        Ok(PullbackSample {
            alpha,
            gamma,
            nodes,
            weights,
            disps: images.iter().map(|im| one - im).collect(),
            images,
            rejected: 0,
        })
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "node_re,node_im,weight,image_re,image_im")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.nodes[i].re,
                self.nodes[i].im,
                self.weights[i],
                self.images[i].re,
                self.images[i].im
            )?;
        }
        Ok(())
    }
}

/// Walk every (node, box) incidence of the dyadic box grid: centers
/// `ξ_j = e^{2πij/m}`, scales `scales[k]`; calls `visit(node, k, j)`.
///
/// Takes image *displacements* `1 − φ(z_i)`; all distance arithmetic is in
/// displacement space, so boxes of any representable size work.
pub(crate) fn for_each_box_membership(
    disps: &[C64],
    m: usize,
    scales: &[f64],
    mut visit: impl FnMut(usize, usize, usize),
) {
    let mf = m as f64;
    let centers: Vec<C64> = (0..m)
        .map(|j| crate::quadrature::one_minus_unit(TAU * j as f64 / mf))
        .collect();
    for (i, d) in disps.iter().enumerate() {
        // 1 − |im|² = 2 Re d − |d|², stable near the boundary.
        let q = 2.0 * d.re - d.norm_sqr();
        if q <= 0.0 {
            continue; // on or outside the circle: excluded at construction
        }
        let a = (1.0 - q).max(0.0).sqrt();
        if a < 1e-9 {
            continue; // essentially at the origin: open boxes cannot reach it
        }
        let e = q / (1.0 + a); // 1 − |im|
        let ang = (-d.im).atan2(1.0 - d.re).rem_euclid(TAU);
        for (k, &h) in scales.iter().enumerate() {
            if e >= h {
                continue;
            }
            // 1 − cos Δmax = (h² − e²)/(2a), stable for small h.
            let omc = ((h * h - e * e) / (2.0 * a)).max(0.0);
            if omc >= 2.0 {
                for (j, xi) in centers.iter().enumerate() {
                    if (xi - d).norm() < h {
                        visit(i, k, j);
                    }
                }
                continue;
            }
            let dmax = 2.0 * (0.5 * omc).sqrt().min(1.0).asin();
            // Widen by two grid steps against angle roundoff; membership is
            // then decided exactly in displacement space.
            let lo = ((ang - dmax) * mf / TAU).floor() as i64 - 1;
            let hi = ((ang + dmax) * mf / TAU).ceil() as i64 + 1;
            if hi - lo + 1 >= m as i64 {
                for (j, xi) in centers.iter().enumerate() {
                    if (xi - d).norm() < h {
                        visit(i, k, j);
                    }
                }
            } else {
                for j in lo..=hi {
                    let jj = j.rem_euclid(m as i64) as usize;
                    if (centers[jj] - d).norm() < h {
                        visit(i, k, jj);
                    }
                }
            }
        }
    }
}

/// Per-scale box-ratio suprema `P_k = max_ξ μ[S(ξ, h_k)] / h_k^γ` over the
/// boundary grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CarlesonProfile {
    pub gamma: f64,
    pub grid_m: usize,
    /// Dyadic scales `h_k = 2^{−k}`, `k = 0..`.
    pub scales: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Argmax center angle per scale.
    pub argmax_theta: Vec<f64>,
    pub degenerate: bool,
}

/// Grid estimate of the Carleson profile of `μ`.
pub fn carleson_profile(
    mu: &PullbackSample,
    gamma: f64,
    grid_m: usize,
    k_scales: usize,
) -> Result<CarlesonProfile> {
    if gamma <= 1.0 {
        return Err(Error::invalid("gamma", format!("{gamma} must exceed 1")));
    }
    let scales: Vec<f64> = (0..=k_scales).map(|k| 0.5f64.powi(k as i32)).collect();
    let mut masses = vec![0.0f64; grid_m * scales.len()];
    for_each_box_membership(mu.disps(), grid_m, &scales, |i, k, j| {
        masses[k * grid_m + j] += mu.weights()[i];
    });
    let mut ratios = Vec::with_capacity(scales.len());
    let mut argmax_theta = Vec::with_capacity(scales.len());
    for (k, &h) in scales.iter().enumerate() {
        let row = &masses[k * grid_m..(k + 1) * grid_m];
        let (jbest, best) = row
            .iter()
            .enumerate()
            .fold((0usize, 0.0f64), |(ja, va), (j, &v)| {
                if v > va {
                    (j, v)
                } else {
                    (ja, va)
                }
            });
        ratios.push(best / h.powf(gamma));
        argmax_theta.push(TAU * jbest as f64 / grid_m as f64);
    }
    Ok(CarlesonProfile {
        gamma,
        grid_m,
        scales,
        ratios,
        argmax_theta,
        degenerate: mu.total_mass() <= 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CarlesonClass {
    NotCarleson,
    CarlesonNonVanishing,
    Vanishing,
    Indeterminate,
}

/// Classification verdict with the fitted log–log slope over the finest
/// scales.  The decision is a trend statement, never a certainty claim.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Classification {
    pub class: CarlesonClass,
    /// Slope of `log P_k` against `log h_k` (positive ⇒ ratios vanish).
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    /// Number of zero ratios at the finest end of the profile.
    pub zero_tail: usize,
    pub note: String,
}

/// Classify a profile by log–log regression over the finest scales.
pub fn classify(profile: &CarlesonProfile) -> Classification {
    let n = profile.scales.len();
    let zero_tail = profile.ratios.iter().rev().take_while(|r| **r == 0.0).count();
    if n < 6 {
        return Classification {
            class: CarlesonClass::Indeterminate,
            slope: None,
            slope_stderr: None,
            zero_tail,
            note: "fewer than 6 dyadic scales".into(),
        };
    }
    if profile.degenerate {
        return Classification {
            class: CarlesonClass::Vanishing,
            slope: None,
            slope_stderr: None,
            zero_tail,
            note: "zero-mass measure (degenerate)".into(),
        };
    }
    if zero_tail >= 3 {
        return Classification {
            class: CarlesonClass::Vanishing,
            slope: None,
            slope_stderr: None,
            zero_tail,
            note: format!("profile identically zero at the {zero_tail} finest scales"),
        };
    }
    // Regression over the finest positive ratios (up to 6 of them).
    let pts: Vec<(f64, f64)> = profile
        .scales
        .iter()
        .zip(&profile.ratios)
        .rev()
        .filter(|(_, r)| **r > 0.0)
        .take(6)
        .map(|(h, r)| (h.ln(), r.ln()))
        .collect();
    if pts.len() < 4 {
        return Classification {
            class: CarlesonClass::Indeterminate,
            slope: None,
            slope_stderr: None,
            zero_tail,
            note: "too few positive ratios for a trend fit".into(),
        };
    }
    let (slope, stderr) = linear_fit_slope(&pts);
    let class = if slope >= 0.15 {
        CarlesonClass::Vanishing
    } else if slope <= -0.15 {
        CarlesonClass::NotCarleson
    } else {
        CarlesonClass::CarlesonNonVanishing
    };
    Classification {
        class,
        slope: Some(slope),
        slope_stderr: Some(stderr),
        zero_tail,
        note: format!("fitted slope {slope:.3} over {} scales", pts.len()),
    }
}

fn linear_fit_slope(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let residual: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    let stderr = (residual / (n - 2.0).max(1.0) / sxx).sqrt();
    (slope, stderr)
}

// ---------------------------------------------------------------------
// Divergence-aware integration.
// ---------------------------------------------------------------------

/// Options for the depth-doubling divergence rule.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DivergenceOptions {
    /// First rung of the depth ladder; rungs double up to `max_depth`.
    pub base_depth: usize,
    pub max_depth: usize,
    /// Jump threshold: a rung counts when value grows by more than this
    /// factor under a doubling of the refinement depth.
    pub jump_factor: f64,
    /// Consecutive jumps required to declare divergence.
    pub jumps_needed: usize,
    /// Relative drift under depth doubling accepted as converged.
    pub drift_tol: f64,
}

impl Default for DivergenceOptions {
    fn default() -> Self {
        DivergenceOptions {
            base_depth: 6,
            max_depth: 48,
            jump_factor: 1.25,
            jumps_needed: 3,
            drift_tol: 1e-3,
        }
    }
}

/// Outcome of a divergence-checked integral.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum IntegralVerdict {
    Finite {
        value: f64,
        drift: f64,
        depth: usize,
    },
    Diverging {
        /// Depth at which the third consecutive jump fired.
        depth: usize,
        ladder: Vec<f64>,
    },
    Indeterminate {
        ladder: Vec<f64>,
    },
}

impl IntegralVerdict {
    pub fn is_finite(&self) -> bool {
        matches!(self, IntegralVerdict::Finite { .. })
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            IntegralVerdict::Finite { value, .. } => Some(*value),
            _ => None,
        }
    }
}

/// Tail sum past depth `d` from the fit `b_k ≈ exp(a) ρ^k k^q` over the
/// trailing positive bands.  `None` when the tail is not summable or there
/// is nothing to fit on.
fn fitted_tail(bands: &[f64], d: usize) -> Option<f64> {
    let lo = d.saturating_sub(16).max(1);
    let pts: Vec<(f64, f64)> = (lo..=d)
        .filter(|&k| bands[k] > 0.0)
        .map(|k| (k as f64, bands[k].ln()))
        .collect();
    if pts.is_empty() {
        return Some(0.0); // bands died out: nothing beyond the truncation
    }
    if pts.len() < 6 {
        // Too few live bands for the 3-parameter model; fall back to the
        // median ratio.
        let mut ratios: Vec<f64> = pts.windows(2).map(|w| (w[1].1 - w[0].1).exp()).collect();
        if ratios.is_empty() {
            return Some(0.0);
        }
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rho = ratios[ratios.len() / 2];
        if rho >= 0.995 {
            return None;
        }
        return Some(bands[d] * rho / (1.0 - rho));
    }
    // Normal equations for ln b = a + k ln ρ + q ln k.
    let n = pts.len() as f64;
    let (mut sk, mut sl, mut sy) = (0.0f64, 0.0f64, 0.0f64);
    let (mut skk, mut sll, mut skl) = (0.0f64, 0.0f64, 0.0f64);
    let (mut sky, mut sly) = (0.0f64, 0.0f64);
    for (k, y) in &pts {
        let l = k.ln();
        sk += k;
        sl += l;
        sy += y;
        skk += k * k;
        sll += l * l;
        skl += k * l;
        sky += k * y;
        sly += l * y;
    }
    let m = nalgebra::Matrix3::new(n, sk, sl, sk, skk, skl, sl, skl, sll);
    let rhs = nalgebra::Vector3::new(sy, sky, sly);
    let sol = m.lu().solve(&rhs)?;
    let (a, ln_rho, qexp) = (sol[0], sol[1], sol[2]);
    let rho = ln_rho.exp();
    if !(rho.is_finite() && rho < 0.999) {
        return None;
    }
    let mut tail = 0.0f64;
    let mut j = d + 1;
    loop {
        let term = (a + j as f64 * ln_rho + qexp * (j as f64).ln()).exp();
        tail += term;
        if term < 1e-16 * (tail + bands[d]) || j > d + 4000 {
            break;
        }
        j += 1;
    }
    Some(tail)
}

/// Shared ladder logic over per-band contributions.
///
/// The estimate at refinement depth `d` is the truncated sum plus the
/// fitted geometric tail when the trailing bands are summable, and the raw
/// truncation otherwise.  Three consecutive >25% jumps of the estimate
/// under depth doubling declare divergence; otherwise the deepest estimate
/// is returned with its drift under the last doubling.
fn ladder_verdict(bands: &[f64], opts: &DivergenceOptions) -> IntegralVerdict {
    let max_depth = bands.len() - 1;
    let cums: Vec<f64> = bands
        .iter()
        .scan(0.0, |acc, b| {
            *acc += b;
            Some(*acc)
        })
        .collect();

    let mut rungs = Vec::new();
    let mut d = opts.base_depth.max(1);
    while d <= max_depth {
        rungs.push(d);
        d *= 2;
    }
    if *rungs.last().unwrap_or(&0) != max_depth {
        rungs.push(max_depth);
    }
    let mut tail_ok = true;
    let ladder: Vec<f64> = rungs
        .iter()
        .map(|&d| match fitted_tail(bands, d) {
            Some(tail) => cums[d] + tail,
            None => {
                if d == max_depth {
                    tail_ok = false;
                }
                cums[d]
            }
        })
        .collect();

    let mut consecutive = 0usize;
    for j in 1..ladder.len() {
        if ladder[j - 1] > 0.0 && ladder[j] > opts.jump_factor * ladder[j - 1] {
            consecutive += 1;
            if consecutive >= opts.jumps_needed {
                return IntegralVerdict::Diverging {
                    depth: rungs[j],
                    ladder,
                };
            }
        } else {
            consecutive = 0;
        }
    }

    let latest = ladder[ladder.len() - 1];
    let prev = ladder[ladder.len() - 2];
    let drift = (latest - prev).abs() / latest.abs().max(f64::MIN_POSITIVE);
    if !tail_ok && drift >= opts.drift_tol {
        // No summable tail model and the raw truncations still move.
        return IntegralVerdict::Indeterminate { ladder };
    }
    IntegralVerdict::Finite {
        value: latest,
        drift,
        depth: max_depth,
    }
}

/// Divergence-checked `∫_D f dA_α`, with angular refinement near the given
/// contact angles.
pub fn disk_integral_divergence(
    f: impl FnMut(C64) -> f64,
    alpha: f64,
    contacts: &[f64],
    res: &Resolution,
    opts: &DivergenceOptions,
) -> IntegralVerdict {
    let radial = RadialRule::banded(
        alpha,
        res.radial_base,
        opts.max_depth,
        res.panel_nodes,
    );
    // A band-independent angular grid keeps the per-band contributions
    // smooth in the band index, which the tail fit relies on.
    let rule = DiskRule::contact_adapted_uniform(
        alpha,
        &radial,
        contacts,
        res.angular_base,
        res.angular_panel_nodes,
    );
    let bands = rule.integrate_banded(f);
    ladder_verdict(&bands, opts)
}

/// Divergence-checked radial integral `∫₀¹ g(r) dλ_α(r)`.
pub fn radial_integral_divergence(
    g: impl Fn(f64) -> f64,
    alpha: f64,
    base_n: usize,
    panel_n: usize,
    opts: &DivergenceOptions,
) -> IntegralVerdict {
    let rule = RadialRule::banded(alpha, base_n, opts.max_depth, panel_n);
    let mut bands = vec![0.0f64; opts.max_depth + 1];
    for j in 0..rule.len() {
        bands[rule.band[j] as usize] += rule.lambda[j] * g(rule.r[j]);
    }
    ladder_verdict(&bands, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CarlesonBox;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::function::gamma::ln_gamma;

    fn area_of_unit_box_half() -> f64 {
        // Closed-form area of S(1, 1/2) under normalized area measure:
        // lens of circles R=1, r=1/2 at center distance 1, divided by π.
        let t1 = (0.875f64).acos();
        let t2 = 0.25 * (0.25f64).acos();
        let t3 = 0.5 * (0.5f64 * 0.5 * 1.5 * 2.5).sqrt();
        (t1 + t2 - t3) / std::f64::consts::PI
    }

    #[test]
    fn weighted_area_total_mass_is_one() {
        for &alpha in &[-0.5, 0.0, 1.0, 2.5] {
            let a = WeightedAreaMeasure::plain(alpha, 64, 64).unwrap();
            assert_abs_diff_eq!(a.total_mass(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn weighted_area_moments_match_gamma_form() {
        for &alpha in &[-0.5, 0.0, 1.7] {
            let a = WeightedAreaMeasure::plain(alpha, 96, 16).unwrap();
            for n in 0..=50usize {
                let exact = (ln_gamma(alpha + 2.0) + ln_gamma(n as f64 + 1.0)
                    - ln_gamma(n as f64 + alpha + 2.0))
                .exp();
                assert!(
                    (a.moment(n) - exact).abs() < 1e-10,
                    "alpha={alpha} n={n}: {} vs {exact}",
                    a.moment(n)
                );
            }
        }
    }

    #[test]
    fn monte_carlo_box_mass_oracle() {
        // 10⁷ uniform points in the disk freeze A[S(1, 1/2)]; the closed
        // form and the quadrature must agree.
        let mut rng = ChaCha8Rng::seed_from_u64(20240001);
        let n = 10_000_000usize;
        let mut hits = 0u64;
        for _ in 0..n {
            let x: f64 = 2.0 * rng.gen::<f64>() - 1.0;
            let y: f64 = 2.0 * rng.gen::<f64>() - 1.0;
            if x * x + y * y >= 1.0 {
                continue;
            }
            // conditional on being in the disk; track denominator separately
            hits += u64::from((C64::new(x, y) - C64::new(1.0, 0.0)).norm() < 0.5);
        }
        // Uniform-in-square rejection: P(disk) = π/4.
        let mc = hits as f64 / (n as f64 * std::f64::consts::FRAC_PI_4);
        let exact = area_of_unit_box_half();
        assert!(
            (mc - exact).abs() / exact < 5e-3,
            "MC {mc} vs closed form {exact}"
        );

        // Quadrature route: pull-back of the identity.
        let id = AnalyticMap::identity();
        let one = AnalyticMap::constant(C64::new(1.0, 0.0));
        let mu = PullbackSample::pullback(&id, &one, 0.0, &Resolution::default()).unwrap();
        let b = CarlesonBox::at_angle(0.0, 0.5).unwrap();
        let quad = mu.box_mass(&b);
        assert!(
            (quad - exact).abs() / exact < 1e-2,
            "quadrature {quad} vs closed form {exact}"
        );
        // Frozen fixture for the γ = 2 box ratio.
        assert_abs_diff_eq!(exact / 0.25, 0.446610, epsilon = 5e-4);
    }

    #[test]
    fn pullback_by_identity_reproduces_area() {
        let id = AnalyticMap::identity();
        let one = AnalyticMap::constant(C64::new(1.0, 0.0));
        let mu = PullbackSample::pullback(&id, &one, 0.0, &Resolution::default()).unwrap();
        assert_abs_diff_eq!(mu.total_mass(), 1.0, epsilon = 1e-6);
        assert_eq!(mu.rejected, 0);
    }

    #[test]
    fn pullback_by_constant_zero_concentrates_at_origin() {
        let zero = AnalyticMap::constant(C64::new(0.0, 0.0));
        let one = AnalyticMap::constant(C64::new(1.0, 0.0));
        let mu = PullbackSample::pullback(&zero, &one, 0.0, &Resolution::default()).unwrap();
        for k in 1..=8 {
            let b = CarlesonBox::at_angle(1.3, 0.5f64.powi(k)).unwrap();
            assert_eq!(mu.box_mass(&b), 0.0);
        }
        assert_abs_diff_eq!(mu.total_mass(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn pullback_of_square_matches_monte_carlo() {
        // μ = A ∘ (z²)⁻¹ on S(1, 1/2), stratified 10⁷-point oracle.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 10_000_000usize;
        let mut hits = 0u64;
        let mut inside = 0u64;
        for _ in 0..n {
            let x: f64 = 2.0 * rng.gen::<f64>() - 1.0;
            let y: f64 = 2.0 * rng.gen::<f64>() - 1.0;
            if x * x + y * y >= 1.0 {
                continue;
            }
            inside += 1;
            let z = C64::new(x, y);
            hits += u64::from((z * z - C64::new(1.0, 0.0)).norm() < 0.5);
        }
        let mc = hits as f64 / inside as f64;

        let square = AnalyticMap::monomial(2);
        let one = AnalyticMap::constant(C64::new(1.0, 0.0));
        let mu = PullbackSample::pullback(&square, &one, 0.0, &Resolution::default()).unwrap();
        let quad = mu.box_mass(&CarlesonBox::at_angle(0.0, 0.5).unwrap());
        assert!(
            (quad - mc).abs() / mc < 1e-2,
            "quadrature {quad} vs MC {mc}"
        );
    }

    #[test]
    fn doubling_weights_doubles_ratios() {
        let id = AnalyticMap::identity();
        let one = AnalyticMap::constant(C64::new(1.0, 0.0));
        let mu = PullbackSample::pullback(&id, &one, 0.0, &Resolution::default()).unwrap();
        let boxes = vec![
            CarlesonBox::at_angle(0.0, 0.5).unwrap(),
            CarlesonBox::at_angle(1.0, 0.25).unwrap(),
        ];
        let (r1, empty) = crate::geometry::box_ratio_grid(&boxes, &mu, 2.0).unwrap();
        assert!(!empty);
        let (r2, _) = crate::geometry::box_ratio_grid(&boxes, &mu.scaled(2.0), 2.0).unwrap();
        for (a, b) in r1.iter().zip(&r2) {
            assert_abs_diff_eq!(2.0 * a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn point_mass_misses_boundary_box() {
        let mu = PullbackSample::from_atoms(vec![(C64::new(0.0, 0.0), 1.0)], 0.0);
        let b = CarlesonBox::at_angle(0.0, 0.5).unwrap();
        let (r, _) = crate::geometry::box_ratio_grid(&[b], &mu, 2.0).unwrap();
        assert_eq!(r[0], 0.0);
    }

    #[test]
    fn empty_sample_flags_warning() {
        let mu = PullbackSample::from_atoms(vec![], 0.0);
        let b = CarlesonBox::at_angle(0.0, 0.5).unwrap();
        let (r, empty) = crate::geometry::box_ratio_grid(&[b], &mu, 2.0).unwrap();
        assert!(empty);
        assert_eq!(r[0], 0.0);
    }

    #[test]
    fn profile_of_strict_contraction_vanishes_at_small_scales() {
        let phi = AnalyticMap::scale(C64::new(0.5, 0.0));
        let one = AnalyticMap::constant(C64::new(1.0, 0.0));
        let mu = PullbackSample::pullback(&phi, &one, 0.0, &Resolution::default()).unwrap();
        let profile = carleson_profile(&mu, 2.0, 128, 10).unwrap();
        for (h, p) in profile.scales.iter().zip(&profile.ratios) {
            if *h < 0.5 {
                assert_eq!(*p, 0.0, "h = {h}");
            }
        }
        let c = classify(&profile);
        assert_eq!(c.class, CarlesonClass::Vanishing);
    }

    #[test]
    fn profile_of_identity_is_pinched_and_non_vanishing() {
        // Box ratios of dA under the identity sit near A[S(ξ,h)]/h² ≈ 1/2.
        // The probed scales must stay above the angular node spacing; grid
        // maxima below that resolution overshoot (reported as such).
        let id = AnalyticMap::identity();
        let one = AnalyticMap::constant(C64::new(1.0, 0.0));
        let res = Resolution {
            radial_depth: 30,
            angular_base: 2048,
            ..Resolution::default()
        };
        let mu = PullbackSample::pullback(&id, &one, 0.0, &res).unwrap();
        let profile = carleson_profile(&mu, 2.0, 256, 7).unwrap();
        for (h, p) in profile.scales.iter().zip(&profile.ratios).skip(2) {
            assert!(*p > 0.2 && *p < 1.0, "h = {h}, ratio = {p}");
        }
        let c = classify(&profile);
        assert_eq!(c.class, CarlesonClass::CarlesonNonVanishing, "{c:?}");
    }

    #[test]
    fn profile_of_lens_is_non_vanishing() {
        let lens = AnalyticMap::lens();
        let one = AnalyticMap::constant(C64::new(1.0, 0.0));
        let res = Resolution {
            radial_depth: 30,
            ..Resolution::default()
        };
        let mu = PullbackSample::pullback(&lens, &one, 0.0, &res).unwrap();
        let profile = carleson_profile(&mu, 2.0, 256, 10).unwrap();
        let c = classify(&profile);
        assert_eq!(c.class, CarlesonClass::CarlesonNonVanishing, "{c:?}");
    }

    #[test]
    fn profile_of_compact_symbol_vanishes() {
        let kappa = AnalyticMap::kappa(0.5).unwrap();
        let one = AnalyticMap::constant(C64::new(1.0, 0.0));
        let res = Resolution {
            radial_depth: 30,
            ..Resolution::default()
        };
        let mu = PullbackSample::pullback(&kappa, &one, 0.0, &res).unwrap();
        let profile = carleson_profile(&mu, 2.0, 256, 10).unwrap();
        let c = classify(&profile);
        assert_eq!(c.class, CarlesonClass::Vanishing, "{c:?}");
        assert!(c.slope.unwrap_or(0.0) > 1.0, "{c:?}");
    }

    #[test]
    fn refining_center_grid_never_decreases_ratios() {
        let lens = AnalyticMap::lens();
        let one = AnalyticMap::constant(C64::new(1.0, 0.0));
        let mu = PullbackSample::pullback(&lens, &one, 0.0, &Resolution::default()).unwrap();
        let coarse = carleson_profile(&mu, 2.0, 128, 10).unwrap();
        let fine = carleson_profile(&mu, 2.0, 256, 10).unwrap();
        for (a, b) in coarse.ratios.iter().zip(&fine.ratios) {
            assert!(b + 1e-15 >= *a);
        }
    }

    #[test]
    fn partition_masses_are_additive() {
        let lens = AnalyticMap::lens();
        let w = AnalyticMap::power_weight(0.6).unwrap();
        let mu = PullbackSample::pullback(&lens, &w, 0.5, &Resolution::default()).unwrap();
        let total = mu.total_mass();
        // Partition by angular sectors crossed with two radial bands.
        let mut sum = 0.0;
        for s in 0..8 {
            let lo = TAU * s as f64 / 8.0;
            let hi = TAU * (s + 1) as f64 / 8.0;
            for band in 0..2 {
                let (rlo, rhi) = if band == 0 { (0.0, 0.7) } else { (0.7, 1.0) };
                sum += mu.mass_where(|z| {
                    let ang = z.arg().rem_euclid(TAU);
                    let r = z.norm();
                    ang >= lo && ang < hi && r >= rlo && r < rhi
                });
            }
        }
        assert_abs_diff_eq!(sum, total, epsilon = 1e-9 * total.max(1.0));

        // Disjoint boxes never exceed the total.
        let fam: Vec<CarlesonBox> = (0..6)
            .map(|j| CarlesonBox::at_angle(TAU * j as f64 / 6.0, 0.4).unwrap())
            .collect();
        let boxed: f64 = fam.iter().map(|b| mu.box_mass(b)).sum();
        assert!(boxed <= total * (1.0 + 1e-12));
    }

    #[test]
    fn binary_round_trip() {
        let lens = AnalyticMap::lens();
        let one = AnalyticMap::constant(C64::new(1.0, 0.0));
        let res = Resolution {
            radial_base: 8,
            radial_depth: 4,
            panel_nodes: 2,
            angular_base: 16,
            angular_panel_nodes: 2,
        };
        let mu = PullbackSample::pullback(&lens, &one, 0.3, &res).unwrap();
        let mut buf = Vec::new();
        mu.write_binary(&mut buf).unwrap();
        let back = PullbackSample::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back.len(), mu.len());
        assert_eq!(back.alpha, mu.alpha);
        assert_eq!(back.gamma, mu.gamma);
        for i in 0..mu.len() {
            assert_eq!(back.images()[i], mu.images()[i]);
            assert_eq!(back.weights()[i], mu.weights()[i]);
        }
        let mut csv = Vec::new();
        mu.write_csv(&mut csv).unwrap();
        assert!(csv.starts_with(b"node_re,node_im,weight,image_re,image_im"));
    }

    #[test]
    fn power_weight_norm_matches_binomial_series() {
        // ‖(1−z)^β‖²_{B²} = Σ_k binom(β,k)² ‖z^k‖², with the binomial
        // coefficients of the principal power (α = 0: ‖z^k‖² = 1/(k+1)).
        for &beta in &[-0.4f64, 0.5, 1.3] {
            let mut series = 0.0f64;
            let mut c = 1.0f64; // binom(β, k), iteratively
            for k in 0..200_000usize {
                series += c * c / (k as f64 + 1.0);
                c *= (beta - k as f64) / (k as f64 + 1.0);
                if c * c / (k as f64 + 2.0) < 1e-14 * series {
                    break;
                }
            }
            let w = AnalyticMap::power_weight(beta).unwrap();
            let res = Resolution {
                radial_depth: 40,
                ..Resolution::default()
            };
            let area = WeightedAreaMeasure::refined(0.0, &res, &[0.0]).unwrap();
            let quad = area.integrate(|z| w.eval(z).norm_sqr());
            assert!(
                (quad - series).abs() / series < 5e-3,
                "β={beta}: quadrature {quad} vs series {series}"
            );
        }
    }

    #[test]
    fn classify_needs_enough_scales() {
        let half = AnalyticMap::scale(C64::new(0.5, 0.0));
        let one = AnalyticMap::constant(C64::new(1.0, 0.0));
        let mu = PullbackSample::pullback(&half, &one, 0.0, &Resolution::default()).unwrap();
        let profile = carleson_profile(&mu, 2.0, 64, 3).unwrap();
        let c = classify(&profile);
        assert_eq!(c.class, CarlesonClass::Indeterminate);
    }

    #[test]
    fn detect_contacts_for_library_symbols() {
        let lens = AnalyticMap::lens();
        let c = detect_contacts(&lens, 1024);
        assert_eq!(c.len(), 1);
        assert!(c[0].abs() < 0.05 || (TAU - c[0]).abs() < 0.05);

        let kappa = AnalyticMap::kappa(0.5).unwrap();
        let c = detect_contacts(&kappa, 1024);
        assert_eq!(c.len(), 1);

        let id = AnalyticMap::identity();
        assert!(detect_contacts(&id, 1024).is_empty());

        let half = AnalyticMap::scale(C64::new(0.5, 0.0));
        assert!(detect_contacts(&half, 1024).is_empty());
    }

    #[test]
    fn divergence_detector_closed_form() {
        // φ = z/2, integrand 1/(1 − |φ|²)²: ∫₀¹ (1 − t/4)^{−2} dt = 4/3.
        let half = AnalyticMap::scale(C64::new(0.5, 0.0));
        let verdict = disk_integral_divergence(
            |z| {
                let q = 1.0 - half.eval(z).norm_sqr();
                1.0 / (q * q)
            },
            0.0,
            &[],
            &Resolution::default(),
            &DivergenceOptions::default(),
        );
        match verdict {
            IntegralVerdict::Finite { value, drift, .. } => {
                assert_abs_diff_eq!(value, 4.0 / 3.0, epsilon = 5e-3 * 4.0 / 3.0);
                assert!(drift < 1e-3);
            }
            other => panic!("expected finite, got {other:?}"),
        }
    }

    #[test]
    fn divergence_detector_flags_blowup() {
        // Lens with weight (1 − z)^{0.25}: the Hilbert–Schmidt integrand
        // diverges and must fire the three-jump rule.
        let lens = AnalyticMap::lens();
        let w = AnalyticMap::power_weight(0.25).unwrap();
        let verdict = disk_integral_divergence(
            |z| {
                let q = 1.0 - lens.eval(z).norm_sqr();
                w.eval(z).norm_sqr() / (q * q)
            },
            0.0,
            &[0.0],
            &Resolution::default(),
            &DivergenceOptions::default(),
        );
        assert!(
            matches!(verdict, IntegralVerdict::Diverging { .. }),
            "{verdict:?}"
        );
    }
}

//! Finite matrix truncations of `M_w C_φ` on `B²_α`, Hilbert–Schmidt norms
//! by the basis and integral routes, singular values, and the boundary
//! compactness probes.

use crate::error::{Error, Result};
use crate::measures::{
    detect_contacts, disk_integral_divergence, DivergenceOptions, IntegralVerdict, Resolution,
};
use crate::quadrature::AngularRule;
use crate::symbols::AnalyticMap;
use crate::C64;
use nalgebra::DMatrix;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::io::Write;

/// Monomial norms on `B²_α`: `‖zⁿ‖² = Γ(α+2)Γ(n+1)/Γ(n+α+2)` (for `α = 0`
/// this is `1/(n+1)` exactly).  The normalized monomials `zⁿ/‖zⁿ‖` form an
/// orthonormal basis.
#[derive(Debug, Clone, Copy)]
pub struct BergmanBasis {
    pub alpha: f64,
}

impl BergmanBasis {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha <= -1.0 {
            return Err(Error::invalid("alpha", format!("{alpha} ≤ −1")));
        }
        Ok(BergmanBasis { alpha })
    }

    pub fn norm_sq(&self, n: usize) -> f64 {
        (ln_gamma(self.alpha + 2.0) + ln_gamma(n as f64 + 1.0)
            - ln_gamma(n as f64 + self.alpha + 2.0))
        .exp()
    }

    pub fn norm(&self, n: usize) -> f64 {
        self.norm_sq(n).sqrt()
    }
}

/// Galerkin truncation of `M_w C_φ` on the orthonormal monomial basis:
/// `M[m,n] = c_m^{(n)} ‖zᵐ‖/‖zⁿ‖` with `c^{(n)}` the coefficients of `w·φⁿ`.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub alpha: f64,
    pub n: usize,
    /// Row-major `n × n` entries.
    entries: Vec<C64>,
    /// Columns beyond this index were zeroed after an extraction overflow.
    pub effective_n: usize,
}

impl OperatorMatrix {
    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.n + col]
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries.iter().map(|e| e.norm_sqr()).sum()
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        for row in 0..self.n {
            let line: Vec<String> = (0..self.n)
                .map(|col| {
                    let e = self.entry(row, col);
                    format!("{}{:+}i", e.re, e.im)
                })
                .collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Binary dump: magic, `α`, `N`, then row-major `(re, im)` f64 pairs.
    pub fn write_binary(&self, mut out: impl Write) -> Result<()> {
        out.write_all(b"BLABMAT1")?;
        out.write_all(&self.alpha.to_le_bytes())?;
        out.write_all(&(self.n as u64).to_le_bytes())?;
        for e in &self.entries {
            out.write_all(&e.re.to_le_bytes())?;
            out.write_all(&e.im.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Build the `N × N` truncation of `M_w C_φ`.
///
/// Polynomial symbol/weight pairs take an exact convolution path; everything
/// else goes through FFT coefficient extraction on `|z| = ρ` with `ρ = 0.95`.
pub fn build_matrix(
    phi: &AnalyticMap,
    w: &AnalyticMap,
    alpha: f64,
    n: usize,
) -> Result<OperatorMatrix> {
    let basis = BergmanBasis::new(alpha)?;
    if n == 0 {
        return Err(Error::invalid("n", "need a positive truncation"));
    }
    let norms: Vec<f64> = (0..n).map(|k| basis.norm(k)).collect();
    let mut entries = vec![C64::new(0.0, 0.0); n * n];
    let mut effective_n = n;

    match (phi.polynomial_coefficients(), w.polynomial_coefficients()) {
        (Some(pc), Some(wc)) => {
            // Column j holds the coefficients of w·φ^j, exactly.
            let mut col: Vec<C64> = wc.to_vec();
            for j in 0..n {
                for (m, c) in col.iter().take(n).enumerate() {
                    entries[m * n + j] = c * (norms[m] / norms[j]);
                }
                if j + 1 < n {
                    col = convolve_trunc(&col, pc, n);
                }
            }
        }
        _ => {
            let rho = 0.95f64;
            let m_fft = (4 * n).next_power_of_two().max(1024);
            let mut planner = FftPlanner::new();
            let fft = planner.plan_fft_forward(m_fft);
            let phi_vals: Vec<C64> = (0..m_fft)
                .map(|j| {
                    phi.eval(C64::from_polar(
                        rho,
                        std::f64::consts::TAU * j as f64 / m_fft as f64,
                    ))
                })
                .collect();
            let mut cur: Vec<C64> = (0..m_fft)
                .map(|j| {
                    w.eval(C64::from_polar(
                        rho,
                        std::f64::consts::TAU * j as f64 / m_fft as f64,
                    ))
                })
                .collect();
            let mut buf = vec![Complex::new(0.0, 0.0); m_fft];
            for j in 0..n {
                for (b, c) in buf.iter_mut().zip(&cur) {
                    *b = Complex::new(c.re, c.im);
                }
                fft.process(&mut buf);
                let mut scale = 1.0f64;
                let mut ok = true;
                for m in 0..n {
                    let c = C64::new(buf[m].re, buf[m].im) * (scale / m_fft as f64);
                    if !c.re.is_finite() || !c.im.is_finite() || scale > 1e280 {
                        ok = false;
                        break;
                    }
                    entries[m * n + j] = c * (norms[m] / norms[j]);
                    scale /= rho;
                }
                if !ok {
                    effective_n = effective_n.min(j);
                    for m in 0..n {
                        entries[m * n + j] = C64::new(0.0, 0.0);
                    }
                }
                for (c, p) in cur.iter_mut().zip(&phi_vals) {
                    *c *= p;
                }
            }
        }
    }

    Ok(OperatorMatrix {
        alpha,
        n,
        entries,
        effective_n,
    })
}

fn convolve_trunc(a: &[C64], b: &[C64], n: usize) -> Vec<C64> {
    let len = (a.len() + b.len() - 1).min(n);
    let mut out = vec![C64::new(0.0, 0.0); len];
    for (i, x) in a.iter().enumerate() {
        if i >= len {
            break;
        }
        for (j, y) in b.iter().enumerate() {
            if i + j >= len {
                break;
            }
            out[i + j] += x * y;
        }
    }
    out
}

/// Leading singular values of a truncation, with an optional stability
/// comparison against the doubled truncation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularSpectrum {
    pub n: usize,
    pub values: Vec<f64>,
    /// Values recomputed at truncation `2N`, when requested.
    pub values_doubled: Option<Vec<f64>>,
    /// Per-index relative drift `< 1e-3` between `N` and `2N`.
    pub converged: Option<Vec<bool>>,
}

/// Singular values of the truncated matrix (descending), via the real
/// embedding `[[Re, −Im], [Im, Re]]` whose spectrum doubles each value.
pub fn singular_values(matrix: &OperatorMatrix, k: usize) -> Result<SingularSpectrum> {
    let n = matrix.n;
    if k == 0 || k > n {
        return Err(Error::invalid("k", format!("{k} not in 1..={n}")));
    }
    let real = DMatrix::<f64>::from_fn(2 * n, 2 * n, |i, j| {
        let e = matrix.entry(i % n, j % n);
        match (i < n, j < n) {
            (true, true) => e.re,
            (true, false) => -e.im,
            (false, true) => e.im,
            (false, false) => e.re,
        }
    });
    let svd = real.svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let values: Vec<f64> = sv.iter().step_by(2).take(k).cloned().collect();
    Ok(SingularSpectrum {
        n,
        values,
        values_doubled: None,
        converged: None,
    })
}

/// Singular values with the `N` vs `2N` stability check (`N ≥ 4k` required
/// for convergence headroom); drifting indices are flagged, not trusted.
pub fn singular_values_checked(
    phi: &AnalyticMap,
    w: &AnalyticMap,
    alpha: f64,
    n: usize,
    k: usize,
) -> Result<SingularSpectrum> {
    if n < 4 * k {
        return Err(Error::invalid("n", format!("{n} < 4k = {}", 4 * k)));
    }
    let m1 = build_matrix(phi, w, alpha, n)?;
    let m2 = build_matrix(phi, w, alpha, 2 * n)?;
    let s1 = singular_values(&m1, k)?;
    let s2 = singular_values(&m2, k)?;
    let converged: Vec<bool> = s1
        .values
        .iter()
        .zip(&s2.values)
        .map(|(a, b)| (a - b).abs() <= 1e-3 * b.abs().max(1e-300))
        .collect();
    Ok(SingularSpectrum {
        n,
        values: s1.values,
        values_doubled: Some(s2.values),
        converged: Some(converged),
    })
}

/// Convergence verdict for the basis-route Hilbert–Schmidt sum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum HsVerdict {
    Finite { value: f64, tail_bound: f64 },
    Diverging { fitted_power: f64, at_term: usize },
    Indeterminate { fitted_power: f64 },
}

/// Partial sums of `Σₙ ‖w φⁿ‖²/‖zⁿ‖²` with a tail-trend verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HsBasisSum {
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub verdict: HsVerdict,
}

/// Basis route: per-term norms by disk quadrature, exact monomial norms.
///
/// The verdict fits the power-law decay of the terms (`tₙ ~ n^{−p}`; the
/// term ratio is `1 − p/n + o(1/n)`) over the last half of the computed
/// range: `p > 1` summable, `p < 1` diverging.
pub fn hs_norm_basis(
    phi: &AnalyticMap,
    w: &AnalyticMap,
    alpha: f64,
    max_terms: usize,
    res: &Resolution,
) -> Result<HsBasisSum> {
    let basis = BergmanBasis::new(alpha)?;
    if max_terms < 8 {
        return Err(Error::invalid("max_terms", "need at least 8 terms"));
    }
    let contacts = detect_contacts(phi, 2048);
    let rule = res.disk_rule(alpha, &contacts);
    let mut carry: Vec<f64> = Vec::with_capacity(rule.nodes.len());
    let mut ratio_sq: Vec<f64> = Vec::with_capacity(rule.nodes.len());
    for nd in &rule.nodes {
        let wv = w.eval(nd.z).norm_sqr();
        let pv = phi.eval(nd.z).norm_sqr();
        if wv.is_finite() && pv.is_finite() {
            carry.push(nd.weight * wv);
            ratio_sq.push(pv);
        }
    }

    let mut terms = Vec::with_capacity(max_terms);
    let mut partial_sums = Vec::with_capacity(max_terms);
    let mut acc = 0.0f64;
    for n in 0..max_terms {
        let raw: f64 = carry.iter().sum();
        let term = raw / basis.norm_sq(n);
        acc += term;
        terms.push(term);
        partial_sums.push(acc);
        if !acc.is_finite() {
            return Ok(HsBasisSum {
                terms,
                partial_sums,
                verdict: HsVerdict::Diverging {
                    fitted_power: 0.0,
                    at_term: n,
                },
            });
        }
        // Negligible tail: geometric decay has already starved the sum.
        if n > 16 && term < 1e-14 * acc {
            return Ok(HsBasisSum {
                terms,
                partial_sums,
                verdict: HsVerdict::Finite {
                    value: acc,
                    tail_bound: term * (n as f64),
                },
            });
        }
        for (c, q) in carry.iter_mut().zip(&ratio_sq) {
            *c *= q;
        }
    }

    // Fit tₙ ~ c·n^{−p} over the last half of the range.
    let lo = terms.len() / 2;
    let pts: Vec<(f64, f64)> = (lo..terms.len())
        .filter(|&i| terms[i] > 0.0)
        .map(|i| ((i as f64 + 1.0).ln(), terms[i].ln()))
        .collect();
    if pts.len() < 8 {
        // Terms died out exactly (e.g. φ ≡ 0): the sum is finite.
        return Ok(HsBasisSum {
            verdict: HsVerdict::Finite {
                value: acc,
                tail_bound: 0.0,
            },
            terms,
            partial_sums,
        });
    }
    let n_pts = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n_pts;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n_pts;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let power = -sxy / sxx;

    let last_n = terms.len() as f64;
    let last_term = *terms.last().unwrap();
    let verdict = if power > 1.05 {
        // tail ≈ t_N · N/(p−1)
        HsVerdict::Finite {
            value: acc + last_term * last_n / (power - 1.0),
            tail_bound: last_term * last_n / (power - 1.0),
        }
    } else if power < 0.95 {
        HsVerdict::Diverging {
            fitted_power: power,
            at_term: terms.len(),
        }
    } else {
        HsVerdict::Indeterminate {
            fitted_power: power,
        }
    };
    Ok(HsBasisSum {
        terms,
        partial_sums,
        verdict,
    })
}

/// Integral route: `‖M_w C_φ‖²_{HS} = ∫_D |w|²/(1 − |φ|²)^{α+2} dA_α`,
/// with the depth-doubling divergence rule.
pub fn hs_norm_integral(
    phi: &AnalyticMap,
    w: &AnalyticMap,
    alpha: f64,
    res: &Resolution,
    opts: &DivergenceOptions,
) -> IntegralVerdict {
    let contacts = detect_contacts(phi, 2048);
    let exponent = alpha + 2.0;
    disk_integral_divergence(
        |z| {
            let q = 1.0 - phi.eval(z).norm_sqr();
            w.eval(z).norm_sqr() / q.powf(exponent)
        },
        alpha,
        &contacts,
        res,
        opts,
    )
}

/// Per-radius suprema of the two boundary compactness quantities:
/// `sup_θ |w|² (1−|z|²)/(1−|φ|²)` and its `(α+2)`-power variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MoorhouseProbe {
    pub radii: Vec<f64>,
    pub sup_linear: Vec<f64>,
    pub sup_power: Vec<f64>,
}

/// Diagnostic sweep of the compactness quantities along circles `|z| = r`.
/// A decreasing trend is evidence of compactness; for bounded `w` the two
/// variants vanish together or not at all.
pub fn moorhouse_probe(
    phi: &AnalyticMap,
    w: &AnalyticMap,
    alpha: f64,
    radii: &[f64],
    m_angles: usize,
) -> MoorhouseProbe {
    let contacts = detect_contacts(phi, 2048);
    let angles = AngularRule::contact_refined(&contacts, m_angles.max(256), 40, 4).angles();
    let exponent = alpha + 2.0;
    let mut sup_linear = Vec::with_capacity(radii.len());
    let mut sup_power = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut best_lin = 0.0f64;
        let mut best_pow = 0.0f64;
        for &t in &angles {
            let z = C64::from_polar(r, t);
            let wv = w.eval(z).norm_sqr();
            let ratio = (1.0 - z.norm_sqr()) / (1.0 - phi.eval(z).norm_sqr());
            best_lin = best_lin.max(wv * ratio);
            best_pow = best_pow.max(wv * ratio.powf(exponent));
        }
        sup_linear.push(best_lin);
        sup_power.push(best_pow);
    }
    MoorhouseProbe {
        radii: radii.to_vec(),
        sup_linear,
        sup_power,
    }
}

/// Radial samples of the Julia–Carathéodory ratio `(1−r)/(1−|φ(rξ)|)` with
/// a fitted radial limit (least-squares intercept in `1−r` over the finest
/// radii).  A positive limit is angular-derivative evidence at `ξ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JcProbe {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub fitted_limit: f64,
}

pub fn jc_ratio(phi: &AnalyticMap, xi: C64, radii: &[f64]) -> Result<JcProbe> {
    if (xi.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::OffCircle { modulus: xi.norm() });
    }
    let values: Vec<f64> = radii
        .iter()
        .map(|&r| (1.0 - r) / (1.0 - phi.eval(xi * r).norm()))
        .collect();
    // Intercept of y = a + b(1−r) over the last four radii.
    let tail = radii.len().saturating_sub(4);
    let pts: Vec<(f64, f64)> = radii[tail..]
        .iter()
        .zip(&values[tail..])
        .map(|(r, v)| (1.0 - r, *v))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let fitted_limit = if sxx > 0.0 { my - (sxy / sxx) * mx } else { my };
    Ok(JcProbe {
        radii: radii.to_vec(),
        values,
        fitted_limit,
    })
}

/// Dyadic radii `1 − 2^{−k}`, `k = 1..=k_max`.
pub fn dyadic_radii(k_max: usize) -> Vec<f64> {
    (1..=k_max).map(|k| 1.0 - 0.5f64.powi(k as i32)).collect()
}

/// Superlevel-set area `χ(h) = A({z : |φ(z)| ≥ 1 − h})` on dyadic `h`,
/// estimated from plain-area disk quadrature (α-independent).
pub fn chi_level_function(
    phi: &AnalyticMap,
    res: &Resolution,
    k_scales: usize,
) -> Vec<(f64, f64)> {
    let contacts = detect_contacts(phi, 2048);
    let rule = res.disk_rule(0.0, &contacts);
    let mut moduli: Vec<(f64, f64)> = rule
        .nodes
        .iter()
        .map(|nd| (phi.eval(nd.z).norm(), nd.weight))
        .collect();
    moduli.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut out = Vec::with_capacity(k_scales + 1);
    let mut idx = 0usize;
    let mut acc = 0.0f64;
    // Walk scales from the largest h down; moduli are sorted descending.
    let mut scales: Vec<f64> = (0..=k_scales).map(|k| 0.5f64.powi(k as i32)).collect();
    scales.reverse();
    let mut rev = Vec::with_capacity(scales.len());
    for &h in &scales {
        while idx < moduli.len() && moduli[idx].0 >= 1.0 - h {
            acc += moduli[idx].1;
            idx += 1;
        }
        rev.push((h, acc));
    }
    rev.reverse();
    out.extend(rev);
    out
}

/// Evaluate `inf over sampled h of √n e^{−nh} + √(χ(h)/h²)`, the singular
/// value bound driven by the superlevel function.  Monotone nonincreasing in
/// `n` for fixed `χ`.
pub fn an_bound(chi: &[(f64, f64)], n: usize) -> Result<f64> {
    if chi.is_empty() {
        return Err(Error::invalid("chi", "no samples"));
    }
    if n == 0 {
        return Err(Error::invalid("n", "index must be ≥ 1"));
    }
    let nf = n as f64;
    let best = chi
        .iter()
        .map(|&(h, x)| nf.sqrt() * (-nf * h).exp() + (x / (h * h)).sqrt())
        .fold(f64::INFINITY, f64::min);
    Ok(best)
}

//! Sampled boundary data on the unit circle and its harmonic extensions:
//! Poisson integrals, conjugate functions, Herglotz completion, and the
//! harmonic measure of an arc.

use crate::error::{Error, Result};
use crate::C64;
use rustfft::{num_complex::Complex, FftPlanner};
use std::f64::consts::TAU;

/// Interpretation tag for sampled boundary data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BoundaryTag {
    G,
    LogG,
    RadialInfimum,
    Sigma,
    Arbitrary,
}

/// Real 2π-periodic function sampled on the uniform grid `θ_j = 2πj/M`,
/// `M` a power of two.
#[derive(Debug, Clone)]
pub struct BoundaryFunction {
    values: Vec<f64>,
    tag: BoundaryTag,
}

impl BoundaryFunction {
    pub fn new(values: Vec<f64>, tag: BoundaryTag) -> Result<Self> {
        let m = values.len();
        if m < 2 || !m.is_power_of_two() {
            return Err(Error::BadGrid(format!(
                "grid length {m} is not a power of two ≥ 2"
            )));
        }
        Ok(BoundaryFunction { values, tag })
    }

    pub fn from_fn(m: usize, tag: BoundaryTag, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        let values = (0..m).map(|j| f(TAU * j as f64 / m as f64)).collect();
        Self::new(values, tag)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tag(&self) -> BoundaryTag {
        self.tag
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn theta(&self, j: usize) -> f64 {
        TAU * j as f64 / self.values.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Two-column CSV export `(θ, value)`.
    pub fn write_csv(&self, mut out: impl std::io::Write) -> Result<()> {
        writeln!(out, "theta,value")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.theta(j), v)?;
        }
        Ok(())
    }

    /// Complex Fourier coefficients `c_n`, `n = 0..M/2`, of the sampled data
    /// (`c_{−n} = conj(c_n)` for real data).
    pub fn fourier_coefficients(&self) -> Vec<C64> {
        let m = self.values.len();
        let mut buf: Vec<Complex<f64>> =
            self.values.iter().map(|v| Complex::new(*v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        buf.iter()
            .take(m / 2 + 1)
            .map(|c| C64::new(c.re / m as f64, c.im / m as f64))
            .collect()
    }
}

/// Poisson extension of boundary data, evaluated by Abel summation of the
/// Fourier series (spectrally accurate for smooth data).
///
/// For data `Σ c_n e^{inθ}` the harmonic extension at `z = re^{iθ}` is
/// `c_0 + 2 Re Σ_{n≥1} c_n z^n`.
pub fn poisson_integral(data: &BoundaryFunction, z: C64) -> Result<f64> {
    if z.norm() >= 1.0 {
        return Err(Error::OutsideDisk { modulus: z.norm() });
    }
    let coeffs = data.fourier_coefficients();
    let mut acc = C64::new(0.0, 0.0);
    let mut zn = C64::new(1.0, 0.0);
    for c in coeffs.iter().skip(1) {
        zn *= z;
        acc += c * zn;
        if zn.norm() < 1e-18 {
            break;
        }
    }
    Ok(coeffs[0].re + 2.0 * acc.re)
}

/// Poisson kernel `P_r(t) = (1 − r²)/(1 − 2r cos t + r²)`.
pub fn poisson_kernel(r: f64, t: f64) -> f64 {
    (1.0 - r * r) / (1.0 - 2.0 * r * t.cos() + r * r)
}

/// Direct kernel-quadrature Poisson integral; cross-check oracle for
/// [`poisson_integral`].
pub fn poisson_integral_quadrature(data: &BoundaryFunction, z: C64) -> Result<f64> {
    if z.norm() >= 1.0 {
        return Err(Error::OutsideDisk { modulus: z.norm() });
    }
    let m = data.len();
    let (r, theta) = z.to_polar();
    let sum: f64 = (0..m)
        .map(|j| poisson_kernel(r, theta - data.theta(j)) * data.values()[j])
        .sum();
    Ok(sum / m as f64)
}

/// Conjugate function via the Fourier multiplier `−i·sign(n)`.
///
/// The conjugate of a constant is 0; applying the transform twice negates
/// the mean-zero part.  Uniformity and the power-of-two grid length are
/// structural invariants of [`BoundaryFunction`], enforced on construction.
pub fn conjugate_function(data: &BoundaryFunction) -> BoundaryFunction {
    let m = data.len();
    let mut buf: Vec<Complex<f64>> = data
        .values()
        .iter()
        .map(|v| Complex::new(*v, 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    buf[0] = Complex::new(0.0, 0.0);
    for item in buf.iter_mut().take(m / 2).skip(1) {
        *item *= Complex::new(0.0, -1.0);
    }
    // Real-signal convention: zero out the ambiguous Nyquist bin.
    buf[m / 2] = Complex::new(0.0, 0.0);
    for n in m / 2 + 1..m {
        *buf.get_mut(n).unwrap() *= Complex::new(0.0, 1.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let values = buf.iter().map(|c| c.re / m as f64).collect();
    BoundaryFunction::new(values, BoundaryTag::Arbitrary).expect("same grid")
}

/// Coefficients of the Herglotz completion `c_0 + 2Σ_{n≥1} c_n z^n`, the
/// analytic function with real part `P[data]` and imaginary part vanishing
/// at the origin.
pub fn herglotz_coefficients(data: &BoundaryFunction) -> Vec<C64> {
    data.fourier_coefficients()
}

/// Evaluate a Herglotz series at `z`.
pub fn herglotz_eval(coeffs: &[C64], z: C64) -> C64 {
    let mut acc = C64::new(coeffs[0].re, 0.0);
    let mut zn = C64::new(1.0, 0.0);
    for c in coeffs.iter().skip(1) {
        zn *= z;
        acc += 2.0 * c * zn;
    }
    acc
}

/// Harmonic measure at `z` of the arc `{e^{it} : |t − center| ≤ half_angle}`,
/// i.e. the Poisson integral of the arc indicator, in closed form:
/// `ω = (2β − arc)/2π` where `β` is the angle the arc subtends at `z`.
pub fn harmonic_measure_arc(z: C64, center: f64, half_angle: f64) -> f64 {
    let e1 = C64::from_polar(1.0, center + half_angle);
    let e2 = C64::from_polar(1.0, center - half_angle);
    let beta = ((e1 - z) / (e2 - z)).arg().rem_euclid(TAU);
    (2.0 * beta - 2.0 * half_angle) / TAU
}

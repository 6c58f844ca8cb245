//! Second-order IIR notch with a spectrally estimated notch frequency.
//!
//! The section is
//!
//! ```text
//!          (2 - k2)   1 - 2c/(2 - k2) z^-1 + z^-2
//! H(z) = --------- * ---------------------------,   c = 2 - k2 - k1^2
//!              2      1 - c z^-1 + (1 - k2) z^-2
//! ```
//!
//! with `k1 = sqrt(1 + r^2 - 2 r cos(theta))` and `k2 = 1 - r^2`. The poles sit
//! at radius `r` and angle `theta`, but the zeros land at
//! `acos(2 r cos(theta) / (1 + r^2))`, which is slightly off `theta`.
//! [`NotchDesign::for_null`] inverts that relation so the null falls exactly
//! on the requested frequency.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::sigsim::ComplexSignal;
use crate::{Error, Result};

pub const DEFAULT_POLE_RADIUS: f64 = 0.95;

/// Closed-form `(k1, k2)` for pole radius `r` and pole angle `theta`.
pub fn notch_coeffs(r: f64, theta: f64) -> Result<(f64, f64)> {
    check_radius(r)?;
    let k1 = (1.0 + r * r - 2.0 * r * theta.cos()).max(0.0).sqrt();
    Ok((k1, 1.0 - r * r))
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("pole radius {r} outside (0, 1)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotchDesign {
    pub pole_radius_r: f64,
    /// Pole angle in `[0, 2*pi)`.
    pub notch_freq_theta: f64,
    pub k1: f64,
    pub k2: f64,
}

impl NotchDesign {
    /// Design with pole angle `theta`.
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        let theta = theta.rem_euclid(TAU);
        let (k1, k2) = notch_coeffs(r, theta)?;
        Ok(Self { pole_radius_r: r, notch_freq_theta: theta, k1, k2 })
    }

    /// Design whose zeros sit at `±omega`.
    ///
    /// Frequencies too close to DC or Nyquist for the pole radius (where the
    /// required pole angle would leave `[0, pi]`) get the nearest reachable
    /// null.
    pub fn for_null(r: f64, omega: f64) -> Result<Self> {
        check_radius(r)?;
        let omega = omega.rem_euclid(TAU);
        let cos_pole = ((1.0 + r * r) * omega.cos() / (2.0 * r)).clamp(-1.0, 1.0);
        let mut theta = cos_pole.acos();
        if omega > PI {
            theta = TAU - theta;
        }
        Self::new(r, theta)
    }

    /// Angle of the numerator zeros in `[0, pi]`.
    pub fn null_freq(&self) -> f64 {
        let r = self.pole_radius_r;
        (2.0 * r * self.notch_freq_theta.cos() / (1.0 + r * r)).clamp(-1.0, 1.0).acos()
    }

    /// Direct-form `(b, a)` with `a[0] = 1`.
    pub fn coefficients(&self) -> ([f64; 3], [f64; 3]) {
        let (k1, k2) = (self.k1, self.k2);
        let c = 2.0 - k2 - k1 * k1;
        let g = (2.0 - k2) / 2.0;
        let b = [g, -g * 2.0 * c / (2.0 - k2), g];
        let a = [1.0, -c, 1.0 - k2];
        (b, a)
    }

    /// `H(e^{j omega})`.
    pub fn response(&self, omega: f64) -> Complex64 {
        let (b, a) = self.coefficients();
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        (b[0] + b[1] * z1 + b[2] * z2) / (a[0] + a[1] * z1 + a[2] * z2)
    }

    /// Runs the section over `x` from zero initial state.
    pub fn filter(&self, x: &[Complex64]) -> Vec<Complex64> {
        let (b, a) = self.coefficients();
        let zero = Complex64::new(0.0, 0.0);
        // Transposed direct form II.
        let (mut s1, mut s2) = (zero, zero);
        x.iter()
            .map(|&v| {
                let y = b[0] * v + s1;
                s1 = b[1] * v - a[1] * y + s2;
                s2 = b[2] * v - a[2] * y;
                y
            })
            .collect()
    }
}

/// Index of the largest `|X_k|^2` over the full-length DFT.
pub(crate) fn spectral_peak_bin(x: &[Complex64]) -> usize {
    let mut buf = x.to_vec();
    FftPlanner::<f64>::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| {
            let p = v.norm_sqr();
            if p > best.1 {
                (i, p)
            } else {
                best
            }
        })
        .0
}

/// Digital frequency in `[0, 2*pi)` of the strongest spectral line.
pub fn estimate_notch_freq(sig: &ComplexSignal) -> f64 {
    let n = sig.len();
    TAU * spectral_peak_bin(sig.samples()) as f64 / n as f64
}

/// Notches the strongest spectral line.
pub fn notch_mitigate(sig: &ComplexSignal, r: f64) -> Result<ComplexSignal> {
    let design = NotchDesign::for_null(r, estimate_notch_freq(sig))?;
    sig.with_samples(design.filter(sig.samples()))
}

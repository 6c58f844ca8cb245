//! Adaptive transversal prediction-error filter.
//!
//! A tapped delay line predicts each sample from the previous `num_taps`
//! samples and outputs the prediction error. Narrowband interference is
//! predictable and cancels; white DSSS chips are not and pass through.
//! Taps adapt by normalized LMS so the step size is independent of the
//! received power, which varies over tens of dB across the jammer range.

use num_complex::Complex64;

use crate::sigsim::{ComplexSignal, SoiConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransversalParams {
    pub num_taps: usize,
    /// Normalized LMS step; stable for `0 < mu < 2`.
    pub step_size_mu: f64,
}

impl Default for TransversalParams {
    fn default() -> Self {
        Self { num_taps: 16, step_size_mu: 0.01 }
    }
}

impl TransversalParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_taps < 2 {
            return Err(Error::Config(format!("num_taps {} must be at least 2", self.num_taps)));
        }
        if !(self.step_size_mu > 0.0 && self.step_size_mu < 2.0) {
            return Err(Error::Config(format!("step size {} outside (0, 2)", self.step_size_mu)));
        }
        Ok(())
    }
}

/// Regularizes the NLMS normalization on all-zero input.
const NLMS_EPS: f64 = 1e-12;

/// Prediction-error sequence of an NLMS one-step predictor.
pub fn transversal_mitigate(sig: &ComplexSignal, cfg: &SoiConfig, params: &TransversalParams) -> Result<ComplexSignal> {
    if !cfg.is_dsss {
        return Err(Error::NotApplicable("transversal filter requires a DSSS signal"));
    }
    params.validate()?;
    let taps = params.num_taps;
    let x = sig.samples();
    let zero = Complex64::new(0.0, 0.0);
    let mut w = vec![zero; taps];
    // Most recent sample first.
    let mut delay = vec![zero; taps];
    let mut delay_power = 0.0;
    let mut out = Vec::with_capacity(x.len());
    for &v in x {
        let pred: Complex64 = w.iter().zip(&delay).map(|(wk, uk)| wk.conj() * uk).sum();
        let err = v - pred;
        out.push(err);
        let step = params.step_size_mu / (NLMS_EPS + delay_power);
        let e_conj = err.conj();
        for (wk, uk) in w.iter_mut().zip(&delay) {
            *wk += uk * e_conj * step;
        }
        delay_power -= delay[taps - 1].norm_sqr();
        delay.rotate_right(1);
        delay[0] = v;
        delay_power = (delay_power + v.norm_sqr()).max(0.0);
    }
    sig.with_samples(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigsim::gen_awgn;

    #[test]
    fn narrowband_not_applicable() {
        let sig = ComplexSignal::new(gen_awgn(100, 1).unwrap(), 1.0).unwrap();
        let cfg = SoiConfig::narrowband(1, 100);
        let err = transversal_mitigate(&sig, &cfg, &TransversalParams::default()).unwrap_err();
        assert!(matches!(err, Error::NotApplicable(_)));
    }

    #[test]
    fn cancels_tone_passes_noise() {
        let n = 20000;
        let noise = gen_awgn(n, 2).unwrap();
        let x: Vec<Complex64> =
            noise.iter().enumerate().map(|(k, w)| w + Complex64::from_polar(3.0, 0.4 * k as f64)).collect();
        let sig = ComplexSignal::new(x, 1.0).unwrap();
        let cfg = SoiConfig::dsss(1, 8, 1000);
        let out = transversal_mitigate(&sig, &cfg, &TransversalParams::default()).unwrap();
        let tail = n / 2..n;
        let p: f64 = out.samples()[tail.clone()].iter().map(|v| v.norm_sqr()).sum::<f64>() / tail.len() as f64;
        // Tone power 9 suppressed to near the unit noise floor.
        assert!(p < 1.3, "residual power {p}");
    }

    #[test]
    fn rejects_bad_params() {
        let sig = ComplexSignal::new(gen_awgn(100, 1).unwrap(), 1.0).unwrap();
        let cfg = SoiConfig::dsss(1, 8, 100);
        for p in [
            TransversalParams { num_taps: 1, step_size_mu: 0.01 },
            TransversalParams { num_taps: 4, step_size_mu: 0.0 },
        ] {
            assert!(matches!(transversal_mitigate(&sig, &cfg, &p), Err(Error::Config(_))));
        }
    }
}

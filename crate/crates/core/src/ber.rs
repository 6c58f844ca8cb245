//! Demodulation, bit-error measurement and the single-trial driver.

use std::ops::Index;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::dataset::MetaRecord;
use crate::mitigate::{default_frft_plan, mitigate_with, FrftPlan, MitigationKind, MitigationParams};
use crate::rng::rng_for;
use crate::sigsim::{
    chip_sequence, gen_awgn_signal, gen_interference, gen_soi, mix, ChirpShape, ComplexSignal, SoiConfig,
};
use crate::{derive_seed, Error, Result};

/// Bits simulated per trial unless configured otherwise.
pub const DEFAULT_TRIAL_BITS: usize = 10_000;

/// BER assigned to the transversal path on unspread signals, where the
/// filter does not apply.
pub const NOT_APPLICABLE_BER: f64 = 0.5;

/// One BER per [`MitigationKind`], in ordinal order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerVector(pub [f64; 5]);

impl BerVector {
    pub fn get(&self, kind: MitigationKind) -> f64 {
        self.0[kind.ordinal()]
    }

    pub fn as_array(&self) -> &[f64; 5] {
        &self.0
    }
}

impl Index<MitigationKind> for BerVector {
    type Output = f64;

    fn index(&self, kind: MitigationKind) -> &f64 {
        &self.0[kind.ordinal()]
    }
}

/// Integrate-and-dump, despread and hard-decide.
///
/// The receiver is aligned to the transmitter: no timing or phase recovery.
pub fn demodulate(sig: &ComplexSignal, cfg: &SoiConfig, chip_seed: u64) -> Result<Vec<u8>> {
    cfg.validate()?;
    if sig.len() != cfg.num_samples() {
        return Err(Error::Dimension(format!(
            "signal has {} samples, configuration expects {}",
            sig.len(),
            cfg.num_samples()
        )));
    }
    let sps = cfg.samples_per_symbol;
    let sf = cfg.spreading_factor;
    let symbols = cfg.num_symbols();
    let chips = if cfg.is_dsss { chip_sequence(chip_seed, symbols * sf) } else { vec![1.0; symbols * sf] };

    let mut bits = Vec::with_capacity(cfg.num_bits);
    for (s, block) in sig.samples().chunks_exact(sf * sps).enumerate() {
        let z: Complex64 = block
            .chunks_exact(sps)
            .zip(&chips[s * sf..(s + 1) * sf])
            .map(|(chip_samples, &c)| chip_samples.iter().sum::<Complex64>() * c)
            .sum();
        bits.push(u8::from(z.re < 0.0));
        if cfg.bits_per_symbol == 2 {
            bits.push(u8::from(z.im < 0.0));
        }
    }
    Ok(bits)
}

/// Fraction of positions where the sequences differ.
pub fn compute_ber(tx: &[u8], rx: &[u8]) -> Result<f64> {
    if tx.len() != rx.len() || tx.is_empty() {
        return Err(Error::Dimension(format!(
            "bit sequences must be equal and nonempty, got {} and {}",
            tx.len(),
            rx.len()
        )));
    }
    let errors = tx.iter().zip(rx).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / tx.len() as f64)
}

/// Gaussian tail probability `P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Theoretical AWGN bit-error rate of BPSK and Gray-coded QPSK.
pub fn awgn_ber(ebn0_db: f64) -> f64 {
    q_function((2.0 * 10f64.powf(ebn0_db / 10.0)).sqrt())
}

/// Knobs of a trial beyond the scenario itself.
#[derive(Debug, Clone)]
pub struct TrialConfig<'a> {
    pub num_bits: usize,
    pub params: MitigationParams,
    pub plan: &'a FrftPlan,
}

impl Default for TrialConfig<'static> {
    fn default() -> Self {
        Self { num_bits: DEFAULT_TRIAL_BITS, params: MitigationParams::default(), plan: default_frft_plan() }
    }
}

/// Builds the received block for a scenario and measures all five BERs
/// on it with the default trial configuration.
pub fn run_trial(meta: &MetaRecord, seed: u64) -> Result<BerVector> {
    run_trial_with(meta, seed, &TrialConfig::default())
}

pub fn run_trial_with(meta: &MetaRecord, seed: u64, trial: &TrialConfig<'_>) -> Result<BerVector> {
    let cfg = meta.soi_config(trial.num_bits)?;
    let soi_seed = derive_seed(seed, 0);
    let (bits, soi) = gen_soi(&cfg, soi_seed)?;
    // The chirp law is not part of the scenario descriptors; it is drawn
    // per trial so the learner sees both.
    let shape = if rng_for(seed, 3).random::<bool>() { ChirpShape::Exponential } else { ChirpShape::Linear };
    let spec = meta.interference_spec(shape)?;
    let n = soi.len();
    let fs = soi.sample_rate_hz();
    let interference = gen_interference(&spec, n, fs, derive_seed(seed, 1))?;
    let noise = gen_awgn_signal(n, fs, derive_seed(seed, 2))?;
    let rx = mix(&soi, &interference, &noise, meta.j2s_db, meta.snr_db)?;

    let chips = crate::sigsim::chip_seed(soi_seed);
    let mut out = [0.0; 5];
    for kind in MitigationKind::ALL {
        out[kind.ordinal()] = if kind == MitigationKind::Transversal && !cfg.is_dsss {
            NOT_APPLICABLE_BER
        } else {
            let cleaned = mitigate_with(&rx, kind, &cfg, &trial.params, trial.plan)?;
            let ber = compute_ber(&bits, &demodulate(&cleaned, &cfg, chips)?)?;
            ber.clamp(0.0, 0.5)
        };
    }
    Ok(BerVector(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigsim::chip_seed;

    #[test]
    fn hamming_examples() {
        assert_eq!(compute_ber(&[1, 0, 1], &[1, 0, 1]).unwrap(), 0.0);
        assert_eq!(compute_ber(&[1, 0, 1], &[0, 1, 0]).unwrap(), 1.0);
        assert_eq!(compute_ber(&[1, 0, 1, 1], &[1, 1, 1, 0]).unwrap(), 0.5);
        assert!(matches!(compute_ber(&[1, 0], &[1]), Err(Error::Dimension(_))));
        assert!(compute_ber(&[], &[]).is_err());
    }

    #[test]
    fn loopback_recovers_bits() {
        for cfg in [
            SoiConfig::narrowband(1, 1000),
            SoiConfig::narrowband(2, 1000),
            SoiConfig::dsss(1, 8, 1000),
            SoiConfig::dsss(2, 31, 1000),
        ] {
            let (bits, sig) = gen_soi(&cfg, 17).unwrap();
            let rx = demodulate(&sig, &cfg, chip_seed(17)).unwrap();
            assert_eq!(rx, bits, "{cfg:?}");
        }
    }

    #[test]
    fn wrong_length_rejected() {
        let cfg = SoiConfig::narrowband(1, 100);
        let sig = ComplexSignal::zeros(99, 1e5).unwrap();
        assert!(matches!(demodulate(&sig, &cfg, 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn q_function_values() {
        assert!((q_function(0.0) - 0.5).abs() < 1e-15);
        // statrs' erfc is accurate to roughly 1e-10.
        assert!((q_function(1.0) - 0.158_655_253_931_457).abs() < 1e-9);
        assert!((awgn_ber(4.0) - 0.012_500_818_040_738).abs() < 1e-9);
    }

    #[test]
    fn index_by_kind() {
        let v = BerVector([0.1, 0.2, 0.3, 0.4, 0.5]);
        assert_eq!(v[MitigationKind::Notch], 0.4);
        assert_eq!(v.get(MitigationKind::FilterBank), 0.2);
    }
}

//! Signal of interest, interference and noise generation.
//!
//! All generators are pure functions of their configuration and seed. The
//! received block is `r = x + g_i * i + g_n * n`, with the gains chosen in
//! [`mix`] from measured powers so the requested jammer-to-signal and
//! signal-to-noise ratios hold exactly on the generated samples.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, rng_for};
use crate::{Error, Result};

/// Sample rate used by the dataset and CLI unless overridden.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 100_000.0;

/// Chips per symbol for spread signals in the dataset.
pub const DEFAULT_SPREADING_FACTOR: usize = 8;

const CHIP_STREAM: u64 = 0xC41F;

/// A block of complex baseband samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    samples: Vec<Complex64>,
    sample_rate_hz: f64,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Dimension("signal must contain at least one sample".into()));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Config(format!("sample rate {sample_rate_hz} must be positive")));
        }
        if let Some(k) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::Parameter(format!("non-finite sample at index {k}")));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    pub fn zeros(n: usize, sample_rate_hz: f64) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); n], sample_rate_hz)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Replaces the samples, keeping the sample rate.
    pub fn with_samples(&self, samples: Vec<Complex64>) -> Result<Self> {
        Self::new(samples, self.sample_rate_hz)
    }

    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }

    /// Euclidean norm of the sample vector.
    pub fn norm(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>().sqrt()
    }
}

pub(crate) fn mean_power(samples: &[Complex64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64
}

/// Signal-of-interest configuration.
///
/// `samples_per_symbol` is the number of samples per chip for spread
/// signals and per symbol otherwise. The block length is
/// `num_bits / bits_per_symbol * spreading_factor * samples_per_symbol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoiConfig {
    pub bits_per_symbol: u8,
    pub samples_per_symbol: usize,
    pub is_dsss: bool,
    pub spreading_factor: usize,
    pub num_bits: usize,
    pub sample_rate_hz: f64,
}

impl SoiConfig {
    /// Unspread BPSK/QPSK at one sample per symbol; see
    /// [`SoiConfig::with_samples_per_symbol`] for longer pulses.
    pub fn narrowband(bits_per_symbol: u8, num_bits: usize) -> Self {
        Self {
            bits_per_symbol,
            samples_per_symbol: 1,
            is_dsss: false,
            spreading_factor: 1,
            num_bits,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
        }
    }

    /// Direct-sequence spread BPSK/QPSK at one sample per chip.
    pub fn dsss(bits_per_symbol: u8, spreading_factor: usize, num_bits: usize) -> Self {
        Self {
            bits_per_symbol,
            samples_per_symbol: 1,
            is_dsss: true,
            spreading_factor,
            num_bits,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
        }
    }

    pub fn with_samples_per_symbol(self, samples_per_symbol: usize) -> Self {
        Self { samples_per_symbol, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.bits_per_symbol, 1 | 2) {
            return Err(Error::Config(format!("bits_per_symbol must be 1 or 2, got {}", self.bits_per_symbol)));
        }
        if self.samples_per_symbol == 0 {
            return Err(Error::Config("samples_per_symbol must be at least 1".into()));
        }
        if self.spreading_factor == 0 {
            return Err(Error::Config("spreading_factor must be at least 1".into()));
        }
        if (self.spreading_factor == 1) == self.is_dsss {
            return Err(Error::Config(format!(
                "spreading_factor {} inconsistent with is_dsss = {}",
                self.spreading_factor, self.is_dsss
            )));
        }
        if self.num_bits == 0 || !self.num_bits.is_multiple_of(self.bits_per_symbol as usize) {
            return Err(Error::Config(format!(
                "num_bits {} must be a positive multiple of bits_per_symbol",
                self.num_bits
            )));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        Ok(())
    }

    pub fn num_symbols(&self) -> usize {
        self.num_bits / self.bits_per_symbol as usize
    }

    pub fn samples_per_spread_symbol(&self) -> usize {
        self.spreading_factor * self.samples_per_symbol
    }

    pub fn num_samples(&self) -> usize {
        self.num_symbols() * self.samples_per_spread_symbol()
    }

    /// Per-sample SNR that yields the given Eb/N0 after matched filtering
    /// and despreading.
    pub fn snr_db_for_ebn0(&self, ebn0_db: f64) -> f64 {
        let samples_per_bit = self.samples_per_spread_symbol() as f64 / self.bits_per_symbol as f64;
        ebn0_db - 10.0 * samples_per_bit.log10()
    }
}

/// Seed of the chip sequence belonging to a signal generated with `soi_seed`.
pub fn chip_seed(soi_seed: u64) -> u64 {
    derive_seed(soi_seed, CHIP_STREAM)
}

/// Pseudo-random ±1 chips, one fresh group of `spreading_factor` chips per
/// symbol.
pub fn chip_sequence(chip_seed: u64, len: usize) -> Vec<f64> {
    let mut rng = rng_for(chip_seed, 0);
    (0..len).map(|_| if rng.random::<bool>() { -1.0 } else { 1.0 }).collect()
}

/// Maps bits to unit-energy symbols: BPSK `1 -> -1`, `0 -> +1`; Gray QPSK
/// with the first bit on I and the second on Q.
pub fn map_symbols(bits: &[u8], bits_per_symbol: u8) -> Vec<Complex64> {
    match bits_per_symbol {
        1 => bits.iter().map(|&b| Complex64::new(bpsk_level(b), 0.0)).collect(),
        _ => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            bits.chunks_exact(2).map(|p| Complex64::new(s * bpsk_level(p[0]), s * bpsk_level(p[1]))).collect()
        }
    }
}

fn bpsk_level(bit: u8) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Generates random bits and the modulated (and possibly spread) signal.
pub fn gen_soi(cfg: &SoiConfig, seed: u64) -> Result<(Vec<u8>, ComplexSignal)> {
    cfg.validate()?;
    let mut rng = rng_for(seed, 0);
    let bits: Vec<u8> = (0..cfg.num_bits).map(|_| rng.random::<bool>() as u8).collect();
    let symbols = map_symbols(&bits, cfg.bits_per_symbol);

    let sf = cfg.spreading_factor;
    let chips = if cfg.is_dsss { chip_sequence(chip_seed(seed), symbols.len() * sf) } else { vec![1.0; symbols.len()] };

    let mut samples = Vec::with_capacity(cfg.num_samples());
    for (s, sym) in symbols.iter().enumerate() {
        for &chip in &chips[s * sf..(s + 1) * sf] {
            let v = sym * chip;
            samples.extend(std::iter::repeat_n(v, cfg.samples_per_symbol));
        }
    }
    Ok((bits, ComplexSignal::new(samples, cfg.sample_rate_hz)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChirpShape {
    Linear,
    Exponential,
}

/// Interference waveform together with the parameters of its kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InterferenceKind {
    None,
    Tone {
        freq_hz: f64,
    },
    Chirp {
        rate_hz_per_s: f64,
        shape: ChirpShape,
    },
    /// Complex white noise through `H(z) = (1 + (a-1) z^-1) / (1 + a z^-1)`.
    FilteredNoise {
        a: f64,
    },
    /// Random PSK whose bandwidth is `bw_ratio` times the sample rate.
    /// `sps` is carried as scenario metadata only.
    UnknownModulated {
        bps: u8,
        sps: f64,
        bw_ratio: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceSpec {
    pub kind: InterferenceKind,
    pub duty_cycle: f64,
}

impl InterferenceSpec {
    pub fn none() -> Self {
        Self { kind: InterferenceKind::None, duty_cycle: 1.0 }
    }

    pub fn continuous(kind: InterferenceKind) -> Self {
        Self { kind, duty_cycle: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.2..=1.0).contains(&self.duty_cycle) {
            return Err(Error::Config(format!("duty cycle {} outside [0.2, 1]", self.duty_cycle)));
        }
        match self.kind {
            InterferenceKind::FilteredNoise { a } if !(a > 0.0 && a < 1.0) => {
                Err(Error::Config(format!("filter parameter a = {a} outside (0, 1)")))
            }
            InterferenceKind::UnknownModulated { bps, bw_ratio, .. }
                if !matches!(bps, 1 | 2) || !(bw_ratio > 0.0 && bw_ratio <= 1.0) =>
            {
                Err(Error::Config("unknown-modulation parameters out of range".into()))
            }
            InterferenceKind::Tone { freq_hz } if !freq_hz.is_finite() => {
                Err(Error::Config("tone frequency must be finite".into()))
            }
            InterferenceKind::Chirp { rate_hz_per_s, .. } if !rate_hz_per_s.is_finite() => {
                Err(Error::Config("chirp rate must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Frequency response of the filtered-noise shaping filter at `omega`
/// radians per sample.
pub fn filtered_noise_response(a: f64, omega: f64) -> Complex64 {
    let zinv = Complex64::from_polar(1.0, -omega);
    (1.0 + (a - 1.0) * zinv) / (1.0 + a * zinv)
}

/// Generates `n` samples of interference, gated to a contiguous on-window
/// of `duty_cycle * n` samples and scaled to unit mean power over that
/// window.
pub fn gen_interference(spec: &InterferenceSpec, n: usize, sample_rate_hz: f64, seed: u64) -> Result<ComplexSignal> {
    if n == 0 {
        return Err(Error::Dimension("interference length must be positive".into()));
    }
    spec.validate()?;
    let fs = sample_rate_hz;
    let mut rng = rng_for(seed, 1);

    let mut wave = match spec.kind {
        InterferenceKind::None => return ComplexSignal::zeros(n, fs),
        InterferenceKind::Tone { freq_hz } => {
            let phase0 = rng.random::<f64>();
            let step = freq_hz / fs;
            (0..n).map(|k| cis_cycles(phase0 + step * k as f64)).collect::<Vec<_>>()
        }
        InterferenceKind::Chirp { rate_hz_per_s, shape } => {
            let phase0 = rng.random::<f64>();
            match shape {
                ChirpShape::Linear => {
                    let f0 = (rng.random::<f64>() - 0.5) * fs;
                    (0..n)
                        .map(|k| {
                            let t = k as f64 / fs;
                            cis_cycles(phase0 + f0 * t + 0.5 * rate_hz_per_s * t * t)
                        })
                        .collect()
                }
                ChirpShape::Exponential => {
                    // Sweep from f_start to f_start + rate * T along an exponential law.
                    let f_start = fs * (0.01 + 0.24 * rng.random::<f64>());
                    let span = n as f64 / fs;
                    let beta = (1.0 + rate_hz_per_s.abs() * span / f_start).ln() / span;
                    let sign = rate_hz_per_s.signum();
                    (0..n)
                        .map(|k| {
                            let t = k as f64 / fs;
                            let cycles =
                                if beta > 0.0 { f_start * ((beta * t).exp() - 1.0) / beta } else { f_start * t };
                            cis_cycles(phase0 + sign * cycles)
                        })
                        .collect()
                }
            }
        }
        InterferenceKind::FilteredNoise { a } => {
            let warmup = ((8.0 / (1.0 - a)).ceil() as usize).min(65_536);
            let mut out = Vec::with_capacity(n);
            let mut x_prev = Complex64::new(0.0, 0.0);
            let mut y_prev = Complex64::new(0.0, 0.0);
            for k in 0..n + warmup {
                let x = complex_gaussian(&mut rng);
                let y = x + (a - 1.0) * x_prev - a * y_prev;
                x_prev = x;
                y_prev = y;
                if k >= warmup {
                    out.push(y);
                }
            }
            out
        }
        InterferenceKind::UnknownModulated { bps, bw_ratio, .. } => {
            let period = (1.0 / bw_ratio).round().max(1.0) as usize;
            let offset = rng.random_range(0..period);
            let carrier = rng.random::<f64>() - 0.5;
            let n_sym = (n + offset).div_ceil(period);
            let bits: Vec<u8> = (0..n_sym * bps as usize).map(|_| rng.random::<bool>() as u8).collect();
            let symbols = map_symbols(&bits, bps);
            (0..n).map(|k| symbols[(k + offset) / period] * cis_cycles(carrier * k as f64)).collect()
        }
    };

    let on_len = ((spec.duty_cycle * n as f64).round() as usize).clamp(1, n);
    let start = if on_len < n { rng.random_range(0..=n - on_len) } else { 0 };
    let on = start..start + on_len;
    let p_on = mean_power(&wave[on.clone()]);
    let gain = if p_on > 0.0 { 1.0 / p_on.sqrt() } else { 0.0 };
    for (k, s) in wave.iter_mut().enumerate() {
        if on.contains(&k) {
            *s *= gain;
        } else {
            *s = Complex64::new(0.0, 0.0);
        }
    }
    ComplexSignal::new(wave, fs)
}

/// `exp(j 2 pi c)` with the phase reduced to one cycle first so large
/// cycle counts keep full precision.
fn cis_cycles(cycles: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * cycles.rem_euclid(1.0))
}

fn complex_gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Circularly-symmetric complex white Gaussian noise scaled to exactly
/// unit sample power.
pub fn gen_awgn(n: usize, seed: u64) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Err(Error::Dimension("noise length must be positive".into()));
    }
    let mut rng = rng_for(seed, 2);
    let mut noise: Vec<Complex64> = (0..n).map(|_| complex_gaussian(&mut rng)).collect();
    let g = 1.0 / mean_power(&noise).sqrt();
    noise.iter_mut().for_each(|s| *s *= g);
    Ok(noise)
}

/// Same as [`gen_awgn`] wrapped as a signal at the given rate.
pub fn gen_awgn_signal(n: usize, sample_rate_hz: f64, seed: u64) -> Result<ComplexSignal> {
    ComplexSignal::new(gen_awgn(n, seed)?, sample_rate_hz)
}

/// Combines signal, interference and noise at the requested power ratios.
///
/// The jammer gain is set from the interference power measured over its
/// nonzero (on) samples, so `j2s_db` is the ratio while the jammer is
/// active; a larger `j2s_db` means a stronger jammer.
pub fn mix(
    soi: &ComplexSignal,
    interf: &ComplexSignal,
    noise: &ComplexSignal,
    j2s_db: f64,
    snr_db: f64,
) -> Result<ComplexSignal> {
    let n = soi.len();
    if interf.len() != n || noise.len() != n {
        return Err(Error::Dimension(format!(
            "mix lengths differ: soi {n}, interference {}, noise {}",
            interf.len(),
            noise.len()
        )));
    }
    if soi.sample_rate_hz() != interf.sample_rate_hz() || soi.sample_rate_hz() != noise.sample_rate_hz() {
        return Err(Error::Dimension("mix sample rates differ".into()));
    }
    let p_x = soi.mean_power();

    let (on_energy, on_count) = interf
        .samples()
        .iter()
        .filter(|s| s.norm_sqr() > 0.0)
        .fold((0.0, 0usize), |(e, c), s| (e + s.norm_sqr(), c + 1));
    let g_i = if on_count > 0 { (db_to_lin(j2s_db) * p_x / (on_energy / on_count as f64)).sqrt() } else { 0.0 };
    let p_n = noise.mean_power();
    let g_n = if p_n > 0.0 { (p_x / (db_to_lin(snr_db) * p_n)).sqrt() } else { 0.0 };

    let samples = soi
        .samples()
        .iter()
        .zip(interf.samples())
        .zip(noise.samples())
        .map(|((&x, &i), &w)| if g_i > 0.0 { x + g_i * i + g_n * w } else { x + g_n * w })
        .collect();
    soi.with_samples(samples)
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

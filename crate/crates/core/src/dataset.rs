//! Scenario metadata, dataset generation, preprocessing and CSV storage.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ber::{run_trial_with, BerVector, TrialConfig};
use crate::rng::rng_for;
use crate::sigsim::{ChirpShape, InterferenceKind, InterferenceSpec, SoiConfig, DEFAULT_SPREADING_FACTOR};
use crate::{derive_seed, Error, Result};

pub const NUM_FEATURES: usize = 14;
pub const NUM_TARGETS: usize = 5;

/// Lower clamp applied to BERs before taking logarithms.
pub const BER_FLOOR: f64 = 1e-4;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "mod_rank",
    "j2s_db",
    "snr_db",
    "int_type_b2",
    "int_type_b1",
    "int_type_b0",
    "duty",
    "tone_f",
    "chirp_rate",
    "mod_bps",
    "mod_sps",
    "mod_bw",
    "fn_bw",
    "dsss",
];

pub const FEATURE_J2S: usize = 1;
pub const FEATURE_DSSS: usize = 13;
/// Features copied through normalization unchanged.
const BINARY_FEATURES: [usize; 4] = [3, 4, 5, FEATURE_DSSS];

pub const CSV_HEADER: [&str; 17] = [
    "mod_rank",
    "j2s_db",
    "snr_db",
    "int_type",
    "duty",
    "tone_f",
    "chirp_rate",
    "mod_bps",
    "mod_sps",
    "mod_bw",
    "fn_bw",
    "dsss",
    "ber_unmit",
    "ber_fb",
    "ber_tf",
    "ber_notch",
    "ber_frft",
];

pub type FeatureVector = [f64; NUM_FEATURES];
pub type TargetVector = [f64; NUM_TARGETS];

/// Interference category with its stable integer code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InterferenceType {
    None = 1,
    Tone = 2,
    Chirp = 3,
    FilteredNoise = 4,
    UnknownModulated = 5,
}

impl InterferenceType {
    pub const ALL: [InterferenceType; 5] = [
        InterferenceType::None,
        InterferenceType::Tone,
        InterferenceType::Chirp,
        InterferenceType::FilteredNoise,
        InterferenceType::UnknownModulated,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.code() == code)
            .ok_or_else(|| Error::Parameter(format!("interference type code {code} outside 1..=5")))
    }

    pub fn name(self) -> &'static str {
        match self {
            InterferenceType::None => "none",
            InterferenceType::Tone => "tone",
            InterferenceType::Chirp => "chirp",
            InterferenceType::FilteredNoise => "filtered-noise",
            InterferenceType::UnknownModulated => "modulated",
        }
    }
}

/// Big-endian 3-bit encoding of an interference type code.
pub fn encode_interference_type(code: u8) -> Result<[u8; 3]> {
    let t = InterferenceType::from_code(code)?.code();
    Ok([(t >> 2) & 1, (t >> 1) & 1, t & 1])
}

/// Scenario descriptors of one trial. Optional fields belong to specific
/// interference types and are absent otherwise until imputed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaRecord {
    /// Bits per SoI symbol: 1 (BPSK) or 2 (QPSK).
    pub modulation_rank: u8,
    pub j2s_db: f64,
    pub snr_db: f64,
    pub interference_type: InterferenceType,
    pub duty_cycle: f64,
    pub tone_freq_hz: Option<f64>,
    pub chirp_rate: Option<f64>,
    pub mod_bps: Option<u8>,
    pub mod_sps: Option<u32>,
    pub mod_bw_ratio: Option<f64>,
    pub fnoise_bw_ratio: Option<f64>,
    pub is_dsss: bool,
}

/// Sampling ranges of the scenario parameters.
pub mod ranges {
    pub const J2S_DB: (f64, f64) = (-10.0, 10.0);
    pub const SNR_DB: (f64, f64) = (8.0, 12.0);
    pub const DUTY: (f64, f64) = (0.2, 1.0);
    pub const TONE_HZ: (f64, f64) = (1e3, 2e4);
    pub const CHIRP_RATE: (f64, f64) = (1e3, 5e5);
    pub const MOD_SPS: (u32, u32) = (101, 799);
    pub const MOD_BW: (f64, f64) = (0.025, 0.25);
    pub const FNOISE_BW: (f64, f64) = (0.8, 8e3);
}

/// Maps the filtered-noise bandwidth ratio to the shaping-filter parameter.
///
/// The filter's passband narrows as `a` approaches 1, so the map is
/// decreasing; it is log-linear so a log-uniform ratio gives a uniform `a`.
pub fn fnoise_filter_a(bw_ratio: f64) -> f64 {
    let (lo, hi) = ranges::FNOISE_BW;
    let t = (bw_ratio / lo).log10() / (hi / lo).log10();
    (1.0 - t).clamp(1e-3, 1.0 - 1e-3)
}

impl MetaRecord {
    /// Link configuration for a trial with `num_bits` bits.
    pub fn soi_config(&self, num_bits: usize) -> Result<SoiConfig> {
        let bps = self.modulation_rank;
        let cfg = if self.is_dsss {
            SoiConfig::dsss(bps, DEFAULT_SPREADING_FACTOR, num_bits)
        } else {
            SoiConfig::narrowband(bps, num_bits)
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Interference generator settings. Fails when a field the type needs
    /// is missing.
    pub fn interference_spec(&self, chirp_shape: ChirpShape) -> Result<InterferenceSpec> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Config(format!("{} record lacks {name}", self.interference_type.name())))
        };
        let kind = match self.interference_type {
            InterferenceType::None => return Ok(InterferenceSpec::none()),
            InterferenceType::Tone => InterferenceKind::Tone { freq_hz: need(self.tone_freq_hz, "tone_f")? },
            InterferenceType::Chirp => {
                InterferenceKind::Chirp { rate_hz_per_s: need(self.chirp_rate, "chirp_rate")?, shape: chirp_shape }
            }
            InterferenceType::FilteredNoise => {
                InterferenceKind::FilteredNoise { a: fnoise_filter_a(need(self.fnoise_bw_ratio, "fn_bw")?) }
            }
            InterferenceType::UnknownModulated => InterferenceKind::UnknownModulated {
                bps: self.mod_bps.ok_or_else(|| Error::Config("modulated record lacks mod_bps".into()))?,
                sps: need(self.mod_sps.map(f64::from), "mod_sps")?,
                bw_ratio: need(self.mod_bw_ratio, "mod_bw")?,
            },
        };
        let spec = InterferenceSpec { kind, duty_cycle: self.duty_cycle };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks ranges and that exactly the fields of the interference type
    /// are present.
    pub fn validate(&self) -> Result<()> {
        let within = |name: &str, v: f64, (lo, hi): (f64, f64)| {
            if (lo..=hi).contains(&v) {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} = {v} outside [{lo}, {hi}]")))
            }
        };
        if !matches!(self.modulation_rank, 1 | 2) {
            return Err(Error::Parameter(format!("modulation rank {} is not 1 or 2", self.modulation_rank)));
        }
        within("j2s", self.j2s_db, ranges::J2S_DB)?;
        within("snr", self.snr_db, ranges::SNR_DB)?;
        within("duty", self.duty_cycle, ranges::DUTY)?;
        let t = self.interference_type;
        let expect = |name: &str, present: bool, wanted: bool| {
            if present == wanted {
                Ok(())
            } else if wanted {
                Err(Error::Parameter(format!("{} interference needs {name}", t.name())))
            } else {
                Err(Error::Parameter(format!("{name} does not apply to {} interference", t.name())))
            }
        };
        expect("tone_f", self.tone_freq_hz.is_some(), t == InterferenceType::Tone)?;
        expect("chirp_rate", self.chirp_rate.is_some(), t == InterferenceType::Chirp)?;
        expect("fn_bw", self.fnoise_bw_ratio.is_some(), t == InterferenceType::FilteredNoise)?;
        let modulated = t == InterferenceType::UnknownModulated;
        expect("mod_bps", self.mod_bps.is_some(), modulated)?;
        expect("mod_sps", self.mod_sps.is_some(), modulated)?;
        expect("mod_bw", self.mod_bw_ratio.is_some(), modulated)?;
        if let Some(f) = self.tone_freq_hz {
            within("tone_f", f, ranges::TONE_HZ)?;
        }
        if let Some(c) = self.chirp_rate {
            within("chirp_rate", c, ranges::CHIRP_RATE)?;
        }
        if let Some(b) = self.fnoise_bw_ratio {
            within("fn_bw", b, ranges::FNOISE_BW)?;
        }
        if let Some(b) = self.mod_bps {
            within("mod_bps", f64::from(b), (1.0, 2.0))?;
        }
        if let Some(s) = self.mod_sps {
            within("mod_sps", f64::from(s), (f64::from(ranges::MOD_SPS.0), f64::from(ranges::MOD_SPS.1)))?;
        }
        if let Some(b) = self.mod_bw_ratio {
            within("mod_bw", b, ranges::MOD_BW)?;
        }
        Ok(())
    }

    /// Draws a scenario for the given grid cell.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, j2s_db: f64, is_dsss: bool) -> Self {
        let uniform = |rng: &mut R, (lo, hi): (f64, f64)| rng.random_range(lo..hi);
        let log_uniform = |rng: &mut R, (lo, hi): (f64, f64)| {
            let (a, b): (f64, f64) = (lo.ln(), hi.ln());
            rng.random_range(a..b).exp()
        };
        let modulation_rank = rng.random_range(1..=2);
        let snr_db = uniform(rng, ranges::SNR_DB);
        let interference_type = InterferenceType::ALL[rng.random_range(0..5)];
        let duty_cycle = rng.random_range(ranges::DUTY.0..=ranges::DUTY.1);
        let mut meta = MetaRecord {
            modulation_rank,
            j2s_db,
            snr_db,
            interference_type,
            duty_cycle,
            tone_freq_hz: None,
            chirp_rate: None,
            mod_bps: None,
            mod_sps: None,
            mod_bw_ratio: None,
            fnoise_bw_ratio: None,
            is_dsss,
        };
        match interference_type {
            InterferenceType::None => {}
            InterferenceType::Tone => meta.tone_freq_hz = Some(uniform(rng, ranges::TONE_HZ)),
            InterferenceType::Chirp => meta.chirp_rate = Some(log_uniform(rng, ranges::CHIRP_RATE)),
            InterferenceType::FilteredNoise => meta.fnoise_bw_ratio = Some(log_uniform(rng, ranges::FNOISE_BW)),
            InterferenceType::UnknownModulated => {
                meta.mod_bps = Some(rng.random_range(1..=2));
                meta.mod_sps = Some(rng.random_range(ranges::MOD_SPS.0..=ranges::MOD_SPS.1));
                meta.mod_bw_ratio = Some(uniform(rng, ranges::MOD_BW));
            }
        }
        meta
    }

    /// Copy with every missing optional field set from `defaults`.
    pub fn imputed(&self, defaults: &ImputationDefaults) -> Self {
        MetaRecord {
            tone_freq_hz: self.tone_freq_hz.or(Some(defaults.tone_freq_hz)),
            chirp_rate: self.chirp_rate.or(Some(defaults.chirp_rate)),
            mod_bps: self.mod_bps.or(Some(defaults.mod_bps)),
            mod_sps: self.mod_sps.or(Some(defaults.mod_sps)),
            mod_bw_ratio: self.mod_bw_ratio.or(Some(defaults.mod_bw_ratio)),
            fnoise_bw_ratio: self.fnoise_bw_ratio.or(Some(defaults.fnoise_bw_ratio)),
            ..*self
        }
    }

    /// Un-normalized feature values. Missing optional fields read as NaN.
    pub fn raw_features(&self) -> FeatureVector {
        let bits = encode_interference_type(self.interference_type.code()).expect("valid type code");
        let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
        [
            f64::from(self.modulation_rank),
            self.j2s_db,
            self.snr_db,
            f64::from(bits[0]),
            f64::from(bits[1]),
            f64::from(bits[2]),
            self.duty_cycle,
            opt(self.tone_freq_hz),
            opt(self.chirp_rate),
            opt(self.mod_bps.map(f64::from)),
            opt(self.mod_sps.map(f64::from)),
            opt(self.mod_bw_ratio),
            opt(self.fnoise_bw_ratio),
            f64::from(u8::from(self.is_dsss)),
        ]
    }
}

/// Most frequent value of each optional field over a training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImputationDefaults {
    pub tone_freq_hz: f64,
    pub chirp_rate: f64,
    pub mod_bps: u8,
    pub mod_sps: u32,
    pub mod_bw_ratio: f64,
    pub fnoise_bw_ratio: f64,
}

/// Most frequent value; ties go to the smallest. `None` when empty.
pub fn mode(values: &[f64]) -> Option<f64> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<(f64, usize)> = None;
    for run in sorted.chunk_by(|a, b| a == b) {
        if best.is_none_or(|(_, count)| run.len() > count) {
            best = Some((run[0], run.len()));
        }
    }
    best.map(|(v, _)| v)
}

impl ImputationDefaults {
    /// Modes over the records where each field is present. A field absent
    /// from every record falls back to the low end of its range.
    pub fn fit(records: &[MetaRecord]) -> Self {
        let col = |f: &dyn Fn(&MetaRecord) -> Option<f64>, fallback: f64| {
            let present: Vec<f64> = records.iter().filter_map(f).collect();
            mode(&present).unwrap_or(fallback)
        };
        Self {
            tone_freq_hz: col(&|m| m.tone_freq_hz, ranges::TONE_HZ.0),
            chirp_rate: col(&|m| m.chirp_rate, ranges::CHIRP_RATE.0),
            mod_bps: col(&|m| m.mod_bps.map(f64::from), 1.0) as u8,
            mod_sps: col(&|m| m.mod_sps.map(f64::from), f64::from(ranges::MOD_SPS.0)) as u32,
            mod_bw_ratio: col(&|m| m.mod_bw_ratio, ranges::MOD_BW.0),
            fnoise_bw_ratio: col(&|m| m.fnoise_bw_ratio, ranges::FNOISE_BW.0),
        }
    }
}

/// Populates every missing optional field; present values are kept.
pub fn fill_missing(records: &[MetaRecord], defaults: &ImputationDefaults) -> Vec<MetaRecord> {
    records.iter().map(|m| m.imputed(defaults)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub min: f64,
    pub max: f64,
}

/// Imputation modes and min-max statistics learned from a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub defaults: ImputationDefaults,
    pub stats: Vec<FeatureStats>,
}

impl Preprocessor {
    pub fn fit(train: &[MetaRecord]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::State("cannot fit preprocessing on an empty training set".into()));
        }
        let defaults = ImputationDefaults::fit(train);
        let mut stats = vec![FeatureStats { min: f64::INFINITY, max: f64::NEG_INFINITY }; NUM_FEATURES];
        for m in train {
            for (s, v) in stats.iter_mut().zip(m.imputed(&defaults).raw_features()) {
                s.min = s.min.min(v);
                s.max = s.max.max(v);
            }
        }
        Ok(Self { defaults, stats })
    }

    /// Imputed, normalized features of one record.
    pub fn features(&self, meta: &MetaRecord) -> FeatureVector {
        let raw = meta.imputed(&self.defaults).raw_features();
        let mut out = [0.0; NUM_FEATURES];
        for (j, (o, v)) in out.iter_mut().zip(raw).enumerate() {
            *o = if BINARY_FEATURES.contains(&j) { v } else { normalize(v, self.stats[j]) };
        }
        out
    }
}

/// Min-max scaling clamped to `[0, 1]`; a constant feature maps to 0.
pub fn normalize(x: f64, stats: FeatureStats) -> f64 {
    let span = stats.max - stats.min;
    if span > 0.0 {
        ((x - stats.min) / span).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// `10 log10` of a BER floored at [`BER_FLOOR`].
pub fn to_log_ber(ber: f64) -> f64 {
    10.0 * ber.max(BER_FLOOR).log10()
}

pub fn targets(ber: &BerVector) -> TargetVector {
    ber.0.map(to_log_ber)
}

/// One trial: its scenario and measured BERs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub meta: MetaRecord,
    pub ber: BerVector,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<Record>,
}

/// Centers of `k` equal bins spanning the J2S range.
pub fn j2s_grid(k: usize) -> Vec<f64> {
    let (lo, hi) = ranges::J2S_DB;
    if k == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let width = (hi - lo) / k as f64;
    (0..k).map(|i| lo + width * (i as f64 + 0.5)).collect()
}

/// Generates `|grid| * 2 * reps_per_cell` records with default trials.
pub fn generate(reps_per_cell: usize, j2s_grid: &[f64], seed: u64) -> Result<Dataset> {
    generate_with(reps_per_cell, j2s_grid, seed, &TrialConfig::default(), |_, _| {})
}

/// Like [`generate`] with an explicit trial configuration and a progress
/// callback receiving `(completed, total)`.
pub fn generate_with(
    reps_per_cell: usize,
    j2s_grid: &[f64],
    seed: u64,
    trial: &TrialConfig<'_>,
    progress: impl Fn(usize, usize) + Sync,
) -> Result<Dataset> {
    if reps_per_cell == 0 {
        return Err(Error::Parameter("reps_per_cell must be positive".into()));
    }
    let total = j2s_grid.len() * 2 * reps_per_cell;
    let done = AtomicUsize::new(0);
    let records = (0..total)
        .into_par_iter()
        .map(|i| {
            let cell = i / reps_per_cell;
            let j2s = j2s_grid[cell / 2];
            let is_dsss = cell % 2 == 1;
            let record_seed = derive_seed(seed, i as u64);
            let meta = MetaRecord::sample(&mut rng_for(record_seed, 0), j2s, is_dsss);
            let ber = run_trial_with(&meta, derive_seed(record_seed, 1), trial)?;
            progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
            Ok(Record { meta, ber })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { records })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn metas(&self) -> Vec<MetaRecord> {
        self.records.iter().map(|r| r.meta).collect()
    }

    /// Shuffled split into (train, test) with `round(len * test_fraction)`
    /// test records. Records keep their relative order within each part.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::Parameter(format!("test fraction {test_fraction} outside [0, 1)")));
        }
        let n = self.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng_for(seed, 0));
        let n_test = (n as f64 * test_fraction).round() as usize;
        let mut is_test = vec![false; n];
        for &i in &idx[..n_test] {
            is_test[i] = true;
        }
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (r, &t) in self.records.iter().zip(&is_test) {
            if t {
                test.push(*r)
            } else {
                train.push(*r)
            }
        }
        Ok((Dataset { records: train }, Dataset { records: test }))
    }

    /// Features and log-BER targets under `pre`.
    pub fn prepare(&self, pre: &Preprocessor) -> (Vec<FeatureVector>, Vec<TargetVector>) {
        self.records.iter().map(|r| (pre.features(&r.meta), targets(&r.ber))).unzip()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            let m = &r.meta;
            let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let mut row = vec![
                m.modulation_rank.to_string(),
                m.j2s_db.to_string(),
                m.snr_db.to_string(),
                m.interference_type.code().to_string(),
                m.duty_cycle.to_string(),
                f(m.tone_freq_hz),
                f(m.chirp_rate),
                m.mod_bps.map(|v| v.to_string()).unwrap_or_default(),
                m.mod_sps.map(|v| v.to_string()).unwrap_or_default(),
                f(m.mod_bw_ratio),
                f(m.fnoise_bw_ratio),
                u8::from(m.is_dsss).to_string(),
            ];
            row.extend(r.ber.0.iter().map(|b| b.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(File::create(path)?)
    }

    pub fn read_csv<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let schema = |msg: String| Error::Schema { path: origin.to_path_buf(), msg };
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
        let mut rows = rdr.records();
        let header = match rows.next() {
            Some(h) => h?,
            None => return Err(schema("missing header row".into())),
        };
        if header.iter().ne(CSV_HEADER) {
            return Err(schema(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
        }
        let mut records = Vec::new();
        for (line, row) in rows.enumerate() {
            let row = row?;
            let line = line + 2;
            if row.len() != CSV_HEADER.len() {
                return Err(schema(format!("line {line}: {} columns, expected {}", row.len(), CSV_HEADER.len())));
            }
            let cell = |i: usize| &row[i];
            let req = |i: usize| -> Result<f64> {
                cell(i).parse::<f64>().map_err(|e| schema(format!("line {line}, {}: {e}", CSV_HEADER[i])))
            };
            let opt = |i: usize| -> Result<Option<f64>> {
                if cell(i).is_empty() {
                    Ok(None)
                } else {
                    req(i).map(Some)
                }
            };
            let int = |i: usize| -> Result<u32> {
                cell(i).parse::<u32>().map_err(|e| schema(format!("line {line}, {}: {e}", CSV_HEADER[i])))
            };
            let opt_int = |i: usize| -> Result<Option<u32>> {
                if cell(i).is_empty() {
                    Ok(None)
                } else {
                    int(i).map(Some)
                }
            };
            let small = |v: u32, i: usize| -> Result<u8> {
                u8::try_from(v).map_err(|_| schema(format!("line {line}, {}: {v} out of range", CSV_HEADER[i])))
            };
            let modulation_rank = small(int(0)?, 0)?;
            let interference_type =
                InterferenceType::from_code(small(int(3)?, 3)?).map_err(|e| schema(format!("line {line}: {e}")))?;
            let mod_bps = opt_int(7)?.map(|v| small(v, 7)).transpose()?;
            let is_dsss = match int(11)? {
                0 => false,
                1 => true,
                v => return Err(schema(format!("line {line}, dsss: {v} is not 0 or 1"))),
            };
            let mut ber = [0.0; 5];
            for (k, b) in ber.iter_mut().enumerate() {
                *b = req(12 + k)?;
            }
            records.push(Record {
                meta: MetaRecord {
                    modulation_rank,
                    j2s_db: req(1)?,
                    snr_db: req(2)?,
                    interference_type,
                    duty_cycle: req(4)?,
                    tone_freq_hz: opt(5)?,
                    chirp_rate: opt(6)?,
                    mod_bps,
                    mod_sps: opt_int(8)?,
                    mod_bw_ratio: opt(9)?,
                    fnoise_bw_ratio: opt(10)?,
                    is_dsss,
                },
                ber: BerVector(ber),
            });
        }
        Ok(Dataset { records })
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(File::open(path)?, path)
    }
}

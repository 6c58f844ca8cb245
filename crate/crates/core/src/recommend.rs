//! Mitigation recommendation from predicted BERs, the heuristic lookup
//! baseline, and system-level evaluation against measured BERs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ber::BerVector;
use crate::dataset::{
    j2s_grid, ranges, targets, Dataset, InterferenceType, MetaRecord, Preprocessor, TargetVector, BER_FLOOR,
    FEATURE_NAMES, NUM_FEATURES, NUM_TARGETS,
};
use crate::forest::{fit_forest, rmse, ForestModel, ForestParams, ForestRecord};
use crate::mitigate::MitigationKind;
use crate::{Error, Result};

/// Predicted BER above which a recommendation carries a warning.
pub const WARNING_BER: f64 = 1e-2;

/// Candidates in increasing computational cost; earlier entries win ties.
pub const COST_ORDER: [MitigationKind; 5] = [
    MitigationKind::Unmitigated,
    MitigationKind::Notch,
    MitigationKind::Transversal,
    MitigationKind::FilterBank,
    MitigationKind::Frft,
];

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// How the model was trained, kept so evaluation can rebuild the split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub seed: u64,
    pub test_fraction: f64,
    /// Rows in the dataset before splitting.
    pub dataset_rows: usize,
}

/// Preprocessing plus one forest per BER target.
#[derive(Debug, Clone, PartialEq)]
pub struct BerModel {
    pub preprocessor: Preprocessor,
    pub forest: ForestModel,
    pub training: TrainingInfo,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    feature_names: Vec<String>,
    target_names: Vec<String>,
    training: TrainingInfo,
    preprocessor: Preprocessor,
    forest: ForestRecord,
}

impl BerModel {
    /// Splits `data`, fits preprocessing and forests on the training part,
    /// and returns the model with the held-out part.
    pub fn train(data: &Dataset, params: &ForestParams, test_fraction: f64, seed: u64) -> Result<(Self, Dataset)> {
        let (train, test) = data.split(test_fraction, seed)?;
        let preprocessor = Preprocessor::fit(&train.metas())?;
        let (x, y) = train.prepare(&preprocessor);
        let forest = fit_forest(&x, &y, params, seed)?;
        let training = TrainingInfo { seed, test_fraction, dataset_rows: data.len() };
        Ok((Self { preprocessor, forest, training }, test))
    }

    /// Held-out part of `data` under this model's split, if `data` is the
    /// dataset the model was trained on.
    pub fn held_out(&self, data: &Dataset) -> Result<Dataset> {
        if data.len() != self.training.dataset_rows {
            return Err(Error::State(format!(
                "model was trained on {} rows, dataset has {}",
                self.training.dataset_rows,
                data.len()
            )));
        }
        Ok(data.split(self.training.test_fraction, self.training.seed)?.1)
    }

    pub fn predict_log_ber(&self, meta: &MetaRecord) -> Result<TargetVector> {
        let x = self.preprocessor.features(meta);
        let p = self.forest.predict(&x)?;
        let mut out = [0.0; NUM_TARGETS];
        out.copy_from_slice(&p);
        Ok(out)
    }

    pub fn predict_many(&self, metas: &[MetaRecord]) -> Result<Vec<TargetVector>> {
        metas.iter().map(|m| self.predict_log_ber(m)).collect()
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        let file = ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            target_names: MitigationKind::ALL.iter().map(|k| k.name().to_string()).collect(),
            training: self.training,
            preprocessor: self.preprocessor.clone(),
            forest: ForestRecord::from(&self.forest),
        };
        serde_json::to_writer(writer, &file)?;
        Ok(())
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_json(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let schema = |msg: String| Error::Schema { path: path.to_path_buf(), msg };
        let file: ModelFile =
            serde_json::from_reader(BufReader::new(File::open(path)?)).map_err(|e| schema(e.to_string()))?;
        if file.schema_version != MODEL_SCHEMA_VERSION {
            return Err(schema(format!("schema version {} (expected {MODEL_SCHEMA_VERSION})", file.schema_version)));
        }
        if file.feature_names.len() != NUM_FEATURES
            || file.forest.num_features != NUM_FEATURES
            || file.forest.forests.len() != NUM_TARGETS
            || file.preprocessor.stats.len() != NUM_FEATURES
        {
            return Err(schema("model shape does not match 14 features and 5 targets".into()));
        }
        let forest = ForestModel::try_from(file.forest).map_err(|e| schema(e.to_string()))?;
        Ok(Self { preprocessor: file.preprocessor, forest, training: file.training })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecommendationSource {
    RandomForest,
    HeuristicTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub chosen: MitigationKind,
    /// `10 log10` BER per kind; absent for the lookup table.
    pub predicted_log_ber: Option<TargetVector>,
    pub warning: bool,
    pub source: RecommendationSource,
}

fn applicable(kind: MitigationKind, is_dsss: bool) -> bool {
    is_dsss || kind != MitigationKind::Transversal
}

/// Kind with the smallest score among those applicable, ties going to the
/// cheaper kind.
pub fn argmin_kind(scores: &[f64; 5], is_dsss: bool) -> MitigationKind {
    let mut best = MitigationKind::Unmitigated;
    let mut best_score = f64::INFINITY;
    for kind in COST_ORDER {
        let s = scores[kind.ordinal()];
        if applicable(kind, is_dsss) && s < best_score {
            best = kind;
            best_score = s;
        }
    }
    best
}

/// Recommendation from a model's predicted BERs.
pub fn recommend_from_prediction(log_ber: TargetVector, is_dsss: bool) -> Recommendation {
    let chosen = argmin_kind(&log_ber, is_dsss);
    let warning = log_ber[chosen.ordinal()] > 10.0 * WARNING_BER.log10();
    Recommendation { chosen, predicted_log_ber: Some(log_ber), warning, source: RecommendationSource::RandomForest }
}

pub fn recommend_rf(model: &BerModel, meta: &MetaRecord) -> Result<Recommendation> {
    Ok(recommend_from_prediction(model.predict_log_ber(meta)?, meta.is_dsss))
}

/// Fixed mapping from interference type and spreading to a mitigation.
pub fn table_choice(interference: InterferenceType, is_dsss: bool) -> MitigationKind {
    use InterferenceType as T;
    use MitigationKind as K;
    match (interference, is_dsss) {
        (T::None, _) => K::Unmitigated,
        (T::Tone, _) => K::Notch,
        (T::Chirp, false) => K::Frft,
        (T::Chirp, true) => K::FilterBank,
        (T::UnknownModulated, false) => K::FilterBank,
        (T::UnknownModulated, true) => K::Transversal,
        (T::FilteredNoise, false) => K::FilterBank,
        (T::FilteredNoise, true) => K::Transversal,
    }
}

pub fn recommend_table(meta: &MetaRecord) -> Recommendation {
    Recommendation {
        chosen: table_choice(meta.interference_type, meta.is_dsss),
        predicted_log_ber: None,
        warning: false,
        source: RecommendationSource::HeuristicTable,
    }
}

/// Measured BER floored like the training targets, so "within 2x"
/// comparisons are meaningful when both are below the measurement floor.
fn floored(ber: f64) -> f64 {
    ber.max(BER_FLOOR)
}

/// Mean measured BER of each selection policy over one J2S bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemBin {
    pub j2s_center_db: f64,
    pub count: usize,
    pub truth: f64,
    pub rf: f64,
    pub table: f64,
}

/// Prediction error over one J2S bin and SoI type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBin {
    pub j2s_center_db: f64,
    pub is_dsss: bool,
    pub count: usize,
    /// RMSE over applicable targets, pooled.
    pub rmse: f64,
}

/// Mean achieved BER of the three selection policies over a subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyMeans {
    pub count: usize,
    pub truth: f64,
    pub rf: f64,
    pub table: f64,
}

/// Truth and prediction for one test record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub meta: MetaRecord,
    pub truth: BerVector,
    pub predicted_log_ber: TargetVector,
    pub oracle: MitigationKind,
    pub rf: MitigationKind,
    pub table: MitigationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    /// Per target, in `MitigationKind` order, `10 log10` units.
    pub rmse: Vec<f64>,
    /// Transversal RMSE over spread records only, where the filter applies.
    pub rmse_transversal_dsss_only: f64,
    pub bins: Vec<SystemBin>,
    pub error_bins: Vec<ErrorBin>,
    pub overall: PolicyMeans,
    pub high_j2s_chirp: PolicyMeans,
    /// Fraction of records where the forest picks the oracle's kind.
    pub rf_agreement: f64,
    pub table_agreement: f64,
    /// Fraction of records where the forest's pick achieves at most twice
    /// the oracle BER (both floored).
    pub rf_within_2x: f64,
    pub predictions: Vec<Prediction>,
}

const SYSTEM_BINS: usize = 20;

fn bin_index(j2s: f64) -> usize {
    let (lo, hi) = ranges::J2S_DB;
    let t = ((j2s - lo) / (hi - lo) * SYSTEM_BINS as f64).floor();
    (t.max(0.0) as usize).min(SYSTEM_BINS - 1)
}

fn policy_means<'a>(preds: impl Iterator<Item = &'a Prediction>) -> PolicyMeans {
    let mut m = PolicyMeans { count: 0, truth: 0.0, rf: 0.0, table: 0.0 };
    for p in preds {
        m.count += 1;
        m.truth += p.truth[p.oracle];
        m.rf += p.truth[p.rf];
        m.table += p.truth[p.table];
    }
    if m.count > 0 {
        let c = m.count as f64;
        m.truth /= c;
        m.rf /= c;
        m.table /= c;
    }
    m
}

/// Compares oracle, forest and lookup-table selections on records with
/// measured BERs, and summarizes prediction error.
pub fn evaluate_system(model: &BerModel, test: &Dataset) -> Result<SystemReport> {
    if test.is_empty() {
        return Err(Error::Parameter("evaluation needs at least one record".into()));
    }
    let predictions: Vec<Prediction> = test
        .records
        .iter()
        .map(|r| {
            let predicted_log_ber = model.predict_log_ber(&r.meta)?;
            let truth_scores = r.ber.0.map(floored);
            Ok(Prediction {
                meta: r.meta,
                truth: r.ber,
                predicted_log_ber,
                oracle: argmin_kind(&truth_scores, r.meta.is_dsss),
                rf: recommend_from_prediction(predicted_log_ber, r.meta.is_dsss).chosen,
                table: table_choice(r.meta.interference_type, r.meta.is_dsss),
            })
        })
        .collect::<Result<_>>()?;

    let truth_log: Vec<TargetVector> = predictions.iter().map(|p| targets(&p.truth)).collect();
    let pred_log: Vec<TargetVector> = predictions.iter().map(|p| p.predicted_log_ber).collect();
    let rmse_all = rmse(&pred_log, &truth_log)?;
    let tf = MitigationKind::Transversal.ordinal();
    let (tf_sse, tf_n) = predictions
        .iter()
        .zip(&truth_log)
        .filter(|(p, _)| p.meta.is_dsss)
        .fold((0.0, 0usize), |(s, n), (p, t)| (s + (p.predicted_log_ber[tf] - t[tf]).powi(2), n + 1));
    let rmse_transversal_dsss_only = if tf_n > 0 { (tf_sse / tf_n as f64).sqrt() } else { f64::NAN };

    let centers = j2s_grid(SYSTEM_BINS);
    let bins = (0..SYSTEM_BINS)
        .filter_map(|b| {
            let m = policy_means(predictions.iter().filter(|p| bin_index(p.meta.j2s_db) == b));
            (m.count > 0).then(|| SystemBin {
                j2s_center_db: centers[b],
                count: m.count,
                truth: m.truth,
                rf: m.rf,
                table: m.table,
            })
        })
        .collect();

    let mut error_bins = Vec::new();
    for b in 0..SYSTEM_BINS {
        for is_dsss in [false, true] {
            let (mut sse, mut n, mut records) = (0.0, 0usize, 0usize);
            for (p, t) in predictions.iter().zip(&truth_log) {
                if bin_index(p.meta.j2s_db) != b || p.meta.is_dsss != is_dsss {
                    continue;
                }
                records += 1;
                for kind in MitigationKind::ALL {
                    if applicable(kind, is_dsss) {
                        sse += (p.predicted_log_ber[kind.ordinal()] - t[kind.ordinal()]).powi(2);
                        n += 1;
                    }
                }
            }
            if records > 0 {
                error_bins.push(ErrorBin {
                    j2s_center_db: centers[b],
                    is_dsss,
                    count: records,
                    rmse: (sse / n as f64).sqrt(),
                });
            }
        }
    }

    let n = predictions.len() as f64;
    let frac = |f: &dyn Fn(&Prediction) -> bool| predictions.iter().filter(|p| f(p)).count() as f64 / n;
    Ok(SystemReport {
        rmse: rmse_all,
        rmse_transversal_dsss_only,
        bins,
        error_bins,
        overall: policy_means(predictions.iter()),
        high_j2s_chirp: policy_means(
            predictions.iter().filter(|p| p.meta.j2s_db >= 5.0 && p.meta.interference_type == InterferenceType::Chirp),
        ),
        rf_agreement: frac(&|p| p.rf == p.oracle),
        table_agreement: frac(&|p| p.table == p.oracle),
        rf_within_2x: frac(&|p| floored(p.truth[p.rf]) <= 2.0 * floored(p.truth[p.oracle])),
        predictions,
    })
}

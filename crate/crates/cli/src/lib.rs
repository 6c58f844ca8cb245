//! Subcommands of the `nbimr` tool: dataset generation, training,
//! evaluation, importance reporting and single-shot recommendation.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use nbimr::dataset::{
    generate_with, j2s_grid, targets, Dataset, InterferenceType, MetaRecord, FEATURE_NAMES, NUM_FEATURES,
};
use nbimr::forest::{mdi_importance, rmse, ForestParams, ImportanceReport};
use nbimr::mitigate::MitigationKind;
use nbimr::recommend::{evaluate_system, recommend_rf, recommend_table, BerModel, SystemReport};
use serde_json::json;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "NBIMR_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "nbimr", version, about = "Interference mitigation recommender")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate trials and write the metadata/BER dataset as CSV.
    GenDataset(GenDatasetArgs),
    /// Fit the BER forests and write the model file.
    Train(TrainArgs),
    /// Recommend a mitigation for one scenario.
    Recommend(RecommendArgs),
    /// Write evaluation data (scatter, error profile, system comparison).
    Eval(EvalArgs),
    /// Print feature importances of a trained model.
    Importance(ImportanceArgs),
}

#[derive(Debug, Args)]
pub struct GenDatasetArgs {
    /// Trials per (J2S, SoI type) cell.
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    /// Number of J2S grid points spanning -10..10 dB.
    #[arg(long, default_value_t = 20)]
    pub j2s_steps: usize,
    #[arg(long)]
    pub seed: u64,
    /// Bits per trial.
    #[arg(long, default_value_t = nbimr::ber::DEFAULT_TRIAL_BITS)]
    pub bits: usize,
    /// Output CSV; defaults to dataset.csv in the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    pub out_dir: PathBuf,
    /// Suppress progress output.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub trees: usize,
    #[arg(long, default_value_t = 0.2)]
    pub test_frac: f64,
    #[arg(long)]
    pub seed: u64,
    /// Features tried per split.
    #[arg(long, default_value_t = 5)]
    pub max_features: usize,
    #[arg(long, default_value_t = 2)]
    pub min_samples_leaf: usize,
    /// Output model; defaults to model.json in the output directory.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetaArgs {
    /// Bits per SoI symbol (1 = BPSK, 2 = QPSK).
    #[arg(long, default_value_t = 1)]
    pub mod_rank: u8,
    #[arg(long, allow_negative_numbers = true)]
    pub j2s: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub snr: f64,
    /// none, tone, chirp, filtered-noise, modulated, or the code 1..5.
    #[arg(long, value_parser = parse_interference)]
    pub interference: Option<InterferenceType>,
    #[arg(long, default_value_t = 1.0)]
    pub duty: f64,
    #[arg(long)]
    pub tone_freq: Option<f64>,
    #[arg(long)]
    pub chirp_rate: Option<f64>,
    #[arg(long)]
    pub mod_bps: Option<u8>,
    #[arg(long)]
    pub mod_sps: Option<u32>,
    #[arg(long)]
    pub mod_bw: Option<f64>,
    #[arg(long)]
    pub fn_bw: Option<f64>,
    /// Spread (DSSS) signal of interest.
    #[arg(long)]
    pub dsss: bool,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// JSON file holding one scenario record; replaces the scenario flags.
    #[arg(long, conflicts_with_all = ["j2s", "interference"])]
    pub meta_file: Option<PathBuf>,
    #[command(flatten)]
    pub meta: MetaArgs,
    /// Machine-readable output.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Evaluate every record instead of the model's held-out split.
    #[arg(long)]
    pub all: bool,
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub json: bool,
}

/// Invalid user input detected after argument parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn parse_interference(s: &str) -> Result<InterferenceType, String> {
    if let Ok(code) = s.parse::<u8>() {
        return InterferenceType::from_code(code).map_err(|e| e.to_string());
    }
    InterferenceType::ALL
        .into_iter()
        .find(|t| t.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown interference type {s:?}"))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    match cli.command {
        Command::GenDataset(a) => cmd_gen_dataset(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Recommend(a) => cmd_recommend(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Importance(a) => cmd_importance(&a, out),
    }
}

/// Writes through a sibling temporary file so a failure leaves no partial
/// output at `path`.
fn write_atomic(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().with_context(|| format!("{} is not a file path", path.display()))?;
    let tmp = dir.join(format!(".{}.partial", name.to_string_lossy()));
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?);
        body(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn cmd_gen_dataset(a: &GenDatasetArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    if a.reps == 0 || a.j2s_steps == 0 {
        return Err(usage("--reps and --j2s-steps must be positive"));
    }
    let path = a.out.clone().unwrap_or_else(|| a.out_dir.join("dataset.csv"));
    let trial = nbimr::ber::TrialConfig { num_bits: a.bits, ..Default::default() };
    let quiet = a.quiet;
    let step = (a.reps * a.j2s_steps * 2 / 20).max(1);
    let ds = generate_with(a.reps, &j2s_grid(a.j2s_steps), a.seed, &trial, |done, total| {
        if !quiet && (done % step == 0 || done == total) {
            eprintln!("  {done}/{total} trials");
        }
    })?;
    write_atomic(&path, |w| Ok(ds.write_csv(w)?))?;
    writeln!(out, "wrote {} records to {}", ds.len(), path.display())?;
    for t in InterferenceType::ALL {
        let n = ds.records.iter().filter(|r| r.meta.interference_type == t).count();
        writeln!(out, "  {:<15} {n}", t.name())?;
    }
    Ok(())
}

fn kind_names() -> Vec<&'static str> {
    MitigationKind::ALL.iter().map(|k| k.name()).collect()
}

fn rmse_on(model: &BerModel, ds: &Dataset) -> anyhow::Result<Vec<f64>> {
    let pred = model.predict_many(&ds.metas())?;
    let truth: Vec<_> = ds.records.iter().map(|r| targets(&r.ber)).collect();
    Ok(rmse(&pred, &truth)?)
}

fn write_importance_table(out: &mut dyn Write, report: &ImportanceReport, top: usize) -> std::io::Result<()> {
    for (rank, j) in report.ranking().into_iter().take(top).enumerate() {
        writeln!(out, "  {:>2}. {:<12} {:.4}", rank + 1, FEATURE_NAMES[j], report.combined[j])?;
    }
    Ok(())
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    if !(0.0..1.0).contains(&a.test_frac) {
        return Err(usage("--test-frac must lie in [0, 1)"));
    }
    if a.trees == 0 || a.max_features == 0 || a.min_samples_leaf == 0 {
        return Err(usage("--trees, --max-features and --min-samples-leaf must be positive"));
    }
    let model_path = a.model_out.clone().unwrap_or_else(|| a.out_dir.join("model.json"));
    let data = Dataset::load_csv(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    let params = ForestParams {
        num_trees: a.trees,
        max_features: a.max_features,
        min_samples_leaf: a.min_samples_leaf,
        ..ForestParams::default()
    };
    let (model, test) = BerModel::train(&data, &params, a.test_frac, a.seed)?;
    write_atomic(&model_path, |w| Ok(model.write_json(w)?))?;

    let (train, _) = data.split(a.test_frac, a.seed)?;
    writeln!(
        out,
        "trained {} trees per target on {} records; model at {}",
        a.trees,
        train.len(),
        model_path.display()
    )?;
    writeln!(out, "RMSE (10 log10 BER)")?;
    let header: String = kind_names().iter().map(|n| format!("{n:>12}")).collect();
    writeln!(out, "{:<8}{header}", "split")?;
    let row = |v: &[f64]| -> String { v.iter().map(|x| format!("{x:>12.4}")).collect() };
    writeln!(out, "{:<8}{}", "train", row(&rmse_on(&model, &train)?))?;
    if !test.is_empty() {
        writeln!(out, "{:<8}{}", "test", row(&rmse_on(&model, &test)?))?;
    }
    writeln!(out, "top features (MDI)")?;
    write_importance_table(out, &mdi_importance(&model.forest), 5)?;
    Ok(())
}

fn meta_from_args(m: &MetaArgs) -> anyhow::Result<MetaRecord> {
    let j2s_db = m.j2s.ok_or_else(|| usage("--j2s is required unless --meta-file is given"))?;
    let interference_type =
        m.interference.ok_or_else(|| usage("--interference is required unless --meta-file is given"))?;
    Ok(MetaRecord {
        modulation_rank: m.mod_rank,
        j2s_db,
        snr_db: m.snr,
        interference_type,
        duty_cycle: m.duty,
        tone_freq_hz: m.tone_freq,
        chirp_rate: m.chirp_rate,
        mod_bps: m.mod_bps,
        mod_sps: m.mod_sps,
        mod_bw_ratio: m.mod_bw,
        fnoise_bw_ratio: m.fn_bw,
        is_dsss: m.dsss,
    })
}

pub fn cmd_recommend(a: &RecommendArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let meta = match &a.meta_file {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<MetaRecord>(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => meta_from_args(&a.meta)?,
    };
    meta.validate().map_err(|e| usage(e.to_string()))?;
    let model = BerModel::load_json(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let rf = recommend_rf(&model, &meta)?;
    let table = recommend_table(&meta);
    let log_ber = rf.predicted_log_ber.expect("forest recommendations carry predictions");
    if a.json {
        let ber: serde_json::Map<String, serde_json::Value> = MitigationKind::ALL
            .iter()
            .map(|k| (k.name().to_string(), json!(10f64.powf(log_ber[k.ordinal()] / 10.0))))
            .collect();
        let doc = json!({
            "chosen": rf.chosen.name(),
            "predicted_ber": ber,
            "warning": rf.warning,
            "table_choice": table.chosen.name(),
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
    } else {
        writeln!(out, "recommended: {}", rf.chosen)?;
        writeln!(out, "predicted BER:")?;
        for k in MitigationKind::ALL {
            let note = if k == MitigationKind::Transversal && !meta.is_dsss { "  (not applicable)" } else { "" };
            writeln!(out, "  {:<12} {:.3e}{note}", k.name(), 10f64.powf(log_ber[k.ordinal()] / 10.0))?;
        }
        writeln!(out, "warning: {}", if rf.warning { "all approaches predicted above 1% BER" } else { "none" })?;
        writeln!(out, "table baseline: {}", table.chosen)?;
    }
    Ok(())
}

fn write_csv_file(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> anyhow::Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "{header}")?;
        for r in rows {
            writeln!(w, "{r}")?;
        }
        Ok(())
    })
}

/// Width of the residual histogram bins in dB.
const HIST_BIN_DB: f64 = 0.5;

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let model = BerModel::load_json(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let data = Dataset::load_csv(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    let test = if a.all { data } else { model.held_out(&data)? };
    if test.is_empty() {
        bail!("no records to evaluate; pass --all to use the whole dataset");
    }
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let report = evaluate_system(&model, &test)?;
    let importance = mdi_importance(&model.forest);
    write_eval_files(&a.out_dir, &report, &importance)?;

    writeln!(out, "evaluated {} records; outputs in {}", test.len(), a.out_dir.display())?;
    for (k, r) in MitigationKind::ALL.iter().zip(&report.rmse) {
        writeln!(out, "  RMSE {:<12} {r:.4}", k.name())?;
    }
    writeln!(out, "  RMSE {:<12} {:.4} (spread SoI only)", "Transversal", report.rmse_transversal_dsss_only)?;
    writeln!(
        out,
        "mean achieved BER: truth {:.3e}, forest {:.3e}, table {:.3e}",
        report.overall.truth, report.overall.rf, report.overall.table
    )?;
    writeln!(
        out,
        "agreement with oracle: forest {:.3}, table {:.3}; forest within 2x of oracle: {:.3}",
        report.rf_agreement, report.table_agreement, report.rf_within_2x
    )?;
    Ok(())
}

fn write_eval_files(dir: &Path, report: &SystemReport, importance: &ImportanceReport) -> anyhow::Result<()> {
    for k in MitigationKind::ALL {
        let o = k.ordinal();
        let rows = report.predictions.iter().map(|p| {
            format!(
                "{},{},{},{},{}",
                p.meta.j2s_db,
                u8::from(p.meta.is_dsss),
                p.meta.interference_type.code(),
                targets(&p.truth)[o],
                p.predicted_log_ber[o]
            )
        });
        let path = dir.join(format!("scatter_{}.csv", k.name().to_ascii_lowercase()));
        write_csv_file(&path, "j2s_db,dsss,interference_type,truth_log_ber,predicted_log_ber", rows)?;
    }

    let mut hist_rows = Vec::new();
    for k in MitigationKind::ALL {
        let o = k.ordinal();
        let mut counts: Vec<usize> = Vec::new();
        for p in &report.predictions {
            let err = (p.predicted_log_ber[o] - targets(&p.truth)[o]).abs();
            let b = (err / HIST_BIN_DB).floor() as usize;
            if counts.len() <= b {
                counts.resize(b + 1, 0);
            }
            counts[b] += 1;
        }
        for (b, c) in counts.into_iter().enumerate() {
            let lo = b as f64 * HIST_BIN_DB;
            hist_rows.push(format!("{},{lo},{},{c}", k.name(), lo + HIST_BIN_DB));
        }
    }
    write_csv_file(&dir.join("error_histogram.csv"), "target,abs_error_lo_db,abs_error_hi_db,count", hist_rows)?;

    let rows =
        report.error_bins.iter().map(|b| format!("{},{},{},{}", b.j2s_center_db, u8::from(b.is_dsss), b.count, b.rmse));
    write_csv_file(&dir.join("rmse_vs_j2s.csv"), "j2s_db,dsss,count,rmse", rows)?;

    let header = format!("feature,combined,{}", kind_names().join(","));
    let rows = (0..NUM_FEATURES).map(|j| {
        let per: Vec<String> = importance.per_target.iter().map(|r| r[j].to_string()).collect();
        format!("{},{},{}", FEATURE_NAMES[j], importance.combined[j], per.join(","))
    });
    write_csv_file(&dir.join("importance.csv"), &header, rows)?;

    let rows = report.bins.iter().map(|b| format!("{},{},{},{},{}", b.j2s_center_db, b.count, b.truth, b.rf, b.table));
    write_csv_file(&dir.join("system.csv"), "j2s_db,count,truth,rf,table", rows)?;

    let names = kind_names();
    let rmse: serde_json::Map<String, serde_json::Value> =
        names.iter().zip(&report.rmse).map(|(n, r)| (n.to_string(), json!(r))).collect();
    let summary = json!({
        "num_records": report.predictions.len(),
        "rmse": rmse,
        "rmse_transversal_dsss_only": report.rmse_transversal_dsss_only,
        "feature_names": FEATURE_NAMES,
        "importance": importance.combined,
        "importance_ranking": importance.ranking().iter().map(|&j| FEATURE_NAMES[j]).collect::<Vec<_>>(),
        "rf_agreement": report.rf_agreement,
        "table_agreement": report.table_agreement,
        "rf_within_2x_of_oracle": report.rf_within_2x,
        "mean_ber_overall": report.overall,
        "mean_ber_high_j2s_chirp": report.high_j2s_chirp,
    });
    write_atomic(&dir.join("summary.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        writeln!(w)?;
        Ok(())
    })
}

pub fn cmd_importance(a: &ImportanceArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let model = BerModel::load_json(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let report = mdi_importance(&model.forest);
    if a.json {
        let doc = json!({
            "feature_names": FEATURE_NAMES,
            "combined": report.combined,
            "per_target": kind_names().iter().zip(&report.per_target)
                .map(|(n, r)| (n.to_string(), json!(r)))
                .collect::<serde_json::Map<_, _>>(),
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
        return Ok(());
    }
    writeln!(out, "combined MDI")?;
    write_importance_table(out, &report, NUM_FEATURES)?;
    for (k, row) in MitigationKind::ALL.iter().zip(&report.per_target) {
        let top = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(j, v)| format!("{} ({v:.3})", FEATURE_NAMES[j]))
            .unwrap_or_default();
        writeln!(out, "{:<12} top feature: {top}", k.name())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interference_names_and_codes() {
        assert_eq!(parse_interference("tone"), Ok(InterferenceType::Tone));
        assert_eq!(parse_interference("Chirp"), Ok(InterferenceType::Chirp));
        assert_eq!(parse_interference("4"), Ok(InterferenceType::FilteredNoise));
        assert!(parse_interference("9").is_err());
        assert!(parse_interference("laser").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}

use nbimr::ber::TrialConfig;
use nbimr::dataset::{generate_with, j2s_grid, InterferenceType, MetaRecord};
use nbimr::forest::ForestParams;
use nbimr::mitigate::MitigationKind;
use nbimr::recommend::{
    argmin_kind, evaluate_system, recommend_from_prediction, recommend_table, table_choice, BerModel, WARNING_BER,
};
use proptest::prelude::*;

fn log_bers() -> impl Strategy<Value = [f64; 5]> {
    prop::array::uniform5(-40.0..-3.0f64)
}

proptest! {
    #[test]
    fn choice_survives_monotone_transforms(v in log_bers(), dsss in any::<bool>(), scale in 0.01..10.0f64, shift in -50.0..50.0f64) {
        let base = argmin_kind(&v, dsss);
        prop_assert_eq!(argmin_kind(&v.map(|x| scale * x + shift), dsss), base);
        prop_assert_eq!(argmin_kind(&v.map(|x| 10f64.powf(x / 10.0)), dsss), base);
        prop_assert_eq!(argmin_kind(&v.map(|x| x.powi(3)), dsss), base);
    }

    #[test]
    fn choice_is_applicable_minimum(v in log_bers(), dsss in any::<bool>()) {
        let r = recommend_from_prediction(v, dsss);
        prop_assert!(dsss || r.chosen != MitigationKind::Transversal);
        for k in MitigationKind::ALL {
            if dsss || k != MitigationKind::Transversal {
                prop_assert!(v[r.chosen.ordinal()] <= v[k.ordinal()]);
            }
        }
    }

    #[test]
    fn warning_is_threshold_of_minimum(v in log_bers(), dsss in any::<bool>()) {
        let r = recommend_from_prediction(v, dsss);
        let min = MitigationKind::ALL
            .iter()
            .filter(|&&k| dsss || k != MitigationKind::Transversal)
            .map(|k| v[k.ordinal()])
            .fold(f64::INFINITY, f64::min);
        prop_assert_eq!(r.warning, 10f64.powf(min / 10.0) > WARNING_BER * (1.0 + 1e-12));
    }

    #[test]
    fn table_depends_only_on_type_and_spreading(j2s in -10.0..10.0f64, snr in 8.0..12.0f64, duty in 0.2..1.0f64, code in 1u8..=5, dsss in any::<bool>()) {
        let t = InterferenceType::from_code(code).unwrap();
        let m = MetaRecord {
            modulation_rank: 2,
            j2s_db: j2s,
            snr_db: snr,
            interference_type: t,
            duty_cycle: duty,
            tone_freq_hz: Some(1e4),
            chirp_rate: None,
            mod_bps: None,
            mod_sps: None,
            mod_bw_ratio: None,
            fnoise_bw_ratio: None,
            is_dsss: dsss,
        };
        let r = recommend_table(&m);
        prop_assert_eq!(r.chosen, table_choice(t, dsss));
        prop_assert!(!r.warning && r.predicted_log_ber.is_none());
    }
}

#[test]
fn table_cells() {
    use InterferenceType as T;
    use MitigationKind as K;
    let expected = [
        (T::None, [K::Unmitigated, K::Unmitigated]),
        (T::Tone, [K::Notch, K::Notch]),
        (T::Chirp, [K::Frft, K::FilterBank]),
        (T::FilteredNoise, [K::FilterBank, K::Transversal]),
        (T::UnknownModulated, [K::FilterBank, K::Transversal]),
    ];
    for (t, [regular, spread]) in expected {
        assert_eq!(table_choice(t, false), regular, "{t:?}");
        assert_eq!(table_choice(t, true), spread, "{t:?}");
    }
}

#[test]
fn memorizing_model_matches_oracle() {
    let trial = TrialConfig { num_bits: 2_000, ..TrialConfig::default() };
    let data = generate_with(3, &j2s_grid(4), 5, &trial, |_, _| {}).unwrap();
    let params =
        ForestParams { num_trees: 1, max_features: 14, min_samples_leaf: 1, max_depth: None, bootstrap: false };
    let (model, held_out) = BerModel::train(&data, &params, 0.0, 1).unwrap();
    assert!(held_out.is_empty());
    let report = evaluate_system(&model, &data).unwrap();
    for p in &report.predictions {
        assert_eq!(p.rf, p.oracle, "{:?}", p.meta);
    }
    for b in &report.bins {
        assert_eq!(b.rf, b.truth);
    }
    assert_eq!(report.rf_agreement, 1.0);
    assert!(report.rmse.iter().all(|&r| r < 1e-9));
    assert!(evaluate_system(&model, &Default::default()).is_err());
}

#[test]
fn model_file_round_trip() {
    let trial = TrialConfig { num_bits: 2_000, ..TrialConfig::default() };
    let data = generate_with(4, &j2s_grid(3), 8, &trial, |_, _| {}).unwrap();
    let params = ForestParams { num_trees: 7, ..ForestParams::default() };
    let (model, test) = BerModel::train(&data, &params, 0.25, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    model.save_json(&path).unwrap();
    let back = BerModel::load_json(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.held_out(&data).unwrap(), test);
    for m in data.metas() {
        assert_eq!(back.predict_log_ber(&m).unwrap(), model.predict_log_ber(&m).unwrap());
    }

    std::fs::write(&path, r#"{"schema_version": 99}"#).unwrap();
    assert!(matches!(BerModel::load_json(&path), Err(nbimr::Error::Schema { .. })));
}

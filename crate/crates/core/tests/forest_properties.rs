use nbimr::forest::{fit_forest, mdi_importance, ForestModel, ForestParams, ForestRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noisy_problem(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.random::<f64>()).collect()).collect();
    let y = x
        .iter()
        .map(|r| {
            vec![10.0 * r[0] - 5.0 * r[1] * r[2] + rng.random_range(-2.0..2.0), r[3] + rng.random_range(-0.5..0.5)]
        })
        .collect();
    (x, y)
}

/// Mean over probe points of the across-seed variance of the first target.
fn prediction_variance(num_trees: usize, x: &[Vec<f64>], y: &[Vec<f64>], probes: &[Vec<f64>]) -> f64 {
    let params = ForestParams { num_trees, max_features: 2, ..ForestParams::default() };
    let preds: Vec<Vec<f64>> = (0..8)
        .map(|seed| {
            let m = fit_forest(x, y, &params, seed).unwrap();
            probes.iter().map(|p| m.predict(p).unwrap()[0]).collect()
        })
        .collect();
    (0..probes.len())
        .map(|j| {
            let mean = preds.iter().map(|p| p[j]).sum::<f64>() / preds.len() as f64;
            preds.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>() / (preds.len() - 1) as f64
        })
        .sum::<f64>()
        / probes.len() as f64
}

#[test]
fn averaging_trees_reduces_variance() {
    let (x, y) = noisy_problem(300, 1);
    let (probes, _) = noisy_problem(50, 2);
    let single = prediction_variance(1, &x, &y, &probes);
    let many = prediction_variance(200, &x, &y, &probes);
    assert!(many < single / 10.0, "{many} vs {single}");
}

#[test]
fn json_round_trip_preserves_predictions() {
    let (x, y) = noisy_problem(400, 3);
    let params = ForestParams { num_trees: 25, max_features: 3, ..ForestParams::default() };
    let model = fit_forest(&x, &y, &params, 11).unwrap();
    let text = serde_json::to_string(&ForestRecord::from(&model)).unwrap();
    let back = ForestModel::try_from(serde_json::from_str::<ForestRecord>(&text).unwrap()).unwrap();
    assert_eq!(back, model);
    let (probes, _) = noisy_problem(1000, 4);
    for p in &probes {
        assert_eq!(back.predict(p).unwrap(), model.predict(p).unwrap());
    }
    assert_eq!(mdi_importance(&back), mdi_importance(&model));
}

#[test]
fn importance_finds_informative_features() {
    let (x, y) = noisy_problem(600, 5);
    let params = ForestParams { num_trees: 50, max_features: 4, ..ForestParams::default() };
    let imp = mdi_importance(&fit_forest(&x, &y, &params, 0).unwrap());
    assert!((imp.combined.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    // Target 1 depends only on feature 3.
    let t1 = &imp.per_target[1];
    assert!(t1[3] > 0.5, "{t1:?}");
}

#[test]
fn forest_beats_single_tree_on_generated_data() {
    use nbimr::ber::TrialConfig;
    use nbimr::dataset::{generate_with, j2s_grid};
    use nbimr::recommend::{evaluate_system, BerModel};

    let trial = TrialConfig { num_bits: 2_000, ..TrialConfig::default() };
    let data = generate_with(10, &j2s_grid(10), 3, &trial, |_, _| {}).unwrap();
    let median_rmse = |num_trees: usize| {
        let params = ForestParams { num_trees, ..ForestParams::default() };
        let mut v: Vec<f64> = (0..5)
            .map(|seed| {
                let (m, test) = BerModel::train(&data, &params, 0.2, seed).unwrap();
                evaluate_system(&m, &test).unwrap().rmse.iter().sum::<f64>()
            })
            .collect();
        v.sort_by(f64::total_cmp);
        v[2]
    };
    let (one, many) = (median_rmse(1), median_rmse(200));
    assert!(many <= one, "{many} vs {one}");
}

mod common;

use common::*;
use fpdist::eval::EvalConfig;
use fpdist::learners::{
    fit_cart, fit_knn, fit_ols, fit_ridge, random_search, Domain, FeatureMatrix, HyperSpace, LearnerKind, LearnerSpec, TreeParams,
    Weighting,
};
use fpdist::synth::planted_feature_pairs;
use fpdist::{FeatureMask, TrainedModel};
use proptest::prelude::*;
use rand::Rng;

fn random_system(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = rng(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
    let y = rows
        .iter()
        .map(|r| r.iter().enumerate().map(|(j, v)| (j as f64 * 0.7 - 3.0) * v).sum::<f64>() + 4.0 + rng.random_range(-0.5..0.5))
        .collect();
    (rows, y)
}

#[test]
fn ols_matches_normal_equations_n200_d10() {
    for seed in 0..5 {
        let (rows, y) = random_system(seed, 200, 10);
        let (w_ref, b_ref) = ols_normal_equations(&rows, &y);
        let model = fit_ols(&FeatureMatrix::from_rows(&rows), &y).unwrap();
        assert!(!model.rank_deficient);
        let (w, b) = model.coefficients();
        for (a, e) in w.iter().zip(&w_ref) {
            assert!((a - e).abs() < 1e-8, "{a} vs {e}");
        }
        assert!((b - b_ref).abs() < 1e-8);
    }
}

#[test]
fn ridge_zero_lambda_is_ols() {
    let (rows, y) = random_system(11, 80, 4);
    let x = FeatureMatrix::from_rows(&rows);
    let (ols, ridge) = (fit_ols(&x, &y).unwrap(), fit_ridge(&x, &y, 0.0).unwrap());
    for r in &rows {
        assert!((ols.predict(r) - ridge.predict(r)).abs() < 1e-8);
    }
}

#[test]
fn ridge_fixed_five_by_two_closed_form() {
    let rows = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![3.0, 5.0], vec![4.0, 3.0], vec![6.0, 7.0]];
    let y = [3.0, 4.0, 9.0, 8.0, 14.0];
    let model = fit_ridge(&FeatureMatrix::from_rows(&rows), &y, 1.0).unwrap();
    let oracle = ridge_closed_form(&rows, &y, 1.0);
    for r in rows.iter().chain([&vec![0.0, 0.0], &vec![10.0, -3.0]]) {
        assert!((model.predict(r) - oracle(r)).abs() < 1e-10);
    }
}

#[test]
fn knn_fixed_six_points() {
    let rows = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 3.0], vec![5.0, 1.0], vec![2.0, 4.0]];
    let y = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let model = fit_knn(&FeatureMatrix::from_rows(&rows), &y, 3, Weighting::Uniform).unwrap();
    for q in [[0.5, 0.5], [4.0, 2.0], [2.0, 3.0], [-1.0, 5.0]] {
        let (idx, pred) = knn_brute(&rows, &y, 3, &q);
        let got: Vec<usize> = model.neighbours(&q).into_iter().map(|(_, i)| i).collect();
        assert_eq!(got, idx);
        assert!((model.predict(&q) - pred).abs() < 1e-12);
    }
}

#[test]
fn cart_matches_exhaustive_on_tiny_sets() {
    let mut rng = rng(21);
    for _ in 0..300 {
        let n = rng.random_range(2..=8);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let depth = rng.random_range(1..=3);
        let tree = fit_cart(&FeatureMatrix::from_rows(&rows), &y, TreeParams { max_depth: Some(depth), min_samples_leaf: 1 }).unwrap();
        let oracle = exhaustive_tree(&rows, &y, depth);
        for r in &rows {
            assert!((tree.predict(r) - oracle.predict(r)).abs() < 1e-9);
        }
    }
}

/// Ridge with one sensible penalty among penalties large enough to shrink
/// every prediction to the mean label, which never falls under 4 m.
fn planted_space(seed: u64) -> HyperSpace {
    HyperSpace { ridge_lambda: Domain::Choice { values: vec![1e6, 1e-3, 1e7, 1e8] }, n_draws: 20, seed, ..Default::default() }
}

#[test]
fn random_search_finds_planted_config() {
    let mut hits = 0;
    for seed in 0..10 {
        let planted = planted_feature_pairs(2000, seed);
        let (train, validation) = planted.pairs.split_at(1500);
        let out =
            random_search(LearnerKind::Ridge, &planted_space(seed), train, validation, &FeatureMask::all(), None, &EvalConfig::default())
                .unwrap();
        assert_eq!(out.trials.len(), 20);
        hits += usize::from(out.best.spec == LearnerSpec::Ridge { lambda: 1e-3 });
    }
    assert!(hits >= 9, "planted config chosen in {hits}/10 seeds");
}

#[test]
fn random_search_is_reproducible_and_single_draw() {
    let planted = planted_feature_pairs(600, 3);
    let (train, validation) = planted.pairs.split_at(450);
    let space = HyperSpace { n_draws: 6, seed: 5, ..Default::default() };
    let cfg = EvalConfig::default();
    let a = random_search(LearnerKind::Cart, &space, train, validation, &FeatureMask::all(), None, &cfg).unwrap();
    let b = random_search(LearnerKind::Cart, &space, train, validation, &FeatureMask::all(), None, &cfg).unwrap();
    assert_eq!(a.trials, b.trials);
    assert_eq!(a.best.spec, b.best.spec);

    let one = HyperSpace { n_draws: 1, ..space };
    let single = random_search(LearnerKind::Knn, &one, train, validation, &FeatureMask::all(), None, &cfg).unwrap();
    assert_eq!(single.trials.len(), 1);
    assert_eq!(single.best.spec, single.trials[0].spec);
    assert_eq!(single.best_index, 0);
}

#[test]
fn trained_models_respect_filter_and_mask() {
    let planted = planted_feature_pairs(400, 8);
    let mask: FeatureMask = "11000000000011".parse().unwrap();
    let model = TrainedModel::train(&LearnerSpec::Ols, &planted.pairs, &mask, Some(20.0)).unwrap();
    assert_eq!(model.n_train, planted.pairs.iter().filter(|p| p.label_m <= 20.0).count());
    assert_eq!(model.train_datasets, vec!["planted".to_string()]);
    let direct = model.predict_pairs(&planted.pairs[..5]);
    for (p, d) in planted.pairs[..5].iter().zip(direct) {
        assert_eq!(model.predict_features(&p.features), d);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_learner_predicts_finite_values(seed in 0u64..1000, n in 12usize..60) {
        let planted = planted_feature_pairs(100, seed);
        let pairs = &planted.pairs[..n];
        for kind in LearnerKind::ALL {
            let spec = match kind.default_spec() {
                LearnerSpec::Knn { weighting, .. } => LearnerSpec::Knn { k: 3, weighting },
                LearnerSpec::Gbt { learning_rate, max_depth, min_samples_leaf, .. } => LearnerSpec::Gbt { n_trees: 10, learning_rate, max_depth, min_samples_leaf },
                s => s,
            };
            let model = TrainedModel::train(&spec, pairs, &FeatureMask::all(), None).unwrap();
            let a = model.predict_pairs(pairs);
            prop_assert!(a.iter().all(|v| v.is_finite()));
            prop_assert_eq!(a, model.predict_pairs(pairs));
        }
    }
}

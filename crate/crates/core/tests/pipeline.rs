use fpdist::fingerprint::{filter_by_label, generate_pairs};
use fpdist::learners::{HyperSpace, LearnerKind};
use fpdist::pipeline::{run_experiment, ExperimentConfig};
use fpdist::select::GaConfig;
use fpdist::synth::{generate_venue, VenueSpec};
use fpdist::PipelineConfig;

#[test]
fn hundred_fingerprint_venue_pairs_fully() {
    let fps = generate_venue(&VenueSpec { fingerprint_count: 100, seed: 3, ..Default::default() }).unwrap();
    let pairs = generate_pairs(&fps, &PipelineConfig::default());
    assert_eq!(pairs.len(), 4950);
    let near = filter_by_label(&pairs, 25.0);
    assert!(near.iter().all(|p| p.label_m <= 25.0));
    assert_eq!(near.len(), pairs.iter().filter(|p| p.label_m <= 25.0).count());
}

#[test]
fn small_experiment_runs_for_each_learner() {
    let fps = generate_venue(&VenueSpec { fingerprint_count: 80, seed: 5, path_loss_exponent: 4.0, ..Default::default() }).unwrap();
    for learner in LearnerKind::ALL {
        let cfg = ExperimentConfig {
            learner,
            ga: GaConfig { population_size: 8, generations: 4, ..Default::default() },
            search: HyperSpace { n_draws: 3, ..Default::default() },
            ..Default::default()
        };
        let s = run_experiment(&fps, &cfg).unwrap();
        assert_eq!(s.spec.kind(), learner);
        assert!(s.mae_model.is_finite() && s.mae_baseline > 0.0);
        assert!(s.mask.count() >= 1);
        assert_eq!(s.n_train + s.n_validation + (s.n_pairs - s.n_train - s.n_validation), s.n_pairs);
    }
}

//! End-to-end runs of the experiment harness.

use delta_uq::encoding::EncodingScheme;
use delta_uq::experiment::{
    run_experiment, AnchorAblation, DataSource, EncodingAblation, Experiment, ExperimentConfig, ExperimentReport,
    RegressionCalibration,
};
use delta_uq::functions::{load_csv, read_table, BenchmarkFn};
use delta_uq::learners::{BaselineKind, ForestConfig, LearnerConfig};

fn griewank(n_train: usize) -> DataSource {
    DataSource::Function {
        function: BenchmarkFn::Griewank { dim: 2 },
        n_train,
        n_test: 300,
    }
}

#[test]
fn more_anchors_rank_errors_at_least_as_well() {
    let seeds = vec![0, 1, 2, 3, 4];
    let cfg = ExperimentConfig::new(Experiment::AnchorAblation(AnchorAblation::default()), seeds.clone());
    let out = run_experiment(&cfg).unwrap();
    assert!(out.succeeded());
    let r = &out.report;
    let wins = seeds
        .iter()
        .filter(|&&s| r.metric(s, "k_50.spearman").unwrap() >= r.metric(s, "k_2.spearman").unwrap())
        .count();
    let show: Vec<_> = seeds.iter().map(|&s| [2, 5, 10, 25, 50].map(|k| r.metric(s, &format!("k_{k}.spearman")).unwrap())).collect();
    assert!(wins >= 4, "K=50 beat K=2 in only {wins}/5 seeds: {show:.3?}");
}

#[test]
fn single_anchor_sweep_records_an_error_entry_and_continues() {
    let cfg = ExperimentConfig::new(
        Experiment::AnchorAblation(AnchorAblation {
            k_values: vec![1, 5],
            ..AnchorAblation::default()
        }),
        vec![0],
    );
    let out = run_experiment(&cfg).unwrap();
    assert!(out.succeeded());
    let seed = &out.report.seeds[0];
    assert!(seed.metric_errors.contains_key("k_1.spearman"));
    assert!(seed.metrics.contains_key("k_5.spearman"));
}

#[test]
fn ablation_reports_every_scheme_and_artifacts_round_trip() {
    let cfg = ExperimentConfig::new(
        Experiment::EncodingAblation(EncodingAblation {
            data: griewank(100),
            ..EncodingAblation::default()
        }),
        vec![3],
    );
    let out = run_experiment(&cfg).unwrap();
    for scheme in EncodingScheme::ALL {
        for metric in ["r2", "mae", "spearman"] {
            assert!(out.report.metric(3, &format!("{}.{metric}", scheme.name())).is_some());
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let paths = out.write(dir.path()).unwrap();
    assert_eq!(ExperimentReport::load(dir.path()).unwrap(), out.report);
    let csv = paths.iter().find(|p| p.extension().is_some_and(|e| e == "csv")).unwrap();
    let table = read_table(csv).unwrap();
    assert_eq!(table.columns, ["scheme", "r2", "mae", "spearman"]);
    assert_eq!(table.rows.len(), EncodingScheme::ALL.len());
    let ds = load_csv(csv, "spearman").unwrap();
    assert_eq!(ds.len(), EncodingScheme::ALL.len());
}

#[test]
fn calibration_run_includes_baseline_and_repeats_exactly() {
    let cfg = ExperimentConfig::new(
        Experiment::RegressionCalibration(RegressionCalibration {
            data: griewank(80),
            learner: LearnerConfig::Forest(ForestConfig::default()),
            baseline: Some(BaselineKind::Ensemble { members: 3 }),
            ..RegressionCalibration::default()
        }),
        vec![0, 1],
    );
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    for s in [0, 1] {
        assert!(a.report.metric(s, "baseline.spearman").is_some());
        assert_eq!(a.report.seeds[s as usize].metrics, b.report.seeds[s as usize].metrics);
    }
    assert_eq!(a.report.aggregates["r2"].n, 2);
    let dir = tempfile::tempdir().unwrap();
    a.write(dir.path()).unwrap();
    let ds = load_csv(dir.path().join("predictions_seed1.csv"), "y").unwrap();
    assert_eq!(ds.len(), 300);
}

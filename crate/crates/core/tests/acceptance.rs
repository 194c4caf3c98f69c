//! Acceptance criteria, one pass/fail line each.
//!
//! Everything runs inside a single test so the wall-clock budgets are
//! measured without other tests competing for the CPU. Set
//! `ACCEPTANCE_ONLY=2,5` to run a subset.

use std::time::{Duration, Instant};

use delta_uq::encoding::{
    decode, encode, marginalized_predict, AnchorPrior, AnchoredPredictor, EncodingScheme,
};
use delta_uq::experiment::{
    run_experiment, CalibrationShift, DataSource, EncodingAblation, Experiment, ExperimentConfig, ExperimentReport,
    OodExperiment,
};
use delta_uq::functions::{make_blobs, BenchmarkFn};
use delta_uq::learners::{
    train_anchored_forest, train_anchored_ksvm, train_anchored_mlp, train_baseline, BaselineKind, Dataset,
    ForestConfig, KsvmConfig, LearnerConfig, MlpConfig,
};
use delta_uq::mbo::{laplace_objective, run_mbo, train_inverse, InverseConfig, MboConfig};
use delta_uq::metrics::{auroc, ece, median, spearman};
use delta_uq::rng::seeded;
use delta_uq::smo::{expected_improvement, run_smo, SmoConfig};
use ndarray::{array, Array2, ArrayView2};
use rand::Rng as _;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within_budget(elapsed: Duration, minutes: u64) -> (bool, String) {
    let ok = elapsed <= Duration::from_secs(60 * minutes);
    (ok, format!("runtime {:.0}s (budget {minutes} min)", elapsed.as_secs_f64()))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn run(cfg: &ExperimentConfig) -> ExperimentReport {
    let out = run_experiment(cfg).expect("experiment runs");
    assert!(out.succeeded(), "failed seeds: {:?}", out.report.seeds);
    out.report
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for (function, min_gain) in [(BenchmarkFn::Griewank { dim: 2 }, 0.15), (BenchmarkFn::Ackley { dim: 2 }, 0.10)] {
        let cfg = ExperimentConfig::new(
            Experiment::EncodingAblation(EncodingAblation {
                data: DataSource::Function {
                    function,
                    n_train: 200,
                    n_test: 1000,
                },
                learner: LearnerConfig::Forest(ForestConfig {
                    n_trees: 5,
                    anchor_replication: 5,
                    ..ForestConfig::default()
                }),
                schemes: vec![EncodingScheme::Identity, EncodingScheme::SingleAnchor],
                ..EncodingAblation::default()
            }),
            SEEDS.to_vec(),
        );
        let r = run(&cfg);
        let rho_single = mean(&r.metric_values("single-anchor.spearman"));
        let rho_identity = mean(&r.metric_values("identity.spearman"));
        let r2_single = mean(&r.metric_values("single-anchor.r2"));
        let r2_identity = mean(&r.metric_values("identity.r2"));
        let ok = rho_single - rho_identity >= min_gain && (r2_single - r2_identity).abs() <= 0.05;
        pass &= ok;
        parts.push(format!(
            "{}: spearman {rho_single:.3} vs identity {rho_identity:.3} (need +{min_gain}), R² {r2_single:.3} vs {r2_identity:.3}",
            function.name()
        ));
    }
    let (ok, t) = within_budget(start.elapsed(), 2);
    parts.push(t);
    check(pass && ok, parts.join("; "))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let cases = [
        (BenchmarkFn::Sinusoid, 50, 7.5),
        (BenchmarkFn::MultiOptima, 50, 0.80),
        (BenchmarkFn::Booth, 20, -0.30),
        (BenchmarkFn::LeviN13, 50, -0.40),
        (BenchmarkFn::Ackley { dim: 2 }, 50, -0.5),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (objective, n_iterations, bound) in cases {
        let bests: Vec<f64> = SEEDS
            .iter()
            .map(|&seed| {
                let cfg = SmoConfig {
                    objective,
                    n_iterations,
                    seed,
                    ..SmoConfig::default()
                };
                run_smo(&cfg).expect("smo runs").best()
            })
            .collect();
        let m = mean(&bests);
        pass &= m >= bound;
        parts.push(format!("{} {m:.4} (need >= {bound})", objective.name()));
    }
    let (ok, t) = within_budget(start.elapsed(), 15);
    parts.push(t);
    check(pass && ok, parts.join("; "))
}

/// Compass search from a grid point, so optima that fall between grid nodes
/// are still reached.
fn polish(f: BenchmarkFn, mut x: Vec<f64>) -> f64 {
    let (lo, hi) = f.bounds();
    let mut best = f.objective(&x).expect("inside the domain");
    let mut step = (hi - lo) / 100.0;
    while step > 1e-12 {
        let mut moved = false;
        for j in 0..x.len() {
            for dir in [-1.0, 1.0] {
                let mut y = x.clone();
                y[j] = (y[j] + dir * step).clamp(lo, hi);
                let v = f.objective(&y).expect("inside the domain");
                if v > best {
                    (x, best, moved) = (y, v, true);
                }
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    best
}

fn criterion_3() -> Outcome {
    let cases = [
        (BenchmarkFn::MultiOptima, 10_000, 0.951, 0.01),
        (BenchmarkFn::Sinusoid, 10_000, 7.622, 0.01),
        (BenchmarkFn::Booth, 500, 0.0, 1e-6),
        (BenchmarkFn::LeviN13, 500, 0.0, 1e-6),
        (BenchmarkFn::Ackley { dim: 2 }, 500, 0.0, 1e-6),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (f, per_dim, stated, tol) in cases {
        let (at, _) = f.grid_max(per_dim).expect("grid evaluates");
        let max = polish(f, at);
        let ok = (max - stated).abs() <= tol;
        pass &= ok;
        parts.push(format!("{} {max:.6} vs {stated} ± {tol}", f.name()));
    }
    check(pass, parts.join("; "))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let results: Vec<_> = SEEDS
        .iter()
        .map(|&seed| run_mbo(&MboConfig { seed, ..MboConfig::default() }).expect("mbo runs"))
        .collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for fraction in [0.7, 0.8] {
        let pick = |weighted: bool| -> Vec<f64> {
            results
                .iter()
                .map(|r| {
                    let t = r.targets.iter().find(|t| t.fraction == fraction).expect("target present");
                    if weighted {
                        t.weighted.abs_error
                    } else {
                        t.vanilla.abs_error
                    }
                })
                .collect()
        };
        let (w, v) = (mean(&pick(true)), mean(&pick(false)));
        pass &= w <= v;
        parts.push(format!("y*={fraction}d |err| weighted {w:.3} vs vanilla {v:.3}"));
    }
    let rel: Vec<f64> = results
        .iter()
        .map(|r| {
            let t = r.targets.iter().find(|t| t.fraction == 0.4).expect("target present");
            t.weighted.abs_error / t.target
        })
        .collect();
    let worst = rel.iter().copied().fold(0.0, f64::max);
    let mean_rel = mean(&rel);
    pass &= mean_rel <= 0.05;
    parts.push(format!(
        "y*=0.4d mean relative error {:.2}% (worst seed {:.2}%)",
        100.0 * mean_rel,
        100.0 * worst
    ));
    let (ok, t) = within_budget(start.elapsed(), 10);
    parts.push(t);
    check(pass && ok, parts.join("; "))
}

fn criterion_5() -> Outcome {
    let cfg = ExperimentConfig::new(
        Experiment::Ood(OodExperiment {
            schemes: vec![EncodingScheme::SingleAnchor, EncodingScheme::Identity],
            ..OodExperiment::default()
        }),
        SEEDS.to_vec(),
    );
    let r = run(&cfg);
    let single = r.metric_values("single-anchor.auroc");
    let identity = r.metric_values("identity.auroc");
    let wins = single.iter().zip(&identity).filter(|(s, i)| s >= i).count();
    let m = mean(&single);
    check(
        m >= 0.85 && wins >= 4,
        format!(
            "mean AUROC {m:.3} (need >= 0.85, per seed {single:.3?}); beats identity ({identity:.3?}) in {wins}/5 seeds (need >= 4)"
        ),
    )
}

fn criterion_6() -> Outcome {
    let cfg = ExperimentConfig::new(Experiment::CalibrationShift(CalibrationShift::default()), SEEDS.to_vec());
    let r = run(&cfg);
    let mut pass = true;
    let mut parts = Vec::new();
    for i in 3..=5 {
        let d = median(&r.metric_values(&format!("intensity_{i}.ece_delta"))).expect("seeds present");
        let p = median(&r.metric_values(&format!("intensity_{i}.ece_plain"))).expect("seeds present");
        pass &= d <= p;
        parts.push(format!("intensity {i}: median ECE {d:.4} vs plain {p:.4}"));
    }
    check(pass, parts.join("; "))
}

/// `f(a, e) = Σa + Σe`: anchors cancel under the single-anchor encoding.
struct AnchorSum;

impl AnchoredPredictor for AnchorSum {
    fn scheme(&self) -> EncodingScheme {
        EncodingScheme::SingleAnchor
    }
    fn input_dim(&self) -> usize {
        3
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn predict_tuples(&self, t: ArrayView2<'_, f64>) -> delta_uq::Result<Array2<f64>> {
        Ok(t.sum_axis(ndarray::Axis(1)).insert_axis(ndarray::Axis(1)))
    }
}

fn criterion_7() -> Outcome {
    let mut failures = Vec::new();
    let mut note = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    // Encode/decode reconstruction.
    let mut rng = seeded(7);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let d = rng.gen_range(1..6);
        let mut v = || (0..d).map(|_| rng.gen_range(-1e3..1e3)).collect::<Vec<f64>>();
        let (x, r1, r2) = (v(), v(), v());
        for scheme in EncodingScheme::ALL {
            let anchors = if scheme == EncodingScheme::DoubleAnchor { vec![r1.clone(), r2.clone()] } else { vec![r1.clone()] };
            let a = &encode(&x, &anchors, scheme).expect("encodes")[0];
            let back = decode(a, scheme).expect("decodes");
            let scale = x.iter().chain(anchors.iter().flatten()).fold(0.0f64, |m, v| m.max(v.abs()));
            for (b, xi) in back.iter().zip(&x) {
                worst = worst.max((b - xi).abs() / (f64::EPSILON * scale * 3.0));
            }
        }
    }
    note(worst <= 4.0, "encode/decode reconstruction");

    // Anchor cancellation.
    let prior = AnchorPrior::standard_normal(3).expect("prior");
    let mut cancel = true;
    for seed in 0..200 {
        let mut r = seeded(seed);
        let x: Vec<f64> = (0..3).map(|_| r.gen_range(-10.0..10.0)).collect();
        let s = marginalized_predict(&AnchorSum, &x, &prior, 16, &mut r).expect("predicts");
        cancel &= s.variance[0] <= 1e-24 && (s.mean[0] - x.iter().sum::<f64>()).abs() <= 1e-12;
    }
    note(cancel, "anchor cancellation");

    // EI sign and small-sigma limit.
    let mut ei_ok = true;
    for (mu, best) in [(1.3, 1.0), (0.7, 1.0), (1.0, 1.0), (-3.0, 2.0)] {
        for e in 1..=9 {
            let sigma = 10f64.powi(-e);
            let ei = expected_improvement(mu, sigma, best).expect("ei");
            ei_ok &= ei >= 0.0 && (ei - f64::max(0.0, mu - best)).abs() <= 0.4 * sigma + 1e-15;
        }
    }
    note(ei_ok, "EI limit");

    // Metric oracles.
    let rank_pearson = {
        let (ra, rb) = ([1.5, 1.5, 3.0], [1.0, 2.0, 3.0]);
        let (ma, mb) = (2.0, 2.0);
        let cov: f64 = ra.iter().zip(&rb).map(|(a, b)| (a - ma) * (b - mb)).sum();
        let va: f64 = ra.iter().map(|a| (a - ma).powi(2)).sum();
        let vb: f64 = rb.iter().map(|b| (b - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    };
    let metrics_ok = spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).is_ok_and(|v| (v - 1.0).abs() < 1e-12)
        && spearman(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]).is_ok_and(|v| (v + 1.0).abs() < 1e-12)
        && spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).is_ok_and(|v| (v - rank_pearson).abs() < 1e-12)
        && auroc(&[0.0, 1.0], &[2.0, 3.0]).is_ok_and(|v| v == 1.0)
        && auroc(&[1.0, 1.0], &[1.0, 1.0]).is_ok_and(|v| v == 0.5)
        && auroc(&[1.0, 2.0], &[1.5, 3.0]).is_ok_and(|v| v == 0.75)
        && {
            let probs = Array2::from_shape_fn((10, 2), |(_, c)| if c == 0 { 0.8 } else { 0.2 });
            let labels = [0, 0, 0, 0, 0, 0, 0, 0, 1, 1];
            ece(probs.view(), &labels, 15).is_ok_and(|r| r.ece.abs() < 1e-12)
        }
        && {
            let probs = array![[1.0, 0.0], [1.0, 0.0]];
            ece(probs.view(), &[0, 1], 15).is_ok_and(|r| (r.ece - 0.5).abs() < 1e-12)
        }
        && {
            let probs = array![[0.5, 0.5]];
            ece(probs.view(), &[0], 15)
                .is_ok_and(|r| (r.nll - 2f64.ln()).abs() < 1e-12 && (r.brier - 0.5).abs() < 1e-12)
        };
    note(metrics_ok, "metric oracles");

    // First-order condition of the Laplace objective in b.
    let mut foc = true;
    for (mu, target) in [(3.0f64, 1.0f64), (-2.0, 5.5), (0.25, 0.0), (10.0, -10.0)] {
        let err: f64 = (mu - target).abs();
        let (mut lo, mut hi) = (1e-6, 100.0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        while hi - lo > 1e-10 {
            let (a, b) = (hi - g * (hi - lo), lo + g * (hi - lo));
            if laplace_objective(mu, a, target) < laplace_objective(mu, b, target) {
                hi = b;
            } else {
                lo = a;
            }
        }
        foc &= ((lo + hi) / 2.0 - err).abs() <= 1e-4;
    }
    note(foc, "Laplace first-order condition");

    // Seed determinism of every trainer.
    let x = Array2::from_shape_fn((30, 2), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
    let y: Vec<f64> = x.rows().into_iter().map(|r| r[0] - 2.0 * r[1]).collect();
    let reg = Dataset::regression_1d(x.clone(), y).expect("dataset");
    let p = AnchorPrior::train_distribution(reg.inputs()).expect("prior");
    let mlp = MlpConfig {
        hidden_layers: vec![8],
        epochs: 5,
        batch_size: 8,
        seed: 3,
        ..MlpConfig::default()
    };
    let forest = ForestConfig {
        seed: 3,
        ..ForestConfig::default()
    };
    let blobs = make_blobs(&[vec![0.0, 0.0], vec![2.0, 2.0]], 30, 0.5, 3).expect("blobs");
    let bp = AnchorPrior::train_distribution(blobs.inputs()).expect("prior");
    let ksvm = KsvmConfig {
        seed: 3,
        ..KsvmConfig::default()
    };
    let ens = LearnerConfig::Mlp(mlp.clone());
    let deterministic = EncodingScheme::ALL.iter().all(|&s| {
        train_anchored_mlp(&reg, &mlp, s, p.clone()).ok() == train_anchored_mlp(&reg, &mlp, s, p.clone()).ok()
            && train_anchored_forest(&reg, &forest, s, p.clone()).ok()
                == train_anchored_forest(&reg, &forest, s, p.clone()).ok()
            && train_anchored_ksvm(&blobs, &ksvm, s, bp.clone()).ok()
                == train_anchored_ksvm(&blobs, &ksvm, s, bp.clone()).ok()
    }) && train_baseline(&reg, BaselineKind::Ensemble { members: 2 }, &ens).ok()
        == train_baseline(&reg, BaselineKind::Ensemble { members: 2 }, &ens).ok()
        && {
            let inv = InverseConfig {
                latent_dim: 2,
                latent_draws: 3,
                mlp: MlpConfig {
                    epochs: 3,
                    ..mlp.clone()
                },
            };
            train_inverse(&reg, &inv).ok() == train_inverse(&reg, &inv).ok()
        }
        && {
            let cfg = SmoConfig {
                n_iterations: 2,
                pool_size: 32,
                hidden_layers: vec![8],
                refit_epochs: Some(5),
                seed: 3,
                ..SmoConfig::default()
            };
            run_smo(&cfg).ok() == run_smo(&cfg).ok()
        };
    note(deterministic, "seed determinism");

    let pass = failures.is_empty();
    check(
        pass,
        if pass {
            "reconstruction (10⁴ cases), anchor cancellation, EI limit, metric oracles, Laplace first-order condition, seed determinism".to_string()
        } else {
            format!("failed: {}", failures.join(", "))
        },
    )
}

#[test]
fn acceptance() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    type Criterion = (usize, &'static str, fn() -> Outcome);
    let criteria: [Criterion; 7] = [
        (1, "encoding ablation", criterion_1),
        (2, "sequential optimization", criterion_2),
        (3, "benchmark oracles", criterion_3),
        (4, "model-based optimization", criterion_4),
        (5, "OOD detection", criterion_5),
        (6, "calibration under shift", criterion_6),
        (7, "property suites", criterion_7),
    ];
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("[{verdict}] {id}. {name} ({:.1}s): {}", start.elapsed().as_secs_f64(), o.detail);
        if !o.pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}

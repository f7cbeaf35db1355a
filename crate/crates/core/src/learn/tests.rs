use super::*;
use crate::channel::{Modulation, TerrainCategory};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn features(distance: f64, noise: f64, snr: f64, rx: f64) -> FeedbackFeatures {
    FeedbackFeatures {
        distance,
        noise,
        terrain: TerrainCategory::Terrain1,
        snr,
        rx,
        modulation: Modulation::Bpsk,
    }
}

fn ex(distance: f64, noise: f64, snr: f64, rx: f64, ack: bool) -> LabeledExample {
    LabeledExample {
        features: features(distance, noise, snr, rx),
        label: AckState::from_received(ack),
    }
}

/// Label decided by `snr > 0`; `rx` is pure noise.
fn separable(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let ack = i % 2 == 0;
            let s: f64 = rng.random_range(0.5..5.0);
            let noise: f64 = rng.sample(StandardNormal);
            ex(400.0, -100.0, if ack { s } else { -s }, noise, ack)
        })
        .collect()
}

/// Label is the XOR of two binary features; everything else constant.
fn xor_data(n: usize) -> Dataset {
    (0..n)
        .map(|i| {
            let a = (i % 2) as f64;
            let b = ((i / 2) % 2) as f64;
            ex(a, b, 10.0, -90.0, (a != b) as u8 == 1)
        })
        .collect()
}

fn xor_config() -> TrainConfig {
    TrainConfig {
        mlp: MlpConfig {
            learning_rate: 0.5,
            epochs: 300,
            ..MlpConfig::default()
        },
        ..TrainConfig::default()
    }
}

fn constant_model(ack: bool) -> ClassifierModel {
    ClassifierModel {
        family: Family::LogisticRegression,
        selected_features: vec![3],
        params: ModelParams::LogisticRegression {
            encoder: Encoder::fit(&[[0.0; NUM_FEATURES]], &[3]),
            model: Logistic {
                weights: vec![0.0],
                bias: if ack { 1.0 } else { -1.0 },
            },
        },
        validation_accuracy: 0.0,
    }
}

#[test]
fn split_sizes_and_determinism() {
    let data = separable(100, 1);
    let spec = SplitSpec {
        train_fraction: 0.8,
        seed: 9,
    };
    let (tr, va) = split(&data, spec).unwrap();
    assert_eq!((tr.len(), va.len()), (80, 20));
    let (tr2, va2) = split(&data, spec).unwrap();
    assert_eq!(tr, tr2);
    assert_eq!(va, va2);
    let (nak, ack) = tr.label_counts();
    assert!(nak.abs_diff(ack) <= 1);
    let (nak, ack) = va.label_counts();
    assert!(nak.abs_diff(ack) <= 1);
    // disjoint and exhaustive: every example lands exactly once
    let mut all: Vec<String> = tr
        .examples
        .iter()
        .chain(&va.examples)
        .map(|e| format!("{:?}", e))
        .collect();
    all.sort();
    let mut orig: Vec<String> = data.examples.iter().map(|e| format!("{:?}", e)).collect();
    orig.sort();
    assert_eq!(all, orig);
}

#[test]
fn split_errors() {
    assert!(matches!(
        split(&Dataset::default(), SplitSpec::default()),
        Err(LearnError::Empty)
    ));
    let one = Dataset::new(vec![ex(1.0, 1.0, 1.0, 1.0, true)]);
    assert!(matches!(split(&one, SplitSpec::default()), Err(LearnError::TooSmall(1))));
    let bad = SplitSpec {
        train_fraction: 1.0,
        seed: 0,
    };
    assert!(split(&separable(10, 0), bad).is_err());
    let (tr, va) = split(
        &separable(2, 0),
        SplitSpec {
            train_fraction: 0.9,
            seed: 0,
        },
    )
    .unwrap();
    assert_eq!((tr.len(), va.len()), (1, 1));
}

#[test]
fn naive_bayes_midpoint_boundary() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data: Dataset = (0..4000)
        .map(|i| {
            let ack = i % 2 == 1;
            let z: f64 = rng.sample(StandardNormal);
            ex(400.0, -100.0, if ack { 10.0 + z } else { z }, -90.0, ack)
        })
        .collect();
    let model = train(Family::GaussianNaiveBayes, &data, &[3], &TrainConfig::default()).unwrap();
    assert!(evaluate(&model, &data).unwrap() > 0.99);
    let mut boundary = None;
    for i in 0..=10_000 {
        let x = i as f64 * 0.001;
        if model.predict(&features(400.0, -100.0, x, -90.0)) == AckState::Ack {
            boundary = Some(x);
            break;
        }
    }
    let b = boundary.unwrap();
    assert!((b - 5.0).abs() < 0.15, "boundary {b}");
    // at the NAK class mean
    assert_eq!(model.predict(&features(400.0, -100.0, 0.0, -90.0)), AckState::Nak);
}

#[test]
fn naive_bayes_tolerates_single_class_and_constant_features() {
    let data: Dataset = (0..20).map(|_| ex(400.0, -100.0, 12.0, -88.0, true)).collect();
    let model =
        train(Family::GaussianNaiveBayes, &data, &[0, 1, 3, 4], &TrainConfig::default()).unwrap();
    assert_eq!(model.predict(&features(1.0, 2.0, 3.0, 4.0)), AckState::Ack);
    for family in [Family::DecisionTree, Family::LogisticRegression, Family::Mlp] {
        assert!(matches!(
            train(family, &data, &[3], &TrainConfig::default()),
            Err(LearnError::SingleClass(_))
        ));
    }
}

#[test]
fn logistic_fits_separable_data() {
    let data = separable(200, 2);
    let model = train(Family::LogisticRegression, &data, &[3, 4], &TrainConfig::default()).unwrap();
    assert_eq!(evaluate(&model, &data).unwrap(), 1.0);
}

#[test]
fn zero_weight_logistic_ties_to_nak() {
    let model = ClassifierModel {
        family: Family::LogisticRegression,
        selected_features: vec![3],
        params: ModelParams::LogisticRegression {
            encoder: Encoder::fit(&[[0.0; NUM_FEATURES]], &[3]),
            model: Logistic::zeros(1),
        },
        validation_accuracy: 0.0,
    };
    assert_eq!(model.predict(&features(1.0, 1.0, 7.0, 1.0)), AckState::Nak);
}

#[test]
fn predictions_are_deterministic() {
    let data = separable(200, 3);
    for family in Family::ALL {
        let model = train(family, &data, &[3, 4], &TrainConfig::default()).unwrap();
        for e in &data.examples {
            assert_eq!(model.predict(&e.features), model.predict(&e.features));
        }
        let again = train(family, &data, &[3, 4], &TrainConfig::default()).unwrap();
        assert_eq!(model, again);
    }
}

#[test]
fn evaluate_counts() {
    let data: Dataset = (0..10).map(|i| ex(0.0, 0.0, 0.0, 0.0, i < 7)).collect();
    assert!((evaluate(&constant_model(true), &data).unwrap() - 0.7).abs() < 1e-12);
    assert!(matches!(
        evaluate(&constant_model(true), &Dataset::default()),
        Err(LearnError::Empty)
    ));

    // snr > 0 predicts ACK; three labels disagree with that rule.
    let rule = train(Family::LogisticRegression, &separable(200, 5), &[3], &TrainConfig::default())
        .unwrap();
    let fixture: Dataset = [
        (2.0, true),
        (3.0, true),
        (-1.0, false),
        (-4.0, false),
        (1.5, true),
        (-2.5, false),
        (4.0, true),
        (2.0, false),
        (-3.0, true),
        (3.5, false),
    ]
    .iter()
    .map(|&(s, ack)| ex(400.0, -100.0, s, 0.0, ack))
    .collect();
    assert!((evaluate(&rule, &fixture).unwrap() - 0.7).abs() < 1e-12);
    assert_eq!(evaluate(&rule, &separable(100, 6)).unwrap(), 1.0);
}

#[test]
fn selection_finds_separating_feature() {
    let data = separable(300, 7);
    let (tr, va) = split(&data, SplitSpec::default()).unwrap();
    for family in Family::ALL {
        let feats = choose_attributes(&tr, family, &va, &TrainConfig::default()).unwrap();
        assert!(feats.contains(&3), "{family}: {feats:?}");
        let model = train(family, &tr, &feats, &TrainConfig::default()).unwrap();
        assert_eq!(evaluate(&model, &va).unwrap(), 1.0, "{family}");
    }
}

#[test]
fn selection_ignores_duplicates() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data: Dataset = (0..300)
        .map(|i| {
            let ack = i % 2 == 0;
            let v: f64 = if ack { 1.0 } else { -1.0 } * rng.random_range(0.5..3.0);
            ex(v, v, v, v, ack)
        })
        .collect();
    let (tr, va) = split(&data, SplitSpec::default()).unwrap();
    for family in Family::ALL {
        let feats = choose_attributes(&tr, family, &va, &TrainConfig::default()).unwrap();
        assert_eq!(feats.len(), 1, "{family}: {feats:?}");
    }
}

#[test]
fn selection_recovers_xor_pair_for_mlp() {
    let data = xor_data(800);
    let (tr, va) = split(&data, SplitSpec::default()).unwrap();
    let cfg = xor_config();
    // Oracle: exhaustive search over subsets of the informative features.
    let mut best: Option<(f64, Vec<usize>)> = None;
    for subset in [vec![0], vec![1], vec![0, 1]] {
        let m = train(Family::Mlp, &tr, &subset, &cfg).unwrap();
        let acc = evaluate(&m, &va).unwrap();
        if best.as_ref().is_none_or(|(a, _)| acc > *a) {
            best = Some((acc, subset));
        }
    }
    let (oracle_acc, oracle_subset) = best.unwrap();
    assert_eq!(oracle_subset, vec![0, 1]);
    assert!(oracle_acc > 0.99);
    let feats = choose_attributes(&tr, Family::Mlp, &va, &cfg).unwrap();
    assert_eq!(feats, vec![0, 1]);
}

#[test]
fn select_singleton_family() {
    let sel = train_select(
        &separable(200, 9),
        &[Family::GaussianNaiveBayes],
        SplitSpec::default(),
        &TrainConfig::default(),
    )
    .unwrap();
    assert_eq!(sel.best.family, Family::GaussianNaiveBayes);
    assert_eq!(sel.candidates.len(), 1);
}

#[test]
fn select_prefers_mlp_on_xor() {
    let sel = train_select(
        &xor_data(800),
        &[Family::GaussianNaiveBayes, Family::Mlp],
        SplitSpec::default(),
        &xor_config(),
    )
    .unwrap();
    assert_eq!(sel.best.family, Family::Mlp);
    assert!(sel.best.validation_accuracy > 0.99);
    let nb = sel
        .candidates
        .iter()
        .find(|c| c.family == Family::GaussianNaiveBayes)
        .unwrap();
    assert!((nb.validation_accuracy - 0.5).abs() < 0.1, "{}", nb.validation_accuracy);
}

#[test]
fn selected_model_is_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let data: Dataset = (0..400)
        .map(|_| {
            let ack = rng.random_bool(0.5);
            let s: f64 = rng.sample::<f64, _>(StandardNormal) + if ack { 1.5 } else { -1.5 };
            ex(400.0, -100.0, s, rng.sample(StandardNormal), ack)
        })
        .collect();
    let sel = train_select(&data, &Family::ALL, SplitSpec::default(), &TrainConfig::default())
        .unwrap();
    assert_eq!(sel.candidates.len(), 4);
    let best = evaluate(&sel.best, &sel.validation).unwrap();
    for c in &sel.candidates {
        assert!(best >= evaluate(c, &sel.validation).unwrap());
    }
}

#[test]
fn select_fails_when_every_family_fails() {
    let data: Dataset = (0..20).map(|_| ex(1.0, 1.0, 1.0, 1.0, false)).collect();
    let r = train_select(
        &data,
        &[Family::DecisionTree, Family::Mlp],
        SplitSpec::default(),
        &TrainConfig::default(),
    );
    assert!(matches!(r, Err(LearnError::NoCandidate(_))));
}

#[test]
fn training_accuracy_beats_majority_baseline() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let data: Dataset = (0..300)
        .map(|_| {
            let ack = rng.random_bool(0.7);
            let s: f64 = rng.sample::<f64, _>(StandardNormal) + if ack { 1.0 } else { -1.0 };
            ex(400.0, -100.0, s, -90.0, ack)
        })
        .collect();
    let (nak, ack) = data.label_counts();
    let baseline = nak.max(ack) as f64 / data.len() as f64;
    for family in Family::ALL {
        let m = train(family, &data, &[3], &TrainConfig::default()).unwrap();
        assert!(evaluate(&m, &data).unwrap() >= baseline, "{family}");
    }
}

#[test]
fn tree_respects_limits() {
    let data = separable(500, 12);
    let cfg = TrainConfig::default();
    let model = train(Family::DecisionTree, &data, &[3, 4], &cfg).unwrap();
    if let ModelParams::DecisionTree(t) = &model.params {
        assert!(t.depth() <= cfg.tree.max_depth);
    } else {
        unreachable!();
    }
}

#[test]
fn mlp_full_batch_loss_is_non_increasing() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let rows: Vec<[f64; 2]> = (0..200)
        .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)])
        .collect();
    let y: Vec<bool> = rows.iter().map(|r| r[0] + 0.5 * r[1] > 0.0).collect();
    let x = Matrix::from_rows(2, rows.iter());
    let cfg = MlpConfig {
        batch_size: 200,
        epochs: 200,
        ..MlpConfig::default()
    };
    let (_, history) = Mlp::fit(&x, &y, cfg, 3);
    for w in history.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
    }
    assert!(history.last().unwrap() < &history[0]);
}

#[test]
fn mlp_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let net = Mlp::init(3, 5, &mut rng);
    let rows: Vec<[f64; 3]> = (0..8)
        .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)])
        .collect();
    let y: Vec<bool> = (0..8).map(|i| i % 3 == 0).collect();
    let x = Matrix::from_rows(3, rows.iter());
    let analytic = net.gradient(&x, &y);
    let base = net.parameters();
    let h = 1e-6;
    let mut probe = net.clone();
    for k in 0..base.len() {
        let mut p = base.clone();
        p[k] += h;
        probe.set_parameters(&p);
        let up = probe.loss(&x, &y);
        p[k] -= 2.0 * h;
        probe.set_parameters(&p);
        let down = probe.loss(&x, &y);
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[k].abs().max(numeric.abs()).max(1e-8);
        assert!((analytic[k] - numeric).abs() / denom < 1e-4, "param {k}");
    }
}

#[test]
fn model_file_round_trip_is_exact() {
    let data = separable(200, 15);
    for family in Family::ALL {
        let mut model = train(family, &data, &[3, 4], &TrainConfig::default()).unwrap();
        model.validation_accuracy = 0.1 + 0.2;
        let mut buf = Vec::new();
        model.save(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("ncml-classifier"));
        let back = ClassifierModel::load(buf.as_slice()).unwrap();
        assert_eq!(back, model, "{family}");
    }
    assert!(ClassifierModel::load(&b"{\"format\":\"x\"}"[..]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tree_predictions_invariant_to_positive_scaling(
        seed in 0u64..1000,
        scale in 0.01f64..100.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<(f64, f64, bool)> = (0..120)
            .map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                (a, b, a * a + b > 0.5)
            })
            .collect();
        let base: Dataset = pts.iter().map(|&(a, b, l)| ex(400.0, -100.0, a, b, l)).collect();
        let scaled: Dataset =
            pts.iter().map(|&(a, b, l)| ex(400.0, -100.0, a * scale, b, l)).collect();
        prop_assume!(base.has_both_classes());
        let cfg = TrainConfig::default();
        let m1 = train(Family::DecisionTree, &base, &[3, 4], &cfg).unwrap();
        let m2 = train(Family::DecisionTree, &scaled, &[3, 4], &cfg).unwrap();
        // Probe away from training points so no threshold is hit within rounding.
        for _ in 0..200 {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            prop_assert_eq!(
                m1.predict(&features(400.0, -100.0, a, b)),
                m2.predict(&features(400.0, -100.0, a * scale, b))
            );
        }
    }
}

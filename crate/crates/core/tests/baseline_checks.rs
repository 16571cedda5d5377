mod oracle;

use oracle::{central_difference, dense_logistic_loss, relative_error, scalar_adamw_first_step};
use proptest::prelude::*;
use wikilink_core::baseline::{batch_gradient, dimension, featurize, BaselineModel, FeatureVector, Gradient};
use wikilink_core::{PairClassifier, SentencePair, TrainConfig};

const HASH_BITS: u32 = 3;

fn feature_vector() -> impl Strategy<Value = FeatureVector> {
    (
        proptest::collection::vec((0u32..(1 << HASH_BITS), -2.0f64..2.0), 0..6),
        proptest::array::uniform3(-2.0f64..2.0),
    )
        .prop_map(|(sparse, d)| FeatureVector::from_parts(HASH_BITS, sparse, [d[0], d[1], d[2], 1.0]).unwrap())
}

fn dense_row(x: &FeatureVector) -> Vec<f64> {
    let mut row = vec![0.0; x.dimension()];
    for (i, v) in x.iter() {
        row[i] += v;
    }
    row
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradient_matches_finite_differences(
        batch in proptest::collection::vec((feature_vector(), 0u8..2), 1..6),
        weights in proptest::collection::vec(-1.5f64..1.5, dimension(HASH_BITS)),
    ) {
        let batch: Vec<(FeatureVector, f64)> = batch.into_iter().map(|(x, y)| (x, f64::from(y))).collect();
        let rows: Vec<(Vec<f64>, f64)> = batch.iter().map(|(x, y)| (dense_row(x), *y)).collect();
        let analytic = batch_gradient(&weights, &batch).to_dense(weights.len());
        let numeric = central_difference(|w| dense_logistic_loss(w, &rows), &weights, 1e-5);
        prop_assert!(relative_error(&analytic, &numeric) <= 1e-5,
            "analytic {:?} numeric {:?}", analytic, numeric);
    }

    #[test]
    fn batch_gradient_ignores_order(
        batch in proptest::collection::vec((feature_vector(), 0u8..2), 1..8),
        weights in proptest::collection::vec(-1.0f64..1.0, dimension(HASH_BITS)),
    ) {
        let batch: Vec<(FeatureVector, f64)> = batch.into_iter().map(|(x, y)| (x, f64::from(y))).collect();
        let mut reversed = batch.clone();
        reversed.reverse();
        let a = batch_gradient(&weights, &batch).to_dense(weights.len());
        let b = batch_gradient(&weights, &reversed).to_dense(weights.len());
        // Summation order only perturbs the last bits.
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn probabilities_inside_unit_interval(
        weights in proptest::collection::vec(-1e3f64..1e3, dimension(HASH_BITS)),
        premise in proptest::collection::vec("[a-d]{1,2}", 0..6),
        hypothesis in proptest::collection::vec("[a-d]{1,2}", 0..6),
    ) {
        let mut model = BaselineModel::new(TrainConfig { hash_bits: HASH_BITS, ..TrainConfig::default() }).unwrap();
        model.weights_mut().copy_from_slice(&weights);
        let pair = SentencePair { pair_id: "x".into(), premise, hypothesis, label: None };
        let p = model.probability(&pair);
        prop_assert!(p > 0.0 && p < 1.0);
        let prediction = model.predict(&pair);
        prop_assert_eq!(prediction.label == 1, p >= 0.5);
    }

    #[test]
    fn featurize_is_deterministic(
        premise in proptest::collection::vec("[a-z]{1,3}", 0..10),
        hypothesis in proptest::collection::vec("[a-z]{1,3}", 0..10),
    ) {
        let pair = SentencePair { pair_id: "x".into(), premise, hypothesis, label: None };
        let a = featurize(&pair, 12);
        prop_assert_eq!(&a, &featurize(&pair, 12));
        prop_assert!(a.iter().all(|(i, v)| i < dimension(12) && v.is_finite()));
    }
}

#[test]
fn pinned_feature_indices() {
    // Stable across runs and platforms: fixed hash, fixed namespaces.
    let pair = SentencePair {
        pair_id: "x".into(),
        premise: vec!["alpha".into(), "beta".into()],
        hypothesis: vec!["beta".into()],
        label: None,
    };
    let fv = featurize(&pair, 18);
    let indices: Vec<u32> = fv.sparse().iter().map(|&(i, _)| i).collect();
    assert_eq!(indices, PINNED_INDICES);
}

// P:alpha, P:beta, P:alpha beta, H:beta, S:beta under FNV-1a, 18 bits, sorted.
const PINNED_INDICES: [u32; 5] = pinned();

const fn fnv(bytes: &[u8]) -> u32 {
    let mut hash: u64 = 0xcbf29ce484222325;
    let mut i = 0;
    while i < bytes.len() {
        hash ^= bytes[i] as u64;
        hash = hash.wrapping_mul(0x100000001b3);
        i += 1;
    }
    (hash & ((1 << 18) - 1)) as u32
}

const fn pinned() -> [u32; 5] {
    let mut v = [
        fnv(b"P\x1falpha"),
        fnv(b"P\x1fbeta"),
        fnv(b"P\x1falpha beta"),
        fnv(b"H\x1fbeta"),
        fnv(b"S\x1fbeta"),
    ];
    // insertion sort
    let mut i = 1;
    while i < v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            let t = v[j];
            v[j] = v[j - 1];
            v[j - 1] = t;
            j -= 1;
        }
        i += 1;
    }
    v
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn adamw_single_step_scalar() {
    for g in [1.0, -3.5, 1e-4, 250.0, -1e-9] {
        let config = TrainConfig {
            hash_bits: 2,
            weight_decay: 0.0,
            learning_rate: 0.01,
            ..TrainConfig::default()
        };
        let mut model = BaselineModel::new(config.clone()).unwrap();
        model.adamw_step(&Gradient::from_entries(vec![(1, g)]), &config).unwrap();
        let expected = scalar_adamw_first_step(0.0, g, 0.01, 0.9, 0.999, 1e-8, 0.0);
        assert!(rel(model.weights()[1], expected) <= 1e-12, "g={g}");
        // Closed form: -lr * g / (|g| + eps).
        assert!(rel(model.weights()[1], -0.01 * g / (g.abs() + 1e-8)) <= 1e-12, "g={g}");
    }
}

#[test]
fn adamw_decoupled_decay_scalar() {
    let (lr, decay, w) = (0.01, 0.1, 0.8);
    let config = TrainConfig {
        hash_bits: 2,
        weight_decay: decay,
        learning_rate: lr,
        ..TrainConfig::default()
    };
    let mut model = BaselineModel::new(config.clone()).unwrap();
    model.weights_mut()[2] = w;
    model.adamw_step(&Gradient::default(), &config).unwrap();
    let expected = w - lr * decay * w;
    assert!(rel(model.weights()[2], expected) <= 1e-12);
    assert!(rel(model.weights()[2], scalar_adamw_first_step(w, 0.0, lr, 0.9, 0.999, 1e-8, decay)) <= 1e-12);
}

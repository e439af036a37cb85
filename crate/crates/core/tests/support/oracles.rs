//! Validator and k-NN learner against independent oracles.

use psi_core::schema::validator::validate;
use psi_core::Value;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{knn_oracle, naive_validator};

fn to_psi(v: &serde_json::Value) -> Value {
    Value::from_json(v.clone()).unwrap()
}

pub fn validator_agrees_with_naive_interpreter(cases: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut valid, mut invalid) = (0, 0);
    for case in 0..cases {
        let schema = naive_validator::schema(&mut rng, 3);
        let value = naive_validator::value_for(&mut rng, &schema, 3);
        let expected = naive_validator::valid(&value, &schema);
        let actual = validate(&to_psi(&value), &to_psi(&schema)).is_valid();
        assert_eq!(
            actual, expected,
            "case {case}: value {value} schema {schema}"
        );
        if expected {
            valid += 1;
        } else {
            invalid += 1;
        }
    }
    // Both outcomes must be well represented for the comparison to mean much.
    assert!(
        valid > cases / 6 && invalid > cases / 6,
        "valid {valid}, invalid {invalid}"
    );
}

pub fn knn_agrees_with_brute_force() {
    let w = super::world();
    let points = knn_oracle::load_iris(&super::data_dir().join("iris.csv"));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in [1, 3, 5] {
        let predictor = super::train_knn(&w.svc, Some(k));
        for _ in 0..50 {
            // A 0.1 grid over the data's range makes distance ties common.
            let probe = [
                rng.gen_range(43..=79) as f64 / 10.0,
                rng.gen_range(20..=44) as f64 / 10.0,
                rng.gen_range(10..=69) as f64 / 10.0,
                rng.gen_range(1..=25) as f64 / 10.0,
            ];
            let expected = knn_oracle::classify(&points, k as usize, &probe);
            let point = Value::Array(probe.iter().map(|x| Value::Number(*x)).collect());
            let actual = super::predict(&w.svc, &predictor, &point);
            assert_eq!(
                actual,
                Value::from(expected.as_str()),
                "k={k} probe {probe:?}"
            );
        }
    }
}

pub fn knn_on_training_points_with_k1_returns_their_label() {
    let w = super::world();
    let points = knn_oracle::load_iris(&super::data_dir().join("iris.csv"));
    let predictor = super::train_knn(&w.svc, None);
    for p in points.iter().step_by(7) {
        let point = Value::Array(p.features.iter().map(|x| Value::Number(*x)).collect());
        let expected = knn_oracle::classify(&points, 1, &p.features);
        assert_eq!(
            super::predict(&w.svc, &predictor, &point),
            Value::from(expected.as_str())
        );
    }
}

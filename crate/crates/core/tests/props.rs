//! Property tests for the numeric kernels and corpus invariants.

mod common;

use proptest::prelude::*;
use proptest::test_runner::FileFailurePersistence;

use memnet_core::corpus::{location_of, Instance, Polarity, Token};
use memnet_core::linalg::{matvec, softmax, Matrix, Vector};
use memnet_core::model::{forward, LocationMode, ModelConfig};

proptest! {
    #![proptest_config(ProptestConfig {
        failure_persistence: Some(Box::new(FileFailurePersistence::Off)),
        ..ProptestConfig::default()
    })]

    #[test]
    fn softmax_sums_to_one(values in prop::collection::vec(-1e3..1e3f64, 1..=24)) {
        let out = softmax(&Vector::from_vec(values));
        let sum: f64 = out.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        for v in out.iter() {
            // exp(min - max) underflows to exactly 0 once the spread passes
            // ~745, so only the upper bound is exact for arbitrary input
            prop_assert!(*v >= 0.0 && *v <= 1.0);
        }
    }

    #[test]
    fn softmax_is_strictly_positive_within_exp_range(
        values in prop::collection::vec(-300.0..300.0f64, 1..=24),
    ) {
        let out = softmax(&Vector::from_vec(values));
        for v in out.iter() {
            prop_assert!(*v > 0.0 && *v <= 1.0);
        }
    }

    #[test]
    fn softmax_is_shift_invariant(
        values in prop::collection::vec(-1e3..1e3f64, 1..=16),
        shift in -500.0..500.0f64,
    ) {
        let base = softmax(&Vector::from_vec(values.clone()));
        let shifted = softmax(&Vector::from_vec(
            values.iter().map(|v| v + shift).collect(),
        ));
        let argmax = |v: &Vector| {
            (0..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best })
        };
        prop_assert_eq!(argmax(&base), argmax(&shifted));
        for i in 0..base.len() {
            prop_assert!((base[i] - shifted[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn matvec_agrees_with_scalar_loop(
        rows in 1..6usize,
        cols in 1..6usize,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = Matrix::from_flat(
            (0..rows * cols).map(|_| rng.gen_range(-10.0..10.0)).collect(),
            rows,
            cols,
        );
        let x = Vector::from_vec((0..cols).map(|_| rng.gen_range(-10.0..10.0)).collect());
        let got = matvec(&m, &x);
        for r in 0..rows {
            let mut want = 0.0;
            for c in 0..cols {
                want += m.get(r, c) * x[c];
            }
            prop_assert!((got[r] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn location_is_symmetric_under_reversal(
        len in 3..12usize,
        aspect_start in 0..11usize,
        context in 0..11usize,
    ) {
        let aspect_start = aspect_start % len;
        let context = context % len;
        prop_assume!(context != aspect_start);
        let inst = synthetic_instance(len, aspect_start..aspect_start + 1);
        let reversed = synthetic_instance(len, len - 1 - aspect_start..len - aspect_start);
        prop_assert_eq!(
            location_of(&inst, context),
            location_of(&reversed, len - 1 - context)
        );
    }

    #[test]
    fn model2_row_norm_never_grows_with_distance(
        norm_scale in 0.1..5.0f64,
        n in 4..30usize,
    ) {
        // for a fixed embedding norm, (1 - l/n) shrinks as l grows
        let mut prev = f64::INFINITY;
        for l in 1..n {
            let factor = 1.0 - l as f64 / n as f64;
            let row_norm = factor * norm_scale;
            prop_assert!(row_norm <= prev + 1e-12);
            prev = row_norm;
        }
    }
}

fn synthetic_instance(len: usize, aspect_span: std::ops::Range<usize>) -> Instance {
    let tokens: Vec<Token> = (0..len)
        .map(|i| Token {
            text: format!("w{i}"),
            char_start: i * 3,
            char_end: i * 3 + 2,
        })
        .collect();
    Instance {
        raw_text: tokens
            .iter()
            .map(|t| t.text.clone())
            .collect::<Vec<_>>()
            .join(" "),
        tokens,
        aspect_span,
        label: Polarity::Neutral,
    }
}

/// Permuting the context tokens (content-only mode) permutes the memory rows
/// and their weights together, so the attended output and the class
/// probabilities stay fixed.
#[test]
fn forward_is_context_permutation_invariant_without_location() {
    use common::{synth_table, well_scaled_params};

    let table = synth_table(6, 30, 1.0, 3);
    let params = well_scaled_params(ModelConfig::new(6, 3, LocationMode::None), 8);

    let base = vec!["w1", "w2", "w3", "w4", "w5"];
    let permuted = vec!["w4", "w1", "w5", "w3", "w2"];
    let build = |words: &[&str]| -> Instance {
        let mut tokens = Vec::new();
        let mut pos = 0;
        // aspect token first so the context permutation leaves its span alone
        for w in std::iter::once("w9").chain(words.iter().copied()) {
            tokens.push(Token {
                text: w.to_string(),
                char_start: pos,
                char_end: pos + w.len(),
            });
            pos += w.len() + 1;
        }
        Instance {
            raw_text: String::new(),
            tokens,
            aspect_span: 0..1,
            label: Polarity::Positive,
        }
    };

    let a = forward(&build(&base), &table, &params).unwrap();
    let b = forward(&build(&permuted), &table, &params).unwrap();
    for hop in 0..3 {
        for j in 0..6 {
            assert!(
                (a.hops[hop].output[j] - b.hops[hop].output[j]).abs() < 1e-12,
                "hop {hop} component {j}"
            );
        }
    }
    for c in 0..3 {
        assert!((a.probs[c] - b.probs[c]).abs() < 1e-12);
    }
}

/// The same permutation with Model 2 changes the distances and therefore the
/// output; this pins down that the invariance above is about content-only
/// attention, not an accident of the test data.
#[test]
fn forward_is_location_sensitive_with_model2() {
    use common::{synth_table, well_scaled_params};
    use memnet_core::model::forward;

    let table = synth_table(6, 30, 1.0, 3);
    let params = well_scaled_params(ModelConfig::new(6, 1, LocationMode::Model2), 8);
    let build = |words: &[&str]| -> Instance {
        let mut tokens = Vec::new();
        let mut pos = 0;
        for w in std::iter::once("w9").chain(words.iter().copied()) {
            tokens.push(Token {
                text: w.to_string(),
                char_start: pos,
                char_end: pos + w.len(),
            });
            pos += w.len() + 1;
        }
        Instance {
            raw_text: String::new(),
            tokens,
            aspect_span: 0..1,
            label: Polarity::Positive,
        }
    };
    let a = forward(&build(&["w1", "w2", "w3", "w4", "w5"]), &table, &params).unwrap();
    let b = forward(&build(&["w5", "w4", "w3", "w2", "w1"]), &table, &params).unwrap();
    let diff: f64 = (0..6)
        .map(|j| (a.hops[0].output[j] - b.hops[0].output[j]).abs())
        .sum();
    assert!(diff > 1e-9, "Model 2 output ignored the permutation");
}

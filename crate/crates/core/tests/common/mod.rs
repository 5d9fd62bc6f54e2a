//! Shared helpers for the integration and acceptance suites.
#![allow(dead_code)] // each test binary uses its own subset

use std::io::Cursor;
use std::path::PathBuf;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use memnet_core::corpus::{parse_semeval_xml, Instance, Polarity, Token};
use memnet_core::embed::EmbeddingTable;
use memnet_core::model::{forward, MemNetParams, ModelConfig};
use memnet_core::train::loss;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn load_toy_train() -> (Vec<Instance>, memnet_core::DatasetStats, EmbeddingTable) {
    let (instances, stats) = parse_semeval_xml(&fixture_dir().join("toy_train.xml")).unwrap();
    let vocab = memnet_core::corpus::vocabulary(&instances);
    let table =
        EmbeddingTable::load_glove(&fixture_dir().join("toy_embeddings.txt"), Some(&vocab), 42)
            .unwrap();
    (instances, stats, table)
}

pub fn load_toy_test() -> (Vec<Instance>, memnet_core::DatasetStats) {
    parse_semeval_xml(&fixture_dir().join("toy_test.xml")).unwrap()
}

/// Embedding table over a synthetic vocabulary w0..w{n-1}, entries uniform
/// in [-scale, scale].
pub fn synth_table(dim: usize, vocab: usize, scale: f64, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::new();
    for w in 0..vocab {
        text.push_str(&format!("w{w}"));
        for _ in 0..dim {
            text.push_str(&format!(" {:.6}", rng.gen_range(-scale..scale)));
        }
        text.push('\n');
    }
    EmbeddingTable::from_reader(Cursor::new(text), None, seed).unwrap()
}

/// A random instance of `len` tokens drawn from the synthetic vocabulary,
/// with a 1- or 2-token aspect span placed anywhere.
pub fn synth_instance(len: usize, vocab: usize, rng: &mut ChaCha8Rng) -> Instance {
    assert!(len >= 3);
    let words: Vec<String> = (0..len)
        .map(|_| format!("w{}", rng.gen_range(0..vocab)))
        .collect();
    let aspect_len = if len > 4 && rng.gen_bool(0.3) { 2 } else { 1 };
    let start = rng.gen_range(0..=len - aspect_len);
    let mut tokens = Vec::new();
    let mut pos = 0usize;
    for w in &words {
        tokens.push(Token {
            text: w.clone(),
            char_start: pos,
            char_end: pos + w.chars().count(),
        });
        pos += w.chars().count() + 1;
    }
    let label = Polarity::from_index(rng.gen_range(0..3));
    Instance {
        tokens,
        aspect_span: start..start + aspect_len,
        label,
        raw_text: words.join(" "),
    }
}

/// Parameters with entries scaled to roughly U(-0.5, 0.5), large enough that
/// every gradient path carries signal (the training init of U(-0.01, 0.01)
/// leaves attention nearly uniform and some true gradients below the
/// finite-difference noise floor).
pub fn well_scaled_params(config: ModelConfig, seed: u64) -> MemNetParams {
    let mut params = MemNetParams::init(config, seed);
    for (i, v) in params.flatten().iter().enumerate() {
        params.set_flat(i, v * 50.0);
    }
    params
}

/// Central finite differences of the per-instance loss over every learnable
/// parameter, in the flattening order. Independent of the backward pass: it
/// only evaluates the forward model.
pub fn finite_difference_gradient(
    instance: &Instance,
    table: &EmbeddingTable,
    params: &MemNetParams,
    eps: f64,
) -> Vec<f64> {
    let base = params.flatten();
    let mut fd = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut plus = params.clone();
        plus.set_flat(i, base[i] + eps);
        let lp = loss(
            &forward(instance, table, &plus).unwrap().probs,
            instance.label,
        );
        let mut minus = params.clone();
        minus.set_flat(i, base[i] - eps);
        let lm = loss(
            &forward(instance, table, &minus).unwrap().probs,
            instance.label,
        );
        fd.push((lp - lm) / (2.0 * eps));
    }
    fd
}

pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// Serializes criteria within the test binary: the runtime-scaling
/// measurement must not share the CPU with the other checks.
static CRITERION_LOCK: std::sync::Mutex<()> = std::sync::Mutex::new(());

/// Run one acceptance criterion, printing a pass/fail line either way.
pub fn criterion<F: FnOnce() + std::panic::UnwindSafe>(name: &str, body: F) {
    let _guard = CRITERION_LOCK
        .lock()
        .unwrap_or_else(|poisoned| poisoned.into_inner());
    match std::panic::catch_unwind(body) {
        Ok(()) => println!("ACCEPTANCE {name}: PASS"),
        Err(e) => {
            println!("ACCEPTANCE {name}: FAIL");
            std::panic::resume_unwind(e);
        }
    }
}

//! Synthetic corpus and embedding builders shared by the criterion benches.

use std::io::Cursor;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use memnet_core::corpus::{Instance, Polarity, Token};
use memnet_core::embed::EmbeddingTable;

/// Embedding table over a synthetic vocabulary w0..w{n-1}.
pub fn synth_table(dim: usize, vocab: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::new();
    for w in 0..vocab {
        text.push_str(&format!("w{w}"));
        for _ in 0..dim {
            text.push_str(&format!(" {:.6}", rng.gen_range(-1.0..1.0)));
        }
        text.push('\n');
    }
    EmbeddingTable::from_reader(Cursor::new(text), None, seed).expect("synthetic table")
}

/// Random instance with a single-token aspect somewhere in the sentence.
pub fn synth_instance(len: usize, vocab: usize, rng: &mut ChaCha8Rng) -> Instance {
    assert!(len >= 3);
    let words: Vec<String> = (0..len)
        .map(|_| format!("w{}", rng.gen_range(0..vocab)))
        .collect();
    let aspect = rng.gen_range(0..len);
    let mut tokens = Vec::new();
    let mut pos = 0usize;
    for w in &words {
        tokens.push(Token {
            text: w.clone(),
            char_start: pos,
            char_end: pos + w.len(),
        });
        pos += w.len() + 1;
    }
    Instance {
        raw_text: words.join(" "),
        tokens,
        aspect_span: aspect..aspect + 1,
        label: Polarity::from_index(rng.gen_range(0..3)),
    }
}

/// A corpus of `count` random sentences of 8..=16 tokens.
pub fn synth_corpus(count: usize, vocab: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let len = rng.gen_range(8..=16);
            synth_instance(len, vocab, &mut rng)
        })
        .collect()
}

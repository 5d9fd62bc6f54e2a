//! GloVe-format embedding loading and lookup.
//!
//! Word vectors are frozen: training never writes to the table. Words missing
//! from the file get a vector drawn once from U(-0.01, 0.01), seeded per word
//! so the assignment does not depend on lookup order. The cache of those
//! vectors travels with checkpoints so later evaluation sees the same model.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;
use std::sync::Mutex;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{fnv1a, Instance};
use crate::error::{Error, Result};
use crate::linalg::{scale, Matrix, Vector};

/// Half-width of the uniform range used for out-of-vocabulary vectors.
pub const OOV_RANGE: f64 = 0.01;

/// Frozen word vectors plus the out-of-vocabulary cache.
#[derive(Debug)]
pub struct EmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    matrix: Matrix,
    oov_seed: u64,
    oov_cache: Mutex<HashMap<String, Vector>>,
}

impl EmbeddingTable {
    /// Load a whitespace-separated text embedding file: one word followed by
    /// d floats per line. The dimension is inferred from the first line and
    /// enforced on every later one. `vocab_filter`, when given, keeps only
    /// the listed words, which is how the 1.9M-word files stay loadable.
    pub fn load_glove(
        path: &Path,
        vocab_filter: Option<&HashSet<String>>,
        oov_seed: u64,
    ) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(std::io::BufReader::new(file), vocab_filter, oov_seed).map_err(|e| {
            match e {
                Error::EmbeddingFormat { line, message, .. } => Error::EmbeddingFormat {
                    path: path.to_path_buf(),
                    line,
                    message,
                },
                other => other,
            }
        })
    }

    /// Same as [`load_glove`](Self::load_glove) but from any reader.
    pub fn from_reader(
        reader: impl BufRead,
        vocab_filter: Option<&HashSet<String>>,
        oov_seed: u64,
    ) -> Result<Self> {
        let format_err = |line: usize, message: String| Error::EmbeddingFormat {
            path: "<reader>".into(),
            line,
            message,
        };

        let mut dim = 0usize;
        let mut index = HashMap::new();
        let mut data: Vec<f64> = Vec::new();

        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.map_err(|e| format_err(lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields
                .next()
                .ok_or_else(|| format_err(lineno, "missing word".into()))?;
            let count = fields.clone().count();
            if dim == 0 {
                if count == 0 {
                    return Err(format_err(lineno, "no vector components".into()));
                }
                dim = count;
            } else if count != dim {
                return Err(format_err(
                    lineno,
                    format!("expected {dim} components, found {count}"),
                ));
            }

            let keep = vocab_filter.map_or(true, |f| f.contains(word));
            if !keep || index.contains_key(word) {
                continue;
            }
            let row = index.len();
            for f in fields {
                let v: f64 = f
                    .parse()
                    .map_err(|_| format_err(lineno, format!("bad float {f:?}")))?;
                data.push(v);
            }
            index.insert(word.to_string(), row);
        }

        if dim == 0 {
            return Err(format_err(0, "empty embedding file".into()));
        }
        // A filter can exclude every word in the file; keep a 1-row zero
        // matrix so the table stays well-formed.
        let rows = index.len().max(1);
        data.resize(rows * dim, 0.0);
        Ok(EmbeddingTable {
            dim,
            index,
            matrix: Matrix::from_flat(data, rows, dim),
            oov_seed,
            oov_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of in-vocabulary words.
    pub fn vocab_len(&self) -> usize {
        self.index.len()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Embedding of a word. Known words return their stored row; unknown
    /// words get a cached per-word random vector.
    pub fn embed_token(&self, word: &str) -> Vector {
        if let Some(&row) = self.index.get(word) {
            return Vector::from_vec(self.matrix.row(row).to_vec());
        }
        let mut cache = self.oov_cache.lock().expect("oov cache poisoned");
        cache
            .entry(word.to_string())
            .or_insert_with(|| oov_vector(self.oov_seed, word, self.dim))
            .clone()
    }

    /// Aspect representation: the embedding for a single-token aspect, the
    /// mean of the constituent embeddings for a multi-token one.
    pub fn aspect_vector(&self, instance: &Instance) -> Vector {
        let span = instance.aspect_span.clone();
        assert!(!span.is_empty(), "aspect span must be non-empty");
        let mut sum = Vector::zeros(self.dim);
        for i in span.clone() {
            sum.add_scaled(&self.embed_token(&instance.tokens[i].text), 1.0);
        }
        scale(&sum, 1.0 / span.len() as f64)
    }

    /// Hash over the stored matrix, used to verify training never touches it.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for v in self.matrix.as_slice() {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }

    /// Snapshot of the OOV cache, sorted by word for deterministic output.
    pub fn oov_snapshot(&self) -> Vec<(String, Vector)> {
        let cache = self.oov_cache.lock().expect("oov cache poisoned");
        let mut entries: Vec<_> = cache.iter().map(|(w, v)| (w.clone(), v.clone())).collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        entries
    }

    /// Pre-populate the OOV cache, e.g. from a loaded checkpoint.
    pub fn preload_oov(&self, entries: impl IntoIterator<Item = (String, Vector)>) {
        let mut cache = self.oov_cache.lock().expect("oov cache poisoned");
        for (word, vec) in entries {
            assert_eq!(vec.len(), self.dim, "oov vector dimension mismatch");
            cache.insert(word, vec);
        }
    }
}

fn oov_vector(oov_seed: u64, word: &str, dim: usize) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(oov_seed ^ fnv1a(word.as_bytes()));
    let dist = Uniform::new(-OOV_RANGE, OOV_RANGE);
    Vector::from_vec((0..dim).map(|_| dist.sample(&mut rng)).collect())
}

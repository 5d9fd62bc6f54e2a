//! The deep memory network: context-word memory with optional location
//! encoding, multi-hop content attention, and a softmax classifier.
//!
//! Each hop scores every memory row against the current query with a
//! feed-forward net, turns the scores into weights with a softmax, and sums
//! the rows by weight. That attended vector plus a linear transform of the
//! query becomes the next query. Attention and linear parameters are shared
//! across hops, so the parameter count does not depend on the hop count.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{location_of, Instance, Polarity};
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::linalg::{add, matvec, sigmoid, softmax, Matrix, Vector};

/// How memory rows encode the distance between context word and aspect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocationMode {
    /// Content only: the memory row is the word embedding.
    None,
    /// Component-wise ramp weighting, fixed.
    Model1,
    /// Scalar (1 - l/n) weighting, fixed.
    Model2,
    /// Learned location vector added to the embedding.
    Model3,
    /// Learned location vector gating the embedding through a sigmoid.
    Model4,
}

impl LocationMode {
    pub const ALL: [LocationMode; 5] = [
        LocationMode::None,
        LocationMode::Model1,
        LocationMode::Model2,
        LocationMode::Model3,
        LocationMode::Model4,
    ];

    /// Whether this mode learns a location table (and so needs gradients
    /// through it).
    pub fn learns_location(self) -> bool {
        matches!(self, LocationMode::Model3 | LocationMode::Model4)
    }

    pub fn name(self) -> &'static str {
        match self {
            LocationMode::None => "none",
            LocationMode::Model1 => "1",
            LocationMode::Model2 => "2",
            LocationMode::Model3 => "3",
            LocationMode::Model4 => "4",
        }
    }

    pub fn parse(s: &str) -> Option<LocationMode> {
        match s {
            "none" => Some(LocationMode::None),
            "1" => Some(LocationMode::Model1),
            "2" => Some(LocationMode::Model2),
            "3" => Some(LocationMode::Model3),
            "4" => Some(LocationMode::Model4),
            _ => None,
        }
    }
}

impl std::fmt::Display for LocationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Structural configuration of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    /// Embedding dimension d.
    pub dim: usize,
    /// Number of output classes.
    pub classes: usize,
    /// Number of computational layers.
    pub hops: usize,
    pub mode: LocationMode,
    /// Rows in the learned location table (Models 3/4); larger distances
    /// clamp to the last row.
    pub max_len: usize,
    /// Alternate reading of the Model 1 ramp where the scale index is the
    /// hop number instead of the vector component, making memory vary per
    /// hop. Off by default; kept so the two readings can be compared.
    pub hop_indexed_ramp: bool,
}

pub const NUM_CLASSES: usize = 3;
pub const DEFAULT_MAX_LEN: usize = 100;

impl ModelConfig {
    pub fn new(dim: usize, hops: usize, mode: LocationMode) -> Self {
        assert!(dim > 0, "dim must be positive");
        assert!(hops > 0, "hops must be positive");
        ModelConfig {
            dim,
            classes: NUM_CLASSES,
            hops,
            mode,
            max_len: DEFAULT_MAX_LEN,
            hop_indexed_ramp: false,
        }
    }

    /// Memory varies across hops only under the hop-indexed Model 1 ramp.
    pub fn memory_varies_per_hop(&self) -> bool {
        self.hop_indexed_ramp && self.mode == LocationMode::Model1
    }
}

/// All learnable parameters. The attention and linear weights are shared by
/// every hop.
#[derive(Debug, Clone, PartialEq)]
pub struct MemNetParams {
    pub config: ModelConfig,
    /// Scoring weights, length 2d: first half applies to the memory row,
    /// second half to the query.
    pub attn_weights: Vector,
    /// Scoring bias.
    pub attn_bias: f64,
    /// d x d transform applied to the query on the skip path.
    pub linear: Matrix,
    /// classes x d softmax layer.
    pub classifier: Matrix,
    pub classifier_bias: Vector,
    /// max_len x d learned location vectors, present for Models 3/4 only.
    pub loc_table: Option<Matrix>,
}

impl MemNetParams {
    /// All learnable entries drawn i.i.d. from U(-0.01, 0.01).
    pub fn init(config: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new(-0.01, 0.01);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| dist.sample(&mut rng)).collect() };

        let d = config.dim;
        let c = config.classes;
        let attn_weights = Vector::from_vec(draw(2 * d));
        let attn_bias = draw(1)[0];
        let linear = Matrix::from_flat(draw(d * d), d, d);
        let classifier = Matrix::from_flat(draw(c * d), c, d);
        let classifier_bias = Vector::from_vec(draw(c));
        let loc_table = config
            .mode
            .learns_location()
            .then(|| Matrix::from_flat(draw(config.max_len * d), config.max_len, d));

        MemNetParams {
            config,
            attn_weights,
            attn_bias,
            linear,
            classifier,
            classifier_bias,
            loc_table,
        }
    }

    /// Zero-valued parameters with the same shapes, handy for tests and as
    /// gradient accumulators.
    pub fn zeros(config: ModelConfig) -> Self {
        let d = config.dim;
        let c = config.classes;
        MemNetParams {
            config,
            attn_weights: Vector::zeros(2 * d),
            attn_bias: 0.0,
            linear: Matrix::zeros(d, d),
            classifier: Matrix::zeros(c, d),
            classifier_bias: Vector::zeros(c),
            loc_table: config
                .mode
                .learns_location()
                .then(|| Matrix::zeros(config.max_len, d)),
        }
    }

    /// Number of learnable scalars. A function of the shapes only, never of
    /// the hop count.
    pub fn param_count(&self) -> usize {
        let d = self.config.dim;
        let c = self.config.classes;
        let loc = self.loc_table.as_ref().map_or(0, |t| t.rows() * t.cols());
        2 * d + 1 + d * d + c * d + c + loc
    }

    /// Flatten every learnable entry into one vector. The order (attention
    /// weights, attention bias, linear, classifier, classifier bias,
    /// location table) is the contract shared with `set_flat`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(self.attn_weights.as_slice());
        out.push(self.attn_bias);
        out.extend_from_slice(self.linear.as_slice());
        out.extend_from_slice(self.classifier.as_slice());
        out.extend_from_slice(self.classifier_bias.as_slice());
        if let Some(t) = &self.loc_table {
            out.extend_from_slice(t.as_slice());
        }
        out
    }

    /// Overwrite the flattened entry at `idx`. Same ordering as `flatten`.
    pub fn set_flat(&mut self, idx: usize, value: f64) {
        let mut i = idx;
        let blocks: [&mut [f64]; 5] = [
            self.attn_weights.as_mut_slice(),
            std::slice::from_mut(&mut self.attn_bias),
            self.linear.as_mut_slice(),
            self.classifier.as_mut_slice(),
            self.classifier_bias.as_mut_slice(),
        ];
        for block in blocks {
            if i < block.len() {
                block[i] = value;
                return;
            }
            i -= block.len();
        }
        if let Some(t) = &mut self.loc_table {
            let s = t.as_mut_slice();
            if i < s.len() {
                s[i] = value;
                return;
            }
        }
        panic!("flat index {idx} out of range");
    }

    /// Row of the location table for a given distance; distances past the
    /// table clamp to the last row.
    pub fn loc_row(&self, distance: usize) -> usize {
        distance.min(self.config.max_len - 1)
    }
}

/// Everything the forward pass computed, retained for backprop and for the
/// attention reports.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// One matrix when memory is shared across hops, one per hop otherwise.
    memories: Vec<Matrix>,
    /// The aspect vector, query of the first hop.
    pub query0: Vector,
    pub hops: Vec<HopTrace>,
    /// Class probabilities.
    pub probs: Vector,
}

#[derive(Debug, Clone)]
pub struct HopTrace {
    /// Raw scores g, one per memory row.
    pub scores: Vector,
    /// Softmax weights over the memory rows.
    pub weights: Vector,
    /// Weighted sum of memory rows.
    pub attended: Vector,
    /// Hop output: attended + linear(query).
    pub output: Vector,
}

impl ForwardTrace {
    pub fn memory(&self) -> &Matrix {
        &self.memories[0]
    }

    pub fn memory_for_hop(&self, hop: usize) -> &Matrix {
        if self.memories.len() == 1 {
            &self.memories[0]
        } else {
            &self.memories[hop]
        }
    }

    /// Number of context rows.
    pub fn context_len(&self) -> usize {
        self.memories[0].rows()
    }
}

/// Build the k x d external memory for an instance: one row per context
/// token in sentence order, transformed by the location mode. `hop` is
/// 1-based and only matters under the hop-indexed Model 1 ramp.
pub fn build_memory(
    instance: &Instance,
    table: &EmbeddingTable,
    params: &MemNetParams,
    hop: usize,
) -> Result<Matrix> {
    let d = params.config.dim;
    let n = instance.len() as f64;
    let context: Vec<usize> = instance.context_indices().collect();
    if context.is_empty() {
        return Err(Error::NoContextTokens);
    }

    let mut memory = Matrix::zeros(context.len(), d);
    for (row, &i) in context.iter().enumerate() {
        let e = table.embed_token(&instance.tokens[i].text);
        let l = location_of(instance, i) as f64;
        let out = memory.row_mut(row);
        match params.config.mode {
            LocationMode::None => out.copy_from_slice(e.as_slice()),
            LocationMode::Model1 => {
                if params.config.hop_indexed_ramp {
                    // alternate reading: the ramp index is the hop number,
                    // one scalar per hop
                    let v = (1.0 - l / n) - (hop as f64 / d as f64) * (1.0 - 2.0 * l / n);
                    for (o, ei) in out.iter_mut().zip(e.iter()) {
                        *o = ei * v;
                    }
                } else {
                    // v[j] = (1 - l/n) - (j/d)(1 - 2 l/n) for component j = 1..d
                    for (j, (o, ei)) in out.iter_mut().zip(e.iter()).enumerate() {
                        let v = (1.0 - l / n)
                            - ((j + 1) as f64 / d as f64) * (1.0 - 2.0 * l / n);
                        *o = ei * v;
                    }
                }
            }
            LocationMode::Model2 => {
                let v = 1.0 - l / n;
                for (o, ei) in out.iter_mut().zip(e.iter()) {
                    *o = ei * v;
                }
            }
            LocationMode::Model3 => {
                let loc = params.loc_table.as_ref().expect("Model3 has a loc table");
                let lrow = loc.row(params.loc_row(l as usize));
                for ((o, ei), li) in out.iter_mut().zip(e.iter()).zip(lrow) {
                    *o = ei + li;
                }
            }
            LocationMode::Model4 => {
                let loc = params.loc_table.as_ref().expect("Model4 has a loc table");
                let lrow = loc.row(params.loc_row(l as usize));
                for ((o, ei), li) in out.iter_mut().zip(e.iter()).zip(lrow) {
                    *o = ei * sigmoid(*li);
                }
            }
        }
    }
    Ok(memory)
}

/// One attention layer: score each memory row against the query with
/// tanh(W [m_i; q] + b), softmax the scores, and return the weighted row sum
/// along with the weights and raw scores.
pub fn attention(
    memory: &Matrix,
    query: &Vector,
    params: &MemNetParams,
) -> (Vector, Vector, Vector) {
    let d = params.config.dim;
    assert_eq!(query.len(), d, "attention: query dimension mismatch");
    assert_eq!(memory.cols(), d, "attention: memory dimension mismatch");

    let w_mem = &params.attn_weights.as_slice()[..d];
    let w_query = &params.attn_weights.as_slice()[d..];
    let query_score: f64 = w_query
        .iter()
        .zip(query.iter())
        .map(|(w, q)| w * q)
        .sum();

    let mut scores = Vector::zeros(memory.rows());
    for r in 0..memory.rows() {
        let mem_score: f64 = w_mem
            .iter()
            .zip(memory.row(r))
            .map(|(w, m)| w * m)
            .sum();
        scores[r] = (mem_score + query_score + params.attn_bias).tanh();
    }

    let weights = softmax(&scores);
    let mut attended = Vector::zeros(d);
    for r in 0..memory.rows() {
        attended.add_scaled_slice(memory.row(r), weights[r]);
    }
    (attended, weights, scores)
}

/// Full forward pass: memory, all hops, classifier softmax.
pub fn forward(
    instance: &Instance,
    table: &EmbeddingTable,
    params: &MemNetParams,
) -> Result<ForwardTrace> {
    assert_eq!(
        table.dim(),
        params.config.dim,
        "embedding and model dimension mismatch"
    );
    let hops = params.config.hops;
    let memories = if params.config.memory_varies_per_hop() {
        (1..=hops)
            .map(|h| build_memory(instance, table, params, h))
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![build_memory(instance, table, params, 1)?]
    };

    let query0 = table.aspect_vector(instance);
    let mut trace = ForwardTrace {
        memories,
        query0: query0.clone(),
        hops: Vec::with_capacity(hops),
        probs: Vector::zeros(params.config.classes),
    };

    let mut query = query0;
    for hop in 0..hops {
        let memory = trace.memory_for_hop(hop);
        let (attended, weights, scores) = attention(memory, &query, params);
        let output = add(&attended, &matvec(&params.linear, &query));
        trace.hops.push(HopTrace {
            scores,
            weights,
            attended,
            output: output.clone(),
        });
        query = output;
    }

    let logits = add(&matvec(&params.classifier, &query), &params.classifier_bias);
    trace.probs = softmax(&logits);
    Ok(trace)
}

/// Argmax over the class probabilities; ties go to the lowest class index.
pub fn predict(trace: &ForwardTrace) -> Polarity {
    let mut best = 0;
    for i in 1..trace.probs.len() {
        if trace.probs[i] > trace.probs[best] {
            best = i;
        }
    }
    Polarity::from_index(best)
}

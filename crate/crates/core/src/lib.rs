//! Deep memory network for aspect-level sentiment classification.
//!
//! The model reads a sentence, an aspect term inside it, and frozen word
//! embeddings, then stacks attention hops over the context-word memory to
//! build the feature a softmax classifier scores. Training uses
//! hand-derived gradients and per-instance SGD. The crate also carries the
//! SemEval-2014 XML corpus reader, GloVe-format embedding loading, the
//! Majority and ContextAVG baselines, checkpointing, attention-weight
//! reports, and an epoch-runtime benchmark.

pub mod checkpoint;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod model;
pub mod report;
pub mod train;

pub use corpus::{DatasetStats, Instance, Polarity, Token};
pub use embed::EmbeddingTable;
pub use error::{Error, Result};
pub use eval::{ContextAvgModel, EvalReport};
pub use linalg::{Matrix, Vector};
pub use model::{ForwardTrace, LocationMode, MemNetParams, ModelConfig};
pub use report::AttentionReport;
pub use train::{Gradients, TrainConfig, TrainOutcome};

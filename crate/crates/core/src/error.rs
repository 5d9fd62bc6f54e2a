//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed XML in {path} at line {line}: {message}")]
    XmlParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("sentence {sentence_id}: aspect term {term:?} (chars {from}..{to}) does not align with any token")]
    AspectAlignment {
        sentence_id: String,
        term: String,
        from: usize,
        to: usize,
    },

    #[error("sentence is empty after tokenization")]
    EmptySentence,

    #[error("embedding file {path} line {line}: {message}")]
    EmbeddingFormat {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("instance has no context tokens outside the aspect span")]
    NoContextTokens,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("prediction/gold length mismatch: {predictions} vs {golds}")]
    LengthMismatch { predictions: usize, golds: usize },

    #[error("non-finite gradient in parameter block {block}")]
    NonFiniteGradient { block: &'static str },

    #[error("checkpoint line {line}: {message}")]
    CheckpointFormat { line: usize, message: String },

    #[error("checkpoint does not match configuration: {message}")]
    ConfigMismatch { message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

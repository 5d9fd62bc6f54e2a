//! Versioned text checkpoint format.
//!
//! A header with the model shape, then one named block per parameter tensor,
//! then the out-of-vocabulary vector cache. Floats are printed with 17
//! significant digits so a load reproduces the saved f64 bits exactly.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::model::{LocationMode, MemNetParams, ModelConfig};

const FORMAT_TAG: &str = "memnet-checkpoint";
const FORMAT_VERSION: u32 = 1;

/// Shortest decimal that round-trips any f64: 17 significant digits.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn save_checkpoint(
    path: &Path,
    params: &MemNetParams,
    oov: &[(String, Vector)],
) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, params, oov)?;
    std::fs::write(path, buf).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<(MemNetParams, Vec<(String, Vector)>)> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_checkpoint(std::io::BufReader::new(file))
}

pub fn write_checkpoint(
    mut w: impl Write,
    params: &MemNetParams,
    oov: &[(String, Vector)],
) -> Result<()> {
    let io_err = |source: std::io::Error| Error::Io {
        path: "<writer>".into(),
        source,
    };
    let c = &params.config;
    writeln!(w, "{FORMAT_TAG} v{FORMAT_VERSION}").map_err(io_err)?;
    writeln!(w, "dim {}", c.dim).map_err(io_err)?;
    writeln!(w, "classes {}", c.classes).map_err(io_err)?;
    writeln!(w, "hops {}", c.hops).map_err(io_err)?;
    writeln!(w, "mode {}", c.mode).map_err(io_err)?;
    writeln!(w, "max_len {}", c.max_len).map_err(io_err)?;
    writeln!(w, "hop_indexed_ramp {}", u8::from(c.hop_indexed_ramp)).map_err(io_err)?;

    let block = |w: &mut dyn Write, name: &str, values: &[f64]| -> Result<()> {
        writeln!(w, "block {name} {}", values.len()).map_err(io_err)?;
        for v in values {
            writeln!(w, "{}", fmt_f64(*v)).map_err(io_err)?;
        }
        Ok(())
    };
    block(&mut w, "attn_weights", params.attn_weights.as_slice())?;
    block(&mut w, "attn_bias", &[params.attn_bias])?;
    block(&mut w, "linear", params.linear.as_slice())?;
    block(&mut w, "classifier", params.classifier.as_slice())?;
    block(&mut w, "classifier_bias", params.classifier_bias.as_slice())?;
    if let Some(t) = &params.loc_table {
        block(&mut w, "loc_table", t.as_slice())?;
    }

    writeln!(w, "oov {}", oov.len()).map_err(io_err)?;
    for (word, vec) in oov {
        write!(w, "{word}").map_err(io_err)?;
        for v in vec.iter() {
            write!(w, " {}", fmt_f64(*v)).map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
    }
    writeln!(w, "end").map_err(io_err)?;
    Ok(())
}

struct LineReader<R> {
    inner: std::io::Lines<R>,
    lineno: usize,
}

impl<R: BufRead> LineReader<R> {
    fn next_line(&mut self) -> Result<String> {
        self.lineno += 1;
        match self.inner.next() {
            Some(Ok(line)) => Ok(line),
            Some(Err(e)) => Err(Error::CheckpointFormat {
                line: self.lineno,
                message: e.to_string(),
            }),
            None => Err(Error::CheckpointFormat {
                line: self.lineno,
                message: "unexpected end of file".into(),
            }),
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::CheckpointFormat {
            line: self.lineno,
            message: message.into(),
        }
    }

    /// "key value" header line; returns the value.
    fn header_field(&mut self, key: &str) -> Result<String> {
        let line = self.next_line()?;
        let (k, v) = line
            .split_once(' ')
            .ok_or_else(|| self.err(format!("expected `{key} <value>`")))?;
        if k != key {
            return Err(self.err(format!("expected field {key:?}, found {k:?}")));
        }
        Ok(v.to_string())
    }

    fn header_usize(&mut self, key: &str) -> Result<usize> {
        let v = self.header_field(key)?;
        v.parse()
            .map_err(|_| self.err(format!("field {key}: bad integer {v:?}")))
    }

    fn block(&mut self, name: &str, expected_len: usize) -> Result<Vec<f64>> {
        let line = self.next_line()?;
        let mut parts = line.split(' ');
        if parts.next() != Some("block") {
            return Err(self.err(format!("expected block {name}")));
        }
        if parts.next() != Some(name) {
            return Err(self.err(format!("expected block {name}, found {line:?}")));
        }
        let len: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.err("bad block length"))?;
        if len != expected_len {
            return Err(self.err(format!(
                "block {name}: expected {expected_len} values, header says {len}"
            )));
        }
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            let line = self.next_line()?;
            let v: f64 = line
                .trim()
                .parse()
                .map_err(|_| self.err(format!("bad float {line:?}")))?;
            if !v.is_finite() {
                return Err(self.err(format!("non-finite value {line:?}")));
            }
            values.push(v);
        }
        Ok(values)
    }
}

pub fn read_checkpoint(reader: impl BufRead) -> Result<(MemNetParams, Vec<(String, Vector)>)> {
    let mut r = LineReader {
        inner: reader.lines(),
        lineno: 0,
    };

    let magic = r.next_line()?;
    if magic != format!("{FORMAT_TAG} v{FORMAT_VERSION}") {
        return Err(r.err(format!("unsupported header {magic:?}")));
    }
    let dim = r.header_usize("dim")?;
    let classes = r.header_usize("classes")?;
    let hops = r.header_usize("hops")?;
    let mode_str = r.header_field("mode")?;
    let mode = LocationMode::parse(&mode_str)
        .ok_or_else(|| r.err(format!("unknown mode {mode_str:?}")))?;
    let max_len = r.header_usize("max_len")?;
    let ramp = r.header_usize("hop_indexed_ramp")?;
    if dim == 0 || classes == 0 || hops == 0 || max_len == 0 {
        return Err(r.err("dim, classes, hops and max_len must be positive"));
    }

    let mut config = ModelConfig::new(dim, hops, mode);
    config.classes = classes;
    config.max_len = max_len;
    config.hop_indexed_ramp = ramp != 0;

    let attn_weights = Vector::from_vec(r.block("attn_weights", 2 * dim)?);
    let attn_bias = r.block("attn_bias", 1)?[0];
    let linear = Matrix::from_flat(r.block("linear", dim * dim)?, dim, dim);
    let classifier = Matrix::from_flat(r.block("classifier", classes * dim)?, classes, dim);
    let classifier_bias = Vector::from_vec(r.block("classifier_bias", classes)?);
    let loc_table = if mode.learns_location() {
        Some(Matrix::from_flat(
            r.block("loc_table", max_len * dim)?,
            max_len,
            dim,
        ))
    } else {
        None
    };

    let oov_header = r.next_line()?;
    let oov_count: usize = oov_header
        .strip_prefix("oov ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| r.err(format!("expected `oov <count>`, found {oov_header:?}")))?;
    let mut oov = Vec::with_capacity(oov_count);
    for _ in 0..oov_count {
        let line = r.next_line()?;
        let mut fields = line.split(' ');
        let word = fields
            .next()
            .filter(|w| !w.is_empty())
            .ok_or_else(|| r.err("empty oov entry"))?
            .to_string();
        let values: Vec<f64> = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| r.err("bad oov float"))?;
        if values.len() != dim {
            return Err(r.err(format!(
                "oov entry {word:?}: expected {dim} values, found {}",
                values.len()
            )));
        }
        oov.push((word, Vector::from_vec(values)));
    }
    let end = r.next_line()?;
    if end != "end" {
        return Err(r.err(format!("expected trailing `end`, found {end:?}")));
    }

    Ok((
        MemNetParams {
            config,
            attn_weights,
            attn_bias,
            linear,
            classifier,
            classifier_bias,
            loc_table,
        },
        oov,
    ))
}

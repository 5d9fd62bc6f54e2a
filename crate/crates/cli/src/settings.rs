//! Flag/config-file resolution and the CLI error type.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use memnet_core::model::{LocationMode, DEFAULT_MAX_LEN};
use memnet_core::train::TrainConfig;

use crate::CommonArgs;

#[derive(Debug)]
pub enum CliError {
    /// A required file or flag is missing. Exit 2.
    MissingInput(String),
    /// An unusable flag or config value. Exit 1.
    BadValue(String),
    Core(memnet_core::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::MissingInput(_) => 2,
            CliError::BadValue(_) => 1,
            CliError::Core(e) => match e {
                memnet_core::Error::Io { .. } => 2,
                memnet_core::Error::XmlParse { .. }
                | memnet_core::Error::EmbeddingFormat { .. }
                | memnet_core::Error::CheckpointFormat { .. }
                | memnet_core::Error::AspectAlignment { .. }
                | memnet_core::Error::EmptySentence => 3,
                memnet_core::Error::ConfigMismatch { .. } => 4,
                _ => 1,
            },
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::MissingInput(m) => write!(f, "{m}"),
            CliError::BadValue(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<memnet_core::Error> for CliError {
    fn from(e: memnet_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Flags merged over the optional config file, with defaults applied.
pub struct Settings {
    pub train_xml: Option<PathBuf>,
    pub test_xml: Option<PathBuf>,
    pub glove: Option<PathBuf>,
    pub hops: usize,
    pub mode: LocationMode,
    pub max_len: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub checkpoint_every: Option<usize>,
}

impl Settings {
    pub fn resolve(args: &CommonArgs) -> CliResult<Settings> {
        let file = match &args.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };

        let mode_str = args
            .location_mode
            .clone()
            .or(file.get_string("location-mode"))
            .unwrap_or_else(|| "none".into());
        let mode = LocationMode::parse(&mode_str).ok_or_else(|| {
            CliError::BadValue(format!(
                "unknown location mode {mode_str:?} (expected none, 1, 2, 3 or 4)"
            ))
        })?;

        let settings = Settings {
            train_xml: args.train_xml.clone().or(file.get_path("train-xml")),
            test_xml: args.test_xml.clone().or(file.get_path("test-xml")),
            glove: args.glove.clone().or(file.get_path("glove")),
            hops: args.hops.or(file.get_parsed("hops")?).unwrap_or(1),
            mode,
            max_len: args
                .max_len
                .or(file.get_parsed("max-len")?)
                .unwrap_or(DEFAULT_MAX_LEN),
            lr: args.lr.or(file.get_parsed("lr")?).unwrap_or(0.01),
            epochs: args.epochs.or(file.get_parsed("epochs")?).unwrap_or(100),
            seed: args.seed.or(file.get_parsed("seed")?).unwrap_or(42),
            shuffle: !args.no_shuffle && file.get_parsed("shuffle")?.unwrap_or(true),
            checkpoint: args.checkpoint.clone().or(file.get_path("checkpoint")),
            out_dir: args
                .out_dir
                .clone()
                .or(file.get_path("out-dir"))
                .unwrap_or_else(|| PathBuf::from("out")),
            checkpoint_every: args.checkpoint_every.or(file.get_parsed("checkpoint-every")?),
        };
        if settings.hops == 0 {
            return Err(CliError::BadValue("hops must be at least 1".into()));
        }
        Ok(settings)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            epochs: self.epochs,
            seed: self.seed,
            shuffle: self.shuffle,
        }
    }

    /// The given input, checked to exist before any long-running work.
    pub fn require(&self, field: &str, value: &Option<PathBuf>) -> CliResult<PathBuf> {
        let path = value
            .as_ref()
            .ok_or_else(|| CliError::MissingInput(format!("--{field} is required")))?;
        if !path.is_file() {
            return Err(CliError::MissingInput(format!(
                "--{field}: no such file: {}",
                path.display()
            )));
        }
        Ok(path.clone())
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out_dir.join("checkpoint.txt"))
    }
}

#[derive(Default)]
struct ConfigFile {
    values: HashMap<String, String>,
}

impl ConfigFile {
    fn load(path: &Path) -> CliResult<ConfigFile> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::MissingInput(format!("--config: cannot read {}: {e}", path.display()))
        })?;
        let mut values = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::BadValue(format!(
                    "{}:{}: expected key=value, found {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    fn get_string(&self, key: &str) -> Option<String> {
        self.values.get(key).cloned()
    }

    fn get_path(&self, key: &str) -> Option<PathBuf> {
        self.values.get(key).map(PathBuf::from)
    }

    fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                CliError::BadValue(format!("config key {key}: cannot parse {raw:?}"))
            }),
        }
    }
}

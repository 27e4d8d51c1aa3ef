//! Service configuration: one flat JSON or TOML file plus `EMPATH_<KEY>`
//! environment overrides.

use std::path::{Path, PathBuf};

use empath_core::tts::{TtsBackendConfig, TtsKind, DEFAULT_TIMEOUT_SECS};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub const ENV_PREFIX: &str = "EMPATH_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub ser_checkpoint: PathBuf,
    pub rec_checkpoint: PathBuf,
    pub corpus: PathBuf,
    pub templates: PathBuf,
    /// Optional: the recommender checkpoint already embeds its table. When
    /// set, the file is loaded and must match the checkpoint's dimension.
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    #[serde(default = "default_tts_kind")]
    pub tts_kind: TtsKind,
    #[serde(default)]
    pub tts_endpoint: Option<String>,
    #[serde(default = "default_timeout")]
    pub tts_timeout_secs: f64,
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default)]
    pub threshold: f64,
    #[serde(default = "default_session_log")]
    pub session_log: PathBuf,
    #[serde(default = "default_clip_capacity")]
    pub clip_capacity: usize,
}

fn default_tts_kind() -> TtsKind {
    TtsKind::Stub
}
fn default_timeout() -> f64 {
    DEFAULT_TIMEOUT_SECS
}
fn default_bind() -> String {
    "127.0.0.1".into()
}
fn default_port() -> u16 {
    8080
}
fn default_session_log() -> PathBuf {
    "sessions.jsonl".into()
}
fn default_clip_capacity() -> usize {
    256
}

const NUMERIC_KEYS: [&str; 4] = ["port", "threshold", "tts_timeout_secs", "clip_capacity"];
const PATH_KEYS: [&str; 6] = ["ser_checkpoint", "rec_checkpoint", "corpus", "templates", "embeddings", "session_log"];

impl ServiceConfig {
    /// Reads `path` (`.json` as JSON, anything else as TOML), applies
    /// `EMPATH_*` overrides from the process environment, and resolves
    /// relative paths against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env(path: &Path, env: impl IntoIterator<Item = (String, String)>) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: shown.clone(),
            source,
        })?;
        let parse_err = |message: String| ConfigError::Parse {
            path: shown.clone(),
            message,
        };
        let mut map: Map<String, Value> = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        } else {
            let table: toml::Table = toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
            serde_json::to_value(table)
                .map_err(|e| parse_err(e.to_string()))?
                .as_object()
                .cloned()
                .unwrap_or_default()
        };
        apply_env(&mut map, env)?;
        let mut config: ServiceConfig = serde_json::from_value(Value::Object(map)).map_err(|e| parse_err(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.ser_checkpoint);
        fix(&mut self.rec_checkpoint);
        fix(&mut self.corpus);
        fix(&mut self.templates);
        fix(&mut self.session_log);
        if let Some(p) = self.embeddings.as_mut() {
            fix(p);
        }
    }

    pub fn tts(&self) -> TtsBackendConfig {
        TtsBackendConfig {
            kind: self.tts_kind,
            endpoint: self.tts_endpoint.clone(),
            timeout_secs: self.tts_timeout_secs,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ConfigError::Invalid(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if self.clip_capacity == 0 {
            return Err(ConfigError::Invalid("clip_capacity must be at least 1".into()));
        }
        self.tts().validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

/// Overrides keys from `EMPATH_<KEY>` variables. Numeric keys are parsed as
/// JSON numbers; unknown variables are ignored.
fn apply_env(map: &mut Map<String, Value>, env: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
    let known: Vec<&str> = NUMERIC_KEYS
        .iter()
        .chain(&PATH_KEYS)
        .chain(&["tts_kind", "tts_endpoint", "bind"])
        .copied()
        .collect();
    for (name, value) in env {
        let Some(key) = name.strip_prefix(ENV_PREFIX).map(str::to_ascii_lowercase) else {
            continue;
        };
        if !known.contains(&key.as_str()) {
            continue;
        }
        let parsed = if NUMERIC_KEYS.contains(&key.as_str()) {
            serde_json::from_str::<serde_json::Number>(value.trim())
                .map(Value::Number)
                .map_err(|_| ConfigError::Invalid(format!("{name}={value:?} is not a number")))?
        } else {
            Value::String(value)
        };
        map.insert(key, parsed);
    }
    Ok(())
}

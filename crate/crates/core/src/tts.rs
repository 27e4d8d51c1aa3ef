//! Text-to-speech delivery: a deterministic tone stub, an HTTP client for an
//! external synthesis engine, and per-language notification templates.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{read_wav, AudioClip};
use crate::labels::{Emotion, Language};

pub const STUB_SAMPLE_RATE: u32 = 16_000;
/// 50 ms at 16 kHz.
pub const STUB_SEGMENT: usize = 800;
pub const STUB_AMPLITUDE: f64 = 0.5;
pub const DEFAULT_TIMEOUT_SECS: f64 = 10.0;
const MAX_RESPONSE_BYTES: u64 = 64 << 20;

#[derive(Debug, Error)]
pub enum TtsError {
    #[error("request text is empty")]
    EmptyText,
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("backend unreachable: {0}")]
    BackendUnreachable(String),
    #[error("backend returned {status}: {message}")]
    BackendError { status: u16, message: String },
    #[error("backend timed out")]
    Timeout,
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtsRequest {
    pub text: String,
    pub language: Language,
    pub voice: Option<String>,
}

impl TtsRequest {
    pub fn new(text: impl Into<String>, language: Language) -> Self {
        Self {
            text: text.into(),
            language,
            voice: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TtsKind {
    Stub,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtsBackendConfig {
    pub kind: TtsKind,
    pub endpoint: Option<String>,
    pub timeout_secs: f64,
}

impl Default for TtsBackendConfig {
    fn default() -> Self {
        Self {
            kind: TtsKind::Stub,
            endpoint: None,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
        }
    }
}

impl TtsBackendConfig {
    pub fn http(endpoint: impl Into<String>) -> Self {
        Self {
            kind: TtsKind::Http,
            endpoint: Some(endpoint.into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TtsError> {
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(TtsError::InvalidConfig(format!("timeout {} s", self.timeout_secs)));
        }
        if self.kind == TtsKind::Http {
            let endpoint = self
                .endpoint
                .as_deref()
                .ok_or_else(|| TtsError::InvalidConfig("http backend needs an endpoint".into()))?;
            let uri: ureq::http::Uri = endpoint
                .parse()
                .map_err(|e| TtsError::InvalidConfig(format!("endpoint {endpoint:?}: {e}")))?;
            if !matches!(uri.scheme_str(), Some("http" | "https")) || uri.host().is_none() {
                return Err(TtsError::InvalidConfig(format!("endpoint {endpoint:?} is not an http(s) URL")));
            }
        }
        Ok(())
    }
}

pub trait TtsBackend: Send + Sync {
    fn synthesize(&self, request: &TtsRequest) -> Result<AudioClip, TtsError>;
}

/// Each UTF-8 byte `b` becomes 800 samples of `0.5 sin(2 pi (200 + 4b) n / 16000)`,
/// with the phase restarting at every byte.
pub fn stub_synthesize(text: &str) -> Result<AudioClip, TtsError> {
    if text.is_empty() {
        return Err(TtsError::EmptyText);
    }
    let sr = STUB_SAMPLE_RATE as f64;
    let samples = text
        .bytes()
        .flat_map(|b| {
            let f = 200.0 + 4.0 * b as f64;
            (0..STUB_SEGMENT).map(move |n| STUB_AMPLITUDE * (TAU * f * n as f64 / sr).sin())
        })
        .collect();
    Ok(AudioClip::new(samples, STUB_SAMPLE_RATE).expect("stub samples are in range"))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StubBackend;

impl TtsBackend for StubBackend {
    fn synthesize(&self, request: &TtsRequest) -> Result<AudioClip, TtsError> {
        stub_synthesize(&request.text)
    }
}

/// POSTs `{"text", "language", "voice"}` as JSON and decodes the WAV reply.
pub struct HttpBackend {
    agent: ureq::Agent,
    endpoint: String,
}

impl HttpBackend {
    pub fn new(config: &TtsBackendConfig) -> Result<Self, TtsError> {
        config.validate()?;
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| TtsError::InvalidConfig("http backend needs an endpoint".into()))?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { agent, endpoint })
    }
}

fn map_transport(err: ureq::Error) -> TtsError {
    match err {
        ureq::Error::Timeout(_) => TtsError::Timeout,
        ureq::Error::Io(e) if e.kind() == std::io::ErrorKind::TimedOut => TtsError::Timeout,
        ureq::Error::BodyExceedsLimit(n) => TtsError::MalformedResponse(format!("body exceeds {n} bytes")),
        other => TtsError::BackendUnreachable(other.to_string()),
    }
}

impl TtsBackend for HttpBackend {
    fn synthesize(&self, request: &TtsRequest) -> Result<AudioClip, TtsError> {
        if request.text.is_empty() {
            return Err(TtsError::EmptyText);
        }
        let body = serde_json::to_string(request).expect("request serializes");
        let mut response = self
            .agent
            .post(&self.endpoint)
            .header("content-type", "application/json")
            .send(body)
            .map_err(map_transport)?;
        let status = response.status().as_u16();
        let bytes = response
            .body_mut()
            .with_config()
            .limit(MAX_RESPONSE_BYTES)
            .read_to_vec()
            .map_err(map_transport)?;
        if !(200..300).contains(&status) {
            return Err(TtsError::BackendError {
                status,
                message: String::from_utf8_lossy(&bytes).trim().to_string(),
            });
        }
        read_wav(&bytes).map_err(|e| TtsError::MalformedResponse(e.to_string()))
    }
}

pub fn build_backend(config: &TtsBackendConfig) -> Result<Box<dyn TtsBackend>, TtsError> {
    config.validate()?;
    Ok(match config.kind {
        TtsKind::Stub => Box::new(StubBackend),
        TtsKind::Http => Box::new(HttpBackend::new(config)?),
    })
}

pub fn synthesize(request: &TtsRequest, config: &TtsBackendConfig) -> Result<AudioClip, TtsError> {
    build_backend(config)?.synthesize(request)
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template file: {0}")]
    Parse(String),
    #[error("no template for language {0}")]
    MissingLanguage(Language),
    #[error("language {language}: no translation for {emotion}")]
    MissingEmotion { language: Language, emotion: Emotion },
    #[error("language {0}: template lacks the {{emotion}} placeholder")]
    MissingPlaceholder(Language),
    #[error("{0} is not a negative emotion")]
    NotNegative(Emotion),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguageTemplate {
    pub template: String,
    pub emotions: BTreeMap<Emotion, String>,
}

/// Empathetic notification text per language. Validated when loaded, so
/// rendering a negative emotion cannot fail later.
#[derive(Debug, Clone, PartialEq)]
pub struct NotificationTemplates {
    languages: BTreeMap<Language, LanguageTemplate>,
}

impl NotificationTemplates {
    pub fn new(languages: BTreeMap<Language, LanguageTemplate>) -> Result<Self, TemplateError> {
        for language in Language::ALL {
            let t = languages.get(&language).ok_or(TemplateError::MissingLanguage(language))?;
            if !t.template.contains("{emotion}") {
                return Err(TemplateError::MissingPlaceholder(language));
            }
            for emotion in Emotion::NEGATIVE {
                if t.emotions.get(&emotion).is_none_or(|w| w.trim().is_empty()) {
                    return Err(TemplateError::MissingEmotion { language, emotion });
                }
            }
        }
        Ok(Self { languages })
    }

    pub fn parse(json: &str) -> Result<Self, TemplateError> {
        let languages = serde_json::from_str(json).map_err(|e| TemplateError::Parse(e.to_string()))?;
        Self::new(languages)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TemplateError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TemplateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn render(&self, emotion: Emotion, language: Language) -> Result<String, TemplateError> {
        if !emotion.is_negative() {
            return Err(TemplateError::NotNegative(emotion));
        }
        let t = &self.languages[&language];
        Ok(t.template.replace("{emotion}", &t.emotions[&emotion]))
    }
}

pub fn render_notification(
    templates: &NotificationTemplates,
    emotion: Emotion,
    language: Language,
) -> Result<String, TemplateError> {
    templates.render(emotion, language)
}

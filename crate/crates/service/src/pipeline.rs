//! The analyze turn: audio in, emotion out, suggestions and spoken response
//! out.

use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use empath_core::audio::{read_wav, resample_linear, write_wav};
use empath_core::features::FeatureExtractor;
use empath_core::labels::{filter_negative, Emotion, EmotionDistribution, Language};
use empath_core::nn::checkpoint::Checkpoint;
use empath_core::recommender::{load_embeddings, load_suggestions, recommend, RecModel, SuggestionCorpus, DEFAULT_K};
use empath_core::ser::SerModel;
use empath_core::tts::{build_backend, NotificationTemplates, TtsBackend, TtsRequest};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clips::ClipStore;
use crate::config::ServiceConfig;
use crate::session::{SessionLog, SessionRecord};

/// Class-named view of an [`EmotionDistribution`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub anger: f64,
    pub fear: f64,
    pub sadness: f64,
    pub happiness: f64,
    pub surprise: f64,
    pub neutrality: f64,
}

impl From<&EmotionDistribution> for Distribution {
    fn from(d: &EmotionDistribution) -> Self {
        let [anger, fear, sadness, happiness, surprise, neutrality] = *d.probabilities();
        Self {
            anger,
            fear,
            sadness,
            happiness,
            surprise,
            neutrality,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionRef {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeResponse {
    pub distribution: Distribution,
    pub top_emotion: Emotion,
    pub negative: bool,
    pub notification_text: Option<String>,
    pub recommendations: Vec<SuggestionRef>,
    pub audio_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Decode,
    Feature,
    Ser,
    Recommend,
    Tts,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Decode => "decode",
            Stage::Feature => "feature",
            Stage::Ser => "ser",
            Stage::Recommend => "recommend",
            Stage::Tts => "tts",
        }
    }
}

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("cannot decode audio: {0}")]
    Decode(String),
    #[error("{} stage failed: {message}", stage.name())]
    Stage { stage: Stage, message: String },
}

impl AnalyzeError {
    pub fn stage(&self) -> Stage {
        match self {
            AnalyzeError::Decode(_) => Stage::Decode,
            AnalyzeError::Stage { stage, .. } => *stage,
        }
    }

    fn at(stage: Stage, err: impl std::fmt::Display) -> Self {
        AnalyzeError::Stage {
            stage,
            message: err.to_string(),
        }
    }
}

/// Startup failure naming the resource that could not be loaded.
#[derive(Debug, Error)]
#[error("startup failed at {stage}: {message}")]
pub struct StartupError {
    pub stage: &'static str,
    pub message: String,
}

fn startup(stage: &'static str, err: impl std::fmt::Display) -> StartupError {
    StartupError {
        stage,
        message: err.to_string(),
    }
}

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

pub struct FixedClock(pub u64);

impl Clock for FixedClock {
    fn now_ms(&self) -> u64 {
        self.0
    }
}

/// Frozen models and resources shared by all requests.
pub struct Models {
    pub ser: SerModel,
    pub rec: RecModel,
    pub corpus: SuggestionCorpus,
    pub templates: NotificationTemplates,
}

impl Models {
    pub fn load(config: &ServiceConfig) -> Result<Self, StartupError> {
        let ser_ck = Checkpoint::load(&config.ser_checkpoint).map_err(|e| startup("ser checkpoint", e))?;
        let ser = SerModel::from_checkpoint(&ser_ck).map_err(|e| startup("ser checkpoint", e))?;
        let rec_ck = Checkpoint::load(&config.rec_checkpoint).map_err(|e| startup("rec checkpoint", e))?;
        let rec = RecModel::from_checkpoint(&rec_ck).map_err(|e| startup("rec checkpoint", e))?;
        if let Some(path) = &config.embeddings {
            let table = load_embeddings(path).map_err(|e| startup("embeddings", e))?;
            if table.dim() != rec.table().dim() {
                return Err(startup(
                    "embeddings",
                    format!(
                        "{} has dimension {}, checkpoint expects {}",
                        path.display(),
                        table.dim(),
                        rec.table().dim()
                    ),
                ));
            }
        }
        let corpus = load_suggestions(&config.corpus).map_err(|e| startup("corpus", e))?;
        if let Some(language) = Language::ALL.into_iter().find(|&l| corpus.in_language(l).next().is_none()) {
            return Err(startup("corpus", format!("no {language} suggestions")));
        }
        let templates = NotificationTemplates::load(&config.templates).map_err(|e| startup("templates", e))?;
        Ok(Self {
            ser,
            rec,
            corpus,
            templates,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HealthSummary {
    pub status: &'static str,
    pub ser_parameters: usize,
    pub rec_vocabulary: usize,
    pub rec_embedding_dim: usize,
    pub corpus_entries: usize,
    pub corpus_by_language: Vec<(Language, usize)>,
    pub threshold: f64,
    pub clips_stored: usize,
}

pub struct Pipeline {
    models: Arc<Models>,
    extractor: FeatureExtractor,
    tts: Box<dyn TtsBackend>,
    threshold: f64,
    clips: ClipStore,
    log: Option<SessionLog>,
    clock: Box<dyn Clock>,
}

impl Pipeline {
    pub fn new(
        models: Models,
        tts: Box<dyn TtsBackend>,
        threshold: f64,
        clip_capacity: usize,
        log: Option<SessionLog>,
        clock: Box<dyn Clock>,
    ) -> Result<Self, StartupError> {
        let extractor = FeatureExtractor::new(models.ser.feature_config().clone()).map_err(|e| startup("feature config", e))?;
        Ok(Self {
            models: Arc::new(models),
            extractor,
            tts,
            threshold,
            clips: ClipStore::new(clip_capacity),
            log,
            clock,
        })
    }

    pub fn from_config(config: &ServiceConfig) -> Result<Self, StartupError> {
        let models = Models::load(config)?;
        let tts = build_backend(&config.tts()).map_err(|e| startup("tts", e))?;
        let log = SessionLog::open(&config.session_log).map_err(|e| startup("session log", format!("{}: {e}", config.session_log.display())))?;
        Self::new(models, tts, config.threshold, config.clip_capacity, Some(log), Box::new(SystemClock))
    }

    pub fn models(&self) -> &Models {
        &self.models
    }

    pub fn clip(&self, audio_ref: &str) -> Option<Arc<Vec<u8>>> {
        self.clips.get(audio_ref)
    }

    pub fn health(&self) -> HealthSummary {
        let m = &self.models;
        HealthSummary {
            status: "ok",
            ser_parameters: empath_core::nn::Parameterized::param_count(&m.ser),
            rec_vocabulary: m.rec.table().vocab_size(),
            rec_embedding_dim: m.rec.table().dim(),
            corpus_entries: m.corpus.len(),
            corpus_by_language: Language::ALL.iter().map(|&l| (l, m.corpus.in_language(l).count())).collect(),
            threshold: self.threshold,
            clips_stored: self.clips.len(),
        }
    }

    /// Classifies a WAV clip and, for negative emotions, recommends and
    /// speaks suggestions. One session record is appended per successful
    /// call; failures append nothing.
    pub fn analyze(&self, wav: &[u8], language: Language, session_id: &str) -> Result<AnalyzeResponse, AnalyzeError> {
        let clip = read_wav(wav).map_err(|e| AnalyzeError::Decode(e.to_string()))?;
        let duration = clip.duration_secs();
        let rate = self.extractor.config().sample_rate;
        let clip = if clip.sample_rate() == rate {
            clip
        } else {
            resample_linear(&clip, rate).map_err(|e| AnalyzeError::at(Stage::Feature, e))?
        };
        let spec = self.extractor.log_mel_spectrogram(&clip).map_err(|e| AnalyzeError::at(Stage::Feature, e))?;
        let dist = self.models.ser.predict(&spec).map_err(|e| AnalyzeError::at(Stage::Ser, e))?;
        let mut response = self.respond(&dist, language)?;

        let record = SessionRecord {
            session_id: session_id.to_string(),
            timestamp_ms: self.clock.now_ms(),
            language,
            input_duration_s: duration,
            top_emotion: response.top_emotion,
            probabilities: response.distribution,
            recommendation_ids: response.recommendations.iter().map(|r| r.id.clone()).collect(),
        };
        if let Some(log) = &self.log {
            if let Err(e) = log.append(&record) {
                tracing::warn!(path = %log.path().display(), error = %e, "session log write failed");
                push_warning(&mut response.warning, format!("session log write failed: {e}"));
            }
        }
        Ok(response)
    }

    /// Everything after classification: filter, notify, recommend, speak.
    pub fn respond(&self, dist: &EmotionDistribution, language: Language) -> Result<AnalyzeResponse, AnalyzeError> {
        let mut response = AnalyzeResponse {
            distribution: dist.into(),
            top_emotion: dist.top(),
            negative: false,
            notification_text: None,
            recommendations: Vec::new(),
            audio_ref: None,
            warning: None,
        };
        let Some(emotion) = filter_negative(dist, self.threshold) else {
            return Ok(response);
        };
        let m = &self.models;
        let notification = m.templates.render(emotion, language).map_err(|e| AnalyzeError::at(Stage::Recommend, e))?;
        let rec = recommend(&m.corpus, &m.rec, emotion, language, DEFAULT_K).map_err(|e| AnalyzeError::at(Stage::Recommend, e))?;
        response.negative = true;
        response.recommendations = rec
            .suggestions
            .iter()
            .map(|s| SuggestionRef {
                id: s.id.clone(),
                text: s.text.clone(),
            })
            .collect();
        if rec.truncated {
            push_warning(
                &mut response.warning,
                format!("only {} suggestions available in {language}", rec.suggestions.len()),
            );
        }

        let texts: Vec<&str> = rec.suggestions.iter().map(|s| s.text.as_str()).collect();
        let spoken = format!("{notification}; {}", texts.join("; "));
        match self.tts.synthesize(&TtsRequest::new(spoken, language)) {
            Ok(clip) => {
                let key = uuid::Uuid::new_v4().simple().to_string();
                self.clips.insert(key.clone(), write_wav(&clip));
                response.audio_ref = Some(key);
            }
            Err(e) => {
                tracing::warn!(error = %e, "speech synthesis failed");
                push_warning(&mut response.warning, format!("speech synthesis failed: {e}"));
            }
        }
        response.notification_text = Some(notification);
        Ok(response)
    }
}

fn push_warning(slot: &mut Option<String>, message: String) {
    match slot {
        Some(existing) => {
            existing.push_str("; ");
            existing.push_str(&message);
        }
        None => *slot = Some(message),
    }
}

/// Convenience for CLI paths that only need the SER stage.
pub fn load_ser(path: &Path) -> Result<SerModel, StartupError> {
    let ck = Checkpoint::load(path).map_err(|e| startup("ser checkpoint", e))?;
    SerModel::from_checkpoint(&ck).map_err(|e| startup("ser checkpoint", e))
}

pub fn load_rec(path: &Path) -> Result<RecModel, StartupError> {
    let ck = Checkpoint::load(path).map_err(|e| startup("rec checkpoint", e))?;
    RecModel::from_checkpoint(&ck).map_err(|e| startup("rec checkpoint", e))
}

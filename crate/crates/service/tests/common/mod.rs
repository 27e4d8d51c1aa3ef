#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use empath_core::recommender::{load_embeddings, load_suggestions, RecModel};
use empath_core::ser::build_ser_model;
use empath_core::tts::NotificationTemplates;
use empath_service::pipeline::Models;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Untrained models over the shipped seed corpus and templates.
pub fn untrained_models() -> Models {
    let table = load_embeddings(data_dir().join("seed_embeddings.txt")).unwrap();
    Models {
        ser: build_ser_model(3),
        rec: RecModel::new(Arc::new(table), 8, 3),
        corpus: load_suggestions(data_dir().join("seed_corpus.jsonl")).unwrap(),
        templates: NotificationTemplates::load(data_dir().join("templates.json")).unwrap(),
    }
}

/// Writes untrained checkpoints and a JSON config into `dir`; returns the
/// config path.
pub fn write_service_files(dir: &Path, extra: &[(&str, serde_json::Value)]) -> PathBuf {
    let models = untrained_models();
    models.ser.to_checkpoint().save(dir.join("ser.empc")).unwrap();
    models.rec.to_checkpoint().save(dir.join("rec.empc")).unwrap();
    let mut config = serde_json::json!({
        "ser_checkpoint": "ser.empc",
        "rec_checkpoint": "rec.empc",
        "corpus": data_dir().join("seed_corpus.jsonl"),
        "templates": data_dir().join("templates.json"),
        "port": 0,
        "session_log": "sessions.jsonl",
    });
    for (k, v) in extra {
        config[*k] = v.clone();
    }
    let path = dir.join("service.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

pub const BOUNDARY: &str = "empath-test-boundary";

/// `multipart/form-data` body with a single file field.
pub fn multipart(field: &str, bytes: &[u8]) -> (String, Vec<u8>) {
    let mut body = format!(
        "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{field}\"; filename=\"clip.wav\"\r\nContent-Type: audio/wav\r\n\r\n"
    )
    .into_bytes();
    body.extend_from_slice(bytes);
    body.extend_from_slice(format!("\r\n--{BOUNDARY}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={BOUNDARY}"), body)
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(std::time::Duration::from_secs(30)))
        .build()
        .into()
}

/// Returns `(status, body)`.
pub fn post_audio(agent: &ureq::Agent, url: &str, field: &str, wav: &[u8]) -> (u16, Vec<u8>) {
    let (content_type, body) = multipart(field, wav);
    let mut resp = agent.post(url).header("Content-Type", &content_type).send(&body[..]).unwrap();
    let status = resp.status().as_u16();
    (status, resp.body_mut().read_to_vec().unwrap())
}

pub fn get(agent: &ureq::Agent, url: &str) -> (u16, Option<String>, Vec<u8>) {
    let mut resp = agent.get(url).call().unwrap();
    let status = resp.status().as_u16();
    let content_type = resp
        .headers()
        .get("content-type")
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);
    (status, content_type, resp.body_mut().with_config().limit(64 << 20).read_to_vec().unwrap())
}

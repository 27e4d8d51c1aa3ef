use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread::JoinHandle;
use std::time::Duration;

use empath_core::audio::{write_wav, AudioClip};
use empath_core::labels::Language;
use empath_core::tts::{build_backend, synthesize, TtsBackendConfig, TtsError, TtsRequest};

/// Serves one request with `status`, `content_type` and `body` after
/// `delay`; returns the URL and a handle yielding the raw request body.
fn mock(status: u16, content_type: &str, body: Vec<u8>, delay: Duration) -> (String, JoinHandle<Vec<u8>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/synthesize", listener.local_addr().unwrap());
    let content_type = content_type.to_string();
    let handle = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut length = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" || line.is_empty() {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
        }
        let mut request = vec![0; length];
        reader.read_exact(&mut request).unwrap();
        std::thread::sleep(delay);
        let mut stream = stream;
        let head = format!(
            "HTTP/1.1 {status} X\r\ncontent-type: {content_type}\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
            body.len()
        );
        let _ = stream.write_all(head.as_bytes());
        let _ = stream.write_all(&body);
        request
    });
    (url, handle)
}

fn request() -> TtsRequest {
    TtsRequest {
        text: "Take a walk".into(),
        language: Language::En,
        voice: Some("v1".into()),
    }
}

#[test]
fn passes_returned_audio_through() {
    let clip = AudioClip::new(vec![0.0, 0.25, -0.5, 0.125], 22_050).unwrap();
    let wav = write_wav(&clip);
    let (url, handle) = mock(200, "audio/wav", wav, Duration::ZERO);
    let out = synthesize(&request(), &TtsBackendConfig::http(url)).unwrap();
    assert_eq!(out, clip);
    let sent: serde_json::Value = serde_json::from_slice(&handle.join().unwrap()).unwrap();
    assert_eq!(sent, serde_json::json!({"text": "Take a walk", "language": "en", "voice": "v1"}));
}

#[test]
fn non_success_status_is_backend_error() {
    let (url, _h) = mock(503, "text/plain", b"model loading".to_vec(), Duration::ZERO);
    match synthesize(&request(), &TtsBackendConfig::http(url)) {
        Err(TtsError::BackendError { status, message }) => {
            assert_eq!(status, 503);
            assert_eq!(message, "model loading");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn garbage_body_is_malformed() {
    let (url, _h) = mock(200, "audio/wav", b"definitely not riff".to_vec(), Duration::ZERO);
    assert!(matches!(
        synthesize(&request(), &TtsBackendConfig::http(url)),
        Err(TtsError::MalformedResponse(_))
    ));
}

#[test]
fn slow_backend_times_out() {
    let (url, _h) = mock(200, "audio/wav", vec![], Duration::from_millis(1500));
    let config = TtsBackendConfig {
        timeout_secs: 0.3,
        ..TtsBackendConfig::http(url)
    };
    assert!(matches!(synthesize(&request(), &config), Err(TtsError::Timeout)));
}

#[test]
fn closed_port_is_unreachable() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let backend = build_backend(&TtsBackendConfig::http(format!("http://127.0.0.1:{port}/tts"))).unwrap();
    assert!(matches!(backend.synthesize(&request()), Err(TtsError::BackendUnreachable(_))));
}

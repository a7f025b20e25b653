use std::collections::VecDeque;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use osdg::translate::{CachedTranslator, HttpBackend, HttpBackendConfig};
use osdg_core::pipeline::TranslationError;
use osdg_core::{LanguageCode, Translator};
use serde_json::{json, Value};

#[derive(Default)]
struct Mock {
    /// Statuses to answer with, in order; 200 once exhausted.
    script: VecDeque<u16>,
    requests: Vec<Value>,
    body: Option<String>,
}

type Shared = Arc<Mutex<Mock>>;

async fn translate(State(mock): State<Shared>, Json(req): Json<Value>) -> (StatusCode, String) {
    let mut m = mock.lock().unwrap();
    m.requests.push(req.clone());
    let status = m.script.pop_front().unwrap_or(200);
    let body = m
        .body
        .clone()
        .unwrap_or_else(|| json!({ "translation": format!("english of {}", req["text"].as_str().unwrap()) }).to_string());
    (StatusCode::from_u16(status).unwrap(), body)
}

fn start(mock: Shared) -> SocketAddr {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            let app = Router::new().route("/translate", post(translate)).with_state(mock);
            axum::serve(listener, app).await.unwrap();
        });
    });
    rx.recv().unwrap()
}

fn backend(addr: SocketAddr, max_retries: u32) -> HttpBackend {
    HttpBackend::new(HttpBackendConfig {
        endpoint: format!("http://{addr}/translate"),
        auth_token: Some("secret".into()),
        timeout_ms: 5_000,
        max_retries,
        initial_backoff_ms: 1,
    })
}

fn mock(script: &[u16]) -> Shared {
    Arc::new(Mutex::new(Mock {
        script: script.iter().copied().collect(),
        ..Mock::default()
    }))
}

#[test]
fn sends_the_wire_request() {
    let m = mock(&[]);
    let b = backend(start(m.clone()), 0);
    assert_eq!(b.translate("hola", LanguageCode::Es).unwrap(), "english of hola");
    let req = m.lock().unwrap().requests[0].clone();
    assert_eq!(req, json!({ "text": "hola", "source": "es", "target": "en" }));
}

#[test]
fn transient_failures_are_retried() {
    let m = mock(&[503, 429]);
    let b = backend(start(m.clone()), 2);
    assert_eq!(b.translate("hola", LanguageCode::Es).unwrap(), "english of hola");
    assert_eq!(m.lock().unwrap().requests.len(), 3);

    let m = mock(&[500, 500, 500, 500]);
    let b = backend(start(m.clone()), 2);
    match b.translate("hola", LanguageCode::Es) {
        Err(TranslationError::Backend { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn client_errors_are_not_retried() {
    let m = mock(&[400]);
    let b = backend(start(m.clone()), 5);
    match b.translate("hola", LanguageCode::Es) {
        Err(TranslationError::Backend { attempts, message, .. }) => {
            assert_eq!(attempts, 1);
            assert!(message.contains("400"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn malformed_responses_are_reported() {
    let m = mock(&[]);
    m.lock().unwrap().body = Some("{\"wrong\": 1}".into());
    let b = backend(start(m.clone()), 0);
    assert!(matches!(b.translate("hola", LanguageCode::Es), Err(TranslationError::MalformedResponse { .. })));
    m.lock().unwrap().body = Some("{\"translation\": \"  \"}".into());
    assert!(matches!(b.translate("hola", LanguageCode::Es), Err(TranslationError::MalformedResponse { .. })));
}

#[test]
fn unreachable_endpoint_exhausts_retries() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    match backend(addr, 1).translate("hola", LanguageCode::Es) {
        Err(TranslationError::Backend { attempts, .. }) => assert_eq!(attempts, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn cache_avoids_repeat_calls() {
    let m = mock(&[]);
    let t = CachedTranslator::new(backend(start(m.clone()), 0), 8);
    for _ in 0..3 {
        t.translate_to_english("hola mundo", LanguageCode::Es).unwrap();
    }
    t.translate_to_english("hello", LanguageCode::En).unwrap();
    assert_eq!(m.lock().unwrap().requests.len(), 1);
    t.translate_to_english("hola mundo", LanguageCode::Pt).unwrap();
    assert_eq!(m.lock().unwrap().requests.len(), 2);
}

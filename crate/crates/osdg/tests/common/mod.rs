#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Duration;

use osdg::config::{ServiceConfig, TranslatorConfig};
use osdg::corpus_io::{self, Strictness};
use osdg::model_io;
use osdg::service::{self, AppState};
use osdg::train::{self, TrainOptions};
use osdg_core::{AggregationConfig, Corpus, OvrModelSet};
use serde_json::Value;

pub fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

pub fn sample_corpus() -> Corpus {
    corpus_io::load_community_dataset(data("sample_corpus.tsv"), Strictness::Strict)
        .unwrap()
        .corpus
}

pub struct Trained {
    pub model_set: OvrModelSet,
    pub json: String,
    pub train: Corpus,
    pub test: Corpus,
}

/// Models trained once per test binary on the bundled sample corpus with
/// default options.
pub fn trained() -> &'static Trained {
    static TRAINED: OnceLock<Trained> = OnceLock::new();
    TRAINED.get_or_init(|| {
        let options = TrainOptions::default();
        let (train, test) = train::prepare_split(&sample_corpus(), &options).unwrap();
        let model_set = train::train_model_set(&train, &options).unwrap();
        let json = model_io::to_json(&model_set);
        Trained {
            model_set,
            json,
            train,
            test,
        }
    })
}

pub fn write_model(dir: &Path) -> PathBuf {
    let path = dir.join("model.json");
    std::fs::write(&path, &trained().json).unwrap();
    path
}

pub fn service_config(dir: &Path) -> ServiceConfig {
    ServiceConfig {
        listen: "127.0.0.1:0".parse().unwrap(),
        model_path: write_model(dir),
        ontology_path: data("seed_ontology.csv"),
        translator: TranslatorConfig::None,
        translation_cache_capacity: 64,
        pdf_extractor_command: None,
        feedback_dir: dir.join("feedback"),
        community_dir: None,
        community_seed: 42,
        aggregation: AggregationConfig::default(),
        min_hits: 1,
        max_body_bytes: 64 * 1024,
        cors_origins: Vec::new(),
    }
}

/// A service running on a background runtime; stops when dropped.
pub struct Server {
    pub addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl Server {
    pub fn start(config: ServiceConfig) -> Server {
        let state = AppState::from_config(&config).unwrap();
        let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().unwrap();
            rt.block_on(async move {
                service::serve_with_shutdown(
                    &config,
                    state,
                    async {
                        let _ = stop_rx.await;
                    },
                    move |addr| addr_tx.send(addr).unwrap(),
                )
                .await
                .unwrap();
            });
        });
        let addr = addr_rx.recv_timeout(Duration::from_secs(10)).unwrap();
        Server {
            addr,
            stop: Some(stop_tx),
            thread: Some(thread),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(60)))
        .build()
        .into()
}

fn finish(resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> (u16, Value) {
    let mut resp = resp.unwrap();
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().unwrap();
    let value = if text.is_empty() {
        Value::Null
    } else {
        serde_json::from_str(&text).unwrap_or(Value::String(text))
    };
    (status, value)
}

pub fn get(url: &str) -> (u16, Value) {
    finish(agent().get(url).call())
}

pub fn post_raw(url: &str, content_type: &str, body: &[u8]) -> (u16, Value) {
    finish(agent().post(url).header("content-type", content_type).send(body))
}

pub fn post_json(url: &str, body: &Value) -> (u16, Value) {
    post_raw(url, "application/json", body.to_string().as_bytes())
}

/// `multipart/form-data` body with a `file` part and optional extra text parts.
pub fn multipart(file_type: &str, file: &[u8], fields: &[(&str, &str)]) -> (String, Vec<u8>) {
    let boundary = "osdgtestboundary7MA4YWxk";
    let mut body = Vec::new();
    for (name, value) in fields {
        body.extend_from_slice(
            format!("--{boundary}\r\nContent-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}\r\n").as_bytes(),
        );
    }
    body.extend_from_slice(
        format!(
            "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"upload\"\r\nContent-Type: {file_type}\r\n\r\n"
        )
        .as_bytes(),
    );
    body.extend_from_slice(file);
    body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}

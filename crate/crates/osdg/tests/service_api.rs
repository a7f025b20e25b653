mod common;

use common::{get, multipart, post_json, post_raw, read_fixture, service_config, Server};
use osdg::community_store::CommunityStore;
use osdg_core::community::LabelTask;
use osdg_core::SdgId;
use serde_json::{json, Value};

fn server() -> (tempfile::TempDir, Server) {
    let dir = tempfile::tempdir().unwrap();
    let config = service_config(dir.path());
    let server = Server::start(config);
    (dir, server)
}

fn code(v: &Value) -> &str {
    v["code"].as_str().unwrap_or_default()
}

#[test]
fn health_reports_versions() {
    let (_dir, s) = server();
    let (status, body) = get(&s.url("/health"));
    assert_eq!(status, 200);
    assert!(body["model_version"].as_str().unwrap().starts_with("osdg-ovr/1+"));
    assert_eq!(body["ontology_version"], "seed_ontology");
    assert!(body["uptime_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn classify_health_abstract() {
    let (_dir, s) = server();
    let (status, body) = post_json(&s.url("/api/v1/classify"), &json!({ "text": read_fixture("health_abstract.txt") }));
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["most_relevant"], 3);
    assert!(body["final_labels"].as_array().unwrap().contains(&json!(3)));
    assert_eq!(body["language"], "en");
    assert_eq!(body["translated"], false);
    assert_eq!(body["per_sdg"].as_object().unwrap().len(), 16);
}

#[test]
fn classify_errors() {
    let (_dir, s) = server();
    let url = s.url("/api/v1/classify");
    let (status, body) = post_json(&url, &json!({ "text": "   " }));
    assert_eq!((status, code(&body)), (400, "EmptyText"));
    let (status, body) = post_json(&url, &json!({ "text": "water", "language": "ja" }));
    assert_eq!((status, code(&body)), (400, "UnsupportedLanguage"));
    let (status, body) = post_raw(&url, "application/json", b"{not json");
    assert_eq!((status, code(&body)), (400, "InvalidJson"));
    let (status, body) = post_json(&url, &json!({ "text": "agua limpia", "language": "es" }));
    assert_eq!((status, code(&body)), (502, "TranslatorUnavailable"));
    let big = "water ".repeat(20_000);
    let (status, body) = post_json(&url, &json!({ "text": big }));
    assert_eq!((status, code(&body)), (413, "PayloadTooLarge"));
}

#[test]
fn classify_document_text_and_pdf() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = service_config(dir.path());
    config.pdf_extractor_command = Some("cat".into());
    let s = Server::start(config);
    let url = s.url("/api/v1/classify-document");
    let doc = read_fixture("document_20.txt");

    let (ct, body) = multipart("text/plain", doc.as_bytes(), &[("language", "en")]);
    let (status, out) = post_raw(&url, &ct, &body);
    assert_eq!(status, 200, "{out}");
    assert_eq!(out["chunk_count"], 20);
    assert_eq!(out["distribution"], json!({ "3": 0.6, "6": 0.3, "13": 0.1 }));

    // The stand-in extractor passes bytes through, so a "PDF" of the same text
    // must classify identically.
    let (ct, body) = multipart("application/pdf", doc.as_bytes(), &[]);
    let (status, pdf_out) = post_raw(&url, &ct, &body);
    assert_eq!(status, 200);
    assert_eq!(pdf_out["distribution"], out["distribution"]);

    let (ct, body) = multipart("image/png", b"\x89PNG", &[]);
    let (status, out) = post_raw(&url, &ct, &body);
    assert_eq!((status, code(&out)), (415, "UnsupportedMediaType"));

    let (ct, body) = multipart("text/plain", b"\n\n  \n", &[]);
    let (status, out) = post_raw(&url, &ct, &body);
    assert_eq!((status, code(&out)), (422, "EmptyDocument"));
}

#[test]
fn pdf_without_extractor_is_unprocessable() {
    let (_dir, s) = server();
    let (ct, body) = multipart("application/pdf", b"%PDF-1.4", &[]);
    let (status, out) = post_raw(&s.url("/api/v1/classify-document"), &ct, &body);
    assert_eq!((status, code(&out)), (422, "NoExtractor"));
}

#[test]
fn failing_extractor_is_bad_gateway() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = service_config(dir.path());
    config.pdf_extractor_command = Some("false".into());
    let s = Server::start(config);
    let (ct, body) = multipart("application/pdf", b"%PDF-1.4", &[]);
    let (status, out) = post_raw(&s.url("/api/v1/classify-document"), &ct, &body);
    assert_eq!((status, code(&out)), (502, "ExtractorFailed"));
}

#[test]
fn suggestions_are_recorded() {
    let (dir, s) = server();
    let url = s.url("/api/v1/suggestions");
    let (status, a) = post_json(&url, &json!({ "text": "coral reefs", "suggested_sdgs": [14] }));
    assert_eq!(status, 202);
    let (_, b) = post_json(&url, &json!({ "text": "coral reefs", "suggested_sdgs": [14, 13], "note": "also climate" }));
    assert!(b["suggestion_id"].as_u64() > a["suggestion_id"].as_u64());
    let (status, out) = post_json(&url, &json!({ "text": "coral reefs", "suggested_sdgs": [] }));
    assert_eq!((status, code(&out)), (400, "EmptySuggestion"));
    let (status, out) = post_json(&url, &json!({ "text": "coral reefs", "suggested_sdgs": [18] }));
    assert_eq!((status, code(&out)), (400, "InvalidSdg"));
    let log = std::fs::read_to_string(dir.path().join("feedback/suggestions.ndjson")).unwrap();
    assert_eq!(log.lines().count(), 2);
}

#[test]
fn targets_and_unknown_routes() {
    let (_dir, s) = server();
    let (status, body) = get(&s.url("/api/v1/sdg-targets"));
    assert_eq!(status, 200);
    assert_eq!(body["goals"].as_array().unwrap().len(), 17);
    let (status, body) = get(&s.url("/api/v1/nope"));
    assert_eq!((status, code(&body)), (404, "NotFound"));
    let (status, body) = get(&s.url("/api/v1/classify"));
    assert_eq!((status, code(&body)), (405, "MethodNotAllowed"));
    let (status, body) = post_json(&s.url("/api/v1/sessions"), &json!({ "volunteer_id": "v", "mode": "intro" }));
    assert_eq!((status, code(&body)), (404, "CommunityDisabled"));
}

fn pool(n: usize) -> (Vec<LabelTask>, Vec<String>) {
    let tasks: Vec<LabelTask> = (0..n)
        .map(|i| LabelTask {
            task_id: format!("task{i:03}"),
            snippet: format!("Snippet number {i} about clean water."),
            candidate_sdg: SdgId::new((i % 16) as i64 + 1).unwrap(),
            source_ref: None,
            accepts: 0,
            rejects: 0,
        })
        .collect();
    let intro = tasks[..10].iter().map(|t| t.task_id.clone()).collect();
    (tasks, intro)
}

#[test]
fn labeling_flow() {
    let dir = tempfile::tempdir().unwrap();
    let store_dir = dir.path().join("store");
    let (tasks, intro) = pool(40);
    CommunityStore::init(&store_dir, &tasks, &intro).unwrap();
    let mut config = service_config(dir.path());
    config.community_dir = Some(store_dir);
    let s = Server::start(config);
    let sessions = s.url("/api/v1/sessions");

    let (status, body) = post_json(&sessions, &json!({ "volunteer_id": "ana", "mode": "mixed" }));
    assert_eq!((status, code(&body)), (409, "NotOnboarded"));
    let (status, body) = post_json(&sessions, &json!({ "volunteer_id": "ana", "mode": "single_sdg" }));
    assert_eq!((status, code(&body)), (400, "InvalidMode"));

    let (status, intro_session) = post_json(&sessions, &json!({ "volunteer_id": "ana", "mode": "intro" }));
    assert_eq!(status, 200, "{intro_session}");
    let sid = intro_session["session_id"].as_str().unwrap().to_string();
    let (status, body) = get(&s.url("/api/v1/volunteers/ana/intro-stats"));
    assert_eq!((status, code(&body)), (409, "IntroIncomplete"));

    for i in 0..10 {
        let (status, next) = get(&s.url(&format!("/api/v1/sessions/{sid}/next")));
        assert_eq!(status, 200);
        assert_eq!(next["complete"], false);
        assert_eq!(next["position"], i + 1);
        let task_id = next["task"]["task_id"].as_str().unwrap();
        if i == 0 {
            let (status, body) =
                post_json(&s.url(&format!("/api/v1/sessions/{sid}/votes")), &json!({ "task_id": "task039", "decision": "accept" }));
            assert_eq!((status, code(&body)), (409, "OutOfOrder"));
        }
        let decision = if i % 2 == 0 { "accept" } else { "reject" };
        let (status, out) =
            post_json(&s.url(&format!("/api/v1/sessions/{sid}/votes")), &json!({ "task_id": task_id, "decision": decision }));
        assert_eq!(status, 200, "{out}");
        assert_eq!(out["votes_in_session"], i + 1);
    }
    let (_, next) = get(&s.url(&format!("/api/v1/sessions/{sid}/next")));
    assert_eq!(next, json!({ "complete": true }));

    let (status, stats) = get(&s.url("/api/v1/volunteers/ana/intro-stats"));
    assert_eq!(status, 200);
    assert_eq!(stats.as_array().unwrap().len(), 10);
    assert!(stats.as_array().unwrap().iter().all(|s| s["community_votes"] == 1));

    let (status, session) = post_json(&sessions, &json!({ "volunteer_id": "ana", "mode": "single_sdg", "sdg": 6 }));
    assert_eq!(status, 200, "{session}");
    let sid = session["session_id"].as_str().unwrap();
    let (_, next) = get(&s.url(&format!("/api/v1/sessions/{sid}/next")));
    assert_eq!(next["task"]["candidate_sdg"], 6);

    let (status, body) = get(&s.url("/api/v1/sessions/nope/next"));
    assert_eq!((status, code(&body)), (404, "UnknownSession"));
    let (status, body) = post_json(&s.url("/api/v1/sessions/nope/votes"), &json!({ "task_id": "x", "decision": "maybe" }));
    assert_eq!((status, code(&body)), (400, "InvalidJson"));
}

#[test]
fn cors_headers_for_configured_origin() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = service_config(dir.path());
    config.cors_origins = vec!["http://labeling.example".into()];
    let s = Server::start(config);
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let resp = agent
        .get(&s.url("/health"))
        .header("Origin", "http://labeling.example")
        .call()
        .unwrap();
    assert_eq!(
        resp.headers().get("access-control-allow-origin").unwrap(),
        "http://labeling.example"
    );
}

#[test]
fn missing_model_refuses_to_start() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = service_config(dir.path());
    std::fs::write(&config.model_path, "").unwrap();
    assert!(osdg::service::AppState::from_config(&config).is_err());
    config.model_path = dir.path().join("absent.json");
    assert!(osdg::service::AppState::from_config(&config).is_err());
}

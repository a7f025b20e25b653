//! HTTP API.
//!
//! | Method | Path                                   | Purpose                        |
//! |--------|----------------------------------------|--------------------------------|
//! | POST   | `/api/v1/classify`                     | classify one text              |
//! | POST   | `/api/v1/classify-document`            | classify a PDF or text file    |
//! | POST   | `/api/v1/suggestions`                  | record suggested labels        |
//! | POST   | `/api/v1/sessions`                     | open a labeling session        |
//! | GET    | `/api/v1/sessions/{id}/next`           | current task of a session      |
//! | POST   | `/api/v1/sessions/{id}/votes`          | accept or reject current task  |
//! | GET    | `/api/v1/volunteers/{id}/intro-stats`  | intro answers vs. community    |
//! | GET    | `/api/v1/sdg-targets`                  | goals and their targets        |
//! | GET    | `/health`                              | versions and uptime            |
//!
//! Every error response is JSON of the form `{"code": ..., "message": ...}`.

use std::collections::BTreeSet;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Path as UrlPath, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use osdg_core::community::{CommunityError, Decision, NextTask, SessionMode};
use osdg_core::hash::{hex_digest, input_hash};
use osdg_core::pipeline::TranslationError;
use osdg_core::{
    AggregationConfig, ClassificationResult, Classifier, DocumentResult, LanguageCode, Ontology, OvrModelSet,
    PipelineError, SdgId, Translator,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::community_store::{CommunityStore, StoreError};
use crate::config::{ServiceConfig, TranslatorConfig};
use crate::extract::{ExtractError, PdfExtractor};
use crate::feedback::{FeedbackError, FeedbackStore};
use crate::model_io::{self, ModelIoError};
use crate::ontology_io::{self, OntologyIoError};
use crate::targets::{sdg_targets, SdgTargets};
use crate::translate::{CachedTranslator, DictionaryBackend, DictionaryError, HttpBackend};

pub type SharedTranslator = Box<dyn Translator + Send + Sync>;

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("cannot load model: {0}")]
    Model(#[from] ModelIoError),
    #[error("cannot load ontology: {0}")]
    Ontology(#[from] OntologyIoError),
    #[error("cannot load translator dictionary: {0}")]
    Dictionary(#[from] DictionaryError),
    #[error("invalid PDF extractor: {0}")]
    Extractor(#[from] ExtractError),
    #[error("cannot open feedback store: {0}")]
    Feedback(#[from] FeedbackError),
    #[error("cannot open community store: {0}")]
    Community(#[from] StoreError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server error: {0}")]
    Serve(std::io::Error),
    #[error("invalid CORS origin {0:?}")]
    Cors(String),
}

/// Everything request handlers share. Immutable apart from the two stores,
/// which serialize their own writes.
pub struct AppState {
    pub model_set: OvrModelSet,
    pub model_version: String,
    pub ontology: Ontology,
    pub translator: SharedTranslator,
    pub extractor: Option<PdfExtractor>,
    pub feedback: FeedbackStore,
    pub community: Option<CommunityStore>,
    pub aggregation: AggregationConfig,
    pub min_hits: usize,
    pub targets: SdgTargets,
    pub started: Instant,
}

impl AppState {
    pub fn from_config(config: &ServiceConfig) -> Result<Self, StartupError> {
        let model_bytes = std::fs::read(&config.model_path).map_err(|source| ModelIoError::Io {
            path: config.model_path.display().to_string(),
            source,
        })?;
        let model_text = String::from_utf8(model_bytes).map_err(|e| ModelIoError::Corrupt(e.to_string()))?;
        let model_set = model_io::from_json(&model_text)?;
        let model_version = format!("{}+{}", model_set.format_version(), &hex_digest(model_text.as_bytes())[..12]);
        let (ontology, warnings) = ontology_io::load_ontology(&config.ontology_path)?;
        for w in warnings {
            tracing::warn!("ontology: {w}");
        }
        let backend: SharedTranslator = match &config.translator {
            TranslatorConfig::None => Box::new(osdg_core::pipeline::NoTranslator),
            TranslatorConfig::Dictionary { path } => Box::new(DictionaryBackend::load(path)?),
            TranslatorConfig::Http(h) => Box::new(HttpBackend::new(h.clone())),
        };
        let translator: SharedTranslator = Box::new(CachedTranslator::new(backend, config.translation_cache_capacity));
        let extractor = config.pdf_extractor_command.as_deref().map(PdfExtractor::new).transpose()?;
        let feedback = FeedbackStore::open(&config.feedback_dir)?;
        let community = config
            .community_dir
            .as_ref()
            .map(|d| CommunityStore::open(d, config.community_seed))
            .transpose()?;
        Ok(AppState {
            model_set,
            model_version,
            ontology,
            translator,
            extractor,
            feedback,
            community,
            aggregation: config.aggregation,
            min_hits: config.min_hits,
            targets: sdg_targets(),
            started: Instant::now(),
        })
    }

    pub fn classifier(&self) -> Classifier<'_> {
        let mut c = Classifier::new(&self.model_set, &self.ontology, &*self.translator);
        c.min_hits = self.min_hits;
        c
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.to_string(),
            message: message.into(),
            details: None,
        }
    }

    fn internal(message: impl std::fmt::Display) -> Self {
        tracing::error!("{message}");
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", "internal server error")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<BytesRejection> for ApiError {
    fn from(r: BytesRejection) -> Self {
        let status = r.status();
        let code = if status == StatusCode::PAYLOAD_TOO_LARGE {
            "PayloadTooLarge"
        } else {
            "BadRequest"
        };
        ApiError::new(status, code, r.body_text())
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::EmptyText => ApiError::new(StatusCode::BAD_REQUEST, "EmptyText", e.to_string()),
            PipelineError::EmptyDocument => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "EmptyDocument", e.to_string())
            }
            PipelineError::Translation(t) => {
                let code = match t {
                    TranslationError::Unavailable(_) => "TranslatorUnavailable",
                    TranslationError::Backend { .. } => "TranslatorFailed",
                    TranslationError::MalformedResponse { .. } => "MalformedResponse",
                };
                ApiError::new(StatusCode::BAD_GATEWAY, code, t.to_string())
            }
            PipelineError::InvalidConfig(_) => ApiError::internal(e),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let StoreError::Community(c) = e else {
            return ApiError::internal(e);
        };
        let message = c.to_string();
        let (status, code) = match &c {
            CommunityError::UnknownSession(_) => (StatusCode::NOT_FOUND, "UnknownSession"),
            CommunityError::UnknownTask(_) => (StatusCode::NOT_FOUND, "UnknownTask"),
            CommunityError::AlreadyOnboarded(_) => (StatusCode::CONFLICT, "AlreadyOnboarded"),
            CommunityError::NotOnboarded(_) => (StatusCode::CONFLICT, "NotOnboarded"),
            CommunityError::IntroIncomplete(_) => (StatusCode::CONFLICT, "IntroIncomplete"),
            CommunityError::OpenSessionExists { .. } => (StatusCode::CONFLICT, "OpenSessionExists"),
            CommunityError::NoEligibleTasks(_) => (StatusCode::CONFLICT, "NoEligibleTasks"),
            CommunityError::SessionComplete(_) => (StatusCode::CONFLICT, "SessionComplete"),
            CommunityError::DuplicateVote { .. } => (StatusCode::CONFLICT, "DuplicateVote"),
            CommunityError::VoteCapReached { .. } => (StatusCode::CONFLICT, "VoteCapReached"),
            CommunityError::TaskRetired(_) => (StatusCode::CONFLICT, "TaskRetired"),
            CommunityError::OutOfOrder { .. } => (StatusCode::CONFLICT, "OutOfOrder"),
            CommunityError::InvalidIntroConfig(_) | CommunityError::DuplicateTask(_) | CommunityError::Inconsistent(_) => {
                return ApiError::internal(c)
            }
        };
        let mut err = ApiError::new(status, code, message);
        match c {
            CommunityError::VoteCapReached { substitute, .. } => {
                err.details = Some(serde_json::json!({ "substitute": substitute }));
            }
            CommunityError::OpenSessionExists { session_id, .. } => {
                err.details = Some(serde_json::json!({ "session_id": session_id }));
            }
            _ => {}
        }
        err
    }
}

fn parse_json<T: DeserializeOwned>(body: Result<Bytes, BytesRejection>) -> Result<T, ApiError> {
    let body = body?;
    serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "InvalidJson", e.to_string()))
}

fn parse_language(raw: &str) -> Result<LanguageCode, ApiError> {
    LanguageCode::from_str(raw.trim())
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "UnsupportedLanguage", e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)?
}

fn community(state: &AppState) -> Result<&CommunityStore, ApiError> {
    state.community.as_ref().ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "CommunityDisabled",
            "no community store is configured on this server",
        )
    })
}

#[derive(Deserialize)]
struct ClassifyRequest {
    text: String,
    #[serde(default = "default_language")]
    language: String,
}

fn default_language() -> String {
    "en".into()
}

async fn classify(
    State(state): State<Arc<AppState>>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<ClassificationResult>, ApiError> {
    let req: ClassifyRequest = parse_json(body)?;
    let language = parse_language(&req.language)?;
    if req.text.trim().is_empty() {
        return Err(PipelineError::EmptyText.into());
    }
    let result = blocking(move || Ok(state.classifier().classify_text(&req.text, language)?)).await?;
    Ok(Json(result))
}

async fn classify_document(
    State(state): State<Arc<AppState>>,
    multipart: Result<Multipart, axum::extract::multipart::MultipartRejection>,
) -> Result<Json<DocumentResult>, ApiError> {
    let mut multipart = multipart.map_err(|r| ApiError::new(r.status(), "InvalidMultipart", r.body_text()))?;
    let mut file: Option<(String, Bytes)> = None;
    let mut language = LanguageCode::En;
    loop {
        let field = match multipart.next_field().await {
            Ok(Some(f)) => f,
            Ok(None) => break,
            Err(e) => {
                let status = e.status();
                let code = if status == StatusCode::PAYLOAD_TOO_LARGE {
                    "PayloadTooLarge"
                } else {
                    "InvalidMultipart"
                };
                return Err(ApiError::new(status, code, e.body_text()));
            }
        };
        match field.name() {
            Some("file") => {
                let mime = field.content_type().unwrap_or("application/octet-stream").to_string();
                let bytes = field.bytes().await.map_err(|e| ApiError::new(e.status(), "InvalidMultipart", e.body_text()))?;
                file = Some((mime, bytes));
            }
            Some("language") => {
                let raw = field.text().await.map_err(|e| ApiError::new(e.status(), "InvalidMultipart", e.body_text()))?;
                language = parse_language(&raw)?;
            }
            _ => {}
        }
    }
    let (mime, bytes) =
        file.ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "MissingFile", "multipart field \"file\" is required"))?;
    let essence = mime.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
    let result = blocking(move || {
        let text = match essence.as_str() {
            "text/plain" => String::from_utf8(bytes.to_vec())
                .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "InvalidEncoding", "text file is not UTF-8"))?,
            "application/pdf" => {
                let extractor = state.extractor.as_ref().ok_or_else(|| {
                    ApiError::new(
                        StatusCode::UNPROCESSABLE_ENTITY,
                        "NoExtractor",
                        "no PDF extractor is configured",
                    )
                })?;
                extractor.extract(&bytes).map_err(|e| match e {
                    ExtractError::EmptyText => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "EmptyExtraction", e.to_string()),
                    _ => ApiError::new(StatusCode::BAD_GATEWAY, "ExtractorFailed", e.to_string()),
                })?
            }
            other => {
                return Err(ApiError::new(
                    StatusCode::UNSUPPORTED_MEDIA_TYPE,
                    "UnsupportedMediaType",
                    format!("expected application/pdf or text/plain, got {other:?}"),
                ))
            }
        };
        Ok(state.classifier().classify_document(&text, language, &state.aggregation)?)
    })
    .await?;
    Ok(Json(result))
}

#[derive(Deserialize)]
struct SuggestionRequest {
    text: String,
    suggested_sdgs: Vec<i64>,
    #[serde(default)]
    note: Option<String>,
}

#[derive(Serialize, Deserialize)]
pub struct SuggestionAccepted {
    pub suggestion_id: u64,
}

async fn suggestions(
    State(state): State<Arc<AppState>>,
    body: Result<Bytes, BytesRejection>,
) -> Result<(StatusCode, Json<SuggestionAccepted>), ApiError> {
    let req: SuggestionRequest = parse_json(body)?;
    if req.text.trim().is_empty() {
        return Err(PipelineError::EmptyText.into());
    }
    if req.suggested_sdgs.is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "EmptySuggestion", "suggested_sdgs must not be empty"));
    }
    if req.suggested_sdgs.len() > usize::from(SdgId::MAX) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "InvalidSdg", "at most 17 SDGs may be suggested"));
    }
    let sdgs = req
        .suggested_sdgs
        .iter()
        .map(|&n| SdgId::new(n))
        .collect::<Result<BTreeSet<_>, _>>()
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "InvalidSdg", e.to_string()))?;
    let id = blocking(move || {
        state
            .feedback
            .record_suggestion(&input_hash(&req.text), &req.text, sdgs, req.note)
            .map_err(|e| match e {
                FeedbackError::EmptySuggestion => ApiError::new(StatusCode::BAD_REQUEST, "EmptySuggestion", e.to_string()),
                other => ApiError::internal(other),
            })
    })
    .await?;
    Ok((StatusCode::ACCEPTED, Json(SuggestionAccepted { suggestion_id: id })))
}

#[derive(Deserialize)]
struct SessionRequest {
    volunteer_id: String,
    mode: String,
    #[serde(default)]
    sdg: Option<i64>,
}

fn parse_mode(req: &SessionRequest) -> Result<SessionMode, ApiError> {
    let bad = |m: String| ApiError::new(StatusCode::BAD_REQUEST, "InvalidMode", m);
    match req.mode.as_str() {
        "intro" => Ok(SessionMode::Intro),
        "mixed" => Ok(SessionMode::Mixed),
        "single_sdg" => {
            let n = req.sdg.ok_or_else(|| bad("mode single_sdg requires \"sdg\"".into()))?;
            let sdg = SdgId::new(n).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "InvalidSdg", e.to_string()))?;
            Ok(SessionMode::SingleSdg { sdg })
        }
        other => Err(bad(format!("unknown mode {other:?}; expected intro, mixed or single_sdg"))),
    }
}

async fn start_session(
    State(state): State<Arc<AppState>>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let req: SessionRequest = parse_json(body)?;
    if req.volunteer_id.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "InvalidVolunteer", "volunteer_id must not be empty"));
    }
    let mode = parse_mode(&req)?;
    community(&state)?;
    let session = blocking(move || Ok(community(&state)?.start_session(&req.volunteer_id, mode)?)).await?;
    Ok(Json(session).into_response())
}

/// Wire form of [`NextTask`].
#[derive(Debug, Serialize, Deserialize)]
pub struct NextTaskResponse {
    pub complete: bool,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub task: Option<Value>,
}

async fn next_task(
    State(state): State<Arc<AppState>>,
    UrlPath(session_id): UrlPath<String>,
) -> Result<Json<NextTaskResponse>, ApiError> {
    let next = community(&state)?.next_task(&session_id)?;
    Ok(Json(match next {
        NextTask::Complete => NextTaskResponse {
            complete: true,
            task: None,
        },
        NextTask::Task { .. } => {
            let mut v = serde_json::to_value(&next).map_err(ApiError::internal)?;
            if let Some(obj) = v.as_object_mut() {
                obj.remove("status");
            }
            NextTaskResponse {
                complete: false,
                task: Some(v),
            }
        }
    }))
}

#[derive(Deserialize)]
struct VoteRequest {
    task_id: String,
    decision: Decision,
}

async fn vote(
    State(state): State<Arc<AppState>>,
    UrlPath(session_id): UrlPath<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let req: VoteRequest = parse_json(body)?;
    community(&state)?;
    let outcome =
        blocking(move || Ok(community(&state)?.record_vote(&session_id, &req.task_id, req.decision)?)).await?;
    Ok(Json(outcome).into_response())
}

async fn intro_stats(
    State(state): State<Arc<AppState>>,
    UrlPath(volunteer_id): UrlPath<String>,
) -> Result<Response, ApiError> {
    let stats = community(&state)?.intro_stats(&volunteer_id)?;
    Ok(Json(stats).into_response())
}

async fn targets(State(state): State<Arc<AppState>>) -> Json<SdgTargets> {
    Json(state.targets.clone())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_version: String,
    pub ontology_version: String,
    pub uptime_seconds: f64,
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        model_version: state.model_version.clone(),
        ontology_version: state.ontology.version().to_string(),
        uptime_seconds: state.started.elapsed().as_secs_f64(),
    })
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "MethodNotAllowed", "method not allowed for this endpoint")
}

pub fn router(state: Arc<AppState>, max_body_bytes: usize, cors_origins: &[String]) -> Result<Router, StartupError> {
    let mut app = Router::new()
        .route("/api/v1/classify", post(classify))
        .route("/api/v1/classify-document", post(classify_document))
        .route("/api/v1/suggestions", post(suggestions))
        .route("/api/v1/sessions", post(start_session))
        .route("/api/v1/sessions/{id}/next", get(next_task))
        .route("/api/v1/sessions/{id}/votes", post(vote))
        .route("/api/v1/volunteers/{id}/intro-stats", get(intro_stats))
        .route("/api/v1/sdg-targets", get(targets))
        .route("/health", get(health))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .layer(DefaultBodyLimit::max(max_body_bytes))
        .with_state(state);
    if !cors_origins.is_empty() {
        let origins = cors_origins
            .iter()
            .map(|o| HeaderValue::from_str(o).map_err(|_| StartupError::Cors(o.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        app = app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods([axum::http::Method::GET, axum::http::Method::POST])
                .allow_headers([axum::http::header::CONTENT_TYPE]),
        );
    }
    Ok(app)
}

/// Binds, serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve_with_shutdown(
    config: &ServiceConfig,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
    on_bound: impl FnOnce(std::net::SocketAddr),
) -> Result<(), StartupError> {
    let app = router(Arc::new(state), config.max_body_bytes, &config.cors_origins)?;
    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .map_err(|source| StartupError::Bind {
            addr: config.listen.to_string(),
            source,
        })?;
    let addr = listener.local_addr().map_err(StartupError::Serve)?;
    tracing::info!(%addr, "listening");
    on_bound(addr);
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(StartupError::Serve)
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        if let Ok(mut s) = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            s.recv().await;
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        () = ctrl_c => {},
        () = term => {},
    }
    tracing::info!("shutting down");
}

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use dermtriage_core::ensemble::average_distribution;
use dermtriage_core::imaging::{decode_image, preprocess, sniff_format};
use dermtriage_core::inference::{predict_all, InferenceError};
use dermtriage_core::metrics::{parse_predictions, summarize, MetricsError};
use dermtriage_core::reporting::{chat_respond, generate_report, validate_query, QueryVerdict, ReportRequest};
use dermtriage_core::{ChatMessage, LlmClient};
use serde::Deserialize;
use serde_json::{json, Value};
use uuid::Uuid;

use crate::record::{CaseRecord, CaseStatus};
use crate::store::CaseStore;
use crate::AppState;

/// Room for multipart boundaries and headers on top of the image limit.
const MULTIPART_SLACK: usize = 64 * 1024;

#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.body[key] = value.into();
        self
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("case `{id}` not found"))
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        tracing::error!(error = %e, "internal error");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub(crate) fn routes(state: Arc<AppState>) -> Router {
    let limit = state.config.max_upload_bytes + MULTIPART_SLACK;
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/cases", post(create_case).get(list_cases))
        .route("/v1/cases/{id}", get(get_case))
        .route("/v1/cases/{id}/report", post(create_report))
        .route("/v1/cases/{id}/chat", post(chat))
        .route("/v1/evaluate", post(evaluate))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Value> {
    let backends: Vec<&str> = state.backends.iter().map(|b| b.model_id()).collect();
    Json(json!({
        "status": "ok",
        "backends": backends,
        "llm_configured": state.llm.is_some(),
    }))
}

fn parse_id(raw: &str) -> ApiResult<Uuid> {
    Uuid::parse_str(raw).map_err(|_| ApiError::not_found(raw))
}

async fn load_case(state: &Arc<AppState>, raw: &str) -> ApiResult<CaseRecord> {
    let id = parse_id(raw)?;
    let st = state.clone();
    tokio::task::spawn_blocking(move || st.store.get(id))
        .await
        .map_err(ApiError::internal)?
        .map_err(ApiError::internal)?
        .ok_or_else(|| ApiError::not_found(raw))
}

async fn save_case(state: &Arc<AppState>, record: CaseRecord) -> ApiResult<CaseRecord> {
    let st = state.clone();
    tokio::task::spawn_blocking(move || st.store.put(&record).map(|_| record))
        .await
        .map_err(ApiError::internal)?
        .map_err(ApiError::internal)
}

fn llm(state: &AppState) -> ApiResult<&LlmClient> {
    state.llm.as_ref().ok_or_else(|| {
        ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "no LLM provider configured; set LLM_API_KEY and restart the service",
        )
    })
}

/// Reads the upload from a raw body or the first file part of a multipart form.
async fn read_upload(req: Request) -> ApiResult<Bytes> {
    let is_multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    if !is_multipart {
        return Bytes::from_request(req, &())
            .await
            .map_err(|e| ApiError::new(e.status(), e.body_text()));
    }
    let mut form = Multipart::from_request(req, &())
        .await
        .map_err(|e| ApiError::new(e.status(), e.body_text()))?;
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| ApiError::new(e.status(), e.body_text()))?
    {
        if field.file_name().is_some() || field.name() == Some("image") {
            return field
                .bytes()
                .await
                .map_err(|e| ApiError::new(e.status(), e.body_text()));
        }
    }
    Err(ApiError::new(
        StatusCode::BAD_REQUEST,
        "multipart form has no image part",
    ))
}

fn inference_error(e: InferenceError) -> ApiError {
    match e.model_id() {
        Some(id) => {
            let id = id.to_string();
            tracing::warn!(model_id = %id, error = %e, "backend failure");
            ApiError::new(StatusCode::BAD_GATEWAY, e.to_string()).with("model_id", id)
        }
        None => ApiError::internal(e),
    }
}

async fn create_case(State(state): State<Arc<AppState>>, req: Request) -> ApiResult<(StatusCode, Json<CaseRecord>)> {
    let bytes = read_upload(req).await?;
    let limit = state.config.max_upload_bytes;
    if bytes.len() > limit {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("image is {} bytes; the limit is {limit}", bytes.len()),
        ));
    }
    let Some(format) = sniff_format(&bytes) else {
        return Err(ApiError::new(
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            "unsupported image format; upload a PNG or JPEG file",
        ));
    };

    let st = state.clone();
    let record = tokio::task::spawn_blocking(move || -> ApiResult<CaseRecord> {
        let img = decode_image(&bytes).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
        let input = preprocess(&img, &st.config.preprocess)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
        let predictions = predict_all(&st.backends, &input).map_err(inference_error)?;
        let decision = st.policy.vote(&predictions).map_err(ApiError::internal)?;
        let average = average_distribution(&predictions).map_err(ApiError::internal)?;
        let case_id = Uuid::new_v4();
        let record = CaseRecord::new(
            case_id,
            CaseStore::image_ref(case_id, format),
            decision,
            average,
            Utc::now(),
        );
        st.store.create(&record, &bytes).map_err(ApiError::internal)?;
        Ok(record)
    })
    .await
    .map_err(ApiError::internal)??;

    tracing::info!(
        case_id = %record.case_id,
        final_class = %record.decision.final_class,
        consensus = %record.decision.consensus,
        "case classified"
    );
    Ok((StatusCode::CREATED, Json(record)))
}

#[derive(Debug, Deserialize)]
struct ListParams {
    status: Option<String>,
}

async fn list_cases(
    State(state): State<Arc<AppState>>,
    Query(params): Query<ListParams>,
) -> ApiResult<Json<Vec<CaseRecord>>> {
    let status = params
        .status
        .map(|s| s.parse::<CaseStatus>())
        .transpose()
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e))?;
    let st = state.clone();
    let records = tokio::task::spawn_blocking(move || st.store.list(status))
        .await
        .map_err(ApiError::internal)?
        .map_err(ApiError::internal)?;
    Ok(Json(records))
}

async fn get_case(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<CaseRecord>> {
    load_case(&state, &id).await.map(Json)
}

#[derive(Debug, Deserialize)]
struct ReportParams {
    #[serde(default)]
    force: bool,
}

async fn create_report(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(params): Query<ReportParams>,
) -> ApiResult<Response> {
    let case_id = parse_id(&id)?;
    let lock = state.case_lock(case_id);
    let _guard = lock.lock().await;
    let mut record = load_case(&state, &id).await?;
    if let (Some(report), false) = (&record.report, params.force) {
        return Ok(Json(report).into_response());
    }
    let client = llm(&state)?;
    let request = ReportRequest::from_decision(&record.decision);
    let report = {
        let _permit = state.llm_permits.acquire().await.map_err(ApiError::internal)?;
        generate_report(&request, client).await.map_err(|e| {
            tracing::warn!(case_id = %case_id, error = %e, "report generation failed");
            ApiError::new(StatusCode::BAD_GATEWAY, e.to_string())
        })?
    };
    record.attach_report(report, Utc::now());
    let record = save_case(&state, record).await?;
    Ok(Json(record.report).into_response())
}

#[derive(Debug, Deserialize)]
struct ChatBody {
    query: String,
}

async fn chat(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<ChatBody>,
) -> ApiResult<Json<Value>> {
    let case_id = parse_id(&id)?;
    load_case(&state, &id).await?;
    match validate_query(&body.query) {
        Err(e) => return Err(ApiError::new(StatusCode::BAD_REQUEST, e.to_string())),
        Ok(QueryVerdict::Reject(category)) => {
            tracing::info!(case_id = %case_id, category = %category, "chat query rejected");
            return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, category.explanation())
                .with("category", category.as_str()));
        }
        Ok(QueryVerdict::Accept) => {}
    }
    let client = llm(&state)?;

    let lock = state.case_lock(case_id);
    let _guard = lock.lock().await;
    let mut record = load_case(&state, &id).await?;
    let reply = {
        let _permit = state.llm_permits.acquire().await.map_err(ApiError::internal)?;
        chat_respond(
            client,
            &record.chat_history,
            &body.query,
            &record.decision,
            &state.config.chat,
        )
        .await
        .map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, e.to_string()))?
    };
    let user = ChatMessage::user(body.query).map_err(ApiError::internal)?;
    let assistant = ChatMessage::assistant(reply.clone()).map_err(ApiError::internal)?;
    record.chat_history.push(user);
    record.chat_history.push(assistant);
    record.updated_at = Utc::now();
    let record = save_case(&state, record).await?;
    Ok(Json(json!({
        "reply": reply,
        "history_length": record.chat_history.len(),
    })))
}

async fn evaluate(body: String) -> ApiResult<Json<Value>> {
    let records = parse_predictions(&body).map_err(|e| match e {
        MetricsError::Parse { line, .. } => ApiError::new(StatusCode::BAD_REQUEST, e.to_string()).with("line", line),
        other => ApiError::new(StatusCode::BAD_REQUEST, other.to_string()),
    })?;
    let samples: Vec<_> = records.into_iter().map(|r| r.prediction).collect();
    let report = summarize(&samples).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    let mut value = serde_json::to_value(&report).map_err(ApiError::internal)?;
    value["table"] = Value::String(report.render_table());
    value["rates_table"] = Value::String(report.render_rates_table());
    Ok(Json(value))
}

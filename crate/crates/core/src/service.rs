//! HTTP JSON API under `/v1/`.
//!
//! One project is held in memory as an immutable snapshot. Readers clone the
//! `Arc` and work without the lock; `PUT /v1/model` swaps in a new snapshot.
//! What-if requests evaluate a private copy and never touch the stored model.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tower_http::services::ServeDir;

use crate::bpmn::{parse_bpmn, validate_structure, CollaborationModel};
use crate::kpi::{
    apply_overrides, evaluate, parse_formula, EvaluationResult, FormulaExpr, KpiError, KpiOverride,
};
use crate::report::{export_report, full_report, ExportFormat, Report, ReportError};

/// Shared service state holding the current model snapshot.
#[derive(Debug)]
pub struct AppState {
    model: RwLock<Arc<CollaborationModel>>,
}

impl AppState {
    pub fn new(model: CollaborationModel) -> Arc<Self> {
        Arc::new(AppState {
            model: RwLock::new(Arc::new(model)),
        })
    }

    pub fn snapshot(&self) -> Arc<CollaborationModel> {
        Arc::clone(&self.model.read().unwrap_or_else(|e| e.into_inner()))
    }

    pub fn replace(&self, model: CollaborationModel) {
        *self.model.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(model);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    pub location: Option<String>,
}

impl ApiError {
    fn new(
        status: StatusCode,
        code: &str,
        message: impl Into<String>,
        location: Option<String>,
    ) -> Self {
        ApiError {
            status,
            code: code.to_string(),
            message: message.into(),
            location,
        }
    }

    fn malformed(message: impl Into<String>, location: Option<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "malformed-body", message, location)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<KpiError> for ApiError {
    fn from(e: KpiError) -> Self {
        let (status, code) = match &e {
            KpiError::UnknownTask(_) => (StatusCode::NOT_FOUND, "unknown-task"),
            KpiError::UnknownKpi { .. } => (StatusCode::NOT_FOUND, "unknown-kpi"),
            KpiError::Cycle(_) => (StatusCode::CONFLICT, "cycle"),
            KpiError::UnknownReference { .. } => (StatusCode::CONFLICT, "unknown-reference"),
            KpiError::MissingValue { .. } => (StatusCode::CONFLICT, "missing-value"),
            KpiError::DivideByZero { .. } => (StatusCode::CONFLICT, "divide-by-zero"),
            KpiError::Overflow { .. } => (StatusCode::CONFLICT, "overflow"),
            KpiError::DuplicateKey(_) => (StatusCode::CONFLICT, "duplicate-kpi"),
            KpiError::ActorMismatch { .. } => (StatusCode::CONFLICT, "actor-mismatch"),
            KpiError::InvalidPlan(_) => (StatusCode::INTERNAL_SERVER_ERROR, "invalid-plan"),
        };
        ApiError::new(status, code, e.to_string(), e.location())
    }
}

impl From<ReportError> for ApiError {
    fn from(e: ReportError) -> Self {
        match &e {
            ReportError::UnknownActor(actor) => ApiError::new(
                StatusCode::NOT_FOUND,
                "unknown-actor",
                e.to_string(),
                Some(actor.clone()),
            ),
            ReportError::NotEvaluated(k) | ReportError::StaleResult(k) => ApiError::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                "not-evaluated",
                e.to_string(),
                Some(k.task_display_id.clone()),
            ),
        }
    }
}

/// Response of `/v1/evaluate` and `/v1/whatif`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvaluationResponse {
    pub result: EvaluationResult,
    #[serde(flatten)]
    pub report: Report,
}

fn evaluate_model(model: &CollaborationModel) -> Result<EvaluationResponse, ApiError> {
    let result = evaluate(model)?;
    let report = full_report(&result, model)?;
    Ok(EvaluationResponse { result, report })
}

/// Override values may be JSON numbers or formula strings.
#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct OverrideBody {
    task_display_id: String,
    kpi_name: String,
    #[serde(default)]
    current: Option<Value>,
    #[serde(default)]
    target: Option<Value>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum WhatIfBody {
    Wrapped { overrides: Vec<Value> },
    Bare(Vec<Value>),
}

fn override_value(
    value: Option<Value>,
    field: &str,
    index: usize,
) -> Result<Option<FormulaExpr>, ApiError> {
    let location = || Some(format!("overrides[{index}].{field}"));
    match value {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Number(n)) => Decimal::from_str(&n.to_string())
            .or_else(|_| Decimal::from_scientific(&n.to_string()))
            .map(|d| Some(FormulaExpr::literal(d)))
            .map_err(|e| ApiError::malformed(format!("{field}: {e}"), location())),
        Some(Value::String(s)) => parse_formula(&s)
            .map(Some)
            .map_err(|e| ApiError::malformed(format!("{field}: {e}"), location())),
        Some(other) => Err(ApiError::malformed(
            format!("{field} must be a number or a formula string, got {other}"),
            location(),
        )),
    }
}

fn parse_overrides(body: &[u8]) -> Result<Vec<KpiOverride>, ApiError> {
    let items = match serde_json::from_slice::<WhatIfBody>(body) {
        Ok(WhatIfBody::Wrapped { overrides } | WhatIfBody::Bare(overrides)) => overrides,
        Err(e) => {
            return Err(ApiError::malformed(
                format!("expected {{\"overrides\": [...]}}: {e}"),
                Some(format!("line {}, column {}", e.line(), e.column())),
            ))
        }
    };
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| {
            let o: OverrideBody = serde_json::from_value(item)
                .map_err(|e| ApiError::malformed(e.to_string(), Some(format!("overrides[{i}]"))))?;
            let current = override_value(o.current, "current", i)?;
            let target = override_value(o.target, "target", i)?;
            if current.is_none() && target.is_none() {
                return Err(ApiError::malformed(
                    "override needs current and/or target",
                    Some(format!("overrides[{i}]")),
                ));
            }
            Ok(KpiOverride {
                task_display_id: o.task_display_id,
                kpi_name: o.kpi_name,
                current,
                target,
            })
        })
        .collect()
}

async fn get_model(State(state): State<Arc<AppState>>) -> Response {
    Json(&*state.snapshot()).into_response()
}

async fn put_model(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let is_xml = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("xml"));
    let model = if is_xml {
        let text =
            std::str::from_utf8(&body).map_err(|e| ApiError::malformed(e.to_string(), None))?;
        parse_bpmn(text).map_err(|e| {
            ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid-model",
                e.to_string(),
                None,
            )
        })?
    } else {
        let model: CollaborationModel = serde_json::from_slice(&body).map_err(|e| {
            ApiError::malformed(
                e.to_string(),
                Some(format!("line {}, column {}", e.line(), e.column())),
            )
        })?;
        let report = validate_structure(&model);
        if let Some(first) = report.errors().next() {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid-model",
                report.to_string(),
                Some(first.path.clone()),
            ));
        }
        model
    };
    state.replace(model);
    tracing::info!("model replaced");
    Ok(Json(&*state.snapshot()).into_response())
}

async fn post_evaluate(
    State(state): State<Arc<AppState>>,
) -> Result<Json<EvaluationResponse>, ApiError> {
    let model = state.snapshot();
    evaluate_model(&model).map(Json)
}

async fn post_whatif(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Json<EvaluationResponse>, ApiError> {
    let overrides = parse_overrides(&body)?;
    let model = state.snapshot();
    let scenario = apply_overrides(&model, &overrides)?;
    tracing::debug!(overrides = overrides.len(), "what-if evaluation");
    evaluate_model(&scenario).map(Json)
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    format: Option<String>,
    actor: Option<String>,
}

async fn get_report(
    State(state): State<Arc<AppState>>,
    Query(query): Query<ReportQuery>,
) -> Result<Response, ApiError> {
    let format = match query.format.as_deref() {
        None => ExportFormat::Json,
        Some(f) => ExportFormat::from_str(f).map_err(|e| {
            ApiError::new(
                StatusCode::BAD_REQUEST,
                "unknown-format",
                e,
                Some("format".into()),
            )
        })?,
    };
    let model = state.snapshot();
    let EvaluationResponse { mut report, .. } = evaluate_model(&model)?;
    if let Some(actor) = &query.actor {
        report.overviews.retain(|o| &o.actor == actor);
        if report.overviews.is_empty() {
            return Err(ReportError::UnknownActor(actor.clone()).into());
        }
    }
    let content_type = match format {
        ExportFormat::Json => "application/json",
        ExportFormat::Csv => "text/csv; charset=utf-8",
        ExportFormat::TextTable => "text/plain; charset=utf-8",
    };
    Ok((
        [(header::CONTENT_TYPE, content_type)],
        export_report(&report, format),
    )
        .into_response())
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not-found", "no such endpoint", None)
}

/// The `/v1/` API routes.
pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/model", get(get_model).put(put_model))
        .route("/evaluate", post(post_evaluate))
        .route("/whatif", post(post_whatif))
        .route("/report", get(get_report))
        .fallback(not_found)
        .with_state(state);
    Router::new().nest("/v1", api)
}

/// The API plus a static asset directory served at `/`.
pub fn router_with_assets(state: Arc<AppState>, assets: Option<PathBuf>) -> Router {
    let app = router(state);
    match assets {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

pub async fn serve(
    model: CollaborationModel,
    addr: SocketAddr,
    assets: Option<PathBuf>,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router_with_assets(AppState::new(model), assets)).await
}

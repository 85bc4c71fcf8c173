//! Authenticated read-only HTTP API over a loaded dataset.
//!
//! | Method | Path | |
//! |---|---|---|
//! | POST | `/api/login` | `{"username","password"}` → bearer token |
//! | GET | `/api/top?from&to&kind&limit` | ranking for a period |
//! | GET | `/api/content/{cluster_id}?from&to` | spread details |
//! | GET | `/api/media/{checksum}` | stored payload |
//! | GET | `/api/stats/members_cdf?kind` | member-count CDF |
//! | GET | `/api/stats/weekly_volume` | messages per ISO week |
//!
//! Everything except login requires `Authorization: Bearer <token>`.
//! Errors are `{"code": ..., "message": ...}`. Sender identities are never
//! served, not even pseudonymized.

mod auth;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

use crate::cluster::Representative;
use crate::fingerprint::Checksum128;
use crate::ingest::{ChatKind, MediaKind};
use crate::rank::{media_path, Catalog, Period, RankingEntry};
use crate::store::{self, BlobStore};
use crate::Error;

pub use auth::{Account, Accounts, Sessions, TokenError, DEFAULT_PBKDF2_ROUNDS};

pub const MAX_LIMIT: usize = 200;
pub const DEFAULT_LIMIT: usize = 20;

#[derive(Clone, Debug)]
pub struct ApiSettings {
    pub token_ttl: std::time::Duration,
    /// Origin allowed by CORS; `None` disables the CORS layer.
    pub cors_origin: Option<String>,
    /// Externally visible origin, used in reverse image search links.
    pub public_base_url: String,
}

impl Default for ApiSettings {
    fn default() -> Self {
        ApiSettings {
            token_ttl: std::time::Duration::from_secs(8 * 3600),
            cors_origin: None,
            public_base_url: "http://127.0.0.1:8080".into(),
        }
    }
}

/// Shared server state. The catalog can be swapped while serving.
#[derive(Debug)]
pub struct ApiState {
    catalog: RwLock<Arc<Catalog>>,
    blobs: BlobStore,
    accounts: Accounts,
    sessions: Sessions,
    settings: ApiSettings,
}

impl ApiState {
    pub fn new(catalog: Catalog, blobs: BlobStore, accounts: Accounts, settings: ApiSettings) -> Self {
        ApiState {
            catalog: RwLock::new(Arc::new(catalog)),
            blobs,
            accounts,
            sessions: Sessions::new(settings.token_ttl),
            settings,
        }
    }

    /// Loads the dataset at `dir` and serves it.
    pub fn open(dir: &Path, accounts: Accounts, settings: ApiSettings) -> crate::Result<Self> {
        let catalog = Catalog::new(store::load_snapshot(dir)?)?;
        Ok(Self::new(catalog, BlobStore::open(dir), accounts, settings))
    }

    pub fn catalog(&self) -> Arc<Catalog> {
        self.catalog.read().expect("catalog lock").clone()
    }

    /// Re-reads the dataset; requests in flight keep the old one.
    pub fn reload(&self, dir: &Path) -> crate::Result<()> {
        let fresh = Arc::new(Catalog::new(store::load_snapshot(dir)?)?);
        *self.catalog.write().expect("catalog lock") = fresh;
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Request(m) | Error::Rejected(m) => ApiError::bad_request(m),
            Error::NotFound(m) => ApiError::new(StatusCode::NOT_FOUND, "not_found", m),
            other => {
                tracing::error!("request failed: {other}");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "internal error")
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Builds the router. Routes other than `/api/login` sit behind the token
/// check, including unknown paths.
pub fn router(state: Arc<ApiState>) -> Router {
    let protected = Router::new()
        .route("/api/top", get(top))
        .route("/api/content/{cluster_id}", get(content))
        .route("/api/media/{checksum}", get(media))
        .route("/api/stats/members_cdf", get(members_cdf))
        .route("/api/stats/weekly_volume", get(weekly_volume))
        .fallback(not_found)
        .layer(middleware::from_fn_with_state(state.clone(), require_token));

    let mut app = Router::new()
        .route("/api/login", post(login))
        .merge(protected)
        .with_state(state.clone());

    if let Some(origin) = &state.settings.cors_origin {
        match HeaderValue::from_str(origin) {
            Ok(origin) => {
                app = app.layer(
                    CorsLayer::new()
                        .allow_origin(origin)
                        .allow_methods([Method::GET, Method::POST])
                        .allow_headers([header::AUTHORIZATION, header::CONTENT_TYPE]),
                )
            }
            Err(_) => tracing::warn!("ignoring invalid CORS origin {origin:?}"),
        }
    }
    app
}

/// Serves until Ctrl-C.
pub async fn serve(state: Arc<ApiState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn require_token(State(state): State<Arc<ApiState>>, req: Request, next: Next) -> Response {
    let token = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim);
    let verdict = match token {
        None | Some("") => Err(TokenError::Missing),
        Some(t) => state.sessions.check(t, Utc::now()),
    };
    match verdict {
        Ok(()) => next.run(req).await,
        Err(TokenError::Expired) => {
            ApiError::new(StatusCode::UNAUTHORIZED, "token_expired", "session token expired").into_response()
        }
        Err(_) => ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or invalid session token")
            .into_response(),
    }
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

#[derive(Deserialize)]
struct LoginRequest {
    username: String,
    password: String,
}

#[derive(Serialize)]
struct LoginResponse {
    token: String,
    token_type: &'static str,
    #[serde(with = "crate::ingest::utc_seconds")]
    expires_at: DateTime<Utc>,
}

async fn login(State(state): State<Arc<ApiState>>, body: Bytes) -> ApiResult<Json<LoginResponse>> {
    let malformed = |e: serde_json::Error| ApiError::bad_request(format!("malformed login body: {e}"));
    let object: serde_json::Map<String, serde_json::Value> = serde_json::from_slice(&body).map_err(malformed)?;
    let req: LoginRequest = serde_json::from_value(object.into()).map_err(malformed)?;
    let ok = tokio::task::spawn_blocking({
        let state = state.clone();
        move || state.accounts.authenticate(&req.username, &req.password)
    })
    .await
    .unwrap_or(false);
    if !ok {
        return Err(ApiError::new(
            StatusCode::UNAUTHORIZED,
            "invalid_credentials",
            "unknown user or wrong password",
        ));
    }
    let (token, expires_at) = state.sessions.issue(Utc::now());
    Ok(Json(LoginResponse {
        token,
        token_type: "Bearer",
        expires_at,
    }))
}

type Params = Query<HashMap<String, String>>;

/// Optional `from`/`to` pair; both or neither.
fn optional_period(q: &HashMap<String, String>) -> ApiResult<Option<Period>> {
    match (q.get("from"), q.get("to")) {
        (Some(f), Some(t)) => Ok(Some(Period::parse(f, t)?)),
        (None, None) => Ok(None),
        _ => Err(ApiError::bad_request("give both from and to, or neither")),
    }
}

/// Preview of a ranked cluster.
#[derive(Debug, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Preview {
    Media {
        media_url: String,
        media_kind: MediaKind,
        size_bytes: u64,
    },
    Text {
        text: String,
    },
}

#[derive(Debug, Serialize)]
pub struct TopItem {
    #[serde(flatten)]
    pub entry: RankingEntry,
    pub preview: Preview,
}

fn preview(rep: &Representative) -> Preview {
    match rep {
        Representative::Blob(b) => Preview::Media {
            media_url: media_path(&b.checksum),
            media_kind: b.media_kind,
            size_bytes: b.size_bytes,
        },
        Representative::Text(t) => Preview::Text { text: t.clone() },
    }
}

async fn top(State(state): State<Arc<ApiState>>, Query(q): Params) -> ApiResult<Json<Vec<TopItem>>> {
    let period = optional_period(&q)?.ok_or_else(|| ApiError::bad_request("from and to are required"))?;
    let kind = match q.get("kind").map(String::as_str) {
        Some(k @ ("image" | "video" | "audio" | "text")) => k.parse::<MediaKind>()?,
        Some(k) => return Err(ApiError::bad_request(format!("kind must be image, video, audio or text, not {k:?}"))),
        None => return Err(ApiError::bad_request("kind is required")),
    };
    let limit = match q.get("limit") {
        None => DEFAULT_LIMIT,
        Some(l) => l
            .parse::<usize>()
            .ok()
            .filter(|l| (1..=MAX_LIMIT).contains(l))
            .ok_or_else(|| ApiError::bad_request(format!("limit must be between 1 and {MAX_LIMIT}")))?,
    };
    let catalog = state.catalog();
    let entries = catalog.top_content(period, kind, limit)?;
    let items = entries
        .into_iter()
        .map(|entry| {
            let cluster = catalog.cluster(&entry.cluster_id).expect("ranked cluster exists");
            TopItem {
                preview: preview(&cluster.representative),
                entry,
            }
        })
        .collect();
    Ok(Json(items))
}

async fn content(
    State(state): State<Arc<ApiState>>,
    UrlPath(cluster_id): UrlPath<String>,
    Query(q): Params,
) -> ApiResult<Response> {
    let period = optional_period(&q)?;
    let details = state
        .catalog()
        .content_details(&cluster_id, period, &state.settings.public_base_url)?;
    Ok(Json(details).into_response())
}

fn content_type(payload: &[u8], kind: MediaKind) -> &'static str {
    match image::guess_format(payload) {
        Ok(image::ImageFormat::Png) => "image/png",
        Ok(image::ImageFormat::Jpeg) => "image/jpeg",
        _ => match kind {
            MediaKind::Video => "video/mp4",
            MediaKind::Audio => "audio/ogg",
            MediaKind::Text => "text/plain; charset=utf-8",
            _ => "application/octet-stream",
        },
    }
}

async fn media(State(state): State<Arc<ApiState>>, UrlPath(checksum): UrlPath<String>) -> ApiResult<Response> {
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no media {checksum}"));
    let parsed: Checksum128 = checksum.parse().map_err(|_| not_found())?;
    let kind = state.catalog().blob(&parsed).map(|b| b.media_kind).ok_or_else(not_found)?;
    let blobs = state.blobs.clone();
    let payload = tokio::task::spawn_blocking(move || blobs.get_by_checksum(&parsed))
        .await
        .map_err(|e| ApiError::from(Error::Request(e.to_string())))??;
    Ok((
        [
            (header::CONTENT_TYPE, content_type(&payload, kind).to_string()),
            (header::CACHE_CONTROL, "public, max-age=31536000, immutable".to_string()),
            (header::ETAG, format!("\"{checksum}\"")),
        ],
        payload,
    )
        .into_response())
}

async fn members_cdf(State(state): State<Arc<ApiState>>, Query(q): Params) -> ApiResult<Response> {
    let kind = match q.get("kind").map(String::as_str) {
        None | Some("all") => None,
        Some("group") => Some(ChatKind::Group),
        Some("channel") => Some(ChatKind::Channel),
        Some(k) => return Err(ApiError::bad_request(format!("kind must be group or channel, not {k:?}"))),
    };
    Ok(Json(state.catalog().members_cdf(kind)?).into_response())
}

async fn weekly_volume(State(state): State<Arc<ApiState>>) -> Response {
    Json(state.catalog().weekly_volume()).into_response()
}

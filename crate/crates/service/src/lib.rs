//! Read-only HTTP service over a finished pipeline run.
//!
//! State is loaded once at startup; requests never mutate it. Evaluated
//! profiles are kept in a small LRU cache keyed by the profile's content
//! hash, which also serves as the token for `/zones` and `/scores`.

use std::net::SocketAddr;
use std::num::NonZeroUsize;
use std::path::Path;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use lru::LruCache;
use robotability_core::catalog::FeatureCatalog;
use robotability_core::geo::{feature, feature_collection};
use robotability_core::pipeline::{num, profile_token, zones_geojson, Artifacts, ProfileOutcome};
use robotability_core::scoring::{FieldIssue, RobotProfile};
use robotability_core::ErrorCategory;
use serde::Deserialize;
use serde_json::{json, Map, Value};

pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";
pub const CACHE_CAPACITY: usize = 32;
pub const DEFAULT_PAGE: usize = 5000;
pub const MAX_PAGE: usize = 50_000;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("loading artifacts: {0}")]
    Load(#[from] robotability_core::Error),
    #[error("binding {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
}

/// Immutable service state plus the profile cache.
pub struct AppState {
    art: Artifacts,
    default: Arc<ProfileOutcome>,
    cache: Mutex<LruCache<String, Arc<ProfileOutcome>>>,
}

impl AppState {
    /// Fails if the artifacts are inconsistent or the full profile cannot
    /// be scored.
    pub fn new(art: Artifacts) -> Result<Self, ServiceError> {
        let default = Arc::new(art.evaluate(&RobotProfile::full(&art.catalog))?);
        let cache = Mutex::new(LruCache::new(NonZeroUsize::new(CACHE_CAPACITY).expect("nonzero")));
        Ok(Self { art, default, cache })
    }

    pub fn load(dir: &Path) -> Result<Self, ServiceError> {
        Self::new(Artifacts::load(dir)?)
    }

    pub fn artifacts(&self) -> &Artifacts {
        &self.art
    }

    fn cached(&self, token: &str) -> Option<Arc<ProfileOutcome>> {
        if token == self.default.token {
            return Some(self.default.clone());
        }
        self.cache.lock().expect("cache lock").get(token).cloned()
    }

    fn remember(&self, outcome: Arc<ProfileOutcome>) {
        self.cache.lock().expect("cache lock").put(outcome.token.clone(), outcome);
    }

    /// Number of cached profiles, excluding the default.
    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/catalog", get(catalog))
        .route("/weights", get(weights))
        .route("/profile", post(profile))
        .route("/zones", get(zones))
        .route("/scores", get(scores))
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(addr: &str, state: AppState) -> Result<(), ServiceError> {
    let bind_err = |source| ServiceError::Bind { addr: addr.to_string(), source };
    let sock: SocketAddr = addr
        .parse()
        .map_err(|e| bind_err(std::io::Error::new(std::io::ErrorKind::InvalidInput, e)))?;
    let listener = tokio::net::TcpListener::bind(sock).await.map_err(bind_err)?;
    log::info!("listening on {}", listener.local_addr().map_err(bind_err)?);
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(bind_err)
}

fn json_body(status: StatusCode, text: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], text).into_response()
}

fn geojson_body(v: &Value) -> Response {
    let text = serde_json::to_string(v).expect("json") + "\n";
    (StatusCode::OK, [(header::CONTENT_TYPE, "application/geo+json")], text).into_response()
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    json_body(status, json!({ "error": message.into() }).to_string())
}

fn issues_response(issues: &[FieldIssue]) -> Response {
    json_body(
        StatusCode::BAD_REQUEST,
        json!({ "error": "invalid profile", "issues": issues }).to_string(),
    )
}

fn core_error(e: &robotability_core::Error) -> Response {
    let status = match e.category() {
        ErrorCategory::Validation => StatusCode::BAD_REQUEST,
        ErrorCategory::Data => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorCategory::Numerical => StatusCode::INTERNAL_SERVER_ERROR,
    };
    error(status, e.to_string())
}

async fn healthz(State(st): State<Arc<AppState>>) -> Response {
    let a = &st.art;
    json_body(
        StatusCode::OK,
        json!({
            "status": "ok",
            "points": a.graph.len(),
            "features": a.matrix.n_features(),
            "zones": a.zones.len(),
            "default_profile": st.default.token,
        })
        .to_string(),
    )
}

/// Catalog listing; excluded features carry their reason.
pub fn catalog_document(catalog: &FeatureCatalog) -> Value {
    let features: Vec<Value> = catalog
        .features()
        .iter()
        .map(|f| {
            json!({
                "id": f.id,
                "display_name": f.display_name,
                "polarity": f.polarity.sign() as i64,
                "extractor": f.extractor.as_ref().map(|e| e.kind_name()),
                "excluded": catalog.is_excluded(&f.id),
                "reason": catalog.exclusion_reason(&f.id),
            })
        })
        .collect();
    json!({
        "total": features.len(),
        "active": catalog.active_ids().len(),
        "features": features,
    })
}

async fn catalog(State(st): State<Arc<AppState>>) -> Response {
    json_body(StatusCode::OK, serde_json::to_string_pretty(&catalog_document(&st.art.catalog)).expect("json"))
}

async fn weights(State(st): State<Arc<AppState>>) -> Response {
    let doc = st.default.response(&st.art.catalog, st.art.missing_policy, st.art.band);
    json_body(StatusCode::OK, serde_json::to_string_pretty(&doc["weights"]).expect("json"))
}

/// Parses, validates and scores a profile document. Shared by the HTTP
/// handler and tests.
pub fn evaluate_document(st: &AppState, body: &[u8]) -> Result<(Arc<ProfileOutcome>, String), Response> {
    let profile: RobotProfile = serde_json::from_slice(body).map_err(|e| {
        issues_response(&[FieldIssue { field: "body".into(), message: e.to_string() }])
    })?;
    let issues = profile.check(&st.art.catalog);
    if !issues.is_empty() {
        return Err(issues_response(&issues));
    }
    let token = profile_token(&profile);
    let outcome = match st.cached(&token) {
        Some(o) => o,
        None => {
            let o = Arc::new(st.art.evaluate(&profile).map_err(|e| core_error(&e))?);
            st.remember(o.clone());
            o
        }
    };
    let text = outcome.response_text(&st.art.catalog, st.art.missing_policy, st.art.band);
    Ok((outcome, text))
}

async fn profile(State(st): State<Arc<AppState>>, body: Bytes) -> Response {
    let res = tokio::task::spawn_blocking(move || evaluate_document(&st, &body).map(|(_, text)| text)).await;
    match res {
        Ok(Ok(text)) => json_body(StatusCode::OK, text),
        Ok(Err(resp)) => resp,
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

#[derive(Debug, Deserialize)]
struct ZonesQuery {
    profile: Option<String>,
}

fn lookup(st: &AppState, token: Option<&str>) -> Result<Arc<ProfileOutcome>, Response> {
    match token {
        None | Some("") => Ok(st.default.clone()),
        Some(t) => st
            .cached(t)
            .ok_or_else(|| error(StatusCode::NOT_FOUND, format!("unknown profile token `{t}`; POST /profile first"))),
    }
}

async fn zones(State(st): State<Arc<AppState>>, Query(q): Query<ZonesQuery>) -> Response {
    match lookup(&st, q.profile.as_deref()) {
        Ok(o) => geojson_body(&zones_geojson(&st.art.zones, &o.zones)),
        Err(r) => r,
    }
}

#[derive(Debug, Deserialize)]
struct ScoresQuery {
    bbox: Option<String>,
    profile: Option<String>,
    cursor: Option<String>,
    limit: Option<usize>,
}

/// `minx,miny,maxx,maxy` with `min < max` on both axes.
pub fn parse_bbox(s: &str) -> Result<[f64; 4], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bbox component `{p}` is not a number")))
        .collect::<Result<_, _>>()?;
    let [x0, y0, x1, y1]: [f64; 4] = parts
        .try_into()
        .map_err(|_| "bbox needs four comma-separated numbers".to_string())?;
    if [x0, y0, x1, y1].iter().any(|v| !v.is_finite()) {
        return Err("bbox components must be finite".into());
    }
    if !(x0 < x1 && y0 < y1) {
        return Err("bbox needs min < max on both axes".into());
    }
    Ok([x0, y0, x1, y1])
}

/// Ids of points inside `bbox` (edges inclusive), ascending.
pub fn points_in_bbox(art: &Artifacts, bbox: [f64; 4]) -> Vec<usize> {
    art.graph
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.x >= bbox[0] && p.x <= bbox[2] && p.y >= bbox[1] && p.y <= bbox[3])
        .map(|(i, _)| i)
        .collect()
}

async fn scores(State(st): State<Arc<AppState>>, Query(q): Query<ScoresQuery>) -> Response {
    let Some(bbox) = q.bbox.as_deref() else {
        return error(StatusCode::BAD_REQUEST, "bbox is required");
    };
    let bbox = match parse_bbox(bbox) {
        Ok(b) => b,
        Err(m) => return error(StatusCode::BAD_REQUEST, m),
    };
    let start = match q.cursor.as_deref() {
        None | Some("") => 0,
        Some(c) => match c.parse::<usize>() {
            Ok(v) => v,
            Err(_) => return error(StatusCode::BAD_REQUEST, format!("malformed cursor `{c}`")),
        },
    };
    let limit = q.limit.unwrap_or(DEFAULT_PAGE).clamp(1, MAX_PAGE);
    let outcome = match lookup(&st, q.profile.as_deref()) {
        Ok(o) => o,
        Err(r) => return r,
    };
    let ids = points_in_bbox(&st.art, bbox);
    let from = ids.partition_point(|&i| i < start);
    let page = &ids[from..(from + limit).min(ids.len())];
    let pct = outcome.point_percentiles();
    let opt = |v: Option<f64>| v.map_or(Value::Null, num);
    let features = page
        .iter()
        .map(|&i| {
            let p = st.art.graph.points()[i];
            let mut props = Map::new();
            props.insert("point_id".into(), json!(i));
            props.insert("score".into(), opt(outcome.field.scores[i]));
            props.insert("coverage".into(), num(outcome.field.coverage[i]));
            props.insert("percentile".into(), opt(pct[i]));
            feature(json!({"type": "Point", "coordinates": [num(p.x), num(p.y)]}), props)
        })
        .collect();
    let mut doc = feature_collection(features);
    let next = ids.get(from + limit).map(|i| i.to_string());
    doc["next_cursor"] = next.map_or(Value::Null, Value::String);
    doc["profile"] = json!(outcome.token);
    doc["total"] = json!(ids.len());
    geojson_body(&doc)
}

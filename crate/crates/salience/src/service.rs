//! Read-only JSON API over a loaded session, plus a what-if endpoint that
//! rescores edited examples.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query as UrlQuery, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use salience_core::analyze::{nearest_neighbors, word_cloud, AnalyzeError, ClusterReport, ClusterStats, NeighborConstraint, Query};
use salience_core::represent::{build_s1_vocab, RepKind, RepMatrix};
use salience_core::rng;
use salience_core::sensitivity::{insert_term, insert_term_at, mask_term, MASK_TOKEN};

use crate::io::{self, Record};
use crate::pipeline::{cluster_lookup, PipelineError, Workspace};

/// Immutable state behind the API.
pub struct Session {
    pub ws: Workspace,
    pub rep: RepMatrix,
    /// S1 over the same rows, for word clouds; absent without salience.
    pub s1: Option<RepMatrix>,
    pub clusters: ClusterReport,
    cluster_of: BTreeMap<String, usize>,
    coords: BTreeMap<String, Vec<f64>>,
}

impl Session {
    /// Builds the configured representation, clusters it and projects it
    /// (or reads `paths.projection`, whose rows follow the filtered corpus).
    pub fn build(ws: Workspace) -> Result<Self, PipelineError> {
        let rep = ws.configured_rep()?;
        let s1 = if rep.kind == RepKind::S1Vocab { Some(rep.clone()) } else { build_s1_vocab(&ws.corpus, &ws.vocab, ws.config.rep.k).ok() };
        let clusters = ws.cluster(&rep)?;
        let cluster_of = cluster_lookup(&clusters);
        let coords = match &ws.config.paths.projection {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| io::IoError::Fs { path: p.clone(), source })?;
                let rows = io::parse_vectors(p, &text)?;
                if rows.len() != rep.len() {
                    return Err(PipelineError::Data(format!("{}: {} rows for {} examples", p.display(), rows.len(), rep.len())));
                }
                rep.row_ids.iter().cloned().zip(rows).collect()
            }
            None if rep.len() >= 2 => {
                let proj = ws.project(&rep)?;
                proj.row_ids.into_iter().zip(proj.coords).collect()
            }
            None => BTreeMap::new(),
        };
        Ok(Session { ws, rep, s1, clusters, cluster_of, coords })
    }
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn not_found(what: impl std::fmt::Display) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, format!("{what} not found"))
}

fn bad_request(msg: impl ToString) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.to_string())
}

type ApiResult<T> = Result<Json<T>, ApiError>;
type Shared = State<Arc<Session>>;

pub fn router(session: Arc<Session>) -> Router {
    let api = Router::new()
        .route("/api/session", get(session_info))
        .route("/api/examples/{id}", get(example))
        .route("/api/projection", get(projection))
        .route("/api/clusters", get(clusters))
        .route("/api/neighbors", get(neighbors))
        .route("/api/wordcloud", get(wordcloud))
        .route("/api/whatif", post(whatif));
    let api = match &session.ws.config.paths.static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    };
    api.with_state(session)
}

/// Serves until the process is stopped.
pub async fn serve(session: Arc<Session>, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(session)).await
}

async fn session_info(State(s): Shared) -> Json<serde_json::Value> {
    let c = &s.ws.config;
    Json(json!({
        "split": s.ws.corpus.split_name,
        "n_examples": s.ws.full.len(),
        "n_analyzed": s.ws.corpus.len(),
        "vocab_size": s.ws.vocab.len(),
        "rep": { "kind": s.rep.kind.short_name(), "k": s.rep.k, "dim": s.rep.dim, "normalized": s.rep.normalized },
        "n_clusters": s.clusters.n_clusters,
        "tag": c.analysis.tag,
        "has_scorer": s.ws.scorer.is_some(),
        "has_projection": !s.coords.is_empty(),
        "seeds": c.seeds,
    }))
}

#[derive(Serialize)]
struct ExampleView {
    #[serde(flatten)]
    record: Record,
    cluster: Option<usize>,
    projection: Option<Vec<f64>>,
    analyzed: bool,
}

async fn example(State(s): Shared, UrlPath(id): UrlPath<String>) -> ApiResult<ExampleView> {
    let ex = s.ws.full.get(&id).ok_or_else(|| not_found(format_args!("example {id}")))?;
    Ok(Json(ExampleView {
        record: Record::from_example(ex),
        cluster: s.cluster_of.get(&id).copied(),
        projection: s.coords.get(&id).cloned(),
        analyzed: s.ws.corpus.get(&id).is_some(),
    }))
}

#[derive(Serialize)]
struct Point {
    id: String,
    x: f64,
    y: f64,
    pred: Option<usize>,
    gold: usize,
    cluster: Option<usize>,
    tags: Vec<String>,
}

async fn projection(State(s): Shared) -> Json<Vec<Point>> {
    let points = s
        .rep
        .row_ids
        .iter()
        .filter_map(|id| {
            let c = s.coords.get(id)?;
            let ex = s.ws.corpus.get(id)?;
            Some(Point {
                id: id.clone(),
                x: c.first().copied().unwrap_or(0.0),
                y: c.get(1).copied().unwrap_or(0.0),
                pred: ex.predicted_label,
                gold: ex.gold_label,
                cluster: s.cluster_of.get(id).copied(),
                tags: ex.tags.iter().cloned().collect(),
            })
        })
        .collect();
    Json(points)
}

#[derive(Serialize)]
struct ClustersView<'a> {
    n_clusters: usize,
    tag: &'a Option<String>,
    best_precision_cluster: Option<usize>,
    inertia: f64,
    excluded_ids: &'a [String],
    clusters: &'a [ClusterStats],
}

async fn clusters(State(s): Shared) -> Json<serde_json::Value> {
    let r = &s.clusters;
    Json(
        serde_json::to_value(ClustersView {
            n_clusters: r.n_clusters,
            tag: &r.tag,
            best_precision_cluster: r.best_precision_cluster,
            inertia: r.inertia,
            excluded_ids: &r.excluded_ids,
            clusters: &r.per_cluster,
        })
        .expect("serializable"),
    )
}

#[derive(Deserialize)]
struct NeighborParams {
    id: String,
    n: Option<usize>,
    #[serde(default)]
    same_label_as_pred: bool,
}

async fn neighbors(State(s): Shared, UrlQuery(q): UrlQuery<NeighborParams>) -> Result<Json<serde_json::Value>, ApiError> {
    if s.rep.position(&q.id).is_none() {
        return Err(not_found(format_args!("example {}", q.id)));
    }
    let n = q.n.unwrap_or(s.ws.config.analysis.n_neighbors);
    let constraint = NeighborConstraint { same_label_as_query_prediction: q.same_label_as_pred, scope: None };
    let list = nearest_neighbors(&s.rep, &s.ws.corpus, &Query::Id(q.id), n, &constraint).map_err(|e| match e {
        AnalyzeError::UnknownId(id) => not_found(format_args!("example {id}")),
        other => bad_request(other),
    })?;
    Ok(Json(serde_json::to_value(list).expect("serializable")))
}

#[derive(Deserialize)]
struct CloudParams {
    cluster: Option<usize>,
    tag: Option<String>,
}

async fn wordcloud(State(s): Shared, UrlQuery(q): UrlQuery<CloudParams>) -> Result<Json<serde_json::Value>, ApiError> {
    let s1 = s.s1.as_ref().ok_or_else(|| ApiError(StatusCode::CONFLICT, "word clouds need salience maps".into()))?;
    let (positions, scope): (Vec<usize>, String) = match (q.cluster, &q.tag) {
        (Some(c), None) => {
            if c >= s.clusters.n_clusters {
                return Err(not_found(format_args!("cluster {c}")));
            }
            (s.clusters.members(c).filter_map(|id| s1.position(id)).collect(), format!("cluster {c}"))
        }
        (None, Some(t)) => {
            let pos: Vec<usize> =
                s1.row_ids.iter().enumerate().filter(|(_, id)| s.ws.corpus.get(id).is_some_and(|e| e.has_tag(t))).map(|(i, _)| i).collect();
            if pos.is_empty() {
                return Err(not_found(format_args!("tag {t}")));
            }
            (pos, format!("tag {t}"))
        }
        _ => return Err(bad_request("give exactly one of cluster or tag")),
    };
    if positions.is_empty() {
        return Err(not_found(format_args!("members of {scope}")));
    }
    let cloud = word_cloud(s1, &positions, &s.ws.vocab, s.ws.term_filter(), &scope).map_err(bad_request)?;
    Ok(Json(serde_json::to_value(cloud).expect("serializable")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Action {
    Insert,
    Mask,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WhatIf {
    example_id: String,
    action: Action,
    term: String,
    position: Option<usize>,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct WhatIfResult {
    example_id: String,
    tokens: Vec<String>,
    before_probs: Vec<f64>,
    after_probs: Vec<f64>,
    delta: Vec<f64>,
    /// Inserted (1) or masked occurrences.
    count: usize,
}

async fn whatif(State(s): Shared, Json(req): Json<WhatIf>) -> ApiResult<WhatIfResult> {
    if s.ws.scorer.is_none() {
        return Err(ApiError(StatusCode::CONFLICT, "no scorer configured".into()));
    }
    let ex = s.ws.full.get(&req.example_id).ok_or_else(|| not_found(format_args!("example {}", req.example_id)))?.clone();
    if req.term.is_empty() {
        return Err(bad_request("term must be non-empty"));
    }
    let (edited, count) = match req.action {
        Action::Insert => match req.position {
            Some(p) if p > ex.tokens.len() => return Err(bad_request(format!("position {p} beyond {} tokens", ex.tokens.len()))),
            Some(p) => (insert_term_at(&ex, &req.term, p), 1),
            None => (insert_term(&ex, &req.term, &mut rng::seeded(req.seed.unwrap_or(0))), 1),
        },
        Action::Mask => mask_term(&ex, &req.term, MASK_TOKEN),
    };
    let session = s.clone();
    let inputs = vec![ex.tokens.clone(), edited.tokens.clone()];
    let scored = tokio::task::spawn_blocking(move || session.ws.scorer.as_ref().expect("checked above").score_batch(&inputs))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(|e| ApiError(StatusCode::BAD_GATEWAY, e.0))?;
    let (before, after) = (scored[0].clone(), scored[1].clone());
    let delta = if count == 0 { vec![0.0; before.len()] } else { after.iter().zip(&before).map(|(a, b)| a - b).collect() };
    Ok(Json(WhatIfResult { example_id: req.example_id, tokens: edited.tokens, before_probs: before, after_probs: after, delta, count }))
}

//! Read-only HTTP query service exposing the three canonical queries.
//!
//! Every response body is canonical sorted-key JSON terminated by a newline —
//! byte-identical to the CLI's `--format json` output for the same query.
//! Handlers open a fresh read-only store per request on a blocking thread, so
//! the service can run concurrently with an ingest writer.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use serde::Serialize;
use serde_json::json;

use oma_core::{canonical_json, ObjectKind, Timestamp};

use crate::query::{self, QueryError, DEFAULT_MAX_DEPTH};
use crate::store::{Store, StoreError};

/// Startup failures of the HTTP service.
#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn json_response<T: Serialize>(status: StatusCode, value: &T) -> Response {
    let mut body = canonical_json(value);
    body.push('\n');
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn bad_request(message: &str) -> Response {
    json_response(
        StatusCode::BAD_REQUEST,
        &json!({"error": "bad_request", "message": message}),
    )
}

fn error_response(err: &QueryError) -> Response {
    let status = match err {
        QueryError::UnknownEvent { .. } | QueryError::UnknownPattern { .. } => {
            StatusCode::NOT_FOUND
        }
        QueryError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
    };
    json_response(status, &err.body())
}

/// Run a read-only query against a fresh store handle on a blocking thread.
async fn run_query<F>(db_path: Arc<PathBuf>, f: F) -> Response
where
    F: FnOnce(&Store) -> Result<(StatusCode, serde_json::Value), QueryError> + Send + 'static,
{
    let outcome = tokio::task::spawn_blocking(move || {
        let store = Store::open_read_only(db_path.as_ref())?;
        f(&store)
    })
    .await;
    match outcome {
        Ok(Ok((status, value))) => json_response(status, &value),
        Ok(Err(err)) => error_response(&err),
        Err(join) => json_response(
            StatusCode::INTERNAL_SERVER_ERROR,
            &json!({"error": "internal", "message": join.to_string()}),
        ),
    }
}

fn to_value<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("value serialization cannot fail")
}

async fn causal(
    State(db_path): State<Arc<PathBuf>>,
    UrlPath(event_id): UrlPath<String>,
    Query(params): Query<HashMap<String, String>>,
) -> Response {
    let depth = match params.get("depth") {
        None => DEFAULT_MAX_DEPTH,
        Some(raw) => match raw.parse::<u32>() {
            Ok(depth) => depth,
            Err(_) => return bad_request("depth must be a non-negative integer"),
        },
    };
    run_query(db_path, move |store| {
        let chain = query::q1_causal_chain(store, &event_id, depth)?;
        Ok((StatusCode::OK, to_value(&chain)))
    })
    .await
}

async fn patterns(
    State(db_path): State<Arc<PathBuf>>,
    UrlPath(pattern_id): UrlPath<String>,
    Query(params): Query<HashMap<String, String>>,
) -> Response {
    let (since, until) = match (params.get("since"), params.get("until")) {
        (Some(since), Some(until)) => {
            match (Timestamp::parse(since), Timestamp::parse(until)) {
                (Ok(since), Ok(until)) => (since, until),
                _ => return bad_request("since/until must be RFC 3339 timestamps"),
            }
        }
        _ => return bad_request("since and until query parameters are required"),
    };
    run_query(db_path, move |store| {
        let set = query::q2_pattern_history(store, &pattern_id, since, until)?;
        Ok((StatusCode::OK, to_value(&set)))
    })
    .await
}

async fn state_at(
    State(db_path): State<Arc<PathBuf>>,
    Query(params): Query<HashMap<String, String>>,
) -> Response {
    let required = |key: &str| params.get(key).cloned();
    let (Some(kind), Some(name), Some(namespace), Some(at)) = (
        required("kind"),
        required("name"),
        required("namespace"),
        required("at"),
    ) else {
        return bad_request("kind, name, namespace, and at query parameters are required");
    };
    let Ok(kind) = kind.parse::<ObjectKind>() else {
        return bad_request("kind must be one of Pod, ConfigMap, Node");
    };
    let Ok(at) = Timestamp::parse(&at) else {
        return bad_request("at must be an RFC 3339 timestamp");
    };
    run_query(db_path, move |store| {
        let result = query::q3_state_at(store, kind, &namespace, &name, at)?;
        let status = if result.is_found() { StatusCode::OK } else { StatusCode::NOT_FOUND };
        Ok((status, to_value(&result)))
    })
    .await
}

async fn healthz(State(db_path): State<Arc<PathBuf>>) -> Response {
    run_query(db_path, |store| {
        let stats = store.stats()?;
        Ok((StatusCode::OK, to_value(&stats)))
    })
    .await
}

async fn fallback() -> Response {
    json_response(StatusCode::NOT_FOUND, &json!({"error": "not_found"}))
}

/// Build the service router over a store path.
pub fn router(db_path: PathBuf) -> Router {
    Router::new()
        .route("/v1/causal/{event_id}", get(causal))
        .route("/v1/patterns/{pattern_id}", get(patterns))
        .route("/v1/state-at", get(state_at))
        .route("/v1/healthz", get(healthz))
        .fallback(fallback)
        .with_state(Arc::new(db_path))
}

/// Serve queries over `db_path` on `listen` until the process exits.
///
/// The store is opened once up-front so a missing or mismatched database
/// fails fast instead of surfacing per-request.
pub async fn serve(db_path: PathBuf, listen: SocketAddr) -> Result<(), ServeError> {
    Store::open_read_only(&db_path)?;
    let listener = tokio::net::TcpListener::bind(listen)
        .await
        .map_err(|source| ServeError::Bind { addr: listen, source })?;
    axum::serve(listener, router(db_path)).await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Engine;
    use crate::fixtures::builtin_scenario;
    use crate::ingest::ingest_events;
    use oma_core::sim::run_scenario;
    use oma_core::EventType;

    fn seeded_db(dir: &tempfile::TempDir) -> PathBuf {
        let path = dir.path().join("oma.db");
        let store = Store::open(&path).unwrap();
        let engine = Engine::load(&store).unwrap();
        let output = run_scenario(&builtin_scenario("p001").unwrap()).unwrap();
        ingest_events(&store, &engine, &output.events, 512).unwrap();
        path
    }

    fn get(url: &str) -> (u16, String) {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        let mut res = agent.get(url).call().unwrap();
        let status = res.status().as_u16();
        let body = res.body_mut().read_to_string().unwrap();
        (status, body)
    }

    #[tokio::test(flavor = "multi_thread", worker_threads = 2)]
    async fn endpoints_serve_canonical_bodies_and_statuses() {
        let dir = tempfile::tempdir().unwrap();
        let db = seeded_db(&dir);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let db_for_server = db.clone();
        tokio::spawn(async move {
            axum::serve(listener, router(db_for_server)).await.unwrap();
        });
        let base = format!("http://{addr}");

        let store = Store::open_read_only(&db).unwrap();
        let evidence = store
            .events_in_window(
                &crate::store::EventFilter {
                    event_type: Some(EventType::OOMKillEvidence),
                    ..Default::default()
                },
                Timestamp::from_micros(0),
                Timestamp::from_micros(i64::MAX),
            )
            .unwrap();
        let root_id = evidence.last().unwrap().event_id.clone();
        let expected_chain = {
            let chain = query::q1_causal_chain(&store, &root_id, DEFAULT_MAX_DEPTH).unwrap();
            canonical_json(&chain) + "\n"
        };
        drop(store);

        let checks = tokio::task::spawn_blocking(move || {
            let (status, body) = get(&format!("{base}/v1/healthz"));
            assert_eq!(status, 200);
            assert!(body.contains(r#""events":16"#), "{body}");
            assert!(body.ends_with('\n'));

            let (status, body) = get(&format!("{base}/v1/causal/{root_id}"));
            assert_eq!(status, 200);
            assert_eq!(body, expected_chain);

            let (status, body) = get(&format!("{base}/v1/causal/{root_id}?depth=0"));
            assert_eq!(status, 200);
            assert!(body.contains(r#""truncated":true"#));

            let (status, body) = get(&format!("{base}/v1/causal/ffffffffffffffff"));
            assert_eq!(status, 404);
            assert_eq!(
                body,
                "{\"error\":\"unknown_event\",\"event_id\":\"ffffffffffffffff\"}\n"
            );

            let (status, _) = get(&format!("{base}/v1/causal/{root_id}?depth=nope"));
            assert_eq!(status, 400);

            let (status, body) = get(&format!(
                "{base}/v1/patterns/P001?since=2026-01-15T10:00:00Z&until=2026-01-15T11:00:00Z"
            ));
            assert_eq!(status, 200);
            assert!(body.contains(r#""pattern_id":"P001""#));

            let (status, _) = get(&format!("{base}/v1/patterns/P001?since=2026-01-15T10:00:00Z"));
            assert_eq!(status, 400);

            let (status, body) = get(&format!(
                "{base}/v1/patterns/P999?since=2026-01-15T10:00:00Z&until=2026-01-15T11:00:00Z"
            ));
            assert_eq!(status, 404);
            assert!(body.contains("unknown_pattern"));

            let (status, body) = get(&format!(
                "{base}/v1/state-at?kind=Pod&name=oom-app&namespace=oma-poc&at=2026-01-15T10:02:30Z"
            ));
            assert_eq!(status, 200);
            assert!(body.contains(r#""found":true"#));
            assert!(body.contains(r#""staleness_ms":50000"#));

            let (status, body) = get(&format!(
                "{base}/v1/state-at?kind=Pod&name=oom-app&namespace=oma-poc&at=2026-01-15T10:00:50Z"
            ));
            assert_eq!(status, 404);
            assert!(body.contains(r#""found":false"#));

            let (status, _) = get(&format!(
                "{base}/v1/state-at?kind=Gadget&name=x&namespace=y&at=2026-01-15T10:00:00Z"
            ));
            assert_eq!(status, 400);

            let (status, body) = get(&format!("{base}/v1/nope"));
            assert_eq!(status, 404);
            assert_eq!(body, "{\"error\":\"not_found\"}\n");
        });
        checks.await.unwrap();
    }

    #[tokio::test(flavor = "multi_thread", worker_threads = 2)]
    async fn service_reads_while_writer_lock_is_held() {
        let dir = tempfile::tempdir().unwrap();
        let db = seeded_db(&dir);
        // Keep a writer open while the service answers queries.
        let _writer = Store::open(&db).unwrap();
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let db_for_server = db.clone();
        tokio::spawn(async move {
            axum::serve(listener, router(db_for_server)).await.unwrap();
        });
        let url = format!("http://{addr}/v1/healthz");
        let status = tokio::task::spawn_blocking(move || get(&url).0).await.unwrap();
        assert_eq!(status, 200);
    }

    #[tokio::test(flavor = "multi_thread", worker_threads = 2)]
    async fn serve_fails_fast_on_missing_store() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("absent.db");
        let addr: SocketAddr = "127.0.0.1:0".parse().unwrap();
        let err = serve(missing, addr).await.unwrap_err();
        assert!(matches!(err, ServeError::Store(_)));
    }
}

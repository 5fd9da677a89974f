use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use maxent_cli::service::{router, AppState, ServiceConfig};
use maxent_core::fixtures::{binary_correlated, binary_schema};
use maxent_core::query::run_sql;
use maxent_core::solver::SolverConfig;
use maxent_core::summary::Summary;

struct Fixture {
    _dir: tempfile::TempDir,
    path: PathBuf,
    state: Arc<AppState>,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ex2.json");
    let (summary, _) = Summary::fit(binary_schema(), binary_correlated(), &SolverConfig::default(), None).unwrap();
    summary.save(&path).unwrap();
    let config = ServiceConfig {
        summaries: vec![("ex2".into(), path.clone())],
        ..Default::default()
    };
    Fixture {
        state: Arc::new(AppState::load(&config).unwrap()),
        path,
        _dir: dir,
    }
}

async fn call(state: &Arc<AppState>, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn get(state: &Arc<AppState>, uri: &str) -> (StatusCode, Value) {
    let (s, b) = call(state, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap())
}

fn query_request(id: &str, body: Value) -> Request<Body> {
    Request::post(format!("/summaries/{id}/query"))
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

async fn post(state: &Arc<AppState>, id: &str, body: Value) -> (StatusCode, Value) {
    let (s, b) = call(state, query_request(id, body)).await;
    (s, serde_json::from_slice(&b).unwrap())
}

fn assert_api_error(body: &Value, code: &str) {
    let obj = body.as_object().unwrap();
    assert_eq!(obj["code"], code);
    assert!(obj["message"].as_str().is_some_and(|m| !m.is_empty()));
    assert!(obj.contains_key("detail"));
}

#[tokio::test]
async fn healthz_reports_loaded_summaries() {
    let f = fixture();
    let (status, body) = get(&f.state, "/healthz").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["summaries"], 1);
}

#[tokio::test]
async fn lists_summaries_with_metadata() {
    let f = fixture();
    let (status, body) = get(&f.state, "/summaries").await;
    assert_eq!(status, StatusCode::OK);
    let list = body.as_array().unwrap();
    assert_eq!(list.len(), 1);
    assert_eq!(list[0]["id"], "ex2");
    assert_eq!(list[0]["n"], 10);
    assert_eq!(list[0]["statistics"], 10);
    assert_eq!(list[0]["attributes"], json!(["A", "B", "C"]));
}

#[tokio::test]
async fn schema_lists_domains_and_pairs() {
    let f = fixture();
    let (status, body) = get(&f.state, "/summaries/ex2/schema").await;
    assert_eq!(status, StatusCode::OK);
    let attrs = body["attributes"].as_array().unwrap();
    assert_eq!(attrs.len(), 3);
    assert_eq!(attrs[0]["size"], 2);
    assert_eq!(attrs[1]["labels"], json!(["b1", "b2"]));
    let pairs = body["two_d"].as_array().unwrap();
    assert_eq!(pairs.len(), 2);
    assert_eq!(pairs[0]["attributes"], json!(["A", "B"]));
    assert_eq!(pairs[0]["statistics"], 2);

    let (status, body) = get(&f.state, "/summaries/nope/schema").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_api_error(&body, "UNKNOWN_SUMMARY");
}

#[tokio::test]
async fn count_star_returns_n() {
    let f = fixture();
    let (status, body) = post(&f.state, "ex2", json!({ "sql": "SELECT COUNT(*) FROM R" })).await;
    assert_eq!(status, StatusCode::OK);
    let groups = body["groups"].as_array().unwrap();
    assert_eq!(groups.len(), 1);
    assert_eq!(groups[0]["raw"], 10.0);
    assert_eq!(groups[0]["rounded"], 10);
    assert!(body["wall_ms"].as_f64().is_some());
}

#[tokio::test]
async fn http_and_library_answers_agree() {
    let f = fixture();
    let summary = Summary::load(&f.path).unwrap();
    for sql in [
        "SELECT COUNT(*) FROM R WHERE A = 'a1' AND C = 'c2'",
        "SELECT B, COUNT(*) FROM R GROUP BY B ORDER BY COUNT(*) DESC",
        "SELECT A, C, COUNT(*) FROM R WHERE B = 'b2' GROUP BY A, C",
    ] {
        let (status, body) = post(&f.state, "ex2", json!({ "sql": sql })).await;
        assert_eq!(status, StatusCode::OK, "{sql}: {body}");
        let local = run_sql(&summary, sql).unwrap();
        let groups = body["groups"].as_array().unwrap();
        assert_eq!(groups.len(), local.groups.len());
        for (g, l) in groups.iter().zip(&local.groups) {
            assert_eq!(g["raw"].as_f64().unwrap().to_bits(), l.raw.to_bits(), "{sql}");
            assert_eq!(g["rounded"], l.rounded);
            assert_eq!(g["values"], json!(l.values));
        }
    }
}

#[tokio::test]
async fn malformed_sql_is_a_parse_error() {
    let f = fixture();
    for sql in ["SELECT COUNT(* FROM R", "SELECT SUM(A) FROM R", "SELECT COUNT(*) FROM R WHERE Z = 1"] {
        let (status, body) = post(&f.state, "ex2", json!({ "sql": sql })).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{sql}");
        assert_api_error(&body, "PARSE_ERROR");
    }
    let req = Request::post("/summaries/ex2/query")
        .header("content-type", "application/json")
        .body(Body::from("{not json"))
        .unwrap();
    let (status, bytes) = call(&f.state, req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_api_error(&serde_json::from_slice(&bytes).unwrap(), "PARSE_ERROR");
}

#[tokio::test]
async fn unknown_summary_is_404() {
    let f = fixture();
    let (status, body) = post(&f.state, "missing", json!({ "sql": "SELECT COUNT(*) FROM R" })).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_api_error(&body, "UNKNOWN_SUMMARY");
}

#[tokio::test]
async fn group_explosion_is_plan_too_large() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wide.json");
    let schema = maxent_core::schema::Schema::new(vec![
        maxent_core::schema::AttributeDomain::numeric("x", 0.0, 1.0, 400),
        maxent_core::schema::AttributeDomain::numeric("y", 0.0, 1.0, 400),
    ])
    .unwrap();
    let stats = maxent_core::statistics::StatisticSet::new(vec![400, 400], 400, &[vec![1; 400], vec![1; 400]], &[])
        .unwrap();
    let (summary, _) = Summary::fit(schema, stats, &SolverConfig::default(), None).unwrap();
    summary.save(&path).unwrap();
    let state = Arc::new(
        AppState::load(&ServiceConfig {
            summaries: vec![("wide".into(), path)],
            ..Default::default()
        })
        .unwrap(),
    );
    let (status, body) = post(&state, "wide", json!({ "sql": "SELECT x, y, COUNT(*) FROM R GROUP BY x, y" })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_api_error(&body, "PLAN_TOO_LARGE");
}

#[tokio::test]
async fn unknown_route_carries_an_api_error() {
    let f = fixture();
    let (status, body) = get(&f.state, "/nowhere").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_api_error(&body, "INTERNAL");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_identical_queries_return_identical_bytes() {
    let f = fixture();
    let body = json!({
        "sql": "SELECT A, B, COUNT(*) FROM R WHERE C = 'c1' GROUP BY A, B",
        "timing": false
    });
    let tasks: Vec<_> = (0..100)
        .map(|_| {
            let state = f.state.clone();
            let body = body.clone();
            tokio::spawn(async move { call(&state, query_request("ex2", body)).await })
        })
        .collect();
    let mut outputs = Vec::new();
    for t in tasks {
        let (status, bytes) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        outputs.push(bytes);
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    let parsed: Value = serde_json::from_slice(&outputs[0]).unwrap();
    assert!(parsed.get("wall_ms").is_none());
}

#[tokio::test]
async fn reload_keeps_old_catalog_on_failure() {
    let f = fixture();
    assert_eq!(f.state.reload().unwrap(), 1);
    std::fs::write(&f.path, "{}").unwrap();
    assert!(f.state.reload().is_err());
    let (status, body) = post(&f.state, "ex2", json!({ "sql": "SELECT COUNT(*) FROM R" })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["groups"][0]["raw"], 10.0);
}

#[test]
fn corrupted_summary_is_rejected_at_load() {
    let f = fixture();
    let text = std::fs::read_to_string(&f.path).unwrap();
    std::fs::write(&f.path, &text[..text.len() / 2]).unwrap();
    let config = ServiceConfig {
        summaries: vec![("ex2".into(), f.path.clone())],
        ..Default::default()
    };
    assert!(AppState::load(&config).is_err());
}

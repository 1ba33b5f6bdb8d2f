use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use kriq_core::System;
use kriq_service::http::{router, SharedSession};
use kriq_service::Session;
use parking_lot::RwLock;
use serde_json::{json, Value};
use tower::ServiceExt;

const QUERY_ONE: &str = "List all F-box domain protein 2 sequences";

fn loaded() -> SharedSession {
    let dir = System::bundled_dir();
    let mut s = Session::new();
    s.load(&dir.join("tables"), &dir.join("knowledge.json")).unwrap();
    Arc::new(RwLock::new(s))
}

async fn call(session: &SharedSession, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = router(session.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn post(session: &SharedSession, uri: &str, body: Value) -> (StatusCode, Value) {
    call(session, "POST", uri, Some(body.to_string())).await
}

#[tokio::test]
async fn query_one_enhanced_has_a_derived_row_with_explanation() {
    let s = loaded();
    let (status, body) = post(&s, "/query", json!({ "text": QUERY_ONE })).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["mode"], "enhanced");
    let rows = body["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["derived"], false);
    assert_eq!(rows[1]["derived"], true);

    let id = rows[1]["provenance_id"].as_str().unwrap();
    let (status, x) = call(&s, "GET", &format!("/explain/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let text = x.to_string();
    assert!(text.contains("Ortholog"), "{text}");
    assert!(text.contains("BLAST"), "{text}");
    assert_eq!(x["provenance_id"], id);
}

#[tokio::test]
async fn baseline_mode_returns_only_direct_rows() {
    let s = loaded();
    let (status, body) = post(&s, "/query", json!({ "text": QUERY_ONE, "mode": "baseline" })).await;
    assert_eq!(status, StatusCode::OK);
    let rows = body["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["derived"], false);
}

#[tokio::test]
async fn raw_goals_bind_the_protein_id() {
    let s = loaded();
    let text = "res('Gene',Pk,'GeneName','repA1'), res('Gene',Pk,'UniProtProteinID',Val)";
    let (status, body) = post(&s, "/query", json!({ "text": text, "goal": true, "mode": "baseline" })).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["columns"], json!(["Pk", "Val"]));
    assert_eq!(body["rows"][0]["values"], json!(["1246500", "O85067"]));
}

#[tokio::test]
async fn unknown_provenance_is_not_found() {
    let s = loaded();
    let (status, body) = call(&s, "GET", "/explain/p-00000000000000000000", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "UnknownProvenance");
}

#[tokio::test]
async fn schema_needs_a_loaded_session() {
    let empty: SharedSession = Arc::new(RwLock::new(Session::new()));
    let (status, body) = call(&empty, "GET", "/schema", None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "NotLoaded");

    let (status, body) = call(&loaded(), "GET", "/schema", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["facts"].as_u64().unwrap() > 0);
    assert_eq!(body["tools"], json!(["BLAST", "GENCODE", "ORSCAN"]));
}

#[tokio::test]
async fn malformed_bodies_are_rejected() {
    let s = loaded();
    for body in ["{", "[]", r#"{"text": 3}"#, r#"{"text": "x", "extra": 1}"#] {
        let (status, v) = call(&s, "POST", "/query", Some(body.into())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert_eq!(v["error"], "MalformedBody");
    }
    let (status, _) = post(&s, "/load", json!({ "data_dir": "/tmp" })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn pipeline_errors_carry_their_name() {
    let s = loaded();
    let (status, body) = post(&s, "/query", json!({ "text": "" })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "EmptyQuery");

    let (status, body) = post(&s, "/query", json!({ "text": "What is the colour of repA1?" })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert!(body["error"].as_str().unwrap().starts_with("Unknown"), "{body}");
}

#[tokio::test]
async fn history_records_each_answered_query() {
    let s = loaded();
    post(&s, "/query", json!({ "text": QUERY_ONE })).await;
    post(&s, "/query", json!({ "text": "" })).await;
    post(&s, "/query", json!({ "text": QUERY_ONE, "mode": "baseline" })).await;
    let (status, body) = call(&s, "GET", "/history", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        body,
        json!([
            { "text": QUERY_ONE, "mode": "enhanced", "result_id": "q1" },
            { "text": QUERY_ONE, "mode": "baseline", "result_id": "q2" },
        ])
    );
}

#[tokio::test]
async fn load_reloads_and_reports_bad_documents() {
    let s = loaded();
    let (status, body) = call(&s, "POST", "/load", None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["loaded"], true);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("knowledge.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let tables = System::bundled_dir().join("tables");
    let (status, body) = post(&s, "/load", json!({ "data_dir": tables, "knowledge_file": bad })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");

    let knowledge = System::bundled_dir().join("knowledge.json");
    let (status, body) = post(&s, "/load", json!({ "data_dir": tables, "knowledge_file": knowledge })).await;
    assert_eq!(status, StatusCode::OK, "{body}");
}

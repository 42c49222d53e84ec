use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use frs_cli::{router, ScoreResponse};
use frs_core::Engine;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(Arc::new(Engine::bundled()))
}

fn worked() -> Value {
    json!({
        "sex": "male", "age": 70, "hdl": 30, "total_chol": 283, "sbp": 170,
        "treated_sbp": false, "smoker": false, "diabetic": true
    })
}

fn eighteen_point() -> Value {
    json!({
        "sex": "male", "age": 55, "hdl": 45, "total_chol": 210, "sbp": 150,
        "treated_sbp": false, "smoker": true, "diabetic": false
    })
}

async fn call(app: Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, Body::from))
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn post(uri: &str, body: Value) -> (StatusCode, Value) {
    call(app(), "POST", uri, Some(body.to_string())).await
}

#[tokio::test]
async fn score_worked_example() {
    let (status, body) = post("/api/score", worked()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["category"], "high");
    assert_eq!(body["breakdown"]["total"], 26);
    assert_eq!(body["risk_percent"], "gt30");
    assert_eq!(body["abductive"]["features"], json!(["age", "sbp", "diabetic"]));
    assert_eq!(body["profile"], worked());
    assert_eq!(body["counterfactual"]["status"], "changed");
    let parsed: ScoreResponse = serde_json::from_value(body.clone()).unwrap();
    assert_eq!(serde_json::to_value(&parsed).unwrap(), body);
}

#[tokio::test]
async fn score_low_profile_needs_no_counterfactual() {
    let mut low = worked();
    low["age"] = json!(30);
    low["diabetic"] = json!(false);
    low["hdl"] = json!(45);
    low["total_chol"] = json!(150);
    low["sbp"] = json!(125);
    let (status, body) = post("/api/score", low).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["breakdown"]["total"], 0);
    assert_eq!(body["risk_percent"], 1.6);
    assert_eq!(body["category"], "low");
    assert_eq!(body["counterfactual"], json!({ "status": "not_needed" }));
}

#[tokio::test]
async fn invalid_profile_lists_fields() {
    let mut bad = worked();
    bad["age"] = json!(20);
    let (status, body) = post("/api/score", bad).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["fields"][0]["field"], "age");

    let (status, body) = post("/api/score", json!({ "sex": "other", "age": "old", "smoker": 1, "weight": 80 })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let fields: Vec<&str> = body["fields"].as_array().unwrap().iter().map(|f| f["field"].as_str().unwrap()).collect();
    for f in ["weight", "sex", "age", "smoker", "hdl", "total_chol", "sbp", "treated_sbp", "diabetic"] {
        assert!(fields.contains(&f), "{f} missing from {fields:?}");
    }

    let (status, body) = call(app(), "POST", "/api/score", Some("{not json".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("invalid JSON"));

    let mut bad_order = worked();
    bad_order["order"] = json!(["age", "age"]);
    let (status, body) = post("/api/score", bad_order).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["fields"][0]["field"], "order");
}

#[tokio::test]
async fn whatif_lowers_sbp() {
    let (status, body) = post("/api/whatif", json!({ "profile": worked(), "overrides": { "sbp": 115 } })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["breakdown"]["total"], 21);
    assert_eq!(body["profile"]["sbp"], 115);
}

#[tokio::test]
async fn whatif_rejects_immutable_overrides() {
    let (status, body) = post("/api/whatif", json!({ "profile": worked(), "overrides": { "age": 40, "sbp": "low" } })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let fields: Vec<&str> = body["fields"].as_array().unwrap().iter().map(|f| f["field"].as_str().unwrap()).collect();
    assert_eq!(fields, ["overrides.age", "overrides.sbp"]);
    // diabetes is only modifiable under the wider policy
    let (status, _) = post("/api/whatif", json!({ "profile": worked(), "overrides": { "diabetic": false } })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let req = json!({ "profile": worked(), "overrides": { "diabetic": false }, "mutability": "age-sex-only" });
    let (status, body) = post("/api/whatif", req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["breakdown"]["total"], 23);
}

#[tokio::test]
async fn counterfactual_endpoint() {
    let mut req = eighteen_point();
    req["order"] = json!(["smoker", "sbp"]);
    let (status, body) = post("/api/counterfactual", req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "changed");
    assert_eq!(body["changed"]["features"], json!(["hdl", "total_chol"]));

    let mut req = eighteen_point();
    req["order"] = json!(["hdl", "total_chol", "smoker", "sbp"]);
    let (_, body) = post("/api/counterfactual", req).await;
    assert_eq!(body["changed"]["features"], json!(["sbp"]));
    assert_eq!(body["witness"]["sbp"], 119);
    assert_eq!(body["witness_category"], "moderate");

    let (_, body) = post("/api/counterfactual", eighteen_point()).await;
    assert_eq!(body["changed"]["features"], json!(["smoker"]));

    let mut old = worked();
    old["age"] = json!(75);
    old["target"] = json!("low");
    let (status, body) = post("/api/counterfactual", old).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "target unreachable given immutable features");

    let mut req = worked();
    req["target"] = json!("high");
    let (status, body) = post("/api/counterfactual", req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["fields"][0]["field"], "target");
}

#[tokio::test]
async fn schema_describes_domains() {
    let (status, body) = call(app(), "GET", "/api/schema", None).await;
    assert_eq!(status, StatusCode::OK);
    let features = body["features"].as_array().unwrap();
    assert_eq!(features.len(), 8);
    let age = features.iter().find(|f| f["key"] == "age").unwrap();
    assert_eq!(age["bins"]["male"].as_array().unwrap().len(), 10);
    assert_eq!(age["bins"]["female"].as_array().unwrap().len(), 10);
    assert_eq!(age["mutable"], false);
    let sbp = features.iter().find(|f| f["key"] == "sbp").unwrap();
    assert_eq!(sbp["domain"]["male"].as_array().unwrap().len(), 5);
    assert_eq!(sbp["domain"]["female"].as_array().unwrap().len(), 6);
    assert_eq!(body["categories"]["male"], json!({ "low_max_percent": 6.0, "high_min_percent": 20.0 }));
}

#[tokio::test]
async fn health_and_unknown_routes() {
    let (status, body) = call(app(), "GET", "/api/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    let (status, _) = call(app(), "GET", "/api/nothing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(app(), "GET", "/api/score", None).await;
    assert_eq!(status, StatusCode::METHOD_NOT_ALLOWED);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_do_not_interfere() {
    let app = app();
    let mut handles = Vec::new();
    for i in 0..64 {
        let app = app.clone();
        handles.push(tokio::spawn(async move {
            let mut p = worked();
            p["age"] = json!(30 + (i % 10) * 5);
            p["smoker"] = json!(i % 2 == 0);
            let (status, body) = call(app, "POST", "/api/score", Some(p.to_string())).await;
            (p, status, body)
        }));
    }
    let engine = Engine::bundled();
    for h in handles {
        let (p, status, body) = h.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body["profile"], p);
        let profile = serde_json::from_value(p).unwrap();
        let expected = frs_cli::api::score(&engine, &profile, &Default::default()).unwrap();
        assert_eq!(body, serde_json::to_value(expected).unwrap());
    }
}

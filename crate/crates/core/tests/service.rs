mod common;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use cbtracker::bpmn::{parse_bpmn, CollaborationModel};
use cbtracker::service::{router, AppState};
use common::read_fixture;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture_model() -> CollaborationModel {
    parse_bpmn(&read_fixture("streamer.annotated.bpmn")).unwrap()
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, String) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(
            body.map(|b| Body::from(b.to_string()))
                .unwrap_or_else(Body::empty),
        )
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn call_json(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let text = body.map(|b| b.to_string());
    let (status, out) = call(app, method, uri, text.as_deref()).await;
    (
        status,
        serde_json::from_str(&out).unwrap_or(Value::String(out)),
    )
}

fn overview<'a>(response: &'a Value, actor: &str) -> &'a Value {
    response["overviews"]
        .as_array()
        .unwrap()
        .iter()
        .find(|o| o["actor"] == actor)
        .unwrap()
}

fn line_item<'a>(overview: &'a Value, display_id: &str) -> &'a Value {
    overview["lineItems"]
        .as_array()
        .unwrap()
        .iter()
        .find(|i| i["taskDisplayId"] == display_id)
        .unwrap()
}

#[tokio::test]
async fn evaluate_fixture() {
    let app = router(AppState::new(fixture_model()));
    let (status, body) = call_json(&app, Method::POST, "/v1/evaluate", None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(overview(&body, "Streamer")["currentNet"], "4726.50");
    assert_eq!(body["summary"]["focalActor"], "Streamer");
    let values = body["result"]["values"].as_array().unwrap();
    assert_eq!(values.len(), 4);
}

#[tokio::test]
async fn whatif_doubles_streaming_without_touching_the_model() {
    let state = AppState::new(fixture_model());
    let app = router(state.clone());
    let before = state.snapshot();

    let request = json!({"overrides": [{"taskDisplayId": "1.5", "kpiName": "Streaming count", "current": 6420}]});
    let (status, body) = call_json(&app, Method::POST, "/v1/whatif", Some(request)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let streamer = overview(&body, "Streamer");
    // 6420 × 0.45
    assert_eq!(line_item(streamer, "2.6")["current"], "2889.00");
    assert_eq!(streamer["currentCosts"], "2889.00");

    assert_eq!(*state.snapshot(), *before);
    let (_, model) = call_json(&app, Method::GET, "/v1/model", None).await;
    let stored: CollaborationModel = serde_json::from_value(model).unwrap();
    assert_eq!(stored, fixture_model());
}

#[tokio::test]
async fn whatif_accepts_a_bare_list_and_formula_strings() {
    let app = router(AppState::new(fixture_model()));
    let request = json!([
        {"taskDisplayId": "1.2", "kpiName": "Streaming count", "current": "20000", "target": 50000},
        {"taskDisplayId": "2.6", "kpiName": "Cumulative Streaming", "target": "(1.5,Streaming count)*0,45"}
    ]);
    let (status, body) = call_json(&app, Method::POST, "/v1/whatif", Some(request)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let streamer = overview(&body, "Streamer");
    assert_eq!(streamer["currentBenefits"], "10000.00");
    assert_eq!(streamer["targetBenefits"], "25000.00");
    // 20000 × 0.45
    assert_eq!(streamer["targetCosts"], "9000.00");
}

#[tokio::test]
async fn whatif_unknown_task_is_404() {
    let app = router(AppState::new(fixture_model()));
    let request = json!({"overrides": [{"taskDisplayId": "9.9", "kpiName": "Streaming count", "current": 1}]});
    let (status, body) = call_json(&app, Method::POST, "/v1/whatif", Some(request)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknown-task");
    assert_eq!(body["location"], "9.9");

    let request = json!({"overrides": [{"taskDisplayId": "1.5", "kpiName": "Nope", "current": 1}]});
    let (status, body) = call_json(&app, Method::POST, "/v1/whatif", Some(request)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknown-kpi");
}

#[tokio::test]
async fn whatif_introducing_a_cycle_is_409() {
    let app = router(AppState::new(fixture_model()));
    let request = json!({"overrides": [{"taskDisplayId": "1.5", "kpiName": "Streaming count", "current": "(2.6,Cumulative Streaming) + 1"}]});
    let (status, body) = call_json(&app, Method::POST, "/v1/whatif", Some(request)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "cycle");
    assert!(body["location"].is_string());
}

#[tokio::test]
async fn malformed_bodies_are_400() {
    let app = router(AppState::new(fixture_model()));
    for body in [
        "{",
        r#"{"overrides": [{"taskDisplayId": "1.5"}]}"#,
        r#"[{"taskDisplayId": "1.5", "kpiName": "x", "current": "2 *"}]"#,
    ] {
        let (status, text) = call(&app, Method::POST, "/v1/whatif", Some(body)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        let error: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(error["code"], "malformed-body");
        assert!(error["message"].is_string());
        assert!(error.get("location").is_some());
    }
    let (status, _) = call(&app, Method::PUT, "/v1/model", Some("[1, 2")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn put_replaces_the_model() {
    let state = AppState::new(fixture_model());
    let app = router(state.clone());
    let cyclic = parse_bpmn(&read_fixture("cyclic.bpmn")).unwrap();
    let (status, _) = call_json(
        &app,
        Method::PUT,
        "/v1/model",
        Some(serde_json::to_value(&cyclic).unwrap()),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(*state.snapshot(), cyclic);

    let (status, body) = call_json(&app, Method::POST, "/v1/evaluate", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "cycle");
}

#[tokio::test]
async fn put_accepts_bpmn_xml() {
    let state = AppState::new(parse_bpmn(&read_fixture("cyclic.bpmn")).unwrap());
    let app = router(state.clone());
    let request = Request::builder()
        .method(Method::PUT)
        .uri("/v1/model")
        .header("content-type", "application/xml")
        .body(Body::from(read_fixture("streamer.annotated.bpmn")))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    assert_eq!(response.status(), StatusCode::OK);
    assert_eq!(*state.snapshot(), fixture_model());
}

#[tokio::test]
async fn put_rejects_structurally_invalid_models() {
    let state = AppState::new(fixture_model());
    let app = router(state.clone());
    let mut bad = fixture_model();
    bad.message_flows[0].target = "Nowhere".into();
    let (status, body) = call_json(
        &app,
        Method::PUT,
        "/v1/model",
        Some(serde_json::to_value(&bad).unwrap()),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "invalid-model");
    assert_eq!(*state.snapshot(), fixture_model());
}

#[tokio::test]
async fn report_formats() {
    let app = router(AppState::new(fixture_model()));
    let (status, csv) = call(&app, Method::GET, "/v1/report?format=csv", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(csv.starts_with("actor,taskDisplayId,taskName,type,goal,kpi,current,target\n"));
    let (_, table) = call(
        &app,
        Method::GET,
        "/v1/report?format=text-table&actor=Streamer",
        None,
    )
    .await;
    assert!(table.contains("Actor: Streamer (focal)"));
    assert_eq!(table.matches("Actor: ").count(), 1);
    let (_, json) = call_json(&app, Method::GET, "/v1/report", None).await;
    assert_eq!(overview(&json, "Streamer")["currentNet"], "4726.50");
    let (status, body) = call_json(&app, Method::GET, "/v1/report?format=pdf", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "unknown-format");
    let (status, _) = call_json(&app, Method::GET, "/v1/report?actor=Nobody", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn unknown_route_is_a_json_404() {
    let app = router(AppState::new(fixture_model()));
    let (status, body) = call_json(&app, Method::GET, "/v1/nothing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "not-found");
}

#[tokio::test]
async fn concurrent_whatifs_and_evaluations_agree_with_baseline() {
    let app = router(AppState::new(fixture_model()));
    let (_, baseline) = call_json(&app, Method::POST, "/v1/evaluate", None).await;
    let mut handles = Vec::new();
    for i in 0..16 {
        let app = app.clone();
        handles.push(tokio::spawn(async move {
            if i % 2 == 0 {
                let request = json!([{"taskDisplayId": "1.5", "kpiName": "Streaming count", "current": i * 1000}]);
                call_json(&app, Method::POST, "/v1/whatif", Some(request)).await.0
            } else {
                call_json(&app, Method::POST, "/v1/evaluate", None).await.0
            }
        }));
    }
    for h in handles {
        assert_eq!(h.await.unwrap(), StatusCode::OK);
    }
    let (_, after) = call_json(&app, Method::POST, "/v1/evaluate", None).await;
    assert_eq!(after, baseline);
}

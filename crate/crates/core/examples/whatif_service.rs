//! Drives the HTTP API in-process: a baseline evaluation, a what-if that
//! doubles the song streams, and a second evaluation showing the stored
//! model is untouched.
//!
//! Run with `cargo run --example whatif_service`. Pass `--serve` to listen on
//! 127.0.0.1:8080 instead and try the same calls with curl:
//!
//! ```text
//! curl -s -X POST localhost:8080/v1/evaluate
//! curl -s -X POST localhost:8080/v1/whatif \
//!   -d '{"overrides":[{"taskDisplayId":"1.5","kpiName":"Streaming count","current":6420}]}'
//! ```

use axum::body::Body;
use axum::http::{Method, Request};
use axum::Router;
use cbtracker::bpmn::parse_bpmn;
use cbtracker::service::{router, serve, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const ANNOTATED: &str = include_str!("../../../fixtures/streamer.annotated.bpmn");

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> Value {
    let request = Request::builder()
        .method(method.clone())
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value: Value = serde_json::from_slice(&bytes).unwrap();
    println!("{method} {uri} -> {status}");
    value
}

fn print_streamer(response: &Value) {
    let streamer = response["overviews"]
        .as_array()
        .and_then(|o| o.iter().find(|o| o["actor"] == "Streamer"));
    let Some(s) = streamer else { return };
    println!(
        "  Streamer costs {} benefits {} net {}",
        s["currentCosts"], s["currentBenefits"], s["currentNet"]
    );
    for item in s["lineItems"].as_array().into_iter().flatten() {
        println!(
            "    {:<4} {:<30} {}",
            item["taskDisplayId"].as_str().unwrap_or(""),
            item["kpi"],
            item["current"]
        );
    }
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = parse_bpmn(ANNOTATED)?;
    if std::env::args().any(|a| a == "--serve") {
        serve(model, ([127, 0, 0, 1], 8080).into(), None).await?;
        return Ok(());
    }

    let app = router(AppState::new(model));
    print_streamer(&call(&app, Method::POST, "/v1/evaluate", None).await);

    let overrides = json!({"overrides": [
        {"taskDisplayId": "1.5", "kpiName": "Streaming count", "current": 6420}
    ]});
    print_streamer(&call(&app, Method::POST, "/v1/whatif", Some(overrides)).await);

    print_streamer(&call(&app, Method::POST, "/v1/evaluate", None).await);

    let error = call(
        &app,
        Method::POST,
        "/v1/whatif",
        Some(json!([{"taskDisplayId": "7.7", "kpiName": "x", "current": 1}])),
    )
    .await;
    println!("  {error}");
    Ok(())
}

// Drives the HTTP API in-process: log in, fetch a ranking, then the
// details of the top entry. `monitor serve` exposes the same router.
//
//     cargo run --example query_api

use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request};
use http_body_util::BodyExt;
use serde_json::Value;
use telemonitor::api::{router, Account, Accounts, ApiSettings, ApiState};
use telemonitor::fixture::{self, FixtureOptions};
use telemonitor::ingest::Pseudonymizer;
use telemonitor::pipeline;
use tower::ServiceExt;

async fn call(app: &axum::Router, req: Request<Body>) -> (u16, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status().as_u16();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

pub fn run() -> telemonitor::Result<u16> {
    let dir = tempfile::tempdir().map_err(|e| telemonitor::Error::Config(e.to_string()))?;
    let (input, dataset) = (dir.path().join("input"), dir.path().join("dataset"));
    fixture::generate(&input, &FixtureOptions::new(4, 600))?;
    pipeline::ingest_dir(&input, &dataset, &Pseudonymizer::new(b"example secret")?)?;
    pipeline::process_dataset(&dataset, &Default::default())?;

    let accounts = Accounts::new([Account::with_rounds("analyst", "correct horse", 10_000)?])?;
    let state = ApiState::open(&dataset, accounts, ApiSettings::default())?;
    let app = router(Arc::new(state));

    let rt = tokio::runtime::Runtime::new().map_err(|e| telemonitor::Error::Config(e.to_string()))?;
    rt.block_on(async {
        let login = Request::post("/api/login")
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(r#"{"username":"analyst","password":"correct horse"}"#))
            .unwrap();
        let (_, session) = call(&app, login).await;
        let bearer = format!("Bearer {}", session["token"].as_str().unwrap());
        let get = |uri: String| Request::get(uri).header(header::AUTHORIZATION, &bearer).body(Body::empty()).unwrap();

        let (status, top) = call(&app, get("/api/top?from=2021-02-15&to=2021-03-21&kind=image&limit=3".into())).await;
        println!("GET /api/top -> {status}\n{}", serde_json::to_string_pretty(&top).unwrap());
        let id = top[0]["cluster_id"].as_str().unwrap();
        let (_, details) = call(&app, get(format!("/api/content/{id}"))).await;
        println!("GET /api/content/{id}\n{}", serde_json::to_string_pretty(&details).unwrap());

        let anonymous = Request::get("/api/stats/weekly_volume").body(Body::empty()).unwrap();
        let (denied, body) = call(&app, anonymous).await;
        println!("without a token -> {denied} {body}");
        Ok(status)
    })
}

fn main() -> telemonitor::Result<()> {
    run()?;
    Ok(())
}

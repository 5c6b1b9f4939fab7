mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use nftmine::cli::load_serving;
use nftmine::server::router;
use nftmine_core::ffm::FfmRow;
use nftmine_core::model::predict_batch;
use nftmine_core::recommend::{build_candidates, CandidateOptions};
use serde_json::Value;
use tower::ServiceExt;

fn app() -> Router {
    let f = common::shared("server-fixture");
    router(load_serving(&f.model, &f.catalog, None).unwrap())
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let body = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, body.to_vec())
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (status, body) = send(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (status, serde_json::from_slice(&body).unwrap())
}

async fn post(app: &Router, uri: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::post(uri).header("content-type", "application/json").body(Body::from(body.to_string())).unwrap();
    let (status, body) = send(app, req).await;
    (status, serde_json::from_slice(&body).unwrap())
}

fn some_user() -> String {
    let snap = load_serving(&common::shared("server-fixture").model, &common::shared("server-fixture").catalog, None).unwrap();
    snap.catalog.owned.keys().next().unwrap().clone()
}

#[tokio::test]
async fn bad_requests_are_400() {
    let app = app();
    for uri in ["/recommend?user=u&k=0", "/recommend?k=3", "/recommend?user=u", "/recommend?user=u&k=-1", "/recommend?user=u&k=abc", "/recommend?user=&k=2"] {
        let (status, v) = get(&app, uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert_eq!(v["error"], "bad_request");
        assert!(v["reason"].as_str().is_some_and(|r| !r.is_empty()));
    }
}

#[tokio::test]
async fn unknown_routes_are_404() {
    let app = app();
    let (status, v) = get(&app, "/nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "not_found");
}

#[tokio::test]
async fn health_is_stable() {
    let app = app();
    let (status, first) = get(&app, "/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(first["status"], "ok");
    assert!(first["model_version"].as_str().unwrap().starts_with("v1-"));
    let user = some_user();
    for i in 0..50 {
        let _ = get(&app, &format!("/recommend?user={user}&k={}", i % 7 + 1)).await;
        let _ = get(&app, "/recommend?user=x&k=0").await;
    }
    let (_, later) = get(&app, "/health").await;
    assert_eq!(first, later);
}

#[tokio::test]
async fn recommendations_are_sorted_filtered_and_repeatable() {
    let f = common::shared("server-fixture");
    let snap = load_serving(&f.model, &f.catalog, None).unwrap();
    let app = app();
    let user = snap.catalog.owned.keys().next().unwrap().clone();
    let collections: std::collections::BTreeSet<&str> =
        snap.catalog.assets.values().map(|e| e.collection_slug.as_str()).collect();
    for coll in collections {
        let uri = format!("/recommend?user={user}&k=5&collection={coll}");
        let (status, first) = send(&app, Request::get(&uri).body(Body::empty()).unwrap()).await;
        assert_eq!(status, StatusCode::OK);
        for _ in 0..3 {
            let (_, again) = send(&app, Request::get(&uri).body(Body::empty()).unwrap()).await;
            assert_eq!(first, again);
        }
        let v: Value = serde_json::from_slice(&first).unwrap();
        let items = v["items"].as_array().unwrap();
        assert!(items.len() <= 5);
        assert!(items.iter().all(|i| i["collection_slug"] == coll));

        // Independent ranking: score every candidate, sort, compare.
        let opts = CandidateOptions { collection: Some(coll), exclude_owned: false };
        let (keys, rows): (Vec<String>, Vec<FfmRow>) = build_candidates(&user, &snap.catalog, &snap.vocab, &opts).into_iter().unzip();
        let probs = predict_batch(&snap.model.params, &rows).unwrap();
        let mut expected: Vec<(f64, String)> = probs.into_iter().zip(keys).collect();
        expected.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        expected.truncate(5);
        let got: Vec<(f64, String)> = items
            .iter()
            .map(|i| (i["probability"].as_f64().unwrap(), i["asset_key"].as_str().unwrap().to_string()))
            .collect();
        assert_eq!(got, expected);
    }
    let (_, v) = get(&app, &format!("/recommend?user={user}&k=3&collection=no-such-collection")).await;
    assert_eq!(v["items"].as_array().unwrap().len(), 0);
}

#[tokio::test]
async fn score_accepts_lines_and_objects() {
    let app = app();
    let (status, v) = post(&app, "/score", r#"["1 0:1:1 1:2:1", {"entries": [{"field": 0, "feature": 1, "value": 1.0}, {"field": 1, "feature": 2, "value": 1.0}]}]"#).await;
    assert_eq!(status, StatusCode::OK);
    let p = v["probabilities"].as_array().unwrap();
    assert_eq!(p.len(), 2);
    assert_eq!(p[0], p[1]);
    assert!(p[0].as_f64().is_some_and(|x| x > 0.0 && x < 1.0));

    let (status, v) = post(&app, "/score", "[]").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["probabilities"].as_array().unwrap().len(), 0);

    for body in ["not json", r#"{"rows": 1}"#, r#"["1 0:1"]"#] {
        let (status, v) = post(&app, "/score", body).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert_eq!(v["error"], "bad_request");
    }

    let (status, v) = post(&app, "/score", r#"["0 0:99999999:1"]"#).await;
    assert_eq!(status, StatusCode::INTERNAL_SERVER_ERROR);
    assert_eq!(v["error"], "scoring_failed");
    assert_eq!(v["error_id"], "err-000001");
    let (_, v) = post(&app, "/score", r#"["0 0:99999999:1"]"#).await;
    assert_eq!(v["error_id"], "err-000002");
}

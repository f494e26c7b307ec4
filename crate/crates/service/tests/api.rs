use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use spotcheck_core::annotation::ImageAnnotation;
use spotcheck_core::manifest::{dataset_stats, DatasetManifest};
use spotcheck_service::{image_id, router, ImageSummary, PreviewResponse, ServiceState};
use tower::ServiceExt;

const SCENE: &str = r#"{
  "image": "cam/b.png",
  "width": 40,
  "height": 20,
  "tags": ["sunny"],
  "lots": [
    {"id": "1", "quad": [[0, 0], [10, 0], [10, 10], [0, 10]], "occupied": null},
    {"id": "2", "quad": [[20, 0], [30, 0], [30, 10], [20, 10]], "occupied": true}
  ]
}"#;

const RECT_SCENE: &str = r#"{"image": "cam/a.png", "width": 40, "height": 20, "tags": [],
  "lots": [{"id": "r", "rect": [[1, 1], [5, 5]], "occupied": false}]}"#;

fn fixture(dir: &Path) -> DatasetManifest {
    std::fs::create_dir_all(dir.join("ann")).unwrap();
    std::fs::create_dir_all(dir.join("cam")).unwrap();
    std::fs::write(dir.join("ann/b.json"), SCENE).unwrap();
    std::fs::write(dir.join("ann/a.json"), RECT_SCENE).unwrap();
    std::fs::write(dir.join("cam/b.png"), b"\x89PNG fake").unwrap();
    let m = DatasetManifest::new("t", ".", vec!["ann/b.json".into(), "ann/a.json".into()]);
    std::fs::write(dir.join("manifest.json"), m.to_json()).unwrap();
    DatasetManifest::load(&dir.join("manifest.json")).unwrap()
}

fn app(dir: &Path) -> Router {
    router(Arc::new(ServiceState::load(fixture(dir)).unwrap()), None)
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let headers = res.headers().clone();
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, headers, body)
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn put(uri: &str, revision: Option<&str>, body: impl Into<Body>) -> Request<Body> {
    let mut b = Request::put(uri).header(header::CONTENT_TYPE, "application/json");
    if let Some(r) = revision {
        b = b.header(header::IF_MATCH, r);
    }
    b.body(body.into()).unwrap()
}

fn post_json(uri: &str, v: &Value) -> Request<Body> {
    Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(v.to_string()))
        .unwrap()
}

fn ann_uri(image: &str) -> String {
    format!("/api/images/{}/annotations", image_id(image))
}

#[tokio::test]
async fn lists_images_sorted_with_counts() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (status, _, body) = send(&app, get("/api/images")).await;
    assert_eq!(status, StatusCode::OK);
    let list: Vec<ImageSummary> = serde_json::from_slice(&body).unwrap();
    let paths: Vec<&str> = list.iter().map(|s| s.path.as_str()).collect();
    assert_eq!(paths, vec!["cam/a.png", "cam/b.png"]);
    assert_eq!((list[1].lot_count, list[1].labeled_count, list[1].revision), (2, 1, 0));
    assert_eq!(list[1].id.len(), 16);
    let stats = dataset_stats(&DatasetManifest::load(&dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(list.len(), stats.total);
}

#[tokio::test]
async fn empty_manifest_lists_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let state = ServiceState::load(DatasetManifest::new("empty", dir.path(), vec![])).unwrap();
    let (status, _, body) = send(&router(Arc::new(state), None), get("/api/images")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"[]");
}

#[tokio::test]
async fn get_then_put_round_trip_bumps_revision() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let uri = ann_uri("cam/b.png");
    let (status, headers, body) = send(&app, get(&uri)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers[header::ETAG], "\"0\"");
    assert_eq!(headers["x-revision"], "0");
    let canonical = ImageAnnotation::from_json(SCENE.as_bytes()).unwrap().to_json();
    assert_eq!(String::from_utf8(body.clone()).unwrap(), canonical);

    let (status, headers, reply) = send(&app, put(&uri, Some("\"0\""), body.clone())).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&reply));
    assert_eq!(headers[header::ETAG], "\"1\"");
    let (_, headers, again) = send(&app, get(&uri)).await;
    assert_eq!(headers["x-revision"], "1");
    assert_eq!(again, body);
    // Persisted file is canonical and strict-parses.
    let on_disk = std::fs::read_to_string(dir.path().join("ann/b.json")).unwrap();
    assert_eq!(on_disk, canonical);
    assert!(ImageAnnotation::from_json(on_disk.as_bytes()).is_ok());
}

#[tokio::test]
async fn edits_are_persisted() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let uri = ann_uri("cam/b.png");
    let edited = SCENE.replace("\"occupied\": null", "\"occupied\": false");
    let (status, _, _) = send(&app, put(&uri, Some("0"), edited.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let on_disk = std::fs::read(dir.path().join("ann/b.json")).unwrap();
    assert_eq!(ImageAnnotation::from_json(&on_disk).unwrap().labeled_count(), 2);
    let (_, _, body) = send(&app, get("/api/images")).await;
    let list: Vec<ImageSummary> = serde_json::from_slice(&body).unwrap();
    assert_eq!((list[1].labeled_count, list[1].revision), (2, 1));
}

#[tokio::test]
async fn invalid_bodies_are_rejected_with_rules() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let uri = ann_uri("cam/b.png");
    let three = SCENE.replace("[[0, 0], [10, 0], [10, 10], [0, 10]]", "[[0, 0], [10, 0], [10, 10]]");
    let (status, _, body) = send(&app, put(&uri, Some("\"0\""), three)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["violations"][0]["rule"], "quad_arity");
    assert_eq!(v["violations"][0]["lot_id"], "1");

    let other_image = SCENE.replace("cam/b.png", "cam/z.png");
    let (status, _, _) = send(&app, put(&uri, Some("0"), other_image)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _, _) = send(&app, put(&uri, None, SCENE)).await;
    assert_eq!(status, StatusCode::PRECONDITION_REQUIRED);
    let (status, _, _) = send(&app, put(&uri, Some("abc"), SCENE)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // Nothing was written.
    assert_eq!(std::fs::read_to_string(dir.path().join("ann/b.json")).unwrap(), SCENE);
}

#[tokio::test]
async fn stale_revision_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let uri = ann_uri("cam/b.png");
    assert_eq!(send(&app, put(&uri, Some("0"), SCENE)).await.0, StatusCode::OK);
    let (status, headers, body) = send(&app, put(&uri, Some("0"), SCENE)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(headers["x-revision"], "1");
    assert_eq!(serde_json::from_slice::<Value>(&body).unwrap()["current_revision"], 1);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_writers_one_wins() {
    for round in 0..20 {
        let dir = tempfile::tempdir().unwrap();
        let app = app(dir.path());
        let uri = ann_uri("cam/b.png");
        let a = SCENE.replace("\"occupied\": null", "\"occupied\": true");
        let b = SCENE.replace("\"occupied\": null", "\"occupied\": false");
        let (ra, rb) = tokio::join!(
            tokio::spawn({
                let app = app.clone();
                let uri = uri.clone();
                async move { send(&app, put(&uri, Some("\"0\""), a)).await.0 }
            }),
            tokio::spawn({
                let app = app.clone();
                let uri = uri.clone();
                async move { send(&app, put(&uri, Some("\"0\""), b)).await.0 }
            })
        );
        let mut statuses = [ra.unwrap(), rb.unwrap()];
        statuses.sort();
        assert_eq!(statuses, [StatusCode::OK, StatusCode::CONFLICT], "round {round}");
        let (_, headers, body) = send(&app, get(&uri)).await;
        assert_eq!(headers["x-revision"], "1");
        let on_disk = std::fs::read(dir.path().join("ann/b.json")).unwrap();
        assert_eq!(on_disk, body);
    }
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    assert_eq!(
        send(&app, get("/api/images/0000000000000000/annotations")).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        send(&app, put("/api/images/nope/annotations", Some("0"), SCENE))
            .await
            .0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(send(&app, get("/api/images/nope/file")).await.0, StatusCode::NOT_FOUND);
    let req = post_json("/api/decide-preview", &json!({"image": "nope", "detections": []}));
    assert_eq!(send(&app, req).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn serves_image_bytes_with_content_type() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (status, headers, body) = send(&app, get(&format!("/api/images/{}/file", image_id("cam/b.png")))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers[header::CONTENT_TYPE], "image/png");
    assert_eq!(body, b"\x89PNG fake");
    // Annotated but missing on disk.
    let (status, _, _) = send(&app, get(&format!("/api/images/{}/file", image_id("cam/a.png")))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn preview_decides_like_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = image_id("cam/b.png");
    let req = json!({
        "image": id,
        "detections": [{"bbox": [0, 0, 10, 6], "score": 0.9, "label": "car"}],
        "heuristic": "h1",
        "tau": 0.5
    });
    let (status, _, body) = send(&app, post_json("/api/decide-preview", &req)).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let r: PreviewResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(r.results.len(), 2);
    assert_eq!((r.results[0].lot_id.as_str(), r.results[0].ratio), ("1", 0.6));
    assert_eq!(r.results[0].decided, spotcheck_core::Decision::Occupied);
    assert_eq!(r.results[1].decided, spotcheck_core::Decision::Free);
    assert_eq!(
        r.predictions,
        "{\"image\":\"cam/b.png\",\"lot_id\":\"1\",\"decided\":\"occupied\",\"ratio\":0.6}\n\
         {\"image\":\"cam/b.png\",\"lot_id\":\"2\",\"decided\":\"free\",\"ratio\":0.0}\n"
    );

    let (_, _, body) = send(
        &app,
        post_json("/api/decide-preview", &json!({"image": id, "detections": []})),
    )
    .await;
    let r: PreviewResponse = serde_json::from_slice(&body).unwrap();
    assert!(r.results.iter().all(|x| x.decided == spotcheck_core::Decision::Free));

    let h2 =
        json!({"image": id, "detections": [{"bbox": [0, 0, 50, 6], "score": 0.9, "label": "car"}], "heuristic": "h2"});
    let (_, _, body) = send(&app, post_json("/api/decide-preview", &h2)).await;
    let r: PreviewResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(r.results[0].decided, spotcheck_core::Decision::Free);
}

#[tokio::test]
async fn preview_rejects_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let rect = json!({"image": image_id("cam/a.png"), "detections": []});
    assert_eq!(
        send(&app, post_json("/api/decide-preview", &rect)).await.0,
        StatusCode::BAD_REQUEST
    );
    let id = image_id("cam/b.png");
    for bad in [
        json!({"image": id, "tau": 0.0}),
        json!({"image": id, "heuristic": "h3"}),
        json!({"image": id, "detections": [{"bbox": [5, 5, 1, 1], "score": 0.9, "label": "car"}]}),
        json!({"image": id, "detections": [{"bbox": [0, 0, 1, 1], "score": 1.5, "label": "car"}]}),
        json!({"image": id, "extra": 1}),
    ] {
        assert_eq!(
            send(&app, post_json("/api/decide-preview", &bad)).await.0,
            StatusCode::BAD_REQUEST,
            "{bad}"
        );
    }
}

#[tokio::test]
async fn cors_headers_for_the_ui() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let req = Request::get("/api/images")
        .header(header::ORIGIN, "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let (_, headers, _) = send(&app, req).await;
    assert_eq!(headers[header::ACCESS_CONTROL_ALLOW_ORIGIN], "*");
}

#[tokio::test]
async fn serves_ui_directory() {
    let dir = tempfile::tempdir().unwrap();
    let ui = tempfile::tempdir().unwrap();
    std::fs::write(ui.path().join("index.html"), "<html>ui</html>").unwrap();
    let app = router(
        Arc::new(ServiceState::load(fixture(dir.path())).unwrap()),
        Some(ui.path()),
    );
    let (status, _, body) = send(&app, get("/ui/index.html")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"<html>ui</html>");
}

mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::StatusCode;
use common::*;
use dermtriage_core::llmclient::StubTransport;
use serde_json::json;

#[tokio::test]
async fn cases_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let backends = mock_roster(dir.path(), &[Ok([0.2, 0.8]), Ok([0.3, 0.7]), Ok([0.6, 0.4])]);

    let stub = Arc::new(StubTransport::fixed(
        "1. Overview: raised papule\n2. Symptoms: bleeding",
    ));
    let first = app(config(&data, backends.clone()), Some(stub_client(stub.clone())));
    let (status, case) = upload(&first, png_bytes(dir.path(), 1)).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = case["case_id"].as_str().unwrap().to_string();
    let (status, report) = send(&first, post(&format!("/v1/cases/{id}/report"), Body::empty())).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = send(
        &first,
        post_json(
            &format!("/v1/cases/{id}/chat"),
            &json!({"query": "What does a rolled border on a lesion mean?"}),
        ),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let (_, before) = send(&first, get(&format!("/v1/cases/{id}"))).await;
    drop(first);

    let second = app(config(&data, backends.clone()), None);
    let (status, after) = send(&second, get(&format!("/v1/cases/{id}"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(after, before);
    assert_eq!(after["report"], report);
    assert_eq!(after["status"], "flagged_for_review");
    assert_eq!(after["chat_history"].as_array().unwrap().len(), 2);

    // Losing the index only costs a rebuild.
    drop(second);
    std::fs::remove_file(data.join("index.jsonl")).unwrap();
    let third = app(config(&data, backends), None);
    let (_, list) = send(&third, get("/v1/cases")).await;
    assert_eq!(list, json!([before]));
    assert!(data.join("index.jsonl").is_file());
}

#[tokio::test]
async fn no_temp_files_left_behind() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let backends = mock_roster(dir.path(), &[Ok([0.2, 0.8]), Ok([0.2, 0.8]), Ok([0.2, 0.8])]);
    let app = app(config(&data, backends), None);
    for seed in 0..3 {
        upload(&app, png_bytes(dir.path(), seed)).await;
    }
    let mut stack = vec![data.clone()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            assert!(!p.to_string_lossy().ends_with(".tmp"), "{}", p.display());
            if p.is_dir() {
                stack.push(p);
            }
        }
    }
}

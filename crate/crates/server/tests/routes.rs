use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::Serialize;
use tower::ServiceExt;

use cbr_ikb_api::*;
use cbr_ikb_server::{router, AppState};

async fn call<T: DeserializeOwned>(app: &Router, method: &str, path: &str, body: Option<String>) -> (StatusCode, T) {
    let req = Request::builder()
        .method(method)
        .uri(path)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let parsed = serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("{path}: {e}: {}", String::from_utf8_lossy(&bytes)));
    (status, parsed)
}

async fn post<B: Serialize, T: DeserializeOwned>(app: &Router, path: &str, body: &B) -> (StatusCode, T) {
    call(app, "POST", path, Some(serde_json::to_string(body).unwrap())).await
}

async fn synth_dir(app: &Router, dir: &Path) {
    let (st, resp): (_, SynthResponse) = post(app, "/synth", &SynthRequest { out: dir.to_path_buf(), seed: 7 }).await;
    assert_eq!(st, StatusCode::OK);
    assert!(resp.files.iter().any(|f| f.ends_with("kb.txt")));
}

#[tokio::test]
async fn health_reports_ok() {
    let app = router(AppState::default());
    let (st, h): (_, Health) = call(&app, "GET", "/health", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(h.status, "ok");
}

#[tokio::test]
async fn ingest_build_answer_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::default());
    synth_dir(&app, dir.path()).await;

    let (st, ing): (_, IngestResponse) = post(
        &app,
        "/ingest",
        &IngestRequest {
            kb: dir.path().join("kb.txt"),
            delimiter: '\t',
            documents: None,
            mentions: None,
            proxies: Some(dir.path().join("proxies.txt")),
        },
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(ing.report.relations, 8);
    assert_eq!(ing.proxies, 8);

    let cb_path = dir.path().join("cases.cbrb");
    let (st, report): (_, BuildReport) = post(
        &app,
        "/casebase/build",
        &serde_json::json!({ "train": dir.path().join("train_1hop.txt"), "out": cb_path }),
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(report.cases, 200);
    assert!(cb_path.exists());

    let (st, status): (_, Status) = call(&app, "GET", "/status", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!((status.cases, status.embedding_dim, status.kbc_dim), (200, Some(256), None));

    let test = std::fs::read_to_string(dir.path().join("test_1hop.txt")).unwrap();
    let first = test.lines().next().unwrap();
    let mut fields = first.split('\t');
    let question = fields.next().unwrap().to_string();
    let gold: Vec<&str> = fields.next().unwrap().split('|').collect();
    let (st, ans): (_, AnswerResponse) =
        post(&app, "/answer", &AnswerRequest { question: question.clone(), options: ReasonOptions::default() }).await;
    assert_eq!(st, StatusCode::OK);
    assert!(gold.contains(&ans.answers[0].entity.as_str()), "{question}: {:?}", ans.answers.first());
    assert!(!ans.explanation.neighbors.is_empty());

    let (st, nb): (_, NeighborReport) =
        post(&app, "/neighbors", &NeighborsRequest { question, k: 3, masked: true }).await;
    assert_eq!(st, StatusCode::OK);
    assert!(nb.neighbors.len() >= 3);

    let (st, eval): (_, EvalReport) = post(
        &app,
        "/evaluate",
        &EvaluateRequest { test: dir.path().join("test_1hop.txt"), options: ReasonOptions::default() },
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(eval.per_question.len(), 100);
    assert_eq!(eval.hits_at_1, 1.0);

    let (st, rev): (_, ReviseReport) = post(
        &app,
        "/revise",
        &ReviseRequest { dev: dir.path().join("dev_1hop.txt"), config: ReviseConfig::default(), out: None },
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(rev.cases_in, 200);
}

#[tokio::test]
async fn kbc_training_and_drop() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::default());
    synth_dir(&app, dir.path()).await;
    let (st, _): (_, IngestResponse) =
        post(&app, "/ingest", &serde_json::json!({ "kb": dir.path().join("kb.txt") })).await;
    assert_eq!(st, StatusCode::OK);

    let model = dir.path().join("model.cbrk");
    let req = serde_json::json!({
        "config": { "dim": 8, "epochs": 2, "learning_rate": 0.1, "negatives_per_positive": 2,
                    "l2_weight": 0.0, "seed": 1, "calibration_fraction": 0.1 },
        "held_out_fraction": 0.05,
        "out": model,
    });
    let (st, resp): (_, TrainKbcResponse) = post(&app, "/kbc/train", &req).await;
    assert_eq!(st, StatusCode::OK);
    assert!(resp.held_out > 0 && resp.metrics.is_some());
    let (st, status): (_, Status) = post(&app, "/kbc/load", &LoadKbcRequest { path: model }).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(status.kbc_dim, Some(8));

    let plan = dir.path().join("out/plan.txt");
    let (st, d): (_, DropResponse) = post(
        &app,
        "/drop",
        &DropRequest {
            scheme: DropSchemeRequest::Global { fraction: 0.5 },
            seed: 3,
            examples: None,
            out_kb: Some(dir.path().join("out/half.txt")),
            out_plan: Some(plan.clone()),
        },
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(d.dropped + d.remaining, status.triples);
    assert!(plan.exists());

    let (st, err): (_, ApiError) = post(
        &app,
        "/drop",
        &serde_json::json!({ "scheme": { "kind": "per_question", "p": 0.5 } }),
    )
    .await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err.kind, ErrorKind::Config);
}

#[tokio::test]
async fn errors_carry_kind_and_status() {
    let app = router(AppState::default());
    let (st, err): (_, ApiError) =
        post(&app, "/answer", &AnswerRequest { question: "who [x]".into(), options: ReasonOptions::default() }).await;
    assert_eq!((st, err.kind), (StatusCode::UNPROCESSABLE_ENTITY, ErrorKind::Config));

    let (st, err): (_, ApiError) =
        post(&app, "/ingest", &serde_json::json!({ "kb": "/definitely/not/here.txt" })).await;
    assert_eq!((st, err.kind), (StatusCode::BAD_REQUEST, ErrorKind::Input));

    let (st, err): (_, ApiError) = call(&app, "POST", "/ingest", Some("{not json".into())).await;
    assert_eq!((st, err.kind), (StatusCode::BAD_REQUEST, ErrorKind::Input));
}

//! HTTP/JSON service over the cbr-ikb engine. One session per process: the
//! graph, case base and models loaded by earlier calls serve later ones.

pub mod engine;

use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::net::TcpListener;

use cbr_ikb::ErrorKind;
use cbr_ikb_api::*;
use engine::Session;

#[derive(Clone, Default)]
pub struct AppState {
    session: Arc<RwLock<Session>>,
}

impl AppState {
    fn snapshot(&self) -> Session {
        self.session.read().map(|s| s.clone()).unwrap_or_default()
    }

    fn update(&self, f: impl FnOnce(&mut Session)) {
        if let Ok(mut s) = self.session.write() {
            f(&mut s);
        }
    }
}

pub struct ApiFailure(ApiError);

impl From<cbr_ikb::Error> for ApiFailure {
    fn from(e: cbr_ikb::Error) -> Self {
        ApiFailure(ApiError {
            kind: e.kind(),
            message: e.to_string(),
        })
    }
}

pub fn status_for(kind: ErrorKind) -> StatusCode {
    match kind {
        ErrorKind::Input => StatusCode::BAD_REQUEST,
        ErrorKind::Config => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiFailure {
    fn into_response(self) -> Response {
        (status_for(self.0.kind), Json(self.0)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiFailure>;

/// Runs `f` on the blocking pool; engine work is CPU-bound.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> cbr_ikb::Result<T> + Send + 'static,
) -> Result<T, ApiFailure> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiFailure::from),
        Err(e) => Err(ApiFailure(ApiError {
            kind: ErrorKind::Internal,
            message: format!("worker failed: {e}"),
        })),
    }
}

/// JSON body extractor whose rejections use the service's error shape.
pub struct Body<T>(pub T);

impl<S, T> axum::extract::FromRequest<S> for Body<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiFailure;

    async fn from_request(req: axum::extract::Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(ApiFailure(ApiError {
                kind: ErrorKind::Input,
                message: e.body_text(),
            })),
        }
    }
}

fn ok<T: Serialize>(v: T) -> ApiResult<T> {
    Ok(Json(v))
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn status(State(st): State<AppState>) -> Json<Status> {
    Json(st.snapshot().status())
}

async fn ingest(State(st): State<AppState>, Body(req): Body<IngestRequest>) -> ApiResult<IngestResponse> {
    let (session, resp) = blocking(move || engine::ingest(&req)).await?;
    st.update(|s| *s = session);
    ok(resp)
}

async fn build(State(st): State<AppState>, Body(req): Body<BuildRequest>) -> ApiResult<BuildReport> {
    let snap = st.snapshot();
    let (cb, emb, report) = blocking(move || engine::build(&snap, &req)).await?;
    st.update(|s| {
        s.casebase = Some(cb);
        s.embedder = Some(emb);
    });
    ok(report)
}

async fn load_casebase(
    State(st): State<AppState>,
    Body(req): Body<LoadCaseBaseRequest>,
) -> ApiResult<CaseBaseSummary> {
    let (cb, emb, summary) = blocking(move || engine::load_casebase(&req)).await?;
    st.update(|s| {
        s.casebase = Some(cb);
        s.embedder = Some(emb);
    });
    ok(summary)
}

async fn train_kbc(State(st): State<AppState>, Body(req): Body<TrainKbcRequest>) -> ApiResult<TrainKbcResponse> {
    let snap = st.snapshot();
    let (model, resp) = blocking(move || engine::train_kbc(&snap, &req)).await?;
    st.update(|s| s.kbc = Some(model));
    ok(resp)
}

async fn load_kbc(State(st): State<AppState>, Body(req): Body<LoadKbcRequest>) -> ApiResult<Status> {
    let snap = st.snapshot();
    let model = blocking(move || engine::load_kbc(&snap, &req)).await?;
    st.update(|s| s.kbc = Some(model));
    ok(st.snapshot().status())
}

async fn neighbors(State(st): State<AppState>, Body(req): Body<NeighborsRequest>) -> ApiResult<NeighborReport> {
    let snap = st.snapshot();
    ok(blocking(move || engine::neighbors(&snap, &req)).await?)
}

async fn answer(State(st): State<AppState>, Body(req): Body<AnswerRequest>) -> ApiResult<AnswerResponse> {
    let snap = st.snapshot();
    ok(blocking(move || engine::answer_question(&snap, &req)).await?)
}

async fn evaluate(State(st): State<AppState>, Body(req): Body<EvaluateRequest>) -> ApiResult<EvalReport> {
    let snap = st.snapshot();
    ok(blocking(move || engine::evaluate_file(&snap, &req)).await?)
}

async fn revise(State(st): State<AppState>, Body(req): Body<ReviseRequest>) -> ApiResult<ReviseReport> {
    let snap = st.snapshot();
    let (cb, report) = blocking(move || engine::revise(&snap, &req)).await?;
    st.update(|s| s.casebase = Some(cb));
    ok(report)
}

async fn drop_triples(State(st): State<AppState>, Body(req): Body<DropRequest>) -> ApiResult<DropResponse> {
    let snap = st.snapshot();
    ok(blocking(move || engine::drop_triples(&snap, &req)).await?)
}

async fn experiment(Body(req): Body<ExperimentRequest>) -> ApiResult<ExperimentResponse> {
    ok(blocking(move || engine::experiment(&req)).await?)
}

async fn synth(Body(req): Body<SynthRequest>) -> ApiResult<SynthResponse> {
    ok(blocking(move || engine::synth(&req)).await?)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/status", get(status))
        .route("/ingest", post(ingest))
        .route("/casebase/build", post(build))
        .route("/casebase/load", post(load_casebase))
        .route("/kbc/train", post(train_kbc))
        .route("/kbc/load", post(load_kbc))
        .route("/neighbors", post(neighbors))
        .route("/answer", post(answer))
        .route("/evaluate", post(evaluate))
        .route("/revise", post(revise))
        .route("/drop", post(drop_triples))
        .route("/experiment", post(experiment))
        .route("/synth", post(synth))
        .with_state(state)
}

/// Serves on an already bound listener until the future is dropped or the
/// process gets ctrl-c.
pub async fn serve_on(listener: TcpListener) -> std::io::Result<()> {
    let app = router(AppState::default());
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    serve_on(listener).await
}

/// Log filter from `RUST_LOG`, `info` by default.
pub fn init_tracing() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

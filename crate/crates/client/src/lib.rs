//! Thin async client for the cbr-ikb service: one method per endpoint.

use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use cbr_ikb_api::*;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("{message}")]
    Api {
        status: u16,
        kind: ErrorKind,
        message: String,
    },

    #[error("cannot reach {url}: {source}")]
    Transport {
        url: String,
        #[source]
        source: reqwest::Error,
    },

    #[error("unexpected response from {url} ({status}): {body}")]
    Protocol { url: String, status: u16, body: String },
}

impl ClientError {
    /// Error class for exit codes. An unreachable or misbehaving server is a
    /// configuration problem on the caller's side.
    pub fn kind(&self) -> ErrorKind {
        match self {
            ClientError::Api { kind, .. } => *kind,
            ClientError::Transport { .. } | ClientError::Protocol { .. } => ErrorKind::Config,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base: base_url.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn decode<T: DeserializeOwned>(url: &str, resp: reqwest::Response) -> Result<T> {
        let status = resp.status();
        let bytes = resp.bytes().await.map_err(|source| ClientError::Transport {
            url: url.to_string(),
            source,
        })?;
        let protocol = |bytes: &[u8]| ClientError::Protocol {
            url: url.to_string(),
            status: status.as_u16(),
            body: String::from_utf8_lossy(bytes).chars().take(200).collect(),
        };
        if status == StatusCode::OK {
            return serde_json::from_slice(&bytes).map_err(|_| protocol(&bytes));
        }
        match serde_json::from_slice::<ApiError>(&bytes) {
            Ok(e) => Err(ClientError::Api {
                status: status.as_u16(),
                kind: e.kind,
                message: e.message,
            }),
            Err(_) => Err(protocol(&bytes)),
        }
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        let url = format!("{}{path}", self.base);
        let resp = self.http.get(&url).send().await.map_err(|source| ClientError::Transport {
            url: url.clone(),
            source,
        })?;
        Self::decode(&url, resp).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        let url = format!("{}{path}", self.base);
        let resp = self
            .http
            .post(&url)
            .json(body)
            .send()
            .await
            .map_err(|source| ClientError::Transport {
                url: url.clone(),
                source,
            })?;
        Self::decode(&url, resp).await
    }

    pub async fn health(&self) -> Result<Health> {
        self.get("/health").await
    }

    pub async fn status(&self) -> Result<Status> {
        self.get("/status").await
    }

    pub async fn ingest(&self, req: &IngestRequest) -> Result<IngestResponse> {
        self.post("/ingest", req).await
    }

    pub async fn build(&self, req: &BuildRequest) -> Result<BuildReport> {
        self.post("/casebase/build", req).await
    }

    pub async fn load_casebase(&self, req: &LoadCaseBaseRequest) -> Result<CaseBaseSummary> {
        self.post("/casebase/load", req).await
    }

    pub async fn train_kbc(&self, req: &TrainKbcRequest) -> Result<TrainKbcResponse> {
        self.post("/kbc/train", req).await
    }

    pub async fn load_kbc(&self, req: &LoadKbcRequest) -> Result<Status> {
        self.post("/kbc/load", req).await
    }

    pub async fn neighbors(&self, req: &NeighborsRequest) -> Result<NeighborReport> {
        self.post("/neighbors", req).await
    }

    pub async fn answer(&self, req: &AnswerRequest) -> Result<AnswerResponse> {
        self.post("/answer", req).await
    }

    pub async fn evaluate(&self, req: &EvaluateRequest) -> Result<EvalReport> {
        self.post("/evaluate", req).await
    }

    pub async fn revise(&self, req: &ReviseRequest) -> Result<ReviseReport> {
        self.post("/revise", req).await
    }

    pub async fn drop_triples(&self, req: &DropRequest) -> Result<DropResponse> {
        self.post("/drop", req).await
    }

    pub async fn experiment(&self, req: &ExperimentRequest) -> Result<ExperimentResponse> {
        self.post("/experiment", req).await
    }

    pub async fn synth(&self, req: &SynthRequest) -> Result<SynthResponse> {
        self.post("/synth", req).await
    }
}

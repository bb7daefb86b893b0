//! Request and response bodies of the cbr-ikb HTTP service. Paths are read
//! and written by the server process, so clients should send absolute paths.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use cbr_ikb::bench::{EvalReport, ExperimentOutcome};
pub use cbr_ikb::casebase::BuildReport;
pub use cbr_ikb::embed::MaskMode;
pub use cbr_ikb::kbc::{KbcMetrics, KbcTrainConfig};
pub use cbr_ikb::kg::IngestReport;
pub use cbr_ikb::reason::{BeamConfig, Explanation, Provenance};
pub use cbr_ikb::retrieve::NeighborReport;
pub use cbr_ikb::revise::{ReviseConfig, ReviseReport};
pub use cbr_ikb::ErrorKind;

/// Error body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub kind: ErrorKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderChoice {
    Hash { dim: usize, seed: u64 },
    Table { path: PathBuf },
}

impl Default for EmbedderChoice {
    fn default() -> Self {
        EmbedderChoice::Hash { dim: 256, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

/// What the server currently holds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Status {
    pub entities: usize,
    pub relations: usize,
    pub triples: usize,
    pub documents: usize,
    pub proxies: usize,
    pub cases: usize,
    pub embedding_dim: Option<usize>,
    pub kbc_dim: Option<usize>,
}

/// Replaces the graph. Dependent state (case base, KBC model) is cleared.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestRequest {
    pub kb: PathBuf,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub documents: Option<PathBuf>,
    #[serde(default)]
    pub mentions: Option<PathBuf>,
    #[serde(default)]
    pub proxies: Option<PathBuf>,
}

fn default_delimiter() -> char {
    '\t'
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestResponse {
    pub report: IngestReport,
    pub documents: usize,
    pub text_triples: usize,
    pub proxies: usize,
    /// Relations of the graph with no proxy text, and proxy lines naming
    /// unknown relations.
    pub proxy_warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildRequest {
    pub train: PathBuf,
    #[serde(default)]
    pub embedder: EmbedderChoice,
    #[serde(default)]
    pub mask_mode: MaskMode,
    #[serde(default = "default_max_len")]
    pub max_chain_len: usize,
    #[serde(default = "yes")]
    pub mine_with_text: bool,
    /// Where to store the case base.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_max_len() -> usize {
    4
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadCaseBaseRequest {
    pub path: PathBuf,
    #[serde(default)]
    pub embedder: EmbedderChoice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseBaseSummary {
    pub cases: usize,
    pub chains: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainKbcRequest {
    #[serde(default)]
    pub config: KbcTrainConfig,
    /// Share of symbolic triples held out for filtered ranking metrics.
    #[serde(default)]
    pub held_out_fraction: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainKbcResponse {
    pub triples: usize,
    pub held_out: usize,
    pub metrics: Option<KbcMetrics>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadKbcRequest {
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborsRequest {
    pub question: String,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "yes")]
    pub masked: bool,
}

fn default_k() -> usize {
    5
}

/// Reasoning options shared by `answer` and `evaluate`. The beam defaults
/// turn off the KBC and text branches whose models are not loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasonOptions {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub beam: Option<BeamConfig>,
}

impl Default for ReasonOptions {
    fn default() -> Self {
        Self { k: default_k(), beam: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRequest {
    pub question: String,
    #[serde(default)]
    pub options: ReasonOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAnswer {
    pub entity: String,
    pub score: f64,
    pub provenance: Vec<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerResponse {
    /// Best first; empty for an abstention.
    pub answers: Vec<RankedAnswer>,
    pub explanation: Explanation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateRequest {
    pub test: PathBuf,
    #[serde(default)]
    pub options: ReasonOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviseRequest {
    pub dev: PathBuf,
    #[serde(default)]
    pub config: ReviseConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DropSchemeRequest {
    Global { fraction: f64 },
    PerQuestion { p: f64 },
}

/// Applies an incomplete-KB scheme to the loaded graph. The server keeps the
/// full graph; the reduced one is written to `out_kb`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRequest {
    pub scheme: DropSchemeRequest,
    #[serde(default)]
    pub seed: u64,
    /// Questions with gold chains; required for the per-question scheme.
    #[serde(default)]
    pub examples: Option<PathBuf>,
    #[serde(default)]
    pub out_kb: Option<PathBuf>,
    #[serde(default)]
    pub out_plan: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropResponse {
    pub dropped: usize,
    pub remaining: usize,
    pub affected_questions: usize,
    pub affected_fraction: f64,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentRequest {
    pub config: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResponse {
    pub fingerprint: String,
    pub outcomes: Vec<ExperimentOutcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthRequest {
    pub out: PathBuf,
    #[serde(default = "default_synth_seed")]
    pub seed: u64,
}

fn default_synth_seed() -> u64 {
    7
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthResponse {
    pub files: Vec<PathBuf>,
    pub entities: usize,
    pub triples: usize,
}

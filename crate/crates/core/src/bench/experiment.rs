use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::synth::fact_documents;
use super::{drop_global, drop_per_question, evaluate, load_documents, load_qa, DropPlan, EvalReport, QaExample};
use crate::casebase::{build_casebase, BuildReport, CaseConfig};
use crate::embed::{Embedder, EmbeddingTable, HashEmbedder, MaskMode, TableEmbedder};
use crate::error::{Error, Result};
use crate::kbc::{train, ComplExModel, KbcTrainConfig};
use crate::kg::KnowledgeGraph;
use crate::realign::{load_proxy_texts, ProxyTextTable, ReAligner};
use crate::reason::{self, BeamConfig};
use crate::retrieve::RetrievalConfig;
use crate::revise::{revise_and_retain, DevSet, ReviseConfig, ReviseReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    Full,
    NoText,
    NoKbc,
    NoRevise,
    TextOnly,
    KbOnly,
}

impl Ablation {
    pub const ALL: [Ablation; 6] = [
        Ablation::Full,
        Ablation::NoText,
        Ablation::NoKbc,
        Ablation::NoRevise,
        Ablation::TextOnly,
        Ablation::KbOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoText => "no-text",
            Ablation::NoKbc => "no-kbc",
            Ablation::NoRevise => "no-revise",
            Ablation::TextOnly => "text-only",
            Ablation::KbOnly => "kb-only",
        }
    }

    fn uses_text(self) -> bool {
        !matches!(self, Ablation::NoText | Ablation::KbOnly)
    }

    fn uses_kbc(self) -> bool {
        !matches!(self, Ablation::NoKbc | Ablation::TextOnly | Ablation::KbOnly)
    }
}

impl std::str::FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation {s}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EmbedderSpec {
    Hash { dim: usize, seed: u64 },
    Table(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropSettings {
    pub per_question: Option<f64>,
    pub global: Option<f64>,
    pub seed: u64,
    /// Turn every dropped fact into a supporting sentence added as text.
    pub restore_as_text: bool,
}

/// `key = value` experiment description. Paths are relative to the config
/// file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kg: PathBuf,
    pub train: PathBuf,
    pub dev: Option<PathBuf>,
    pub test: PathBuf,
    pub documents: Option<PathBuf>,
    pub mentions: Option<PathBuf>,
    pub proxies: Option<PathBuf>,
    pub delimiter: char,
    pub embedder: EmbedderSpec,
    pub case: CaseConfig,
    pub retrieval: RetrievalConfig,
    pub beam: BeamConfig,
    pub revise: bool,
    pub revise_cfg: ReviseConfig,
    pub kbc: KbcTrainConfig,
    pub drop: DropSettings,
    pub ablations: Vec<Ablation>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    /// Exact config text, part of the fingerprint.
    pub source: String,
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, found {v}"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v}")))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse("experiment config", i + 1, "expected key = value"))?;
            if kv.insert(k.trim().to_string(), (i + 1, v.trim().to_string())).is_some() {
                return Err(Error::parse("experiment config", i + 1, format!("duplicate key {}", k.trim())));
            }
        }
        let mut take = |k: &str| kv.remove(k).map(|(_, v)| v);
        let path = |v: String| base_dir.join(v);
        let required = |k: &str, v: Option<String>| v.ok_or_else(|| Error::Config(format!("missing key {k}")));

        let kg = path(required("kg", take("kg"))?);
        let train = path(required("train", take("train"))?);
        let test = path(required("test", take("test"))?);
        let dev = take("dev").map(path);
        let documents = take("documents").map(path);
        let mentions = take("mentions").map(path);
        let proxies = take("proxies").map(path);
        if documents.is_some() != mentions.is_some() {
            return Err(Error::Config("documents and mentions must be given together".into()));
        }
        let delimiter = match take("delimiter").as_deref() {
            None | Some("tab") | Some("\\t") => '\t',
            Some("|") | Some("pipe") => '|',
            Some(o) => return Err(Error::Config(format!("unsupported delimiter {o}"))),
        };
        let embedder = match take("embedder").as_deref() {
            None => EmbedderSpec::Hash { dim: 256, seed: 0 },
            Some(s) if s.starts_with("hash") => {
                let dim = match s.strip_prefix("hash:") {
                    Some(d) => parse_num("embedder", d)?,
                    None if s == "hash" => 256,
                    None => return Err(Error::Config(format!("bad embedder {s}"))),
                };
                EmbedderSpec::Hash { dim, seed: 0 }
            }
            Some(s) => match s.strip_prefix("cbre:") {
                Some(p) => EmbedderSpec::Table(path(p.to_string())),
                None => return Err(Error::Config(format!("bad embedder {s}"))),
            },
        };
        let mut case = CaseConfig::default();
        if let Some(m) = take("mask_mode") {
            case.mask_mode = m.parse::<MaskMode>()?;
        }
        if let Some(v) = take("max_chain_len") {
            case.max_len = parse_num("max_chain_len", &v)?;
        }
        let mut retrieval = RetrievalConfig::default();
        if let Some(v) = take("k") {
            retrieval.k = parse_num("k", &v)?;
        }
        let mut beam = BeamConfig::default();
        if let Some(v) = take("beam") {
            beam.beam_width = parse_num("beam", &v)?;
        }
        if let Some(v) = take("kbc_threshold") {
            beam.kbc_threshold = parse_num("kbc_threshold", &v)?;
        }
        if let Some(v) = take("kbc_topm") {
            beam.kbc_topm = parse_num("kbc_topm", &v)?;
        }
        if let Some(v) = take("max_results") {
            beam.max_results = parse_num("max_results", &v)?;
        }
        beam.use_text = take("use_text").map_or(Ok(proxies.is_some()), |v| parse_bool("use_text", &v))?;
        beam.use_kbc = take("use_kbc").map_or(Ok(true), |v| parse_bool("use_kbc", &v))?;
        beam.use_kb = take("use_kb").map_or(Ok(true), |v| parse_bool("use_kb", &v))?;
        if beam.use_text && proxies.is_none() {
            return Err(Error::Config("use_text needs a proxies file".into()));
        }
        let revise = take("revise").map_or(Ok(true), |v| parse_bool("revise", &v))?;
        let mut revise_cfg = ReviseConfig::default();
        if let Some(v) = take("revise_threshold") {
            revise_cfg.discard_threshold = parse_num("revise_threshold", &v)?;
        }
        if let Some(v) = take("revise_cap") {
            revise_cfg.max_chains_per_case = parse_num("revise_cap", &v)?;
        }
        let mut kbc = KbcTrainConfig::default();
        if let Some(v) = take("kbc_dim") {
            kbc.dim = parse_num("kbc_dim", &v)?;
        }
        if let Some(v) = take("kbc_epochs") {
            kbc.epochs = parse_num("kbc_epochs", &v)?;
        }
        if let Some(v) = take("kbc_seed") {
            kbc.seed = parse_num("kbc_seed", &v)?;
        }
        let mut drop = DropSettings {
            per_question: None,
            global: None,
            seed: 0,
            restore_as_text: false,
        };
        let p = take("drop_p").map(|v| parse_num::<f64>("drop_p", &v)).transpose()?;
        let fraction = take("drop_fraction")
            .map(|v| parse_num::<f64>("drop_fraction", &v))
            .transpose()?;
        match take("drop").as_deref().unwrap_or("none") {
            "none" => {}
            "per_question" => drop.per_question = Some(p.unwrap_or(0.5)),
            "global" => drop.global = Some(fraction.unwrap_or(0.5)),
            "both" => {
                drop.per_question = Some(p.unwrap_or(0.5));
                drop.global = Some(fraction.unwrap_or(0.5));
            }
            o => return Err(Error::Config(format!("unknown drop scheme {o}"))),
        }
        if let Some(v) = take("drop_seed") {
            drop.seed = parse_num("drop_seed", &v)?;
        }
        if let Some(v) = take("restore_dropped_as_text") {
            drop.restore_as_text = parse_bool("restore_dropped_as_text", &v)?;
        }
        let ablations = match take("ablations") {
            None => vec![Ablation::Full],
            Some(v) if v == "all" => Ablation::ALL.to_vec(),
            Some(v) => v
                .split(',')
                .map(|a| a.trim().parse())
                .collect::<Result<Vec<_>>>()?,
        };
        let out = take("out").map(path);
        let workers = take("workers").map(|v| parse_num("workers", &v)).transpose()?;
        drop_unknown(kv)?;
        let cfg = Self {
            kg,
            train,
            dev,
            test,
            documents,
            mentions,
            proxies,
            delimiter,
            embedder,
            case,
            retrieval,
            beam,
            revise,
            revise_cfg,
            kbc,
            drop,
            ablations,
            out,
            workers,
            source: text.to_string(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.retrieval.validate()?;
        self.revise_cfg.validate()?;
        self.kbc.validate()?;
        if self.beam.beam_width == 0 || self.beam.kbc_topm == 0 || self.beam.max_results == 0 {
            return Err(Error::Config("beam, kbc_topm and max_results must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.beam.kbc_threshold) {
            return Err(Error::Config("kbc_threshold outside [0, 1]".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        Ok(())
    }

    /// Input files in a fixed order, for fingerprinting.
    pub fn input_files(&self) -> Vec<PathBuf> {
        let mut files = vec![self.kg.clone(), self.train.clone(), self.test.clone()];
        files.extend(self.dev.iter().cloned());
        files.extend(self.documents.iter().cloned());
        files.extend(self.mentions.iter().cloned());
        files.extend(self.proxies.iter().cloned());
        if let EmbedderSpec::Table(p) = &self.embedder {
            files.push(p.clone());
        }
        files
    }
}

fn drop_unknown(kv: BTreeMap<String, (usize, String)>) -> Result<()> {
    match kv.into_iter().next() {
        Some((k, (line, _))) => Err(Error::parse("experiment config", line, format!("unknown key {k}"))),
        None => Ok(()),
    }
}

/// SHA-256 over the config text and the bytes of every input file.
pub fn fingerprint(cfg: &ExperimentConfig) -> Result<String> {
    let mut h = Sha256::new();
    h.update((cfg.source.len() as u64).to_le_bytes());
    h.update(cfg.source.as_bytes());
    for p in cfg.input_files() {
        let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

/// Owned models an experiment run reasons with.
#[derive(Debug, Default)]
pub struct Models {
    pub kbc: Option<ComplExModel>,
    pub aligner: Option<ReAligner>,
}

impl Models {
    pub fn borrow(&self) -> reason::Models<'_> {
        reason::Models {
            kbc: self.kbc.as_ref(),
            aligner: self.aligner.as_ref(),
        }
    }
}

/// Loaded inputs after the incomplete-KB scheme has been applied.
pub struct Prepared {
    /// Graph the pipeline sees: reduced symbolic part plus any documents.
    pub kg: KnowledgeGraph,
    pub train: Vec<QaExample>,
    pub dev: Vec<QaExample>,
    pub test: Vec<QaExample>,
    pub plans: Vec<DropPlan>,
    pub proxies: Option<ProxyTextTable>,
    pub embedder: Arc<dyn Embedder>,
    pub fingerprint: String,
}

impl Prepared {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let fingerprint = fingerprint(cfg)?;
        let (full, _) = KnowledgeGraph::load_kb(&cfg.kg, cfg.delimiter, None).map_err(|e| e.in_stage("ingest"))?;
        let train = load_qa(&cfg.train, "train-")?;
        let dev = match &cfg.dev {
            Some(p) => load_qa(p, "dev-")?,
            None => Vec::new(),
        };
        let test = load_qa(&cfg.test, "test-")?;
        let documents = match (&cfg.documents, &cfg.mentions) {
            (Some(d), Some(m)) => load_documents(d, m)?,
            _ => Vec::new(),
        };
        let relations: Vec<String> = full.relation_names().to_vec();
        let proxies = match &cfg.proxies {
            Some(p) => Some(load_proxy_texts(p, &relations)?.0),
            None => None,
        };
        let embedder: Arc<dyn Embedder> = match &cfg.embedder {
            EmbedderSpec::Hash { dim, seed } => Arc::new(HashEmbedder::new(*dim, *seed)?),
            EmbedderSpec::Table(p) => Arc::new(TableEmbedder::new(EmbeddingTable::load(p)?)),
        };
        Self::from_parts(full, train, dev, test, documents, proxies, embedder, &cfg.drop, fingerprint)
    }

    /// Applies the drop schemes to `full` (per-question on the test set
    /// first, then global) and adds `documents` plus any restored facts.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        full: KnowledgeGraph,
        train: Vec<QaExample>,
        dev: Vec<QaExample>,
        test: Vec<QaExample>,
        mut documents: Vec<Document>,
        proxies: Option<ProxyTextTable>,
        embedder: Arc<dyn Embedder>,
        drop: &DropSettings,
        fingerprint: String,
    ) -> Result<Self> {
        let mut kg = full.symbolic_only();
        let mut plans = Vec::new();
        let mut dropped: BTreeSet<(String, String, String)> = BTreeSet::new();
        if let Some(p) = drop.per_question {
            let (plan, reduced) = drop_per_question(&kg, &test, p, drop.seed).map_err(|e| e.in_stage("drop"))?;
            dropped.extend(plan.dropped.iter().cloned());
            plans.push(plan);
            kg = reduced;
        }
        if let Some(f) = drop.global {
            let (plan, reduced) = drop_global(&kg, f, drop.seed, &test).map_err(|e| e.in_stage("drop"))?;
            dropped.extend(plan.dropped.iter().cloned());
            plans.push(plan);
            kg = reduced;
        }
        if drop.restore_as_text {
            documents.extend(fact_documents(&dropped, "restored-"));
        }
        kg.add_text_edges(documents).map_err(|e| e.in_stage("ingest"))?;
        // documents of the original graph survive the drop
        for d in full.documents() {
            if kg.document_id(&d.doc_id).is_none() {
                kg.add_text_edges(vec![d.clone()])?;
            }
        }
        Ok(Self {
            kg,
            train,
            dev,
            test,
            plans,
            proxies,
            embedder,
            fingerprint,
        })
    }

    /// Share of test questions any drop scheme touched.
    pub fn affected_fraction(&self) -> f64 {
        let affected: BTreeSet<&String> = self.plans.iter().flat_map(|p| &p.affected_questions).collect();
        if self.test.is_empty() {
            0.0
        } else {
            affected.len() as f64 / self.test.len() as f64
        }
    }
}

use crate::kg::Document;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub ablation: Ablation,
    pub report: EvalReport,
    pub build: BuildReport,
    pub revise: Option<ReviseReport>,
    pub affected_fraction: f64,
    pub seconds: f64,
}

impl ExperimentOutcome {
    pub fn summary_line(&self) -> String {
        format!(
            "{}\t{:.4}\t{}/{}\t{:.1}s",
            self.ablation.as_str(),
            self.report.hits_at_1,
            self.report.correct(),
            self.report.per_question.len(),
            self.seconds
        )
    }
}

/// Shared settings of one run, split from the file layout so tests can drive
/// the pipeline on in-memory data.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub case: CaseConfig,
    pub retrieval: RetrievalConfig,
    pub beam: BeamConfig,
    pub revise: bool,
    pub revise_cfg: ReviseConfig,
    pub kbc: KbcTrainConfig,
}

impl From<&ExperimentConfig> for RunSettings {
    fn from(c: &ExperimentConfig) -> Self {
        Self {
            case: c.case,
            retrieval: c.retrieval,
            beam: c.beam,
            revise: c.revise,
            revise_cfg: c.revise_cfg,
            kbc: c.kbc.clone(),
        }
    }
}

/// Trains or builds whatever the requested ablations need.
pub fn build_models(prepared: &Prepared, settings: &RunSettings, ablations: &[Ablation]) -> Result<Models> {
    let mut models = Models::default();
    if settings.beam.use_kbc && ablations.iter().any(|a| a.uses_kbc()) {
        let sym = prepared.kg.symbolic_only();
        models.kbc = Some(train(&sym, &settings.kbc).map_err(|e| e.in_stage("train-kbc"))?);
    }
    if settings.beam.use_text && ablations.iter().any(|a| a.uses_text()) {
        let table = prepared
            .proxies
            .clone()
            .ok_or_else(|| Error::Config("use_text needs proxy texts".into()))?;
        models.aligner = Some(ReAligner::lexical(table)?);
    }
    Ok(models)
}

/// Build, revise and evaluate one ablation.
pub fn run_experiment(
    prepared: &Prepared,
    settings: &RunSettings,
    models: &Models,
    ablation: Ablation,
) -> Result<ExperimentOutcome> {
    let started = Instant::now();
    let text = settings.beam.use_text && ablation.uses_text();
    let kbc = settings.beam.use_kbc && ablation.uses_kbc();
    let no_docs;
    let kg = if text {
        &prepared.kg
    } else {
        no_docs = prepared.kg.symbolic_only();
        &no_docs
    };
    let mut case_cfg = settings.case;
    case_cfg.mine_with_text = text;
    let (mut casebase, build) =
        build_casebase(&prepared.train, kg, prepared.embedder.as_ref(), &case_cfg).map_err(|e| e.in_stage("build"))?;
    let mut revise = None;
    if settings.revise && ablation != Ablation::NoRevise {
        let dev = DevSet::build(&prepared.dev, prepared.embedder.as_ref(), case_cfg.mask_mode)?;
        let (revised, report) =
            revise_and_retain(&casebase, &dev, kg, &settings.revise_cfg).map_err(|e| e.in_stage("revise"))?;
        casebase = revised;
        revise = Some(report);
    }
    let beam = BeamConfig {
        use_text: text,
        use_kbc: kbc,
        use_kb: settings.beam.use_kb && ablation != Ablation::TextOnly,
        ..settings.beam
    };
    let run_models = reason::Models {
        kbc: if kbc { models.kbc.as_ref() } else { None },
        aligner: if text { models.aligner.as_ref() } else { None },
    };
    let (mut report, _) = evaluate(
        &prepared.test,
        &casebase,
        kg,
        prepared.embedder.as_ref(),
        &settings.retrieval,
        &beam,
        run_models,
    )
    .map_err(|e| e.in_stage("evaluate"))?;
    report.fingerprint = prepared.fingerprint.clone();
    Ok(ExperimentOutcome {
        ablation,
        report,
        build,
        revise,
        affected_fraction: prepared.affected_fraction(),
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Loads the inputs once and runs every configured ablation. With `out` set,
/// writes one report per ablation, the drop plans and a summary table.
pub fn run_ablations(cfg: &ExperimentConfig) -> Result<Vec<ExperimentOutcome>> {
    let go = || -> Result<Vec<ExperimentOutcome>> {
        let prepared = Prepared::load(cfg)?;
        let settings = RunSettings::from(cfg);
        let models = build_models(&prepared, &settings, &cfg.ablations)?;
        let outcomes = cfg
            .ablations
            .iter()
            .map(|&a| run_experiment(&prepared, &settings, &models, a))
            .collect::<Result<Vec<_>>>()?;
        if let Some(out) = &cfg.out {
            write_outputs(out, &prepared, &outcomes)?;
        }
        Ok(outcomes)
    };
    match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?
            .install(go),
        None => go(),
    }
}

fn write_outputs(out: &Path, prepared: &Prepared, outcomes: &[ExperimentOutcome]) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let p = out.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
    };
    let mut summary = String::new();
    let _ = writeln!(summary, "ablation\thits_at_1\tcorrect\tseconds");
    for o in outcomes {
        let _ = writeln!(summary, "{}", o.summary_line());
        write(&format!("{}.tsv", o.ablation.as_str()), o.report.render().as_bytes())?;
    }
    let _ = writeln!(summary, "affected_fraction\t{:.4}", prepared.affected_fraction());
    let _ = writeln!(summary, "fingerprint\t{}", prepared.fingerprint);
    write("summary.tsv", summary.as_bytes())?;
    for (i, plan) in prepared.plans.iter().enumerate() {
        write(&format!("drop_plan_{i}.txt"), &plan.to_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parses_and_rejects_unknown_keys() {
        let text = "kg = kb.txt\ntrain = train.txt\ntest = test.txt\nk = 7\ndrop = both\ndrop_p = 0.3\nuse_kbc = false\nablations = full,no-text\n";
        let cfg = ExperimentConfig::parse(text, Path::new("/d")).unwrap();
        assert_eq!(cfg.kg, PathBuf::from("/d/kb.txt"));
        assert_eq!(cfg.retrieval.k, 7);
        assert_eq!(cfg.drop.per_question, Some(0.3));
        assert_eq!(cfg.drop.global, Some(0.5));
        assert!(!cfg.beam.use_text && !cfg.beam.use_kbc);
        assert_eq!(cfg.ablations, vec![Ablation::Full, Ablation::NoText]);
        let bad = format!("{text}colour = red\n");
        assert!(ExperimentConfig::parse(&bad, Path::new("/d")).is_err());
        assert!(ExperimentConfig::parse("kg = a\n", Path::new("/d")).is_err());
        assert!(ExperimentConfig::parse(&format!("{text}use_text = true\n"), Path::new("/d")).is_err());
    }

    #[test]
    fn ablation_names_round_trip() {
        for a in Ablation::ALL {
            assert_eq!(a.as_str().parse::<Ablation>().unwrap(), a);
        }
    }
}

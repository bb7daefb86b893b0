//! Server-side state and the blocking operations behind each endpoint.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use cbr_ikb::bench::synth::{SynthBenchmark, SynthConfig};
use cbr_ikb::bench::{
    drop_global, drop_per_question, evaluate, load_documents, load_qa, run_ablations, ExperimentConfig, QaExample,
};
use cbr_ikb::casebase::{build_casebase, CaseBase, CaseConfig};
use cbr_ikb::embed::{Embedder, EmbeddingTable, HashEmbedder, TableEmbedder};
use cbr_ikb::kbc::{evaluate_kbc, train, ComplExModel};
use cbr_ikb::kg::{KnowledgeGraph, Rel, Triple};
use cbr_ikb::realign::{load_proxy_texts, ReAligner};
use cbr_ikb::reason::{answer, BeamConfig, Models};
use cbr_ikb::retrieve::{inspect_neighbors, RetrievalConfig};
use cbr_ikb::revise::{revise_and_retain, DevSet};
use cbr_ikb::rng::StableRng;
use cbr_ikb::{Error, Result};
use cbr_ikb_api::*;

/// Everything loaded into the service. Cheap to clone; the parts are shared.
#[derive(Clone, Default)]
pub struct Session {
    pub kg: Option<Arc<KnowledgeGraph>>,
    pub aligner: Option<Arc<ReAligner>>,
    pub embedder: Option<Arc<dyn Embedder>>,
    pub casebase: Option<Arc<CaseBase>>,
    pub kbc: Option<Arc<ComplExModel>>,
}

fn missing(what: &str, hint: &str) -> Error {
    Error::Contract(format!("no {what} loaded; {hint} first"))
}

impl Session {
    pub fn status(&self) -> Status {
        let mut s = Status::default();
        if let Some(kg) = &self.kg {
            s.entities = kg.entity_count();
            s.relations = kg.relation_count();
            s.triples = kg.triple_count();
            s.documents = kg.document_count();
        }
        s.proxies = self.aligner.as_ref().map_or(0, |a| a.table().len());
        s.cases = self.casebase.as_ref().map_or(0, |c| c.len());
        s.embedding_dim = self.embedder.as_ref().map(|e| e.dim());
        s.kbc_dim = self.kbc.as_ref().map(|m| m.dim());
        s
    }

    pub fn kg(&self) -> Result<&Arc<KnowledgeGraph>> {
        self.kg.as_ref().ok_or_else(|| missing("graph", "ingest"))
    }

    fn casebase(&self) -> Result<(&Arc<CaseBase>, &Arc<dyn Embedder>)> {
        match (&self.casebase, &self.embedder) {
            (Some(c), Some(e)) => Ok((c, e)),
            _ => Err(missing("case base", "build or load one")),
        }
    }

    fn models(&self) -> Models<'_> {
        Models {
            kbc: self.kbc.as_deref(),
            aligner: self.aligner.as_deref(),
        }
    }

    /// Beam settings for a request: explicit ones as given, otherwise the
    /// defaults with each branch on only when its model is loaded.
    fn beam(&self, opts: &ReasonOptions) -> BeamConfig {
        opts.beam.unwrap_or(BeamConfig {
            use_kbc: self.kbc.is_some(),
            use_text: self.aligner.is_some(),
            ..BeamConfig::default()
        })
    }
}

fn embedder(choice: &EmbedderChoice) -> Result<Arc<dyn Embedder>> {
    Ok(match choice {
        EmbedderChoice::Hash { dim, seed } => Arc::new(HashEmbedder::new(*dim, *seed)?),
        EmbedderChoice::Table { path } => Arc::new(TableEmbedder::new(EmbeddingTable::load(path)?)),
    })
}

pub fn ingest(req: &IngestRequest) -> Result<(Session, IngestResponse)> {
    let (mut kg, report) = KnowledgeGraph::load_kb(&req.kb, req.delimiter, None)?;
    let (documents, text_triples) = match (&req.documents, &req.mentions) {
        (Some(d), Some(m)) => {
            let docs = load_documents(d, m)?;
            let n = docs.len();
            (n, kg.add_text_edges(docs)?)
        }
        (None, None) => (0, 0),
        _ => return Err(Error::Config("documents and mentions must be given together".into())),
    };
    let (aligner, proxies, proxy_warnings) = match &req.proxies {
        Some(p) => {
            let (table, warnings) = load_proxy_texts(p, kg.relation_names())?;
            let n = table.len();
            (Some(Arc::new(ReAligner::lexical(table)?)), n, warnings)
        }
        None => (None, 0, Vec::new()),
    };
    let session = Session {
        kg: Some(Arc::new(kg)),
        aligner,
        ..Session::default()
    };
    let resp = IngestResponse {
        report,
        documents,
        text_triples,
        proxies,
        proxy_warnings,
    };
    Ok((session, resp))
}

pub fn build(s: &Session, req: &BuildRequest) -> Result<(Arc<CaseBase>, Arc<dyn Embedder>, BuildReport)> {
    let kg = s.kg()?;
    let train = load_qa(&req.train, "train-")?;
    let emb = embedder(&req.embedder)?;
    let cfg = CaseConfig {
        max_len: req.max_chain_len,
        mine_with_text: req.mine_with_text,
        mask_mode: req.mask_mode,
        ..CaseConfig::default()
    };
    let (cb, report) = build_casebase(&train, kg, emb.as_ref(), &cfg).map_err(|e| e.in_stage("build"))?;
    if let Some(out) = &req.out {
        cb.store(out)?;
    }
    Ok((Arc::new(cb), emb, report))
}

pub fn load_casebase(req: &LoadCaseBaseRequest) -> Result<(Arc<CaseBase>, Arc<dyn Embedder>, CaseBaseSummary)> {
    let cb = CaseBase::load(&req.path)?;
    let emb = embedder(&req.embedder)?;
    if emb.dim() != cb.dim() {
        return Err(Error::Config(format!(
            "embedder dim {} does not match case base dim {}",
            emb.dim(),
            cb.dim()
        )));
    }
    let summary = summarize(&cb);
    Ok((Arc::new(cb), emb, summary))
}

pub fn summarize(cb: &CaseBase) -> CaseBaseSummary {
    CaseBaseSummary {
        cases: cb.len(),
        chains: cb.cases().iter().map(|c| c.chains.len()).sum(),
        dim: cb.dim(),
    }
}

pub fn train_kbc(s: &Session, req: &TrainKbcRequest) -> Result<(Arc<ComplExModel>, TrainKbcResponse)> {
    let started = Instant::now();
    let sym = s.kg()?.symbolic_only();
    if !(0.0..1.0).contains(&req.held_out_fraction) {
        return Err(Error::Config(format!(
            "held_out_fraction {} outside [0, 1)",
            req.held_out_fraction
        )));
    }
    let triples: Vec<Triple> = sym.triples().to_vec();
    let count = (req.held_out_fraction * triples.len() as f64).floor() as usize;
    let held: Vec<Triple> = StableRng::new(req.config.seed ^ 0x5eed)
        .sample_indices(triples.len(), count)
        .into_iter()
        .map(|i| triples[i])
        .collect();
    let held_set: HashSet<Triple> = held.iter().copied().collect();
    let model = train(&sym.without_triples(&held_set), &req.config).map_err(|e| e.in_stage("train-kbc"))?;
    let metrics = if held.is_empty() {
        None
    } else {
        let ids: Vec<_> = held
            .iter()
            .filter_map(|t| match t.relation {
                Rel::Symbolic(r) => Some((t.subject, r, t.object)),
                Rel::FreeForm(_) => None,
            })
            .collect();
        Some(evaluate_kbc(&model, &ids, &sym)?)
    };
    if let Some(out) = &req.out {
        model.store(out)?;
    }
    let resp = TrainKbcResponse {
        triples: triples.len() - held.len(),
        held_out: held.len(),
        metrics,
        seconds: started.elapsed().as_secs_f64(),
    };
    Ok((Arc::new(model), resp))
}

pub fn load_kbc(s: &Session, req: &LoadKbcRequest) -> Result<Arc<ComplExModel>> {
    let model = ComplExModel::load(&req.path)?;
    Ok(Arc::new(model.aligned_to(s.kg()?)))
}

pub fn neighbors(s: &Session, req: &NeighborsRequest) -> Result<NeighborReport> {
    let (cb, emb) = s.casebase()?;
    inspect_neighbors(cb, &req.question, emb.as_ref(), &RetrievalConfig::with_k(req.k), req.masked)
}

pub fn answer_question(s: &Session, req: &AnswerRequest) -> Result<AnswerResponse> {
    let kg = s.kg()?;
    let (cb, emb) = s.casebase()?;
    let beam = s.beam(&req.options);
    let out = answer(
        &req.question,
        cb,
        kg,
        emb.as_ref(),
        &RetrievalConfig::with_k(req.options.k),
        &beam,
        s.models(),
    )?;
    let answers = out
        .answers
        .ranking
        .iter()
        .map(|&e| {
            let ev = &out.answers.answers[&e];
            RankedAnswer {
                entity: kg.entity_name(e).to_string(),
                score: ev.score,
                provenance: ev.provenance.clone(),
            }
        })
        .collect();
    Ok(AnswerResponse {
        answers,
        explanation: out.explanation,
    })
}

pub fn evaluate_file(s: &Session, req: &EvaluateRequest) -> Result<EvalReport> {
    let kg = s.kg()?;
    let (cb, emb) = s.casebase()?;
    let test = load_qa(&req.test, "test-")?;
    let beam = s.beam(&req.options);
    let (report, _) = evaluate(
        &test,
        cb,
        kg,
        emb.as_ref(),
        &RetrievalConfig::with_k(req.options.k),
        &beam,
        s.models(),
    )
    .map_err(|e| e.in_stage("evaluate"))?;
    Ok(report)
}

pub fn revise(s: &Session, req: &ReviseRequest) -> Result<(Arc<CaseBase>, ReviseReport)> {
    let kg = s.kg()?;
    let (cb, emb) = s.casebase()?;
    let dev = load_qa(&req.dev, "dev-")?;
    let mode = cb.cases().first().map(|c| c.question.mode).unwrap_or_default();
    let dev = DevSet::build(&dev, emb.as_ref(), mode)?;
    let (revised, report) = revise_and_retain(cb, &dev, kg, &req.config).map_err(|e| e.in_stage("revise"))?;
    if let Some(out) = &req.out {
        revised.store(out)?;
    }
    Ok((Arc::new(revised), report))
}

/// Symbolic triples as `subject<TAB>relation<TAB>object` lines.
pub fn kb_text(kg: &KnowledgeGraph) -> String {
    let mut out = String::new();
    for t in kg.triples() {
        if let Rel::Symbolic(r) = t.relation {
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                kg.entity_name(t.subject),
                kg.relation_name(r),
                kg.entity_name(t.object)
            );
        }
    }
    out
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn drop_triples(s: &Session, req: &DropRequest) -> Result<DropResponse> {
    let sym = s.kg()?.symbolic_only();
    let examples: Vec<QaExample> = match &req.examples {
        Some(p) => load_qa(p, "q-")?,
        None => Vec::new(),
    };
    let (plan, reduced) = match req.scheme {
        DropSchemeRequest::Global { fraction } => drop_global(&sym, fraction, req.seed, &examples)?,
        DropSchemeRequest::PerQuestion { p } => {
            if req.examples.is_none() {
                return Err(Error::Config("the per-question scheme needs an examples file".into()));
            }
            drop_per_question(&sym, &examples, p, req.seed)?
        }
    };
    if let Some(out) = &req.out_kb {
        write(out, kb_text(&reduced).as_bytes())?;
    }
    if let Some(out) = &req.out_plan {
        write(out, &plan.to_bytes())?;
    }
    Ok(DropResponse {
        dropped: plan.dropped.len(),
        remaining: reduced.symbolic_triple_count(),
        affected_questions: plan.affected_questions.len(),
        affected_fraction: plan.affected_fraction(examples.len()),
        skipped: plan.skipped,
    })
}

pub fn experiment(req: &ExperimentRequest) -> Result<ExperimentResponse> {
    let cfg = ExperimentConfig::load(&req.config)?;
    let fingerprint = cbr_ikb::bench::fingerprint(&cfg)?;
    let outcomes = run_ablations(&cfg)?;
    Ok(ExperimentResponse { fingerprint, outcomes })
}

/// Experiment description written next to a generated benchmark: half the
/// gold-chain relations dropped per test question, the facts restored as text.
const SYNTH_EXPERIMENT: &str = "\
kg = kb.txt
train = train.txt
dev = dev.txt
test = test.txt
proxies = proxies.txt
drop = per_question
drop_p = 0.5
drop_seed = 0
restore_dropped_as_text = true
ablations = full,no-text,no-kbc,no-revise,text-only,kb-only
out = results
";

pub fn synth(req: &SynthRequest) -> Result<SynthResponse> {
    let cfg = SynthConfig {
        seed: req.seed,
        ..SynthConfig::default()
    };
    let bench = SynthBenchmark::generate(&cfg)?;
    bench.write_dir(&req.out)?;
    write(&req.out.join("experiment.conf"), SYNTH_EXPERIMENT.as_bytes())?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(&req.out)
        .map_err(|e| Error::io(&req.out, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let kg = bench.kg();
    Ok(SynthResponse {
        files,
        entities: kg.entity_count(),
        triples: kg.triple_count(),
    })
}

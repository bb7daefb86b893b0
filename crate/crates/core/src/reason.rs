//! Reuse: soft execution of retrieved inferential chains and cross-case voting.
//!
//! A step `(e_i, r, e_next)` scores 1 when the triple is in the graph. Otherwise
//! it takes the larger of the calibrated KBC probability and the best agreement
//! between a co-mentioning document and the proxy text of `r`. Path scores are
//! products of step scores; each case votes with its best chain per entity and
//! votes are summed across cases.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::casebase::{CaseBase, ChainStep, InferentialChain};
use crate::embed::{mask_question, Embedder, MaskMode};
use crate::error::{Error, Result};
use crate::kbc::ComplExModel;
use crate::kg::{Direction, EntityId, KnowledgeGraph, LabelKind, Rel, RelationId, SubKb};
use crate::realign::ReAligner;
use crate::retrieve::{knn, RetrievalConfig, RetrievedNeighbor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub beam_width: usize,
    pub kbc_threshold: f64,
    pub kbc_topm: usize,
    pub max_results: usize,
    pub use_text: bool,
    pub use_kbc: bool,
    /// Follow symbolic edges of the graph. Off only for the text-only ablation.
    pub use_kb: bool,
    /// Minimum radius of the question's sub-KB.
    pub subkb_hops: usize,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            beam_width: 32,
            kbc_threshold: 0.5,
            kbc_topm: 10,
            max_results: 100,
            use_text: true,
            use_kbc: true,
            use_kb: true,
            subkb_hops: 2,
        }
    }
}

impl BeamConfig {
    /// Exact edges only; what revision uses to judge chains.
    pub fn exact_only() -> Self {
        Self {
            beam_width: usize::MAX,
            use_text: false,
            use_kbc: false,
            max_results: usize::MAX,
            ..Self::default()
        }
    }

    pub fn validate(&self, models: &Models<'_>) -> Result<()> {
        if self.beam_width == 0 || self.kbc_topm == 0 || self.max_results == 0 || self.subkb_hops == 0 {
            return Err(Error::Config(
                "beam_width, kbc_topm, max_results and subkb_hops must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.kbc_threshold) {
            return Err(Error::Config(format!(
                "kbc_threshold {} outside [0, 1]",
                self.kbc_threshold
            )));
        }
        if self.use_kbc && models.kbc.is_none() {
            return Err(Error::Contract("use_kbc is on but no KBC model is loaded".into()));
        }
        if self.use_text && models.aligner.is_none() {
            return Err(Error::Contract("use_text is on but no proxy texts are loaded".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Models<'a> {
    pub kbc: Option<&'a ComplExModel>,
    pub aligner: Option<&'a ReAligner>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSource {
    ExactMatch,
    Kbc,
    TextSupport,
    FreeFormAlign,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepScore {
    pub value: f64,
    pub source: ScoreSource,
}

impl StepScore {
    fn better(self, other: Option<StepScore>) -> StepScore {
        match other {
            Some(o) if o.value > self.value => o,
            _ => self,
        }
    }
}

/// Everything a chain execution reads.
#[derive(Clone, Copy)]
pub struct ReasonContext<'a> {
    pub kg: &'a KnowledgeGraph,
    /// Scope of the text branch.
    pub subkb: &'a SubKb,
    pub models: Models<'a>,
    pub cfg: &'a BeamConfig,
}

fn orient(e_i: EntityId, e_next: EntityId, dir: Direction) -> (EntityId, EntityId) {
    match dir {
        Direction::Forward => (e_i, e_next),
        Direction::Inverse => (e_next, e_i),
    }
}

/// Score of stepping from `e_i` to `e_next` over symbolic relation `r`, or
/// `None` when no branch gives evidence.
pub fn step_score(
    ctx: &ReasonContext<'_>,
    e_i: EntityId,
    r: RelationId,
    dir: Direction,
    e_next: EntityId,
) -> Result<Option<StepScore>> {
    let (s, o) = orient(e_i, e_next, dir);
    if ctx.cfg.use_kb && ctx.kg.has_symbolic(s, r, o) {
        return Ok(Some(StepScore {
            value: 1.0,
            source: ScoreSource::ExactMatch,
        }));
    }
    let mut best: Option<StepScore> = None;
    if ctx.cfg.use_kbc {
        if let Some(model) = ctx.models.kbc {
            let p = model.kbc_prob(s, r, o)?;
            best = Some(StepScore {
                value: p,
                source: ScoreSource::Kbc,
            });
        }
    }
    if let Some(t) = text_support(ctx, e_i, r, dir, e_next)? {
        best = Some(match best {
            Some(b) => b.better(Some(t)),
            None => t,
        });
    }
    Ok(best.filter(|b| b.value > 0.0))
}

fn text_support(
    ctx: &ReasonContext<'_>,
    e_i: EntityId,
    r: RelationId,
    dir: Direction,
    e_next: EntityId,
) -> Result<Option<StepScore>> {
    let Some(aligner) = ctx.models.aligner.filter(|_| ctx.cfg.use_text) else {
        return Ok(None);
    };
    if !ctx.subkb.contains(e_i) || !ctx.subkb.contains(e_next) {
        return Ok(None);
    }
    let (s, o) = orient(e_i, e_next, dir);
    let (s_name, o_name) = (ctx.kg.entity_name(s), ctx.kg.entity_name(o));
    let rel_name = ctx.kg.relation_name(r);
    let mut best: Option<f64> = None;
    for &(rel, x) in ctx.kg.out_edges(e_i) {
        if let (Rel::FreeForm(d), true) = (rel, x == e_next) {
            let v = aligner.support(ctx.kg.document(d), s_name, o_name, rel_name)?;
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    Ok(best.map(|value| StepScore {
        value,
        source: ScoreSource::TextSupport,
    }))
}

/// Symbolic relation a document is aligned to, with the alignment probability.
pub fn align_free_form(
    aligner: &ReAligner,
    kg: &KnowledgeGraph,
    doc: crate::kg::DocId,
) -> Result<(String, f64)> {
    let a = aligner.align(kg.document(doc))?;
    Ok((a.relation, a.prob))
}

type Expansion = Rc<Vec<(EntityId, StepScore)>>;

/// Chain executor for one question. Step expansions are memoized across the
/// chains it runs.
pub struct Reasoner<'a> {
    ctx: ReasonContext<'a>,
    expansions: RefCell<HashMap<(EntityId, ChainStep), Expansion>>,
}

impl<'a> Reasoner<'a> {
    pub fn new(ctx: ReasonContext<'a>) -> Self {
        Self {
            ctx,
            expansions: RefCell::new(HashMap::new()),
        }
    }

    pub fn context(&self) -> &ReasonContext<'a> {
        &self.ctx
    }

    fn expand_symbolic(
        &self,
        e: EntityId,
        r: RelationId,
        dir: Direction,
        out: &mut BTreeMap<EntityId, StepScore>,
        factor: Option<f64>,
    ) -> Result<()> {
        let ctx = &self.ctx;
        let mut candidates: Vec<EntityId> = Vec::new();
        if ctx.cfg.use_kb {
            candidates.extend(ctx.kg.step_targets(e, Rel::Symbolic(r), dir));
        }
        if ctx.cfg.use_kbc {
            if let Some(model) = ctx.models.kbc {
                let proposed = match dir {
                    Direction::Forward => {
                        model.predict_objects(e, r, ctx.cfg.kbc_topm, ctx.cfg.kbc_threshold)?
                    }
                    Direction::Inverse => {
                        model.predict_subjects(r, e, ctx.cfg.kbc_topm, ctx.cfg.kbc_threshold)?
                    }
                };
                candidates.extend(proposed.into_iter().map(|(x, _)| x));
            }
        }
        if ctx.cfg.use_text && ctx.models.aligner.is_some() && ctx.subkb.contains(e) {
            candidates.extend(
                ctx.kg
                    .out_edges(e)
                    .iter()
                    .filter(|(rel, x)| !rel.is_symbolic() && ctx.subkb.contains(*x))
                    .map(|&(_, x)| x),
            );
        }
        candidates.sort_unstable();
        candidates.dedup();
        for x in candidates {
            if let Some(mut sc) = step_score(ctx, e, r, dir, x)? {
                if let Some(f) = factor {
                    sc = StepScore {
                        value: sc.value * f,
                        source: ScoreSource::FreeFormAlign,
                    };
                }
                if sc.value > 0.0 {
                    let slot = out.entry(x).or_insert(sc);
                    if sc.value > slot.value {
                        *slot = sc;
                    }
                }
            }
        }
        Ok(())
    }

    /// Entities reachable from `e` by one chain step, with step scores.
    pub fn expand(&self, e: EntityId, step: &ChainStep) -> Result<Expansion> {
        let key = (e, step.clone());
        if let Some(x) = self.expansions.borrow().get(&key) {
            return Ok(x.clone());
        }
        let ctx = &self.ctx;
        let mut out: BTreeMap<EntityId, StepScore> = BTreeMap::new();
        match step.label.kind {
            LabelKind::Symbolic => {
                if let Some(r) = ctx.kg.relation(&step.label.name) {
                    self.expand_symbolic(e, r, step.direction, &mut out, None)?;
                }
            }
            LabelKind::FreeForm => {
                if let Some(Rel::FreeForm(d)) = ctx.kg.resolve(&step.label) {
                    for x in ctx.kg.step_targets(e, Rel::FreeForm(d), step.direction) {
                        out.insert(
                            x,
                            StepScore {
                                value: 1.0,
                                source: ScoreSource::ExactMatch,
                            },
                        );
                    }
                    if let Some(aligner) = ctx.models.aligner {
                        let (rel, p) = align_free_form(aligner, ctx.kg, d)?;
                        if let Some(r) = ctx.kg.relation(&rel).filter(|_| p > 0.0) {
                            self.expand_symbolic(e, r, step.direction, &mut out, Some(p))?;
                        }
                    }
                }
            }
        }
        let v: Expansion = Rc::new(out.into_iter().collect());
        self.expansions.borrow_mut().insert(key, v.clone());
        Ok(v)
    }

    /// Beam execution of `chain` from `e0`; each reached entity gets its best
    /// accumulated score.
    pub fn follow_chain(
        &self,
        e0: &[EntityId],
        chain: &InferentialChain,
    ) -> Result<BTreeMap<EntityId, f64>> {
        let mut frontier: BTreeMap<EntityId, f64> = e0.iter().map(|&e| (e, 1.0)).collect();
        for step in &chain.steps {
            let mut next: BTreeMap<EntityId, f64> = BTreeMap::new();
            for (&e, &acc) in &frontier {
                for &(x, sc) in self.expand(e, step)?.iter() {
                    let v = acc * sc.value;
                    if v > 0.0 {
                        let slot = next.entry(x).or_insert(v);
                        if v > *slot {
                            *slot = v;
                        }
                    }
                }
            }
            frontier = prune(next, self.ctx.cfg.beam_width);
            if frontier.is_empty() {
                break;
            }
        }
        Ok(frontier)
    }
}

fn prune(states: BTreeMap<EntityId, f64>, width: usize) -> BTreeMap<EntityId, f64> {
    if states.len() <= width {
        return states;
    }
    let mut v: Vec<(EntityId, f64)> = states.into_iter().collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.truncate(width);
    v.into_iter().collect()
}

/// Convenience wrapper running one chain with a fresh [`Reasoner`].
pub fn follow_chain(
    ctx: &ReasonContext<'_>,
    e0: &[EntityId],
    chain: &InferentialChain,
) -> Result<BTreeMap<EntityId, f64>> {
    Reasoner::new(*ctx).follow_chain(e0, chain)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub case_id: String,
    pub chain: String,
    pub path_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerEvidence {
    pub score: f64,
    pub provenance: Vec<Provenance>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoredAnswerSet {
    /// Every entity any case voted for, query entities included.
    pub answers: BTreeMap<EntityId, AnswerEvidence>,
    /// By score descending, then id; query entities only when nothing else scored.
    pub ranking: Vec<EntityId>,
}

impl ScoredAnswerSet {
    pub fn is_abstention(&self) -> bool {
        self.ranking.is_empty()
    }

    pub fn top(&self) -> Option<EntityId> {
        self.ranking.first().copied()
    }

    pub fn score(&self, e: EntityId) -> f64 {
        self.answers.get(&e).map_or(0.0, |a| a.score)
    }
}

/// Sum over cases of each case's best chain score per entity.
pub fn vote(
    reasoner: &Reasoner<'_>,
    neighbors: &[RetrievedNeighbor<'_>],
    e0: &[EntityId],
) -> Result<ScoredAnswerSet> {
    let mut results: HashMap<&InferentialChain, Rc<BTreeMap<EntityId, f64>>> = HashMap::new();
    let mut answers: BTreeMap<EntityId, AnswerEvidence> = BTreeMap::new();
    for nb in neighbors {
        let mut case_votes: BTreeMap<EntityId, (f64, &InferentialChain)> = BTreeMap::new();
        for chain in &nb.case.chains {
            if chain.steps.is_empty() {
                continue;
            }
            let reached = match results.get(chain) {
                Some(r) => r.clone(),
                None => {
                    let r = Rc::new(reasoner.follow_chain(e0, chain)?);
                    results.insert(chain, r.clone());
                    r
                }
            };
            for (&x, &s) in reached.iter() {
                match case_votes.get_mut(&x) {
                    Some(slot) if s > slot.0 => *slot = (s, chain),
                    Some(_) => {}
                    None => {
                        case_votes.insert(x, (s, chain));
                    }
                }
            }
        }
        for (x, (s, chain)) in case_votes {
            let ev = answers.entry(x).or_insert_with(|| AnswerEvidence {
                score: 0.0,
                provenance: Vec::new(),
            });
            ev.score += s;
            ev.provenance.push(Provenance {
                case_id: nb.case.case_id.clone(),
                chain: chain.to_string(),
                path_score: s,
            });
        }
    }
    let rank = |keep: &dyn Fn(&EntityId) -> bool| -> Vec<EntityId> {
        let mut r: Vec<EntityId> = answers.keys().copied().filter(|e| keep(e)).collect();
        r.sort_by(|a, b| answers[b].score.total_cmp(&answers[a].score).then(a.cmp(b)));
        r
    };
    let mut ranking = rank(&|e| !e0.contains(e));
    if ranking.is_empty() {
        ranking = rank(&|_| true);
    }
    ranking.truncate(reasoner.ctx.cfg.max_results);
    Ok(ScoredAnswerSet { answers, ranking })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborTrace {
    pub case_id: String,
    pub question: String,
    pub similarity: f64,
    pub chains: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub masked_question: String,
    pub query_entities: Vec<String>,
    /// Mentions with no entity in the graph.
    pub unresolved: Vec<String>,
    pub subkb_hops: usize,
    pub neighbors: Vec<NeighborTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerOutcome {
    pub answers: ScoredAnswerSet,
    pub explanation: Explanation,
}

/// The full pipeline for one question: mask, embed, retrieve, execute, vote.
pub fn answer(
    raw_question: &str,
    casebase: &CaseBase,
    kg: &KnowledgeGraph,
    embedder: &dyn Embedder,
    retrieval: &RetrievalConfig,
    beam: &BeamConfig,
    models: Models<'_>,
) -> Result<AnswerOutcome> {
    beam.validate(&models)?;
    let mode = casebase
        .cases()
        .first()
        .map_or(MaskMode::PerToken, |c| c.question.mode);
    let q = mask_question(raw_question, mode)?;
    if q.mention_count == 0 {
        return Err(Error::Validation(format!(
            "question has no bracketed entity mention: {raw_question}"
        )));
    }
    let (mut e0, mut unresolved) = (Vec::new(), Vec::new());
    for m in &q.mentions {
        match kg.entity(m) {
            Some(e) if !e0.contains(&e) => e0.push(e),
            Some(_) => {}
            None => unresolved.push(m.clone()),
        }
    }
    let mut explanation = Explanation {
        masked_question: q.masked_text(),
        query_entities: e0.iter().map(|&e| kg.entity_name(e).to_string()).collect(),
        unresolved,
        subkb_hops: 0,
        neighbors: Vec::new(),
    };
    if e0.is_empty() || casebase.is_empty() {
        return Ok(AnswerOutcome {
            answers: ScoredAnswerSet::default(),
            explanation,
        });
    }
    let emb = embedder.embed(&q)?;
    let neighbors = knn(casebase, &emb, retrieval)?;
    explanation.neighbors = neighbors
        .iter()
        .map(|n| NeighborTrace {
            case_id: n.case.case_id.clone(),
            question: n.case.question.raw.clone(),
            similarity: n.similarity,
            chains: n.case.chains.iter().map(ToString::to_string).collect(),
        })
        .collect();
    let longest = neighbors
        .iter()
        .flat_map(|n| n.case.chains.iter().map(InferentialChain::hops))
        .max()
        .unwrap_or(0);
    let hops = beam.subkb_hops.max(longest);
    explanation.subkb_hops = hops;
    let subkb = kg.subkb(&e0, hops)?;
    let reasoner = Reasoner::new(ReasonContext {
        kg,
        subkb: &subkb,
        models,
        cfg: beam,
    });
    let answers = vote(&reasoner, &neighbors, &e0)?;
    Ok(AnswerOutcome {
        answers,
        explanation,
    })
}

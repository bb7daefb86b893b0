//! Revise and retain: score every chain of every case by the F1 of what it
//! reaches, on its own question (local) and on similar held-out questions
//! (global), then keep only the best chains and drop emptied cases.
//!
//! Chains are judged on exact graph edges only.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::hash::Hash;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::QaExample;
use crate::casebase::{Case, CaseBase, InferentialChain};
use crate::embed::{mask_question, Embedder, MaskMode};
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, SubKb};
use crate::reason::{BeamConfig, Models, ReasonContext, Reasoner};
use crate::retrieve::{knn, RetrievalConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdOn {
    #[default]
    Local,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReviseConfig {
    pub discard_threshold: f64,
    pub max_chains_per_case: usize,
    /// Dev questions consulted per chain owner for the global score.
    pub neighbor_k: usize,
    pub threshold_on: ThresholdOn,
}

impl Default for ReviseConfig {
    fn default() -> Self {
        Self {
            discard_threshold: 0.1,
            max_chains_per_case: 5,
            neighbor_k: 5,
            threshold_on: ThresholdOn::Local,
        }
    }
}

impl ReviseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.discard_threshold) {
            return Err(Error::Config(format!(
                "discard threshold {} outside [0, 1]",
                self.discard_threshold
            )));
        }
        if self.max_chains_per_case == 0 || self.neighbor_k == 0 {
            return Err(Error::Config(
                "max_chains_per_case and neighbor_k must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Harmonic mean of precision and recall; 0 when nothing is predicted.
pub fn f1<T: Eq + Hash>(predicted: &HashSet<T>, gold: &HashSet<T>) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::Contract("F1 against an empty gold set".into()));
    }
    let hit = predicted.intersection(gold).count() as f64;
    if hit == 0.0 {
        return Ok(0.0);
    }
    let p = hit / predicted.len() as f64;
    let r = hit / gold.len() as f64;
    Ok(2.0 * p * r / (p + r))
}

/// A held-out question used for global scoring.
#[derive(Debug, Clone)]
pub struct DevSet {
    base: CaseBase,
}

impl DevSet {
    /// Embeds each dev question the way cases are embedded. Questions without
    /// a bracketed mention are skipped.
    pub fn build(examples: &[QaExample], embedder: &dyn Embedder, mode: MaskMode) -> Result<Self> {
        let mut base = CaseBase::new(embedder.dim());
        for ex in examples {
            let q = mask_question(&ex.raw_question, mode)?;
            if q.mention_count == 0 {
                continue;
            }
            let embedding = embedder.embed(&q)?;
            base.push(Case {
                case_id: ex.id.clone(),
                query_entities: q.mentions.clone(),
                question: q,
                embedding,
                gold_answers: ex.answers.clone(),
                chains: Vec::new(),
                chain_scores: None,
            })?;
        }
        Ok(Self { base })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            base: CaseBase::new(dim),
        }
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }
}

fn resolve(kg: &KnowledgeGraph, names: &[String]) -> Vec<EntityId> {
    let mut out: Vec<EntityId> = names.iter().filter_map(|n| kg.entity(n)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Names reached by `chain` from the question's entities over exact edges.
/// Query entities are left out unless they are all the chain reaches.
fn execute(kg: &KnowledgeGraph, whole: &SubKb, question: &[String], chain: &InferentialChain) -> Result<HashSet<String>> {
    let e0 = resolve(kg, question);
    if e0.is_empty() || chain.steps.is_empty() {
        return Ok(HashSet::new());
    }
    let cfg = BeamConfig::exact_only();
    let reasoner = Reasoner::new(ReasonContext {
        kg,
        subkb: whole,
        models: Models::default(),
        cfg: &cfg,
    });
    let reached = reasoner.follow_chain(&e0, chain)?;
    let outside: HashSet<String> = reached
        .keys()
        .filter(|e| !e0.contains(e))
        .map(|&e| kg.entity_name(e).to_string())
        .collect();
    if outside.is_empty() {
        Ok(reached.keys().map(|&e| kg.entity_name(e).to_string()).collect())
    } else {
        Ok(outside)
    }
}

fn gold_set(names: &[String]) -> HashSet<String> {
    names.iter().cloned().collect()
}

pub fn local_f1(chain: &InferentialChain, case: &Case, kg: &KnowledgeGraph) -> Result<f64> {
    let whole = SubKb::whole(kg);
    f1(&execute(kg, &whole, &case.query_entities, chain)?, &gold_set(&case.gold_answers))
}

/// Mean F1 of `chain` over the dev questions nearest to the case's question.
pub fn global_f1(
    chain: &InferentialChain,
    case: &Case,
    dev: &DevSet,
    kg: &KnowledgeGraph,
    cfg: &ReviseConfig,
) -> Result<f64> {
    let whole = SubKb::whole(kg);
    global_with(chain, case, dev, kg, &whole, cfg)
}

fn global_with(
    chain: &InferentialChain,
    case: &Case,
    dev: &DevSet,
    kg: &KnowledgeGraph,
    whole: &SubKb,
    cfg: &ReviseConfig,
) -> Result<f64> {
    if dev.is_empty() {
        return Ok(0.0);
    }
    let neighbors = knn(&dev.base, &case.embedding, &RetrievalConfig::with_k(cfg.neighbor_k))?;
    if neighbors.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for n in &neighbors {
        let got = execute(kg, whole, &n.case.query_entities, chain)?;
        total += f1(&got, &gold_set(&n.case.gold_answers))?;
    }
    Ok(total / neighbors.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discard {
    BelowThreshold,
    OverCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainVerdict {
    pub case_id: String,
    pub chain: InferentialChain,
    pub local_f1: f64,
    pub global_f1: f64,
    pub retained: bool,
    pub discarded: Option<Discard>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReviseReport {
    pub cases_in: usize,
    pub cases_out: usize,
    pub cases_dropped: usize,
    pub chains_in: usize,
    pub chains_kept: usize,
    pub discarded_below_threshold: usize,
    pub discarded_over_cap: usize,
    pub verdicts: Vec<ChainVerdict>,
}

impl ReviseReport {
    /// One tab-separated line per verdict:
    /// `case_id chain local_f1 global_f1 kept|below_threshold|over_cap`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for v in &self.verdicts {
            let status = match v.discarded {
                None => "kept",
                Some(Discard::BelowThreshold) => "below_threshold",
                Some(Discard::OverCap) => "over_cap",
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{:.6}\t{:.6}\t{}",
                v.case_id, v.chain, v.local_f1, v.global_f1, status
            );
        }
        out
    }
}

fn revise_case(
    case: &Case,
    dev: &DevSet,
    kg: &KnowledgeGraph,
    whole: &SubKb,
    cfg: &ReviseConfig,
) -> Result<(Option<Case>, Vec<ChainVerdict>)> {
    if case.chains.is_empty() {
        return Ok((Some(case.clone()), Vec::new()));
    }
    let gold = gold_set(&case.gold_answers);
    let mut scored = Vec::with_capacity(case.chains.len());
    for chain in &case.chains {
        let local = f1(&execute(kg, whole, &case.query_entities, chain)?, &gold)?;
        let global = global_with(chain, case, dev, kg, whole, cfg)?;
        scored.push((chain.clone(), chain.to_string(), local, global));
    }
    scored.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then(b.3.total_cmp(&a.3))
            .then_with(|| a.1.cmp(&b.1))
    });
    let mut kept = Vec::new();
    let mut verdicts = Vec::with_capacity(scored.len());
    for (chain, _, local, global) in scored {
        let gate = match cfg.threshold_on {
            ThresholdOn::Local => local,
            ThresholdOn::Global => global,
        };
        let discarded = if gate < cfg.discard_threshold {
            Some(Discard::BelowThreshold)
        } else if kept.len() >= cfg.max_chains_per_case {
            Some(Discard::OverCap)
        } else {
            None
        };
        if discarded.is_none() {
            kept.push((chain.clone(), (local, global)));
        }
        verdicts.push(ChainVerdict {
            case_id: case.case_id.clone(),
            chain,
            local_f1: local,
            global_f1: global,
            retained: discarded.is_none(),
            discarded,
        });
    }
    if kept.is_empty() {
        return Ok((None, verdicts));
    }
    let mut out = case.clone();
    out.chains = kept.iter().map(|(c, _)| c.clone()).collect();
    out.chain_scores = Some(kept.into_iter().map(|(_, s)| s).collect());
    Ok((Some(out), verdicts))
}

/// Ranks each case's chains by (local F1, global F1, chain text), discards
/// those under the threshold, keeps at most `max_chains_per_case`, and drops
/// cases left with no chain. Cases that had no chain to begin with are kept.
pub fn revise_and_retain(
    casebase: &CaseBase,
    dev: &DevSet,
    kg: &KnowledgeGraph,
    cfg: &ReviseConfig,
) -> Result<(CaseBase, ReviseReport)> {
    cfg.validate()?;
    let whole = SubKb::whole(kg);
    let results: Vec<Result<(Option<Case>, Vec<ChainVerdict>)>> = casebase
        .cases()
        .par_iter()
        .map(|c| revise_case(c, dev, kg, &whole, cfg))
        .collect();
    let mut report = ReviseReport {
        cases_in: casebase.len(),
        chains_in: casebase.cases().iter().map(|c| c.chains.len()).sum(),
        ..Default::default()
    };
    let mut out = CaseBase::new(casebase.dim());
    for r in results {
        let (case, verdicts) = r?;
        for v in &verdicts {
            match v.discarded {
                None => report.chains_kept += 1,
                Some(Discard::BelowThreshold) => report.discarded_below_threshold += 1,
                Some(Discard::OverCap) => report.discarded_over_cap += 1,
            }
        }
        report.verdicts.extend(verdicts);
        match case {
            Some(c) => out.push(c)?,
            None => report.cases_dropped += 1,
        }
    }
    report.cases_out = out.len();
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{EmbeddingVector, MaskedQuestion};

    fn set(xs: &[&str]) -> HashSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn f1_values() {
        assert_eq!(f1(&set(&["a"]), &set(&["a"])).unwrap(), 1.0);
        assert!((f1(&set(&["a", "b"]), &set(&["a"])).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1(&set(&[]), &set(&["a"])).unwrap(), 0.0);
        assert!(matches!(f1(&set(&["a"]), &set(&[])), Err(Error::Contract(_))));
    }

    fn kg(lines: &str) -> KnowledgeGraph {
        KnowledgeGraph::ingest_kb(lines.as_bytes(), "t", '\t', None).unwrap().0
    }

    fn case(id: &str, q: &str, gold: &[&str], chains: &[&str]) -> Case {
        Case {
            case_id: id.into(),
            question: MaskedQuestion {
                raw: format!("who [{q}]"),
                masked: vec![],
                mention_count: 1,
                mentions: vec![q.into()],
                mode: MaskMode::PerToken,
            },
            embedding: EmbeddingVector::new(vec![1.0, 0.0]).unwrap(),
            query_entities: vec![q.into()],
            gold_answers: gold.iter().map(|s| s.to_string()).collect(),
            chains: chains.iter().map(|c| c.parse().unwrap()).collect(),
            chain_scores: None,
        }
    }

    #[test]
    fn spurious_chain_with_extras_scores_half() {
        let g = kg("q\tgood\ta\nq\tbad\ta\nq\tbad\tx\nq\tbad\ty\n");
        let c = case("c", "q", &["a"], &["good", "bad"]);
        assert_eq!(local_f1(&c.chains[0], &c, &g).unwrap(), 1.0);
        assert!((local_f1(&c.chains[1], &c, &g).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn threshold_and_idempotence() {
        // "bad" reaches a plus 20 others: F1 = 2/22 < 0.1.
        let mut lines = String::from("q\tgood\ta\nq\tbad\ta\n");
        for i in 0..20 {
            lines.push_str(&format!("q\tbad\tx{i}\n"));
        }
        let g = kg(&lines);
        let base = CaseBase::from_cases(
            2,
            vec![
                case("c1", "q", &["a"], &["bad", "good"]),
                case("c2", "q", &["a"], &["bad"]),
                case("c3", "q", &["a"], &[]),
            ],
        )
        .unwrap();
        let dev = DevSet::empty(2);
        let cfg = ReviseConfig::default();
        let (once, report) = revise_and_retain(&base, &dev, &g, &cfg).unwrap();
        assert_eq!(once.len(), 2);
        assert_eq!(once.get("c1").unwrap().chains, vec!["good".parse().unwrap()]);
        assert!(once.get("c2").is_none());
        assert!(once.get("c3").is_some());
        assert_eq!(report.cases_dropped, 1);
        assert_eq!(report.discarded_below_threshold, 2);
        let (twice, _) = revise_and_retain(&once, &dev, &g, &cfg).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn cap_limits_chains() {
        let g = kg("q\tr1\ta\nq\tr2\ta\nq\tr3\ta\n");
        let base = CaseBase::from_cases(2, vec![case("c", "q", &["a"], &["r3", "r1", "r2"])]).unwrap();
        let cfg = ReviseConfig {
            max_chains_per_case: 2,
            ..Default::default()
        };
        let (out, report) = revise_and_retain(&base, &DevSet::empty(2), &g, &cfg).unwrap();
        let kept: Vec<String> = out.cases()[0].chains.iter().map(ToString::to_string).collect();
        assert_eq!(kept, ["r1", "r2"]);
        assert_eq!(report.discarded_over_cap, 1);
    }
}

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::QaExample;
use crate::casebase::InferentialChain;
use crate::embed::{mask_question, MaskMode};
use crate::error::{Error, Result};
use crate::kg::{Direction, EntityId, KnowledgeGraph, LabelKind, Rel, Triple};
use crate::rng::StableRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DropScheme {
    Global { fraction: f64 },
    PerQuestion { p: f64 },
}

/// Which triples an incomplete-KB scheme removed, named so the plan reads the
/// same against any id space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropPlan {
    pub scheme: DropScheme,
    pub seed: u64,
    pub dropped: BTreeSet<(String, String, String)>,
    pub affected_questions: BTreeSet<String>,
    /// Examples without a gold chain, which the per-question scheme skips.
    pub skipped: usize,
}

impl DropPlan {
    /// Canonical text form; equal plans give equal bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        match self.scheme {
            DropScheme::Global { fraction } => {
                let _ = writeln!(out, "scheme\tglobal\t{fraction:?}");
            }
            DropScheme::PerQuestion { p } => {
                let _ = writeln!(out, "scheme\tper_question\t{p:?}");
            }
        }
        let _ = writeln!(out, "seed\t{}", self.seed);
        let _ = writeln!(out, "skipped\t{}", self.skipped);
        for (s, r, o) in &self.dropped {
            let _ = writeln!(out, "dropped\t{s}\t{r}\t{o}");
        }
        for q in &self.affected_questions {
            let _ = writeln!(out, "affected\t{q}");
        }
        out.into_bytes()
    }

    pub fn triples(&self, kg: &KnowledgeGraph) -> HashSet<Triple> {
        self.dropped
            .iter()
            .filter_map(|(s, r, o)| {
                Some(Triple {
                    subject: kg.entity(s)?,
                    relation: Rel::Symbolic(kg.relation(r)?),
                    object: kg.entity(o)?,
                })
            })
            .collect()
    }

    pub fn affected_fraction(&self, total: usize) -> f64 {
        if total == 0 {
            0.0
        } else {
            self.affected_questions.len() as f64 / total as f64
        }
    }
}

fn named(kg: &KnowledgeGraph, t: &Triple) -> Option<(String, String, String)> {
    match t.relation {
        Rel::Symbolic(r) => Some((
            kg.entity_name(t.subject).to_string(),
            kg.relation_name(r).to_string(),
            kg.entity_name(t.object).to_string(),
        )),
        Rel::FreeForm(_) => None,
    }
}

fn query_entities(kg: &KnowledgeGraph, ex: &QaExample) -> Vec<EntityId> {
    mask_question(&ex.raw_question, MaskMode::PerToken)
        .map(|q| q.mentions.iter().filter_map(|m| kg.entity(m)).collect())
        .unwrap_or_default()
}

/// Triples on some exact execution of `chain` from `e0` that ends in `answers`.
pub(crate) fn supporting_triples(
    kg: &KnowledgeGraph,
    e0: &[EntityId],
    chain: &InferentialChain,
    answers: &HashSet<EntityId>,
) -> HashSet<Triple> {
    let mut layers: Vec<BTreeSet<EntityId>> = vec![e0.iter().copied().collect()];
    let mut rels = Vec::new();
    for step in &chain.steps {
        let rel = match kg.resolve(&step.label) {
            Some(r) => r,
            None => return HashSet::new(),
        };
        rels.push((rel, step.direction));
        let next: BTreeSet<EntityId> = layers
            .last()
            .into_iter()
            .flatten()
            .flat_map(|&e| kg.step_targets(e, rel, step.direction))
            .collect();
        layers.push(next);
    }
    let mut live: BTreeSet<EntityId> = layers
        .last()
        .map(|l| l.iter().copied().filter(|e| answers.contains(e)).collect())
        .unwrap_or_default();
    let mut out = HashSet::new();
    for i in (0..rels.len()).rev() {
        let (rel, dir) = rels[i];
        let mut prev = BTreeSet::new();
        for &x in &layers[i] {
            for y in kg.step_targets(x, rel, dir) {
                if live.contains(&y) {
                    prev.insert(x);
                    let (s, o) = match dir {
                        Direction::Forward => (x, y),
                        Direction::Inverse => (y, x),
                    };
                    out.insert(Triple {
                        subject: s,
                        relation: rel,
                        object: o,
                    });
                }
            }
        }
        live = prev;
    }
    out
}

/// Removes `floor(fraction * |symbolic triples|)` symbolic triples chosen
/// uniformly without replacement. Text edges stay. `examples` only feed the
/// affected-question count: a question is affected when a dropped triple lies
/// on an execution of its gold chain that reaches a gold answer.
pub fn drop_global(
    kg: &KnowledgeGraph,
    fraction: f64,
    seed: u64,
    examples: &[QaExample],
) -> Result<(DropPlan, KnowledgeGraph)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("drop fraction {fraction} outside (0, 1)")));
    }
    let symbolic: Vec<&Triple> = kg.triples().iter().filter(|t| t.relation.is_symbolic()).collect();
    let count = (fraction * symbolic.len() as f64).floor() as usize;
    let mut rng = StableRng::new(seed);
    let removed: HashSet<Triple> = rng
        .sample_indices(symbolic.len(), count)
        .into_iter()
        .map(|i| *symbolic[i])
        .collect();
    let mut affected = BTreeSet::new();
    for ex in examples {
        let Some(chain) = &ex.gold_chain else { continue };
        let e0 = query_entities(kg, ex);
        let answers: HashSet<EntityId> = ex.answers.iter().filter_map(|a| kg.entity(a)).collect();
        if supporting_triples(kg, &e0, chain, &answers)
            .iter()
            .any(|t| removed.contains(t))
        {
            affected.insert(ex.id.clone());
        }
    }
    let plan = DropPlan {
        scheme: DropScheme::Global { fraction },
        seed,
        dropped: removed.iter().filter_map(|t| named(kg, t)).collect(),
        affected_questions: affected,
        skipped: 0,
    };
    Ok((plan, kg.without_triples(&removed)))
}

/// For each example, with probability `p`, picks one relation of its gold
/// chain uniformly and removes every triple of that relation touching the
/// 2-hop sub-KB of its query entities in the original graph. Removals from all
/// examples are applied together.
///
/// Random draws, in example order: `unit()` for the coin, then
/// `below(#distinct symbolic relations)` only when the coin comes up.
pub fn drop_per_question(
    kg: &KnowledgeGraph,
    examples: &[QaExample],
    p: f64,
    seed: u64,
) -> Result<(DropPlan, KnowledgeGraph)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("drop probability {p} outside [0, 1]")));
    }
    let mut rng = StableRng::new(seed);
    let mut removed: HashSet<Triple> = HashSet::new();
    let mut affected = BTreeSet::new();
    let mut skipped = 0;
    for ex in examples {
        let Some(chain) = &ex.gold_chain else {
            skipped += 1;
            continue;
        };
        let mut rels: Vec<&str> = Vec::new();
        for s in &chain.steps {
            if s.label.kind == LabelKind::Symbolic && !rels.contains(&s.label.name.as_str()) {
                rels.push(&s.label.name);
            }
        }
        if rels.is_empty() {
            skipped += 1;
            continue;
        }
        if rng.unit() >= p {
            continue;
        }
        let chosen = rels[rng.below_usize(rels.len())];
        let e0 = query_entities(kg, ex);
        let Some(r) = kg.relation(chosen) else { continue };
        if e0.is_empty() {
            continue;
        }
        let sub = kg.subkb(&e0, 2)?;
        let mut hit = false;
        for t in kg.triples() {
            if t.relation == Rel::Symbolic(r) && sub.contains(t.subject) && sub.contains(t.object) {
                removed.insert(*t);
                hit = true;
            }
        }
        if hit {
            affected.insert(ex.id.clone());
        }
    }
    let plan = DropPlan {
        scheme: DropScheme::PerQuestion { p },
        seed,
        dropped: removed.iter().filter_map(|t| named(kg, t)).collect(),
        affected_questions: affected,
        skipped,
    };
    Ok((plan, kg.without_triples(&removed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kg(lines: &str) -> KnowledgeGraph {
        KnowledgeGraph::ingest_kb(lines.as_bytes(), "t", '\t', None).unwrap().0
    }

    fn ex(id: &str, q: &str, a: &str, chain: &str) -> QaExample {
        QaExample {
            id: id.into(),
            raw_question: format!("who [{q}]"),
            answers: vec![a.into()],
            gold_chain: Some(chain.parse().unwrap()),
        }
    }

    #[test]
    fn global_counts_and_determinism() {
        let mut lines = String::new();
        for i in 0..100 {
            lines.push_str(&format!("e{i}\tr\te{}\n", i + 1));
        }
        let g = kg(&lines);
        let (plan, reduced) = drop_global(&g, 0.5, 3, &[]).unwrap();
        assert_eq!(plan.dropped.len(), 50);
        assert_eq!(reduced.symbolic_triple_count() + 50, g.symbolic_triple_count());
        let (again, _) = drop_global(&g, 0.5, 3, &[]).unwrap();
        assert_eq!(plan.to_bytes(), again.to_bytes());
        assert!(drop_global(&g, 1.0, 3, &[]).is_err());
    }

    #[test]
    fn per_question_extremes() {
        let g = kg("a\tr\tb\nc\tr\td\n");
        let exs = [ex("1", "a", "b", "r"), ex("2", "c", "d", "r")];
        let (none, same) = drop_per_question(&g, &exs, 0.0, 1).unwrap();
        assert!(none.dropped.is_empty() && none.affected_questions.is_empty());
        assert_eq!(same.triple_count(), 2);
        let (all, reduced) = drop_per_question(&g, &exs, 1.0, 1).unwrap();
        assert_eq!(all.affected_questions.len(), 2);
        assert_eq!(reduced.symbolic_triple_count(), 0);
    }

    #[test]
    fn missing_gold_chain_is_skipped() {
        let g = kg("a\tr\tb\n");
        let mut e = ex("1", "a", "b", "r");
        e.gold_chain = None;
        let (plan, _) = drop_per_question(&g, &[e], 1.0, 0).unwrap();
        assert_eq!(plan.skipped, 1);
    }

    #[test]
    fn supporting_triples_follow_gold_paths() {
        let g = kg("q\tr\tx\nx\ts\ta\nq\tr\ty\ny\ts\tz\n");
        let id = |n: &str| g.entity(n).unwrap();
        let sup = supporting_triples(&g, &[id("q")], &"r,s".parse().unwrap(), &[id("a")].into_iter().collect());
        assert_eq!(sup.len(), 2);
    }
}

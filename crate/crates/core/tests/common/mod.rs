//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use cbr_ikb::casebase::{Case, ChainStep, InferentialChain};
use cbr_ikb::embed::{mask_question, EmbeddingVector, MaskMode};
use cbr_ikb::kbc::ComplExModel;
use cbr_ikb::kg::{Direction, EntityId, KnowledgeGraph, RelationLabel};
use cbr_ikb::rng::StableRng;

/// Random symbolic graph named `e0..`, relations `r0..`.
pub fn random_kg(rng: &mut StableRng, entities: usize, relations: usize, triples: usize) -> KnowledgeGraph {
    let mut kg = KnowledgeGraph::new();
    for r in 0..relations {
        kg.declare_relation(&format!("r{r}"));
    }
    for e in 0..entities {
        kg.intern_entity(&format!("e{e}"));
    }
    for _ in 0..triples {
        let s = rng.below_usize(entities);
        let o = rng.below_usize(entities);
        let r = rng.below_usize(relations);
        kg.add_fact(&format!("e{s}"), &format!("r{r}"), &format!("e{o}"));
    }
    kg
}

pub fn random_chain(rng: &mut StableRng, relations: usize, max_len: usize) -> InferentialChain {
    let len = 1 + rng.below_usize(max_len);
    InferentialChain::new(
        (0..len)
            .map(|_| {
                let label = RelationLabel::symbolic(format!("r{}", rng.below_usize(relations)));
                if rng.below(2) == 0 {
                    ChainStep::forward(label)
                } else {
                    ChainStep::inverse(label)
                }
            })
            .collect(),
    )
}

/// Case with the given chains and a unit embedding along axis `axis`.
pub fn case(id: &str, dim: usize, axis: usize, chains: Vec<InferentialChain>) -> Case {
    let mut v = vec![0.0f32; dim];
    v[axis % dim] = 1.0;
    Case {
        case_id: id.to_string(),
        question: mask_question("q [x]", MaskMode::PerToken).unwrap(),
        embedding: EmbeddingVector::new(v).unwrap(),
        query_entities: vec!["x".into()],
        gold_answers: vec!["y".into()],
        chains,
        chain_scores: None,
    }
}

/// Symbolic triples as `(subject, relation name, object)` names.
fn triple_names(kg: &KnowledgeGraph) -> HashSet<(String, String, String)> {
    kg.triples()
        .iter()
        .filter_map(|t| match t.relation {
            cbr_ikb::kg::Rel::Symbolic(r) => Some((
                kg.entity_name(t.subject).to_string(),
                kg.relation_name(r).to_string(),
                kg.entity_name(t.object).to_string(),
            )),
            cbr_ikb::kg::Rel::FreeForm(_) => None,
        })
        .collect()
}

/// Vote by enumerating every walk of every chain over all entities. A step
/// scores 1 on a graph triple, else the model's probability when a model is
/// given, else nothing. Per case the best walk over its chains counts; cases
/// add up.
pub fn oracle_vote(
    kg: &KnowledgeGraph,
    model: Option<&ComplExModel>,
    cases: &[Vec<InferentialChain>],
    e0: &[EntityId],
) -> BTreeMap<EntityId, f64> {
    let facts = triple_names(kg);
    let n = kg.entity_count();
    let step = |x: usize, label: &str, dir: Direction, y: usize| -> f64 {
        let (s, o) = match dir {
            Direction::Forward => (x, y),
            Direction::Inverse => (y, x),
        };
        let (sn, on) = (format!("e{s}"), format!("e{o}"));
        let sid = kg.entity(&sn).unwrap();
        let oid = kg.entity(&on).unwrap();
        if facts.contains(&(sn, label.to_string(), on)) {
            return 1.0;
        }
        match (model, kg.relation(label)) {
            (Some(m), Some(r)) => m.kbc_prob(sid, r, oid).unwrap(),
            _ => 0.0,
        }
    };
    let index = |e: EntityId| kg.entity_name(e)[1..].parse::<usize>().unwrap();
    let mut total: BTreeMap<EntityId, f64> = BTreeMap::new();
    for chains in cases {
        let mut best: BTreeMap<usize, f64> = BTreeMap::new();
        for chain in chains {
            fn walk(
                pos: usize,
                acc: f64,
                depth: usize,
                chain: &InferentialChain,
                n: usize,
                step: &dyn Fn(usize, &str, Direction, usize) -> f64,
                best: &mut BTreeMap<usize, f64>,
            ) {
                if depth == chain.steps.len() {
                    let slot = best.entry(pos).or_insert(acc);
                    if acc > *slot {
                        *slot = acc;
                    }
                    return;
                }
                let st = &chain.steps[depth];
                for y in 0..n {
                    let v = acc * step(pos, &st.label.name, st.direction, y);
                    if v > 0.0 {
                        walk(y, v, depth + 1, chain, n, step, best);
                    }
                }
            }
            for &e in e0 {
                walk(index(e), 1.0, 0, chain, n, &step, &mut best);
            }
        }
        for (x, s) in best {
            *total.entry(kg.entity(&format!("e{x}")).unwrap()).or_insert(0.0) += s;
        }
    }
    total
}

/// Entities with the top score, ignoring query entities unless nothing else
/// scored.
pub fn argmax_set(scores: &BTreeMap<EntityId, f64>, e0: &[EntityId]) -> BTreeSet<EntityId> {
    let pick = |keep: &dyn Fn(&EntityId) -> bool| -> BTreeSet<EntityId> {
        let top = scores
            .iter()
            .filter(|(e, _)| keep(e))
            .map(|(_, &s)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        scores
            .iter()
            .filter(|(e, &s)| keep(e) && s == top)
            .map(|(&e, _)| e)
            .collect()
    };
    let set = pick(&|e| !e0.contains(e));
    if set.is_empty() {
        pick(&|_| true)
    } else {
        set
    }
}

/// Chains of all shortest walks from `src` to `dst` of length at most
/// `max_len`, by iterative-deepening DFS over the raw triple list.
pub fn oracle_shortest_chains(
    kg: &KnowledgeGraph,
    src: EntityId,
    dst: EntityId,
    max_len: usize,
) -> BTreeSet<InferentialChain> {
    let facts: Vec<(String, String, String)> = triple_names(kg).into_iter().collect();
    let mut adj: BTreeMap<String, Vec<(String, Direction, String)>> = BTreeMap::new();
    for (s, r, o) in &facts {
        adj.entry(s.clone()).or_default().push((r.clone(), Direction::Forward, o.clone()));
        adj.entry(o.clone()).or_default().push((r.clone(), Direction::Inverse, s.clone()));
    }
    let (src, dst) = (kg.entity_name(src).to_string(), kg.entity_name(dst).to_string());
    fn dfs(
        at: &str,
        dst: &str,
        left: usize,
        adj: &BTreeMap<String, Vec<(String, Direction, String)>>,
        path: &mut Vec<ChainStep>,
        out: &mut BTreeSet<InferentialChain>,
    ) {
        if left == 0 {
            if at == dst {
                out.insert(InferentialChain::new(path.clone()));
            }
            return;
        }
        for (r, d, next) in adj.get(at).into_iter().flatten() {
            path.push(ChainStep {
                label: RelationLabel::symbolic(r.clone()),
                direction: *d,
            });
            dfs(next, dst, left - 1, adj, path, out);
            path.pop();
        }
    }
    for len in 1..=max_len {
        let mut out = BTreeSet::new();
        dfs(&src, &dst, len, &adj, &mut Vec::new(), &mut out);
        if !out.is_empty() {
            return out;
        }
    }
    BTreeSet::new()
}

fn cos(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Ids of every case at least as similar as the k-th most similar one.
pub fn oracle_knn(cases: &[(String, Vec<f32>)], query: &[f32], k: usize) -> BTreeSet<String> {
    let mut sims: Vec<f64> = cases.iter().map(|(_, v)| cos(v, query)).collect();
    sims.sort_by(|a, b| b.total_cmp(a));
    let Some(&kth) = sims.get(k.min(sims.len()).saturating_sub(1)) else {
        return BTreeSet::new();
    };
    cases
        .iter()
        .filter(|(_, v)| cos(v, query) >= kth)
        .map(|(id, _)| id.clone())
        .collect()
}

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::QaExample;
use crate::casebase::CaseBase;
use crate::embed::Embedder;
use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;
use crate::reason::{answer, AnswerOutcome, BeamConfig, Models};
use crate::retrieve::RetrievalConfig;

/// Top-ranked answer for one question, or `None` for an abstention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub top1: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionResult {
    pub id: String,
    pub predicted_top1: Option<String>,
    pub correct: bool,
    pub abstained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub hits_at_1: f64,
    pub per_question: Vec<QuestionResult>,
    pub fingerprint: String,
}

impl EvalReport {
    pub fn correct(&self) -> usize {
        self.per_question.iter().filter(|q| q.correct).count()
    }

    /// `hits_at_1` line, then `id top1 correct abstained` per question,
    /// tab-separated, `-` for no prediction.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "hits_at_1\t{:.6}\t{}\t{}", self.hits_at_1, self.correct(), self.per_question.len());
        let _ = writeln!(out, "fingerprint\t{}", self.fingerprint);
        for q in &self.per_question {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                q.id,
                q.predicted_top1.as_deref().unwrap_or("-"),
                q.correct,
                q.abstained
            );
        }
        out
    }
}

/// Correct iff the top prediction is a gold answer. Abstentions count as wrong.
/// Every example needs exactly one prediction and vice versa.
pub fn hits_at_1(predictions: &[Prediction], examples: &[QaExample]) -> Result<EvalReport> {
    let mut by_id: HashMap<&str, &Prediction> = HashMap::new();
    for p in predictions {
        if by_id.insert(p.id.as_str(), p).is_some() {
            return Err(Error::Contract(format!("duplicate prediction for {}", p.id)));
        }
    }
    if predictions.len() != examples.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} examples",
            predictions.len(),
            examples.len()
        )));
    }
    let mut per_question = Vec::with_capacity(examples.len());
    for ex in examples {
        let p = by_id
            .get(ex.id.as_str())
            .ok_or_else(|| Error::Contract(format!("no prediction for {}", ex.id)))?;
        let gold: HashSet<&str> = ex.answers.iter().map(String::as_str).collect();
        let correct = p.top1.as_deref().is_some_and(|t| gold.contains(t));
        per_question.push(QuestionResult {
            id: ex.id.clone(),
            predicted_top1: p.top1.clone(),
            correct,
            abstained: p.top1.is_none(),
        });
    }
    let hits = if per_question.is_empty() {
        0.0
    } else {
        per_question.iter().filter(|q| q.correct).count() as f64 / per_question.len() as f64
    };
    Ok(EvalReport {
        hits_at_1: hits,
        per_question,
        fingerprint: String::new(),
    })
}

/// Answers every example in parallel and scores the top predictions.
/// Outcomes are returned in example order.
pub fn evaluate(
    examples: &[QaExample],
    casebase: &CaseBase,
    kg: &KnowledgeGraph,
    embedder: &dyn Embedder,
    retrieval: &RetrievalConfig,
    beam: &BeamConfig,
    models: Models<'_>,
) -> Result<(EvalReport, Vec<AnswerOutcome>)> {
    beam.validate(&models)?;
    let outcomes: Vec<AnswerOutcome> = examples
        .par_iter()
        .map(|ex| answer(&ex.raw_question, casebase, kg, embedder, retrieval, beam, models))
        .collect::<Result<_>>()?;
    let predictions: Vec<Prediction> = examples
        .iter()
        .zip(&outcomes)
        .map(|(ex, o)| Prediction {
            id: ex.id.clone(),
            top1: o.answers.top().map(|e| kg.entity_name(e).to_string()),
        })
        .collect();
    Ok((hits_at_1(&predictions, examples)?, outcomes))
}

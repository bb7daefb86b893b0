//! Exact cosine k-nearest-neighbor retrieval over a case base.
//!
//! Every case whose similarity reaches the k-th largest similarity is
//! returned, so a tie at the cut can make the result longer than `k`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::casebase::{Case, CaseBase};
use crate::embed::{cosine_slices, mask_question, Embedder, EmbeddingVector, MaskMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub k: usize,
    /// Cases below this similarity are never returned. `-1` disables it.
    pub min_similarity: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k: 5,
            min_similarity: -1.0,
        }
    }
}

impl RetrievalConfig {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("retrieval k must be >= 1".into()));
        }
        if !(-1.0..=1.0).contains(&self.min_similarity) {
            return Err(Error::Config(format!(
                "min_similarity {} outside [-1, 1]",
                self.min_similarity
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetrievedNeighbor<'a> {
    pub case: &'a Case,
    pub similarity: f64,
}

/// Tie-inclusive k-NN, descending by similarity, then ascending case id.
pub fn knn<'a>(
    casebase: &'a CaseBase,
    query: &EmbeddingVector,
    cfg: &RetrievalConfig,
) -> Result<Vec<RetrievedNeighbor<'a>>> {
    cfg.validate()?;
    if casebase.is_empty() {
        return Ok(Vec::new());
    }
    if query.dim() != casebase.dim() {
        return Err(Error::Contract(format!(
            "query dim {} does not match case base dim {}",
            query.dim(),
            casebase.dim()
        )));
    }
    let mut scored: Vec<RetrievedNeighbor<'a>> = casebase
        .cases()
        .iter()
        .map(|case| RetrievedNeighbor {
            case,
            similarity: cosine_slices(query.values(), case.embedding.values()),
        })
        .filter(|n| n.similarity >= cfg.min_similarity)
        .collect();
    scored.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then_with(|| a.case.case_id.cmp(&b.case.case_id))
    });
    if scored.len() > cfg.k {
        let cut = scored[cfg.k - 1].similarity;
        let end = scored.partition_point(|n| n.similarity >= cut);
        scored.truncate(end);
    }
    Ok(scored)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborReport {
    pub query: String,
    pub masked: bool,
    pub query_tokens: Vec<String>,
    pub neighbors: Vec<NeighborEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborEntry {
    pub case_id: String,
    pub question: String,
    pub similarity: f64,
    pub chains: Vec<String>,
}

impl NeighborReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mode = if self.masked { "masked" } else { "unmasked" };
        let _ = writeln!(out, "query ({mode}): {}", self.query);
        let _ = writeln!(out, "tokens: {}", self.query_tokens.join(" "));
        for n in &self.neighbors {
            let _ = writeln!(out, "{:.6}\t{}\t{}", n.similarity, n.case_id, n.question);
            for c in &n.chains {
                let _ = writeln!(out, "\t\t{c}");
            }
        }
        out
    }
}

/// Neighbor questions and chains for a raw question, with the query embedded
/// masked or unmasked. Case embeddings are used as stored.
pub fn inspect_neighbors(
    casebase: &CaseBase,
    raw_question: &str,
    embedder: &dyn Embedder,
    cfg: &RetrievalConfig,
    masked: bool,
) -> Result<NeighborReport> {
    let mode = if masked { MaskMode::PerToken } else { MaskMode::Off };
    let q = mask_question(raw_question, mode)?;
    let emb = embedder.embed(&q)?;
    let neighbors = knn(casebase, &emb, cfg)?
        .into_iter()
        .map(|n| NeighborEntry {
            case_id: n.case.case_id.clone(),
            question: n.case.question.raw.clone(),
            similarity: n.similarity,
            chains: n.case.chains.iter().map(ToString::to_string).collect(),
        })
        .collect();
    Ok(NeighborReport {
        query: raw_question.to_string(),
        masked,
        query_tokens: q.masked,
        neighbors,
    })
}

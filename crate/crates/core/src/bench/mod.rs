//! Dataset ingestion, incomplete-KB generation, Hits@1 evaluation and the
//! end-to-end experiment driver.

mod drop;
mod experiment;
mod metrics;
pub mod synth;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use drop::{drop_global, drop_per_question, DropPlan, DropScheme};
pub use experiment::{
    build_models, fingerprint, run_ablations, run_experiment, Ablation, DropSettings, EmbedderSpec,
    ExperimentConfig, ExperimentOutcome, Models as ExperimentModels, Prepared, RunSettings,
};
pub use metrics::{evaluate, hits_at_1, EvalReport, Prediction, QuestionResult};

use crate::casebase::InferentialChain;
use crate::embed::{mask_question, MaskMode};
use crate::error::{Error, Result};
use crate::kg::{Document, Mention};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaExample {
    pub id: String,
    pub raw_question: String,
    pub answers: Vec<String>,
    pub gold_chain: Option<InferentialChain>,
}

/// Parses `question<TAB>ans1|ans2|...[<TAB>rel1,rel2,...]` lines. Blank lines
/// and `#` comments are skipped. Example ids are `{id_prefix}{line}`.
pub fn parse_qa<R: BufRead>(reader: R, source_name: &str, id_prefix: &str) -> Result<Vec<QaExample>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| Error::parse(source_name, n, e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::parse(
                source_name,
                n,
                format!("expected 2 or 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let question = fields[0].trim();
        let q = mask_question(question, MaskMode::PerToken)
            .map_err(|e| Error::parse(source_name, n, e.to_string()))?;
        if q.mention_count == 0 {
            return Err(Error::parse(source_name, n, "question has no bracketed entity mention"));
        }
        let answers: Vec<String> = fields[1]
            .split('|')
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .map(str::to_string)
            .collect();
        if answers.is_empty() {
            return Err(Error::parse(source_name, n, "empty answer field"));
        }
        let gold_chain = match fields.get(2).map(|s| s.trim()) {
            None | Some("") => None,
            Some(c) => Some(
                c.parse::<InferentialChain>()
                    .map_err(|e| Error::parse(source_name, n, e.to_string()))?,
            ),
        };
        out.push(QaExample {
            id: format!("{id_prefix}{n}"),
            raw_question: question.to_string(),
            answers,
            gold_chain,
        });
    }
    Ok(out)
}

pub fn load_qa(path: &Path, id_prefix: &str) -> Result<Vec<QaExample>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_qa(BufReader::new(f), &path.display().to_string(), id_prefix)
}

pub fn serialize_qa(examples: &[QaExample]) -> String {
    let mut out = String::new();
    for ex in examples {
        let _ = write!(out, "{}\t{}", ex.raw_question, ex.answers.join("|"));
        if let Some(c) = &ex.gold_chain {
            let _ = write!(out, "\t{c}");
        }
        out.push('\n');
    }
    out
}

/// Reads a documents file (`doc_id<TAB>text`) and a mentions file
/// (`doc_id<TAB>entity<TAB>char_start<TAB>char_end`). Documents keep file
/// order; mentions keep file order within a document.
pub fn parse_documents<R1: BufRead, R2: BufRead>(
    docs: R1,
    docs_name: &str,
    mentions: R2,
    mentions_name: &str,
) -> Result<Vec<Document>> {
    let mut order = Vec::new();
    let mut by_id: BTreeMap<String, Document> = BTreeMap::new();
    for (i, line) in docs.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| Error::parse(docs_name, n, e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(docs_name, n, "expected doc_id<TAB>text"))?;
        let id = id.trim();
        if id.is_empty() {
            return Err(Error::parse(docs_name, n, "empty document id"));
        }
        if by_id.contains_key(id) {
            return Err(Error::parse(docs_name, n, format!("duplicate document id {id}")));
        }
        order.push(id.to_string());
        by_id.insert(
            id.to_string(),
            Document {
                doc_id: id.to_string(),
                text: text.to_string(),
                mentions: Vec::new(),
            },
        );
    }
    for (i, line) in mentions.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| Error::parse(mentions_name, n, e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(Error::parse(mentions_name, n, "expected doc_id<TAB>entity<TAB>start<TAB>end"));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::parse(mentions_name, n, format!("bad offset {s:?}")))
        };
        let doc = by_id
            .get_mut(f[0].trim())
            .ok_or_else(|| Error::parse(mentions_name, n, format!("unknown document {}", f[0])))?;
        doc.mentions.push(Mention {
            entity: f[1].trim().to_string(),
            start: num(f[2])?,
            end: num(f[3])?,
        });
    }
    let docs: Vec<Document> = order.into_iter().filter_map(|id| by_id.remove(&id)).collect();
    for d in &docs {
        d.validate()?;
    }
    Ok(docs)
}

pub fn load_documents(docs: &Path, mentions: &Path) -> Result<Vec<Document>> {
    let d = std::fs::File::open(docs).map_err(|e| Error::io(docs, e))?;
    let m = std::fs::File::open(mentions).map_err(|e| Error::io(mentions, e))?;
    parse_documents(
        BufReader::new(d),
        &docs.display().to_string(),
        BufReader::new(m),
        &mentions.display().to_string(),
    )
}

/// Inverse of [`parse_documents`]: `(documents file, mentions file)`.
pub fn serialize_documents(docs: &[Document]) -> (String, String) {
    let mut d = String::new();
    let mut m = String::new();
    for doc in docs {
        let _ = writeln!(d, "{}\t{}", doc.doc_id, doc.text);
        for men in &doc.mentions {
            let _ = writeln!(m, "{}\t{}\t{}\t{}", doc.doc_id, men.entity, men.start, men.end);
        }
    }
    (d, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_round_trip() {
        let src = "# comment\nwho directed [Heat]\tMichael Mann\tdirected_by\n\n what films did [Al Pacino] star in \tHeat|Serpico \n";
        let ex = parse_qa(src.as_bytes(), "qa", "t").unwrap();
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[0].id, "t2");
        assert_eq!(ex[1].answers, ["Heat", "Serpico"]);
        assert_eq!(ex[0].gold_chain.as_ref().unwrap().to_string(), "directed_by");
        let norm = serialize_qa(&ex);
        assert_eq!(
            norm,
            "who directed [Heat]\tMichael Mann\tdirected_by\nwhat films did [Al Pacino] star in\tHeat|Serpico\n"
        );
        assert_eq!(serialize_qa(&parse_qa(norm.as_bytes(), "qa", "t").unwrap()), norm);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_qa("a [b]\tc\nwho [x]\t\n".as_bytes(), "qa", "").unwrap_err();
        assert!(err.to_string().starts_with("qa:2:"), "{err}");
        assert!(parse_qa("no mention\tc\n".as_bytes(), "qa", "").is_err());
        assert!(parse_qa("bad [x\tc\n".as_bytes(), "qa", "").is_err());
        assert!(parse_qa("one field\n".as_bytes(), "qa", "").is_err());
    }

    #[test]
    fn documents_parse() {
        let docs = "d1\tAnn met Bob\nd2\tno one\n";
        let mentions = "d1\tAnn\t0\t3\nd1\tBob\t8\t11\n";
        let parsed = parse_documents(docs.as_bytes(), "d", mentions.as_bytes(), "m").unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].mentions.len(), 2);
        let (d, m) = serialize_documents(&parsed);
        assert_eq!((d.as_str(), m.as_str()), (docs, mentions));
        assert!(parse_documents(docs.as_bytes(), "d", "d1\tAnn\t0\t30\n".as_bytes(), "m").is_err());
        assert!(parse_documents(docs.as_bytes(), "d", "d9\tAnn\t0\t3\n".as_bytes(), "m").is_err());
    }
}

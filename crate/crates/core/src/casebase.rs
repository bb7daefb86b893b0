//! Cases: masked-question embeddings paired with the inferential chains mined
//! from question/answer pairs, and the on-disk case-base container.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::QaExample;
use crate::embed::{mask_question, Embedder, EmbeddingTable, EmbeddingVector, MaskMode, MaskedQuestion};
use crate::error::{Error, Result};
use crate::kg::{Direction, EntityId, KnowledgeGraph, LabelKind, PathOptions, RelationLabel};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChainStep {
    pub label: RelationLabel,
    pub direction: Direction,
}

impl ChainStep {
    pub fn forward(label: RelationLabel) -> Self {
        Self {
            label,
            direction: Direction::Forward,
        }
    }

    pub fn inverse(label: RelationLabel) -> Self {
        Self {
            label,
            direction: Direction::Inverse,
        }
    }
}

impl fmt::Display for ChainStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label)?;
        if self.direction == Direction::Inverse {
            f.write_str("^-1")?;
        }
        Ok(())
    }
}

impl FromStr for ChainStep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (body, direction) = match s.strip_suffix("^-1") {
            Some(b) => (b, Direction::Inverse),
            None => (s, Direction::Forward),
        };
        let label = match body.strip_prefix('@') {
            Some(doc) => RelationLabel::free_form(doc),
            None => RelationLabel::symbolic(body),
        };
        if label.name.is_empty() {
            return Err(Error::Validation(format!("empty relation in chain step {s:?}")));
        }
        Ok(Self { label, direction })
    }
}

/// Ordered relation steps `[r_i, ..., r_n]`, each with a traversal direction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InferentialChain {
    pub steps: Vec<ChainStep>,
}

impl InferentialChain {
    pub fn new(steps: Vec<ChainStep>) -> Self {
        Self { steps }
    }

    pub fn hops(&self) -> usize {
        self.steps.len()
    }

    pub fn has_free_form(&self) -> bool {
        self.steps.iter().any(|s| s.label.kind == LabelKind::FreeForm)
    }
}

impl fmt::Display for InferentialChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for InferentialChain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let steps = s
            .split(',')
            .map(ChainStep::from_str)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { steps })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub case_id: String,
    pub question: MaskedQuestion,
    pub embedding: EmbeddingVector,
    pub query_entities: Vec<String>,
    pub gold_answers: Vec<String>,
    pub chains: Vec<InferentialChain>,
    /// Per-chain `(local_f1, global_f1)`, aligned with `chains`, once revised.
    pub chain_scores: Option<Vec<(f64, f64)>>,
}

impl Case {
    pub fn is_chainless(&self) -> bool {
        self.chains.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub max_len: usize,
    pub mine_with_text: bool,
    pub forward_only: bool,
    pub mask_mode: MaskMode,
}

impl Default for CaseConfig {
    fn default() -> Self {
        Self {
            max_len: 4,
            mine_with_text: true,
            forward_only: false,
            mask_mode: MaskMode::PerToken,
        }
    }
}

impl CaseConfig {
    pub fn path_options(&self) -> PathOptions {
        PathOptions {
            max_len: self.max_len,
            include_text: self.mine_with_text,
            forward_only: self.forward_only,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MinedChains {
    pub chains: BTreeSet<InferentialChain>,
    /// Query or answer entities that are not in the graph.
    pub skipped_entities: usize,
}

/// Union of the inferential chains of all shortest paths between every
/// (query entity, answer entity) pair.
pub fn mine_chains<S: AsRef<str>>(
    kg: &KnowledgeGraph,
    query_entities: &[S],
    answers: &[S],
    opts: &PathOptions,
) -> Result<MinedChains> {
    let mut skipped = 0;
    let mut resolve = |names: &[S]| -> Vec<EntityId> {
        names
            .iter()
            .filter_map(|n| {
                let id = kg.entity(n.as_ref());
                if id.is_none() {
                    skipped += 1;
                }
                id
            })
            .collect()
    };
    let eq = resolve(query_entities);
    let ea = resolve(answers);
    if eq.is_empty() && ea.is_empty() {
        return Err(Error::Unminable(
            "neither query nor answer entities are in the knowledge graph".into(),
        ));
    }
    let mut chains = BTreeSet::new();
    for &q in &eq {
        for &a in &ea {
            if q == a {
                continue;
            }
            for path in kg.shortest_paths(q, a, opts) {
                chains.insert(path.inferential(kg));
            }
        }
    }
    Ok(MinedChains {
        chains,
        skipped_entities: skipped,
    })
}

/// Builds one case from a bracketed question and its answers.
pub fn build_case(
    case_id: &str,
    raw_question: &str,
    answers: &[String],
    kg: &KnowledgeGraph,
    embedder: &dyn Embedder,
    cfg: &CaseConfig,
) -> Result<Case> {
    let question = mask_question(raw_question, cfg.mask_mode)?;
    if question.mention_count == 0 {
        return Err(Error::Validation(format!(
            "{case_id}: question has no bracketed entity mention"
        )));
    }
    let embedding = embedder.embed(&question)?;
    let query_entities = question.mentions.clone();
    let mined = match mine_chains(kg, &query_entities, answers, &cfg.path_options()) {
        Ok(m) => m.chains,
        Err(Error::Unminable(_)) => BTreeSet::new(),
        Err(e) => return Err(e),
    };
    Ok(Case {
        case_id: case_id.to_string(),
        question,
        embedding,
        query_entities,
        gold_answers: answers.to_vec(),
        chains: mined.into_iter().collect(),
        chain_scores: None,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub cases: usize,
    pub chainless: usize,
    pub skipped: usize,
    pub mean_chains: f64,
    pub diagnostics: Vec<String>,
}

/// One case per example, built in parallel and assembled in input order.
pub fn build_casebase(
    examples: &[QaExample],
    kg: &KnowledgeGraph,
    embedder: &dyn Embedder,
    cfg: &CaseConfig,
) -> Result<(CaseBase, BuildReport)> {
    let built: Vec<Result<Case>> = examples
        .par_iter()
        .map(|ex| build_case(&ex.id, &ex.raw_question, &ex.answers, kg, embedder, cfg))
        .collect();
    let mut base = CaseBase::new(embedder.dim());
    let mut report = BuildReport::default();
    for r in built {
        match r {
            Ok(case) => base.push(case)?,
            Err(Error::Validation(msg)) => {
                report.skipped += 1;
                report.diagnostics.push(msg);
            }
            Err(e) => return Err(e),
        }
    }
    report.cases = base.len();
    report.chainless = base.cases().iter().filter(|c| c.is_chainless()).count();
    let total: usize = base.cases().iter().map(|c| c.chains.len()).sum();
    report.mean_chains = if base.is_empty() {
        0.0
    } else {
        total as f64 / base.len() as f64
    };
    Ok((base, report))
}

const CASEBASE_MAGIC: &[u8; 4] = b"CBRB";
const CASEBASE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CaseBase {
    dim: usize,
    cases: Vec<Case>,
    index: HashMap<String, usize>,
}

impl CaseBase {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Default::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn cases(&self) -> &[Case] {
        &self.cases
    }

    pub fn get(&self, case_id: &str) -> Option<&Case> {
        self.index.get(case_id).map(|&i| &self.cases[i])
    }

    pub fn push(&mut self, case: Case) -> Result<()> {
        if case.embedding.dim() != self.dim {
            return Err(Error::Contract(format!(
                "case {} has embedding dim {}, case base has {}",
                case.case_id,
                case.embedding.dim(),
                self.dim
            )));
        }
        if self.index.contains_key(&case.case_id) {
            return Err(Error::Validation(format!("duplicate case id {}", case.case_id)));
        }
        self.index.insert(case.case_id.clone(), self.cases.len());
        self.cases.push(case);
        Ok(())
    }

    pub fn into_cases(self) -> Vec<Case> {
        self.cases
    }

    pub fn from_cases(dim: usize, cases: Vec<Case>) -> Result<Self> {
        let mut base = CaseBase::new(dim);
        for c in cases {
            base.push(c)?;
        }
        Ok(base)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut table = EmbeddingTable::new(self.dim);
        let mut chains = String::new();
        let mut questions = String::new();
        let mut scores = String::new();
        for c in &self.cases {
            table.insert(c.case_id.clone(), c.embedding.clone())?;
            check_field(&c.case_id, "case id", &['\t', '\n'])?;
            for e in c.query_entities.iter().chain(&c.gold_answers) {
                check_field(e, "entity", &['\t', '\n', '|'])?;
            }
            for ch in &c.chains {
                for s in &ch.steps {
                    check_field(&s.label.name, "relation", &['\t', '\n', ',', ';'])?;
                }
            }
            check_field(&c.question.raw, "question", &['\t', '\n'])?;
            let chain_strs: Vec<String> = c.chains.iter().map(ToString::to_string).collect();
            chains.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                c.case_id,
                c.query_entities.join("|"),
                c.gold_answers.join("|"),
                chain_strs.join(";")
            ));
            questions.push_str(&format!(
                "{}\t{}\t{}\n",
                c.case_id,
                c.question.mode.as_str(),
                c.question.raw
            ));
            if let Some(sc) = &c.chain_scores {
                let parts: Vec<String> = sc
                    .iter()
                    .map(|(l, g)| format!("{:?}:{:?}", l, g))
                    .collect();
                scores.push_str(&format!("{}\t{}\n", c.case_id, parts.join(";")));
            }
        }
        let mut out = Vec::new();
        out.extend_from_slice(CASEBASE_MAGIC);
        out.extend_from_slice(&CASEBASE_VERSION.to_le_bytes());
        for (tag, body) in [
            (b"EMBD", table.to_bytes()),
            (b"CHNS", chains.into_bytes()),
            (b"QSTN", questions.into_bytes()),
            (b"SCOR", scores.into_bytes()),
        ] {
            out.extend_from_slice(tag);
            out.extend_from_slice(&(body.len() as u64).to_le_bytes());
            out.extend_from_slice(&body);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt_err = |offset: usize, message: String| Error::Format {
            offset: offset as u64,
            message,
        };
        if bytes.len() < 8 || &bytes[..4] != CASEBASE_MAGIC {
            return Err(fmt_err(0, "bad magic, expected CBRB".into()));
        }
        let version = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
        if version != CASEBASE_VERSION {
            return Err(fmt_err(4, format!("unsupported case base version {version}")));
        }
        let mut sections: HashMap<[u8; 4], &[u8]> = HashMap::new();
        let mut pos = 8;
        while pos < bytes.len() {
            if bytes.len() - pos < 12 {
                return Err(fmt_err(pos, "truncated section header".into()));
            }
            let mut tag = [0u8; 4];
            tag.copy_from_slice(&bytes[pos..pos + 4]);
            let mut len = [0u8; 8];
            len.copy_from_slice(&bytes[pos + 4..pos + 12]);
            let len = u64::from_le_bytes(len) as usize;
            pos += 12;
            if bytes.len() - pos < len {
                return Err(fmt_err(pos, "truncated section body".into()));
            }
            sections.insert(tag, &bytes[pos..pos + len]);
            pos += len;
        }
        let section = |tag: &[u8; 4]| -> Result<&[u8]> {
            sections
                .get(tag)
                .copied()
                .ok_or_else(|| fmt_err(8, format!("missing section {}", String::from_utf8_lossy(tag))))
        };
        let table = EmbeddingTable::from_bytes(section(b"EMBD")?)?;
        let text = |tag: &[u8; 4]| -> Result<String> {
            String::from_utf8(section(tag)?.to_vec())
                .map_err(|_| fmt_err(8, format!("section {} is not UTF-8", String::from_utf8_lossy(tag))))
        };
        let chains_text = text(b"CHNS")?;
        let questions_text = text(b"QSTN")?;
        let scores_text = text(b"SCOR")?;

        let mut questions: HashMap<&str, (MaskMode, &str)> = HashMap::new();
        for (i, line) in questions_text.lines().enumerate() {
            let mut f = line.splitn(3, '\t');
            let (Some(id), Some(mode), Some(raw)) = (f.next(), f.next(), f.next()) else {
                return Err(Error::parse("QSTN", i + 1, "expected 3 fields"));
            };
            questions.insert(id, (mode.parse()?, raw));
        }
        let mut scores: HashMap<&str, Vec<(f64, f64)>> = HashMap::new();
        for (i, line) in scores_text.lines().enumerate() {
            let (id, rest) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse("SCOR", i + 1, "expected 2 fields"))?;
            let parsed = if rest.is_empty() {
                Vec::new()
            } else {
                rest.split(';')
                    .map(|p| {
                        let (l, g) = p.split_once(':')?;
                        Some((l.parse().ok()?, g.parse().ok()?))
                    })
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| Error::parse("SCOR", i + 1, "bad score pair"))?
            };
            scores.insert(id, parsed);
        }

        let mut base = CaseBase::new(table.dim());
        for (i, line) in chains_text.lines().enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(Error::parse("CHNS", i + 1, format!("expected 4 fields, found {}", f.len())));
            }
            let split = |s: &str, sep: char| -> Vec<String> {
                if s.is_empty() {
                    Vec::new()
                } else {
                    s.split(sep).map(str::to_string).collect()
                }
            };
            let chains = if f[3].is_empty() {
                Vec::new()
            } else {
                f[3].split(';')
                    .map(InferentialChain::from_str)
                    .collect::<Result<Vec<_>>>()?
            };
            let (mode, raw) = questions
                .get(f[0])
                .copied()
                .ok_or_else(|| Error::parse("QSTN", 0, format!("no question for case {}", f[0])))?;
            let embedding = table
                .get(f[0])
                .cloned()
                .ok_or_else(|| Error::parse("EMBD", 0, format!("no embedding for case {}", f[0])))?;
            let chain_scores = scores.get(f[0]).cloned();
            if let Some(sc) = &chain_scores {
                if sc.len() != chains.len() {
                    return Err(Error::parse("SCOR", 0, format!("score count mismatch for {}", f[0])));
                }
            }
            base.push(Case {
                case_id: f[0].to_string(),
                question: mask_question(raw, mode)?,
                embedding,
                query_entities: split(f[1], '|'),
                gold_answers: split(f[2], '|'),
                chains,
                chain_scores,
            })?;
        }
        Ok(base)
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn check_field(value: &str, what: &str, forbidden: &[char]) -> Result<()> {
    if let Some(c) = value.chars().find(|c| forbidden.contains(c)) {
        return Err(Error::Validation(format!(
            "{what} {value:?} contains reserved character {c:?}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::HashEmbedder;

    fn kg(lines: &str) -> KnowledgeGraph {
        KnowledgeGraph::ingest_kb(lines.as_bytes(), "t", '\t', None).unwrap().0
    }

    fn chain(s: &str) -> InferentialChain {
        s.parse().unwrap()
    }

    #[test]
    fn chain_text_round_trip() {
        let c = chain("directed_by^-1,@doc7,has_genre");
        assert_eq!(c.hops(), 3);
        assert_eq!(c.steps[0].direction, Direction::Inverse);
        assert_eq!(c.steps[1].label, RelationLabel::free_form("doc7"));
        assert_eq!(c.to_string(), "directed_by^-1,@doc7,has_genre");
        assert!("a,,b".parse::<InferentialChain>().is_err());
    }

    #[test]
    fn mine_single_edge_and_diamond() {
        let g = kg("m\tdirected\td\n");
        let mined = mine_chains(&g, &["m"], &["d"], &PathOptions::default()).unwrap();
        assert_eq!(mined.chains.into_iter().collect::<Vec<_>>(), vec![chain("directed")]);

        let g = kg("a\tr\tb\nb\tr\td\na\ts\tc\nc\ts\td\n");
        let mined = mine_chains(&g, &["a"], &["d"], &PathOptions::default()).unwrap();
        assert_eq!(mined.chains.len(), 2);
    }

    #[test]
    fn mine_skips_unknown_and_errors_when_all_unknown() {
        let g = kg("m\tdirected\td\n");
        let mined = mine_chains(&g, &["m", "zz"], &["d"], &PathOptions::default()).unwrap();
        assert_eq!(mined.skipped_entities, 1);
        assert!(matches!(
            mine_chains(&g, &["x"], &["y"], &PathOptions::default()),
            Err(Error::Unminable(_))
        ));
    }

    #[test]
    fn build_case_and_twin() {
        let g = kg("M1\tdirected_by\tD1\nM2\tdirected_by\tD2\n");
        let emb = HashEmbedder::new(32, 0).unwrap();
        let cfg = CaseConfig::default();
        let c1 = build_case("c1", "who directed [M1]", &["D1".into()], &g, &emb, &cfg).unwrap();
        let c2 = build_case("c2", "who directed [M2]", &["D2".into()], &g, &emb, &cfg).unwrap();
        assert_eq!(c1.chains, vec![chain("directed_by")]);
        assert_eq!(c1.embedding, c2.embedding);
        assert!(matches!(
            build_case("c3", "who directed M1", &["D1".into()], &g, &emb, &cfg),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn container_round_trip() {
        let g = kg("M1\tdirected_by\tD1\nM1\twritten_by\tW1\n");
        let emb = HashEmbedder::new(16, 0).unwrap();
        let cfg = CaseConfig::default();
        let mut c1 = build_case("c1", "who directed [M1]", &["D1".into()], &g, &emb, &cfg).unwrap();
        c1.chain_scores = Some(vec![(1.0, 0.25)]);
        let c2 = build_case("c2", "who wrote [M1]?", &["W1".into(), "nobody".into()], &g, &emb, &cfg).unwrap();
        let base = CaseBase::from_cases(16, vec![c1, c2]).unwrap();
        let bytes = base.to_bytes().unwrap();
        let back = CaseBase::from_bytes(&bytes).unwrap();
        assert_eq!(back, base);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert!(CaseBase::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn collapse_mode_survives_container() {
        let g = kg("M\tr\tD\n");
        let emb = HashEmbedder::new(16, 0).unwrap();
        let cfg = CaseConfig {
            mask_mode: MaskMode::Collapse,
            ..Default::default()
        };
        let c = build_case("c", "who made [Big Movie]", &["D".into()], &g, &emb, &cfg).unwrap();
        let base = CaseBase::from_cases(16, vec![c]).unwrap();
        let back = CaseBase::from_bytes(&base.to_bytes().unwrap()).unwrap();
        assert_eq!(back.cases()[0].question.masked_text(), "who made <MASK>");
    }

    #[test]
    fn rejects_reserved_characters() {
        let g = kg("M\tr\tD|E\n");
        let emb = HashEmbedder::new(16, 0).unwrap();
        let c = build_case("c", "who [M]", &["D|E".into()], &g, &emb, &CaseConfig::default()).unwrap();
        let base = CaseBase::from_cases(16, vec![c]).unwrap();
        assert!(matches!(base.to_bytes(), Err(Error::Validation(_))));
    }
}

//! Relation-extraction alignment between text and symbolic relations.
//!
//! Each symbolic relation has a fixed proxy sentence with `<SUBJ>` and `<OBJ>`
//! placeholders. A [`RelationScorer`] maps a text plus subject/object spans to
//! a distribution over its own labels; two texts "agree" on a relation with
//! probability `sum_l p1(l) * p2(l)`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::Document;

pub const SUBJ_PLACEHOLDER: &str = "<SUBJ>";
pub const OBJ_PLACEHOLDER: &str = "<OBJ>";

/// Character span, 0-based and end-exclusive.
pub type Span = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProxyText {
    pub text: String,
    pub subj: Span,
    pub obj: Span,
}

impl ProxyText {
    pub fn parse(text: &str) -> Result<Self> {
        let find = |ph: &str| -> Option<Span> {
            let byte = text.find(ph)?;
            let start = text[..byte].chars().count();
            Some((start, start + ph.chars().count()))
        };
        match (find(SUBJ_PLACEHOLDER), find(OBJ_PLACEHOLDER)) {
            (Some(subj), Some(obj)) => Ok(Self {
                text: text.to_string(),
                subj,
                obj,
            }),
            _ => Err(Error::Validation(format!(
                "proxy text {text:?} needs both {SUBJ_PLACEHOLDER} and {OBJ_PLACEHOLDER}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProxyTextTable {
    entries: BTreeMap<String, ProxyText>,
}

impl ProxyTextTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, relation: &str) -> Option<&ProxyText> {
        self.entries.get(relation)
    }

    /// Relations in name order.
    pub fn relations(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ProxyText)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Builds a table from `(relation, text)` pairs, checked against `relations`.
    /// Later duplicates replace earlier ones; each replacement adds a warning.
    pub fn from_pairs<I, S, T>(pairs: I, relations: &[String]) -> Result<(Self, Vec<String>)>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        let mut entries = BTreeMap::new();
        let mut warnings = Vec::new();
        for (rel, text) in pairs {
            let rel = rel.into();
            let proxy = ProxyText::parse(text.as_ref())?;
            if entries.insert(rel.clone(), proxy).is_some() {
                warnings.push(format!("duplicate proxy text for {rel}; keeping the last one"));
            }
        }
        let wanted: HashSet<&str> = relations.iter().map(String::as_str).collect();
        let mut missing: Vec<&str> = relations
            .iter()
            .map(String::as_str)
            .filter(|r| !entries.contains_key(*r))
            .collect();
        missing.sort_unstable();
        missing.dedup();
        let extra: Vec<&str> = entries
            .keys()
            .map(String::as_str)
            .filter(|r| !wanted.contains(r))
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            let mut msg = String::from("proxy texts do not match the relation set:");
            if !missing.is_empty() {
                msg.push_str(&format!(" missing {}", missing.join(", ")));
            }
            if !extra.is_empty() {
                msg.push_str(&format!(" unknown {}", extra.join(", ")));
            }
            return Err(Error::Validation(msg));
        }
        Ok((Self { entries }, warnings))
    }

    pub fn parse<R: BufRead>(
        reader: R,
        source_name: &str,
        relations: &[String],
    ) -> Result<(Self, Vec<String>)> {
        let mut pairs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (rel, text) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(source_name, i + 1, "expected relation<TAB>text"))?;
            let (rel, text) = (rel.trim(), text.trim());
            if rel.is_empty() || text.is_empty() {
                return Err(Error::parse(source_name, i + 1, "empty relation or proxy text"));
            }
            ProxyText::parse(text)
                .map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?;
            pairs.push((rel.to_string(), text.to_string()));
        }
        Self::from_pairs(pairs, relations)
    }
}

pub fn load_proxy_texts(path: &Path, relations: &[String]) -> Result<(ProxyTextTable, Vec<String>)> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ProxyTextTable::parse(BufReader::new(f), &path.display().to_string(), relations)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    labels: Arc<Vec<String>>,
    probs: Vec<f64>,
}

impl LabelDistribution {
    /// Checks non-negativity and a unit sum (within 1e-6), then renormalizes.
    pub fn new(labels: Arc<Vec<String>>, probs: Vec<f64>) -> Result<Self> {
        if labels.len() != probs.len() || labels.is_empty() {
            return Err(Error::Contract(format!(
                "{} labels but {} probabilities",
                labels.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Contract("negative or non-finite probability".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Contract(format!("probabilities sum to {sum}")));
        }
        Ok(Self {
            labels,
            probs: probs.into_iter().map(|p| p / sum).collect(),
        })
    }

    pub fn uniform(labels: Arc<Vec<String>>) -> Self {
        let n = labels.len();
        Self {
            labels,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, label: &str) -> f64 {
        self.labels
            .iter()
            .position(|l| l == label)
            .map_or(0.0, |i| self.probs[i])
    }

    /// Most likely label; the first in label order on ties.
    pub fn argmax(&self) -> &str {
        let mut best = 0;
        for i in 1..self.probs.len() {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        &self.labels[best]
    }
}

/// Probability that independent draws from `a` and `b` coincide.
pub fn agreement(a: &LabelDistribution, b: &LabelDistribution) -> Result<f64> {
    if !Arc::ptr_eq(&a.labels, &b.labels) && a.labels != b.labels {
        return Err(Error::Contract("label sets of the two distributions differ".into()));
    }
    Ok(a.probs.iter().zip(&b.probs).map(|(p, q)| p * q).sum::<f64>().min(1.0))
}

pub trait RelationScorer: Send + Sync {
    fn labels(&self) -> Arc<Vec<String>>;

    /// Distribution for the relation between the subject and object spans of
    /// `text`. Spans may be absent when the text has fewer than two mentions.
    fn score(&self, text: &str, subj: Option<Span>, obj: Option<Span>) -> Result<LabelDistribution>;
}

/// Distribution for the relation between two entities mentioned in `doc`,
/// using the first mention span of each.
pub fn label_distribution(
    scorer: &dyn RelationScorer,
    doc: &Document,
    subj: &str,
    obj: &str,
) -> Result<LabelDistribution> {
    let span = |e: &str| {
        doc.first_span(e).ok_or_else(|| {
            Error::Contract(format!("entity {e} has no mention span in document {}", doc.doc_id))
        })
    };
    scorer.score(&doc.text, Some(span(subj)?), Some(span(obj)?))
}

fn tokenize_outside(text: &str, spans: &[Span]) -> Vec<String> {
    let mut buf = String::new();
    for (i, c) in text.chars().enumerate() {
        if spans.iter().any(|&(s, e)| i >= s && i < e) {
            buf.push(' ');
        } else {
            buf.push(c);
        }
    }
    let buf = buf
        .replace(SUBJ_PLACEHOLDER, " ")
        .replace(OBJ_PLACEHOLDER, " ");
    buf.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// TF-IDF cosine against each proxy sentence, softmaxed with a temperature.
/// Mention spans and placeholders are removed before tokenizing, so only the
/// connecting words count. IDF is `ln(N / df)` over the proxy sentences.
#[derive(Debug, Clone)]
pub struct LexicalScorer {
    labels: Arc<Vec<String>>,
    idf: HashMap<String, f64>,
    proxies: Vec<HashMap<String, f64>>,
    temperature: f64,
}

pub const DEFAULT_TEMPERATURE: f64 = 0.1;

impl LexicalScorer {
    pub fn new(table: &ProxyTextTable, temperature: f64) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::Config("no proxy texts loaded".into()));
        }
        if temperature.is_nan() || temperature <= 0.0 {
            return Err(Error::Config(format!("temperature {temperature} must be > 0")));
        }
        let labels: Vec<String> = table.relations().map(str::to_string).collect();
        let token_lists: Vec<Vec<String>> = table
            .iter()
            .map(|(_, p)| tokenize_outside(&p.text, &[]))
            .collect();
        let n = token_lists.len() as f64;
        let mut df: HashMap<String, usize> = HashMap::new();
        for toks in &token_lists {
            let uniq: HashSet<&String> = toks.iter().collect();
            for t in uniq {
                *df.entry(t.clone()).or_default() += 1;
            }
        }
        let idf: HashMap<String, f64> = df
            .into_iter()
            .map(|(t, d)| (t, (n / d as f64).ln()))
            .collect();
        let mut scorer = Self {
            labels: Arc::new(labels),
            idf,
            proxies: Vec::new(),
            temperature,
        };
        scorer.proxies = token_lists.iter().map(|t| scorer.vector(t)).collect();
        Ok(scorer)
    }

    fn vector(&self, tokens: &[String]) -> HashMap<String, f64> {
        let mut v: HashMap<String, f64> = HashMap::new();
        for t in tokens {
            if let Some(&w) = self.idf.get(t) {
                if w > 0.0 {
                    *v.entry(t.clone()).or_default() += w;
                }
            }
        }
        let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in v.values_mut() {
                *x /= norm;
            }
        }
        v
    }

    /// Cosine of the text against each proxy, in label order.
    pub fn similarities(&self, text: &str, subj: Option<Span>, obj: Option<Span>) -> Vec<f64> {
        let spans: Vec<Span> = subj.into_iter().chain(obj).collect();
        let v = self.vector(&tokenize_outside(text, &spans));
        self.proxies
            .iter()
            .map(|p| v.iter().map(|(t, x)| x * p.get(t).copied().unwrap_or(0.0)).sum())
            .collect()
    }
}

impl RelationScorer for LexicalScorer {
    fn labels(&self) -> Arc<Vec<String>> {
        self.labels.clone()
    }

    fn score(&self, text: &str, subj: Option<Span>, obj: Option<Span>) -> Result<LabelDistribution> {
        let sims = self.similarities(text, subj, obj);
        let max = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = sims
            .iter()
            .map(|s| ((s - max) / self.temperature).exp())
            .collect();
        let z: f64 = exps.iter().sum();
        LabelDistribution::new(self.labels.clone(), exps.into_iter().map(|e| e / z).collect())
    }
}

const UNIT_SEPARATOR: char = '\u{1f}';

/// Scorer backed by an external process speaking a line protocol.
///
/// Request: `text US subj_start,subj_end US obj_start,obj_end` (empty field
/// for an absent span). Response: `label:prob,label:prob,...`. Calls are
/// serialized over one child process.
pub struct SubprocessScorer {
    labels: Arc<Vec<String>>,
    io: Mutex<(Child, ChildStdin, BufReader<ChildStdout>)>,
}

impl SubprocessScorer {
    pub fn spawn(program: &str, args: &[String], labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Config("subprocess scorer needs a label set".into()));
        }
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Config(format!("cannot start RE scorer {program}: {e}")))?;
        let stdin = child.stdin.take().ok_or_else(|| Error::Config("no stdin".into()))?;
        let stdout = child.stdout.take().ok_or_else(|| Error::Config("no stdout".into()))?;
        Ok(Self {
            labels: Arc::new(labels),
            io: Mutex::new((child, stdin, BufReader::new(stdout))),
        })
    }

    pub fn encode_request(text: &str, subj: Option<Span>, obj: Option<Span>) -> String {
        let clean: String = text
            .chars()
            .map(|c| if c == '\n' || c == '\r' || c == UNIT_SEPARATOR { ' ' } else { c })
            .collect();
        let span = |s: Option<Span>| s.map(|(a, b)| format!("{a},{b}")).unwrap_or_default();
        format!("{clean}{UNIT_SEPARATOR}{}{UNIT_SEPARATOR}{}\n", span(subj), span(obj))
    }

    pub fn decode_response(labels: &Arc<Vec<String>>, line: &str) -> Result<LabelDistribution> {
        let mut probs = vec![0.0; labels.len()];
        for item in line.trim().split(',').filter(|s| !s.trim().is_empty()) {
            let (label, p) = item
                .rsplit_once(':')
                .ok_or_else(|| Error::Contract(format!("bad scorer record {item:?}")))?;
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|_| Error::Contract(format!("bad probability in {item:?}")))?;
            let i = labels
                .iter()
                .position(|l| l == label.trim())
                .ok_or_else(|| Error::Contract(format!("scorer returned unknown label {label:?}")))?;
            probs[i] += p;
        }
        LabelDistribution::new(labels.clone(), probs)
    }
}

impl RelationScorer for SubprocessScorer {
    fn labels(&self) -> Arc<Vec<String>> {
        self.labels.clone()
    }

    fn score(&self, text: &str, subj: Option<Span>, obj: Option<Span>) -> Result<LabelDistribution> {
        let mut guard = self
            .io
            .lock()
            .map_err(|_| Error::Invariant("RE scorer lock poisoned".into()))?;
        let (_, stdin, stdout) = &mut *guard;
        let req = Self::encode_request(text, subj, obj);
        stdin
            .write_all(req.as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::Contract(format!("RE scorer write failed: {e}")))?;
        let mut line = String::new();
        let n = stdout
            .read_line(&mut line)
            .map_err(|e| Error::Contract(format!("RE scorer read failed: {e}")))?;
        if n == 0 {
            return Err(Error::Contract("RE scorer closed its output".into()));
        }
        Self::decode_response(&self.labels, &line)
    }
}

impl Drop for SubprocessScorer {
    fn drop(&mut self) {
        if let Ok(mut g) = self.io.lock() {
            let _ = g.0.kill();
            let _ = g.0.wait();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub relation: String,
    pub prob: f64,
    /// Another relation reached the same agreement.
    pub tie: bool,
}

/// Agreements this close count as equal; summation order alone moves them
/// by a few ulps.
const TIE_EPS: f64 = 1e-12;

/// Proxy table plus scorer, with the proxy distributions precomputed and
/// document results memoized.
pub struct ReAligner {
    table: ProxyTextTable,
    scorer: Arc<dyn RelationScorer>,
    proxy_dists: BTreeMap<String, LabelDistribution>,
    pair_cache: Mutex<HashMap<(String, String, String), Arc<LabelDistribution>>>,
    align_cache: Mutex<HashMap<String, Alignment>>,
}

impl std::fmt::Debug for ReAligner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReAligner")
            .field("relations", &self.table.len())
            .finish()
    }
}

impl ReAligner {
    pub fn new(table: ProxyTextTable, scorer: Arc<dyn RelationScorer>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::Config("no proxy texts loaded".into()));
        }
        let mut proxy_dists = BTreeMap::new();
        for (rel, p) in table.iter() {
            proxy_dists.insert(rel.to_string(), scorer.score(&p.text, Some(p.subj), Some(p.obj))?);
        }
        Ok(Self {
            table,
            scorer,
            proxy_dists,
            pair_cache: Mutex::new(HashMap::new()),
            align_cache: Mutex::new(HashMap::new()),
        })
    }

    /// Aligner over the built-in lexical scorer.
    pub fn lexical(table: ProxyTextTable) -> Result<Self> {
        let scorer = LexicalScorer::new(&table, DEFAULT_TEMPERATURE)?;
        Self::new(table, Arc::new(scorer))
    }

    pub fn table(&self) -> &ProxyTextTable {
        &self.table
    }

    pub fn scorer(&self) -> &dyn RelationScorer {
        self.scorer.as_ref()
    }

    pub fn proxy_distribution(&self, relation: &str) -> Option<&LabelDistribution> {
        self.proxy_dists.get(relation)
    }

    fn pair_distribution(&self, doc: &Document, subj: &str, obj: &str) -> Result<Arc<LabelDistribution>> {
        let key = (doc.doc_id.clone(), subj.to_string(), obj.to_string());
        if let Some(d) = self.pair_cache.lock().ok().and_then(|c| c.get(&key).cloned()) {
            return Ok(d);
        }
        let d = Arc::new(label_distribution(self.scorer.as_ref(), doc, subj, obj)?);
        if let Ok(mut c) = self.pair_cache.lock() {
            c.insert(key, d.clone());
        }
        Ok(d)
    }

    /// Agreement between the document's reading of `(subj, obj)` and the
    /// proxy text of `relation`.
    pub fn support(&self, doc: &Document, subj: &str, obj: &str, relation: &str) -> Result<f64> {
        let proxy = self
            .proxy_dists
            .get(relation)
            .ok_or_else(|| Error::Config(format!("no proxy text for relation {relation}")))?;
        agreement(&*self.pair_distribution(doc, subj, obj)?, proxy)
    }

    /// The relation whose proxy text best agrees with the document, taking the
    /// best ordered pair of mentioned entities per relation. Ties go to the
    /// first relation by name.
    pub fn align(&self, doc: &Document) -> Result<Alignment> {
        if let Some(a) = self.align_cache.lock().ok().and_then(|c| c.get(&doc.doc_id).cloned()) {
            return Ok(a);
        }
        let ents = doc.mentioned_entities();
        let mut dists = Vec::new();
        for &x in &ents {
            for &y in &ents {
                if x != y {
                    dists.push(self.pair_distribution(doc, x, y)?);
                }
            }
        }
        if dists.is_empty() {
            dists.push(Arc::new(self.scorer.score(&doc.text, None, None)?));
        }
        let mut best: Option<Alignment> = None;
        for (rel, proxy) in &self.proxy_dists {
            let mut score = 0.0f64;
            for d in &dists {
                score = score.max(agreement(d, proxy)?);
            }
            match &mut best {
                None => {
                    best = Some(Alignment {
                        relation: rel.clone(),
                        prob: score,
                        tie: false,
                    })
                }
                Some(b) if score > b.prob + TIE_EPS => {
                    *b = Alignment {
                        relation: rel.clone(),
                        prob: score,
                        tie: false,
                    }
                }
                Some(b) if score >= b.prob - TIE_EPS => b.tie = true,
                Some(_) => {}
            }
        }
        let a = best.ok_or_else(|| Error::Config("no proxy texts loaded".into()))?;
        if let Ok(mut c) = self.align_cache.lock() {
            c.insert(doc.doc_id.clone(), a.clone());
        }
        Ok(a)
    }
}

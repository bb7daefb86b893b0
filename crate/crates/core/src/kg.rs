//! In-memory knowledge graph: symbolic fact triples, free-form (text-derived)
//! triples, adjacency in both directions, sub-KB extraction and all-shortest-path
//! enumeration.
//!
//! Entities, symbolic relations and documents are interned to dense `u32` ids.
//! A graph is built single-threaded and is read-only afterwards; removing triples
//! produces a new graph that keeps every id stable.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::casebase::{ChainStep, InferentialChain};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DocId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Interned edge label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Symbolic(RelationId),
    FreeForm(DocId),
}

impl Rel {
    pub fn is_symbolic(self) -> bool {
        matches!(self, Rel::Symbolic(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Forward => Direction::Inverse,
            Direction::Inverse => Direction::Forward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Symbolic,
    FreeForm,
}

/// A relation by name: a symbolic relation of R, or a document id for a
/// free-form relation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationLabel {
    pub kind: LabelKind,
    pub name: String,
}

impl RelationLabel {
    pub fn symbolic(name: impl Into<String>) -> Self {
        Self {
            kind: LabelKind::Symbolic,
            name: name.into(),
        }
    }

    pub fn free_form(doc_id: impl Into<String>) -> Self {
        Self {
            kind: LabelKind::FreeForm,
            name: doc_id.into(),
        }
    }

    pub fn is_symbolic(&self) -> bool {
        self.kind == LabelKind::Symbolic
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LabelKind::Symbolic => f.write_str(&self.name),
            LabelKind::FreeForm => write!(f, "@{}", self.name),
        }
    }
}

/// Entity mention inside a document. Offsets count Unicode scalar values,
/// 0-based and end-exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub entity: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub mentions: Vec<Mention>,
}

impl Document {
    pub fn validate(&self) -> Result<()> {
        let len = self.text.chars().count();
        for m in &self.mentions {
            if m.entity.is_empty() {
                return Err(Error::Validation(format!(
                    "document {}: mention with empty entity",
                    self.doc_id
                )));
            }
            if m.start >= m.end || m.end > len {
                return Err(Error::Validation(format!(
                    "document {}: mention {} span {}..{} outside text of length {}",
                    self.doc_id, m.entity, m.start, m.end, len
                )));
            }
        }
        Ok(())
    }

    /// Distinct mentioned entities in order of first appearance.
    pub fn mentioned_entities(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.mentions
            .iter()
            .filter(|m| seen.insert(m.entity.as_str()))
            .map(|m| m.entity.as_str())
            .collect()
    }

    pub fn first_span(&self, entity: &str) -> Option<(usize, usize)> {
        self.mentions
            .iter()
            .find(|m| m.entity == entity)
            .map(|m| (m.start, m.end))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: Rel,
    pub object: EntityId,
}

/// One adjacency entry as seen from an entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub rel: Rel,
    pub direction: Direction,
    pub other: EntityId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Step {
    pub rel: Rel,
    pub direction: Direction,
}

/// A concrete path `[e_q, ..., e_a]` through the graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ReasoningChain {
    pub nodes: Vec<EntityId>,
    pub steps: Vec<Step>,
}

impl ReasoningChain {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn inferential(&self, kg: &KnowledgeGraph) -> InferentialChain {
        InferentialChain::new(
            self.steps
                .iter()
                .map(|s| ChainStep {
                    label: kg.label(s.rel),
                    direction: s.direction,
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub entities: usize,
    pub relations: usize,
    pub triples: usize,
    pub duplicates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathOptions {
    pub max_len: usize,
    pub include_text: bool,
    pub forward_only: bool,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            max_len: 4,
            include_text: true,
            forward_only: false,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    entity_names: Vec<String>,
    entity_index: HashMap<String, EntityId>,
    relation_names: Vec<String>,
    relation_index: HashMap<String, RelationId>,
    documents: Vec<Document>,
    doc_index: HashMap<String, DocId>,
    triples: Vec<Triple>,
    triple_set: HashSet<Triple>,
    out_edges: Vec<Vec<(Rel, EntityId)>>,
    in_edges: Vec<Vec<(Rel, EntityId)>>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    // ---- construction ----

    pub fn intern_entity(&mut self, name: &str) -> EntityId {
        if let Some(&id) = self.entity_index.get(name) {
            return id;
        }
        let id = EntityId(self.entity_names.len() as u32);
        self.entity_names.push(name.to_string());
        self.entity_index.insert(name.to_string(), id);
        self.out_edges.push(Vec::new());
        self.in_edges.push(Vec::new());
        id
    }

    pub fn declare_relation(&mut self, name: &str) -> RelationId {
        if let Some(&id) = self.relation_index.get(name) {
            return id;
        }
        let id = RelationId(self.relation_names.len() as u32);
        self.relation_names.push(name.to_string());
        self.relation_index.insert(name.to_string(), id);
        id
    }

    /// Inserts a triple; returns false when it was already present.
    pub fn insert(&mut self, triple: Triple) -> bool {
        if !self.triple_set.insert(triple) {
            return false;
        }
        self.triples.push(triple);
        self.out_edges[triple.subject.index()].push((triple.relation, triple.object));
        self.in_edges[triple.object.index()].push((triple.relation, triple.subject));
        true
    }

    pub fn add_fact(&mut self, subject: &str, relation: &str, object: &str) -> bool {
        let s = self.intern_entity(subject);
        let r = self.declare_relation(relation);
        let o = self.intern_entity(object);
        self.insert(Triple {
            subject: s,
            relation: Rel::Symbolic(r),
            object: o,
        })
    }

    /// Parses a line-oriented triple dump. Blank lines and lines starting with
    /// `#` are skipped. When `declared` is given, every relation must be in it.
    pub fn ingest_kb<R: BufRead>(
        reader: R,
        source_name: &str,
        delimiter: char,
        declared: Option<&[String]>,
    ) -> Result<(Self, IngestReport)> {
        let mut kg = KnowledgeGraph::new();
        let declared_set: Option<HashSet<&str>> =
            declared.map(|d| d.iter().map(String::as_str).collect());
        if let Some(d) = declared {
            for name in d {
                kg.declare_relation(name);
            }
        }
        let mut report = IngestReport::default();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::io(source_name, e))?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(delimiter).map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("expected 3 fields, found {}", fields.len()),
                ));
            }
            if let Some(pos) = fields.iter().position(|f| f.is_empty()) {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("field {} is empty", pos + 1),
                ));
            }
            if let Some(set) = &declared_set {
                if !set.contains(fields[1]) {
                    return Err(Error::parse(
                        source_name,
                        line_no,
                        format!("relation {} is not declared", fields[1]),
                    ));
                }
            }
            if !kg.add_fact(fields[0], fields[1], fields[2]) {
                report.duplicates += 1;
            }
        }
        report.entities = kg.entity_count();
        report.relations = kg.relation_count();
        report.triples = kg.triple_count();
        Ok((kg, report))
    }

    pub fn load_kb(
        path: &Path,
        delimiter: char,
        declared: Option<&[String]>,
    ) -> Result<(Self, IngestReport)> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::ingest_kb(
            std::io::BufReader::new(file),
            &path.display().to_string(),
            delimiter,
            declared,
        )
    }

    /// Registers documents and adds one free-form triple per ordered pair of
    /// distinct entities mentioned in each. Returns the number of new triples.
    pub fn add_text_edges(&mut self, documents: Vec<Document>) -> Result<usize> {
        for d in &documents {
            d.validate()?;
            if self.doc_index.contains_key(&d.doc_id) {
                return Err(Error::Validation(format!(
                    "duplicate document id {}",
                    d.doc_id
                )));
            }
        }
        let mut added = 0;
        for doc in documents {
            let doc_id = DocId(self.documents.len() as u32);
            self.doc_index.insert(doc.doc_id.clone(), doc_id);
            let ents: Vec<EntityId> = doc
                .mentioned_entities()
                .into_iter()
                .map(|name| self.intern_entity(name))
                .collect();
            self.documents.push(doc);
            for &a in &ents {
                for &b in &ents {
                    if a != b
                        && self.insert(Triple {
                            subject: a,
                            relation: Rel::FreeForm(doc_id),
                            object: b,
                        })
                    {
                        added += 1;
                    }
                }
            }
        }
        Ok(added)
    }

    /// Copy of this graph without the given triples. Entity, relation and
    /// document ids are unchanged.
    pub fn without_triples(&self, removed: &HashSet<Triple>) -> KnowledgeGraph {
        let mut kg = KnowledgeGraph {
            entity_names: self.entity_names.clone(),
            entity_index: self.entity_index.clone(),
            relation_names: self.relation_names.clone(),
            relation_index: self.relation_index.clone(),
            documents: self.documents.clone(),
            doc_index: self.doc_index.clone(),
            triples: Vec::with_capacity(self.triples.len()),
            triple_set: HashSet::with_capacity(self.triples.len()),
            out_edges: vec![Vec::new(); self.entity_names.len()],
            in_edges: vec![Vec::new(); self.entity_names.len()],
        };
        for t in &self.triples {
            if !removed.contains(t) {
                kg.insert(*t);
            }
        }
        kg
    }

    /// Copy of this graph with every free-form triple and document removed.
    pub fn symbolic_only(&self) -> KnowledgeGraph {
        let mut kg = KnowledgeGraph {
            entity_names: self.entity_names.clone(),
            entity_index: self.entity_index.clone(),
            relation_names: self.relation_names.clone(),
            relation_index: self.relation_index.clone(),
            out_edges: vec![Vec::new(); self.entity_names.len()],
            in_edges: vec![Vec::new(); self.entity_names.len()],
            ..Default::default()
        };
        for t in self.triples.iter().filter(|t| t.relation.is_symbolic()) {
            kg.insert(*t);
        }
        kg
    }

    // ---- lookups ----

    pub fn entity_count(&self) -> usize {
        self.entity_names.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relation_names.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn symbolic_triple_count(&self) -> usize {
        self.triples.iter().filter(|t| t.relation.is_symbolic()).count()
    }

    pub fn document_count(&self) -> usize {
        self.documents.len()
    }

    pub fn entity(&self, name: &str) -> Option<EntityId> {
        self.entity_index.get(name).copied()
    }

    pub fn require_entity(&self, name: &str) -> Result<EntityId> {
        self.entity(name)
            .ok_or_else(|| Error::NotFound(format!("entity {name}")))
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entity_names[id.index()]
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.entity_names.len() as u32).map(EntityId)
    }

    pub fn relation(&self, name: &str) -> Option<RelationId> {
        self.relation_index.get(name).copied()
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relation_names[id.index()]
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relation_names
    }

    pub fn relations(&self) -> impl Iterator<Item = RelationId> + '_ {
        (0..self.relation_names.len() as u32).map(RelationId)
    }

    pub fn document(&self, id: DocId) -> &Document {
        &self.documents[id.0 as usize]
    }

    pub fn document_id(&self, doc_id: &str) -> Option<DocId> {
        self.doc_index.get(doc_id).copied()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triple_set.contains(triple)
    }

    pub fn has_symbolic(&self, s: EntityId, r: RelationId, o: EntityId) -> bool {
        self.contains(&Triple {
            subject: s,
            relation: Rel::Symbolic(r),
            object: o,
        })
    }

    pub fn label(&self, rel: Rel) -> RelationLabel {
        match rel {
            Rel::Symbolic(r) => RelationLabel::symbolic(self.relation_name(r)),
            Rel::FreeForm(d) => RelationLabel::free_form(&self.document(d).doc_id),
        }
    }

    pub fn resolve(&self, label: &RelationLabel) -> Option<Rel> {
        match label.kind {
            LabelKind::Symbolic => self.relation(&label.name).map(Rel::Symbolic),
            LabelKind::FreeForm => self.document_id(&label.name).map(Rel::FreeForm),
        }
    }

    pub fn out_edges(&self, e: EntityId) -> &[(Rel, EntityId)] {
        &self.out_edges[e.index()]
    }

    pub fn in_edges(&self, e: EntityId) -> &[(Rel, EntityId)] {
        &self.in_edges[e.index()]
    }

    /// Entities reached from `e` by one `rel` step in `direction`.
    pub fn step_targets(
        &self,
        e: EntityId,
        rel: Rel,
        direction: Direction,
    ) -> impl Iterator<Item = EntityId> + '_ {
        let list = match direction {
            Direction::Forward => &self.out_edges[e.index()],
            Direction::Inverse => &self.in_edges[e.index()],
        };
        list.iter()
            .filter(move |(r, _)| *r == rel)
            .map(|&(_, other)| other)
    }

    /// All edges incident to `e`: outgoing as Forward, incoming as Inverse.
    /// Ordered by relation name, then neighbor name, then direction.
    pub fn neighbors(&self, e: EntityId, include_text: bool) -> Result<Vec<Edge>> {
        if e.index() >= self.entity_count() {
            return Err(Error::NotFound(format!("entity id {}", e.0)));
        }
        let mut edges: Vec<Edge> = self.out_edges[e.index()]
            .iter()
            .map(|&(rel, other)| Edge {
                rel,
                direction: Direction::Forward,
                other,
            })
            .chain(self.in_edges[e.index()].iter().map(|&(rel, other)| Edge {
                rel,
                direction: Direction::Inverse,
                other,
            }))
            .filter(|edge| include_text || edge.rel.is_symbolic())
            .collect();
        edges.sort_by(|a, b| {
            self.rel_name(a.rel)
                .cmp(self.rel_name(b.rel))
                .then_with(|| self.entity_name(a.other).cmp(self.entity_name(b.other)))
                .then_with(|| a.direction.cmp(&b.direction))
        });
        Ok(edges)
    }

    fn rel_name(&self, rel: Rel) -> &str {
        match rel {
            Rel::Symbolic(r) => self.relation_name(r),
            Rel::FreeForm(d) => &self.document(d).doc_id,
        }
    }

    /// Entities within `hops` undirected steps of `seeds`, over all edges.
    pub fn subkb(&self, seeds: &[EntityId], hops: usize) -> Result<SubKb> {
        if hops == 0 {
            return Err(Error::Contract("subkb hops must be >= 1".into()));
        }
        let n = self.entity_count();
        for s in seeds {
            if s.index() >= n {
                return Err(Error::NotFound(format!("seed entity id {}", s.0)));
            }
        }
        let mut depth: Vec<Option<usize>> = vec![None; n];
        let mut queue = VecDeque::new();
        for &s in seeds {
            if depth[s.index()].is_none() {
                depth[s.index()] = Some(0);
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            let d = depth[u.index()].unwrap_or(0);
            if d == hops {
                continue;
            }
            let out = self.out_edges[u.index()].iter();
            let inc = self.in_edges[u.index()].iter();
            for &(_, v) in out.chain(inc) {
                if depth[v.index()].is_none() {
                    depth[v.index()] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        let member: Vec<bool> = depth.iter().map(Option::is_some).collect();
        Ok(SubKb { member, hops })
    }

    /// Steps leaving `u` that path mining may take. Free-form triples come in
    /// both orders already, so they are only walked forward. Self-loops are
    /// never walked.
    fn path_steps(&self, u: EntityId, opts: &PathOptions) -> Vec<(Step, EntityId)> {
        let mut steps = Vec::new();
        for &(rel, v) in &self.out_edges[u.index()] {
            if v == u || (!opts.include_text && !rel.is_symbolic()) {
                continue;
            }
            steps.push((
                Step {
                    rel,
                    direction: Direction::Forward,
                },
                v,
            ));
        }
        if !opts.forward_only {
            for &(rel, w) in &self.in_edges[u.index()] {
                if w == u || !rel.is_symbolic() {
                    continue;
                }
                steps.push((
                    Step {
                        rel,
                        direction: Direction::Inverse,
                    },
                    w,
                ));
            }
        }
        steps
    }

    /// Steps arriving at `v`, as `(predecessor, step taken from predecessor)`.
    /// Mirror image of `path_steps`.
    fn path_steps_into(&self, v: EntityId, opts: &PathOptions) -> Vec<(EntityId, Step)> {
        let mut steps = Vec::new();
        for &(rel, u) in &self.in_edges[v.index()] {
            if u == v || (!opts.include_text && !rel.is_symbolic()) {
                continue;
            }
            steps.push((
                u,
                Step {
                    rel,
                    direction: Direction::Forward,
                },
            ));
        }
        if !opts.forward_only {
            for &(rel, u) in &self.out_edges[v.index()] {
                if u == v || !rel.is_symbolic() {
                    continue;
                }
                steps.push((
                    u,
                    Step {
                        rel,
                        direction: Direction::Inverse,
                    },
                ));
            }
        }
        steps
    }

    /// Every minimal-length path from `src` to `dst`, or nothing when the
    /// distance exceeds `opts.max_len`.
    pub fn shortest_paths(
        &self,
        src: EntityId,
        dst: EntityId,
        opts: &PathOptions,
    ) -> Vec<ReasoningChain> {
        if src == dst {
            return vec![ReasoningChain {
                nodes: vec![src],
                steps: Vec::new(),
            }];
        }
        let n = self.entity_count();
        let mut dist: Vec<usize> = vec![usize::MAX; n];
        dist[src.index()] = 0;
        let mut frontier = vec![src];
        let mut level = 0;
        while !frontier.is_empty() && dist[dst.index()] == usize::MAX && level < opts.max_len {
            let mut next = Vec::new();
            for &u in &frontier {
                for (_, v) in self.path_steps(u, opts) {
                    if dist[v.index()] == usize::MAX {
                        dist[v.index()] = level + 1;
                        next.push(v);
                    }
                }
            }
            frontier = next;
            level += 1;
        }
        if dist[dst.index()] == usize::MAX {
            return Vec::new();
        }

        // Walk predecessor edges back from dst, one distance layer at a time.
        let mut partial: Vec<(Vec<EntityId>, Vec<Step>)> = vec![(vec![dst], Vec::new())];
        for _ in 0..dist[dst.index()] {
            let mut grown = Vec::new();
            for (nodes, steps) in &partial {
                let v = *nodes.last().unwrap();
                let want = dist[v.index()] - 1;
                let mut preds = self.path_steps_into(v, opts);
                preds.sort();
                preds.dedup();
                for (u, step) in preds {
                    if dist[u.index()] == want {
                        let mut nn = nodes.clone();
                        nn.push(u);
                        let mut ss = steps.clone();
                        ss.push(step);
                        grown.push((nn, ss));
                    }
                }
            }
            partial = grown;
        }
        let mut chains: Vec<ReasoningChain> = partial
            .into_iter()
            .map(|(mut nodes, mut steps)| {
                nodes.reverse();
                steps.reverse();
                ReasoningChain { nodes, steps }
            })
            .collect();
        chains.sort_by_cached_key(|c| self.chain_sort_key(c));
        chains
    }

    fn chain_sort_key(&self, c: &ReasoningChain) -> (Vec<(String, Direction)>, Vec<String>) {
        (
            c.steps
                .iter()
                .map(|s| (self.rel_name(s.rel).to_string(), s.direction))
                .collect(),
            c.nodes
                .iter()
                .map(|&e| self.entity_name(e).to_string())
                .collect(),
        )
    }
}

/// Sub-KB view: the entities within a hop radius of some seeds. Its triples
/// are the parent graph's triples with both endpoints inside.
#[derive(Debug, Clone)]
pub struct SubKb {
    member: Vec<bool>,
    hops: usize,
}

impl SubKb {
    /// A view covering every entity of `kg`.
    pub fn whole(kg: &KnowledgeGraph) -> Self {
        Self {
            member: vec![true; kg.entity_count()],
            hops: usize::MAX,
        }
    }

    pub fn hops(&self) -> usize {
        self.hops
    }

    pub fn contains(&self, e: EntityId) -> bool {
        self.member.get(e.index()).copied().unwrap_or(false)
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.member
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| EntityId(i as u32))
    }

    pub fn entity_count(&self) -> usize {
        self.member.iter().filter(|&&m| m).count()
    }

    pub fn triples<'a>(&'a self, kg: &'a KnowledgeGraph) -> impl Iterator<Item = &'a Triple> + 'a {
        kg.triples()
            .iter()
            .filter(move |t| self.contains(t.subject) && self.contains(t.object))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kg_from(lines: &str) -> KnowledgeGraph {
        KnowledgeGraph::ingest_kb(lines.as_bytes(), "test", '\t', None)
            .unwrap()
            .0
    }

    fn doc(id: &str, text: &str, ents: &[&str]) -> Document {
        let mentions = ents
            .iter()
            .map(|e| {
                let byte = text.find(e).unwrap();
                let start = text[..byte].chars().count();
                Mention {
                    entity: e.to_string(),
                    start,
                    end: start + e.chars().count(),
                }
            })
            .collect();
        Document {
            doc_id: id.into(),
            text: text.into(),
            mentions,
        }
    }

    #[test]
    fn ingest_empty() {
        let (kg, rep) = KnowledgeGraph::ingest_kb("".as_bytes(), "t", '\t', None).unwrap();
        assert_eq!(kg.entity_count(), 0);
        assert_eq!(rep.triples, 0);
    }

    #[test]
    fn ingest_dedups() {
        let (_, rep) =
            KnowledgeGraph::ingest_kb("a\tr\tb\na\tr\tb\nb\tr\tc\n".as_bytes(), "t", '\t', None)
                .unwrap();
        assert_eq!(rep.triples, 2);
        assert_eq!(rep.duplicates, 1);
        assert_eq!(rep.entities, 3);
        assert_eq!(rep.relations, 1);
    }

    #[test]
    fn ingest_pipe_and_comments() {
        let (kg, rep) =
            KnowledgeGraph::ingest_kb("# header\n\na|r|b\n".as_bytes(), "t", '|', None).unwrap();
        assert_eq!(rep.triples, 1);
        assert!(kg.entity("a").is_some());
    }

    #[test]
    fn ingest_reports_line_numbers() {
        let err = KnowledgeGraph::ingest_kb("a\tr\tb\na\tr\n".as_bytes(), "kb", '\t', None)
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let err =
            KnowledgeGraph::ingest_kb("a\t\tb\n".as_bytes(), "kb", '\t', None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn ingest_rejects_undeclared_relation() {
        let declared = vec!["r".to_string()];
        let err = KnowledgeGraph::ingest_kb("a\tq\tb\n".as_bytes(), "kb", '\t', Some(&declared))
            .unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn text_edges_ordered_pairs() {
        let mut kg = kg_from("X\tdirected\tY\n");
        let before = kg.symbolic_triple_count();
        assert_eq!(kg.add_text_edges(vec![doc("d1", "X directed Y", &["X", "Y"])]).unwrap(), 2);
        assert_eq!(kg.add_text_edges(vec![doc("d2", "only X here", &["X"])]).unwrap(), 0);
        assert_eq!(
            kg.add_text_edges(vec![doc("d3", "A and B and C", &["A", "B", "C"])])
                .unwrap(),
            6
        );
        assert_eq!(kg.symbolic_triple_count(), before);
        assert!(kg.entity("C").is_some());
    }

    #[test]
    fn text_edges_validate_spans() {
        let mut kg = KnowledgeGraph::new();
        let bad = Document {
            doc_id: "d".into(),
            text: "abc".into(),
            mentions: vec![Mention {
                entity: "a".into(),
                start: 1,
                end: 9,
            }],
        };
        assert!(matches!(
            kg.add_text_edges(vec![bad]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn neighbors_directions() {
        let kg = kg_from("a\tr\tb\nc\ts\ta\n");
        let a = kg.entity("a").unwrap();
        let ns = kg.neighbors(a, true).unwrap();
        assert_eq!(ns.len(), 2);
        assert_eq!(ns[0].direction, Direction::Forward);
        assert_eq!(ns[1].direction, Direction::Inverse);
        let mut iso = kg.clone();
        let z = iso.intern_entity("z");
        assert!(iso.neighbors(z, true).unwrap().is_empty());
        assert!(kg.neighbors(EntityId(99), true).is_err());
    }

    #[test]
    fn neighbors_filter_text() {
        let mut kg = kg_from("a\tr\tb\n");
        kg.add_text_edges(vec![doc("d", "a near c", &["a", "c"])]).unwrap();
        let a = kg.entity("a").unwrap();
        assert_eq!(kg.neighbors(a, true).unwrap().len(), 3);
        let sym = kg.neighbors(a, false).unwrap();
        assert_eq!(sym.len(), 1);
        assert!(sym[0].rel.is_symbolic());
    }

    #[test]
    fn subkb_depth() {
        let kg = kg_from("a\tr\tb\nb\tr\tc\nc\tr\td\n");
        let a = kg.entity("a").unwrap();
        let sub = kg.subkb(&[a], 2).unwrap();
        let names: Vec<&str> = sub.entities().map(|e| kg.entity_name(e)).collect();
        assert_eq!(names, vec!["a", "b", "c"]);
        assert_eq!(sub.triples(&kg).count(), 2);
        assert!(kg.subkb(&[a], 0).is_err());
        assert!(kg.subkb(&[EntityId(42)], 1).is_err());
    }

    #[test]
    fn subkb_star() {
        let kg = kg_from("hub\tr\tx1\nx2\tr\thub\nhub\tq\tx3\n");
        let hub = kg.entity("hub").unwrap();
        assert_eq!(kg.subkb(&[hub], 2).unwrap().entity_count(), 4);
    }

    #[test]
    fn shortest_paths_basics() {
        let kg = kg_from("a\tr\tb\nb\tr\td\na\ts\tc\nc\ts\td\n");
        let a = kg.entity("a").unwrap();
        let d = kg.entity("d").unwrap();
        let same = kg.shortest_paths(a, a, &PathOptions::default());
        assert_eq!(same.len(), 1);
        assert!(same[0].is_empty());
        let paths = kg.shortest_paths(a, d, &PathOptions::default());
        assert_eq!(paths.len(), 2);
        assert!(paths.iter().all(|p| p.len() == 2));
        let short = PathOptions {
            max_len: 1,
            ..Default::default()
        };
        assert!(kg.shortest_paths(a, d, &short).is_empty());
    }

    #[test]
    fn shortest_paths_inverse_and_forward_only() {
        let kg = kg_from("m\tdirected_by\tp\nm2\tdirected_by\tp\n");
        let m = kg.entity("m").unwrap();
        let m2 = kg.entity("m2").unwrap();
        let paths = kg.shortest_paths(m, m2, &PathOptions::default());
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].steps[1].direction, Direction::Inverse);
        let fwd = PathOptions {
            forward_only: true,
            ..Default::default()
        };
        assert!(kg.shortest_paths(m, m2, &fwd).is_empty());
    }

    #[test]
    fn self_loops_never_walked() {
        let kg = kg_from("a\tr\ta\na\tr\tb\n");
        let a = kg.entity("a").unwrap();
        let b = kg.entity("b").unwrap();
        let paths = kg.shortest_paths(a, b, &PathOptions::default());
        assert_eq!(paths.len(), 1);
    }

    #[test]
    fn without_triples_keeps_ids() {
        let kg = kg_from("a\tr\tb\nb\tr\tc\n");
        let t = kg.triples()[0];
        let reduced = kg.without_triples(&[t].into_iter().collect());
        assert_eq!(reduced.triple_count(), 1);
        assert_eq!(reduced.entity("a"), kg.entity("a"));
        assert_eq!(reduced.entity_count(), 3);
    }
}

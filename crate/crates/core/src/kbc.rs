//! ComplEx knowledge-base completion.
//!
//! Scores are `Re(<e_s, w_r, conj(e_o)>)`. Training minimizes binary
//! cross-entropy over observed triples and uniformly corrupted negatives with
//! per-parameter Adagrad steps. A Platt-style sigmoid fitted on a held-out
//! split maps raw scores to probabilities so they can be mixed with
//! relation-extraction agreements.
//!
//! Entity and relation rows are indexed by the ids of the graph the model was
//! trained on; a model read from disk is re-indexed with [`ComplExModel::aligned_to`].

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, Rel, RelationId};
use crate::rng::StableRng;

const MODEL_MAGIC: &[u8; 4] = b"CBRK";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbcTrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub negatives_per_positive: usize,
    pub l2_weight: f64,
    pub seed: u64,
    /// Share of triples held out for fitting the calibration sigmoid.
    pub calibration_fraction: f64,
}

impl Default for KbcTrainConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            epochs: 100,
            learning_rate: 0.1,
            negatives_per_positive: 16,
            l2_weight: 1e-4,
            seed: 0,
            calibration_fraction: 0.1,
        }
    }
}

impl KbcTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0
            || self.epochs == 0
            || self.negatives_per_positive == 0
            || self.learning_rate.is_nan() || self.learning_rate <= 0.0
            || self.l2_weight < 0.0
            || !(0.0..1.0).contains(&self.calibration_fraction)
        {
            return Err(Error::Config(format!("invalid KBC training config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub scale: f64,
    pub bias: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            scale: 1.0,
            bias: 0.0,
        }
    }
}

/// Row-major complex parameters: `re[row * dim + k]`, `im[row * dim + k]`.
#[derive(Debug, Clone, PartialEq)]
struct Block {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Block {
    fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            re: vec![0.0; rows * dim],
            im: vec![0.0; rows * dim],
        }
    }

    fn random(rows: usize, dim: usize, rng: &mut StableRng, scale: f64) -> Self {
        let mut b = Self::zeros(rows, dim);
        for v in b.re.iter_mut().chain(b.im.iter_mut()) {
            *v = rng.uniform(-scale, scale);
        }
        b
    }

    fn all_finite(&self) -> bool {
        self.re.iter().chain(&self.im).all(|v| v.is_finite())
    }
}

/// Which parameter table a gradient row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Table {
    Entity,
    Relation,
}

/// One labelled triple, by row index. `weight` scales its loss term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub subject: usize,
    pub relation: usize,
    pub object: usize,
    pub label: f64,
    pub weight: f64,
}

/// Sparse gradient: `(table, row) -> [d_re..., d_im...]`.
#[derive(Debug, Clone, Default)]
pub struct SparseGrad {
    pub rows: HashMap<(Table, usize), Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplExModel {
    dim: usize,
    entity_names: Vec<String>,
    relation_names: Vec<String>,
    entities: Block,
    relations: Block,
    pub calibration: Calibration,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Largest f64 below 1; calibrated probabilities never reach 1.
const PROB_CEILING: f64 = 1.0 - f64::EPSILON / 2.0;

impl ComplExModel {
    /// Model with all-zero parameters sized for `kg`.
    pub fn zeros(kg: &KnowledgeGraph, dim: usize) -> Self {
        Self {
            dim,
            entity_names: kg.entities().map(|e| kg.entity_name(e).to_string()).collect(),
            relation_names: kg.relation_names().to_vec(),
            entities: Block::zeros(kg.entity_count(), dim),
            relations: Block::zeros(kg.relation_count(), dim),
            calibration: Calibration::default(),
        }
    }

    pub fn random(kg: &KnowledgeGraph, dim: usize, seed: u64, scale: f64) -> Self {
        let mut rng = StableRng::new(seed);
        Self {
            dim,
            entity_names: kg.entities().map(|e| kg.entity_name(e).to_string()).collect(),
            relation_names: kg.relation_names().to_vec(),
            entities: Block::random(kg.entity_count(), dim, &mut rng, scale),
            relations: Block::random(kg.relation_count(), dim, &mut rng, scale),
            calibration: Calibration::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entity_count(&self) -> usize {
        self.entity_names.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relation_names.len()
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entity_names
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relation_names
    }

    fn table(&self, t: Table) -> &Block {
        match t {
            Table::Entity => &self.entities,
            Table::Relation => &self.relations,
        }
    }

    fn table_mut(&mut self, t: Table) -> &mut Block {
        match t {
            Table::Entity => &mut self.entities,
            Table::Relation => &mut self.relations,
        }
    }

    /// Parameter `k` of a row, with `k < dim` addressing the real part and
    /// `dim <= k < 2*dim` the imaginary part.
    pub fn param(&self, t: Table, row: usize, k: usize) -> f64 {
        let b = self.table(t);
        if k < self.dim {
            b.re[row * self.dim + k]
        } else {
            b.im[row * self.dim + k - self.dim]
        }
    }

    pub fn set_param(&mut self, t: Table, row: usize, k: usize, v: f64) {
        let dim = self.dim;
        let b = self.table_mut(t);
        if k < dim {
            b.re[row * dim + k] = v;
        } else {
            b.im[row * dim + k - dim] = v;
        }
    }

    pub fn set_entity(&mut self, row: usize, re: &[f64], im: &[f64]) {
        let d = self.dim;
        self.entities.re[row * d..(row + 1) * d].copy_from_slice(re);
        self.entities.im[row * d..(row + 1) * d].copy_from_slice(im);
    }

    pub fn set_relation(&mut self, row: usize, re: &[f64], im: &[f64]) {
        let d = self.dim;
        self.relations.re[row * d..(row + 1) * d].copy_from_slice(re);
        self.relations.im[row * d..(row + 1) * d].copy_from_slice(im);
    }

    fn check(&self, s: EntityId, r: RelationId, o: EntityId) -> Result<()> {
        if s.index() >= self.entity_count() || o.index() >= self.entity_count() {
            return Err(Error::NotFound(format!(
                "entity id {} or {} not in KBC model",
                s.0, o.0
            )));
        }
        if r.index() >= self.relation_count() {
            return Err(Error::NotFound(format!("relation id {} not in KBC model", r.0)));
        }
        Ok(())
    }

    fn raw(&self, s: usize, r: usize, o: usize) -> f64 {
        let d = self.dim;
        let (es_re, es_im) = (&self.entities.re[s * d..(s + 1) * d], &self.entities.im[s * d..(s + 1) * d]);
        let (w_re, w_im) = (&self.relations.re[r * d..(r + 1) * d], &self.relations.im[r * d..(r + 1) * d]);
        let (eo_re, eo_im) = (&self.entities.re[o * d..(o + 1) * d], &self.entities.im[o * d..(o + 1) * d]);
        let mut acc = 0.0;
        for k in 0..d {
            acc += es_re[k] * w_re[k] * eo_re[k] + es_im[k] * w_re[k] * eo_im[k]
                + es_re[k] * w_im[k] * eo_im[k]
                - es_im[k] * w_im[k] * eo_re[k];
        }
        acc
    }

    /// `Re(sum_d e_s[d] * w_r[d] * conj(e_o[d]))`.
    pub fn complex_score(&self, s: EntityId, r: RelationId, o: EntityId) -> Result<f64> {
        self.check(s, r, o)?;
        Ok(self.raw(s.index(), r.index(), o.index()))
    }

    pub fn prob_of_score(&self, raw: f64) -> f64 {
        sigmoid(self.calibration.scale * raw + self.calibration.bias).min(PROB_CEILING)
    }

    pub fn kbc_prob(&self, s: EntityId, r: RelationId, o: EntityId) -> Result<f64> {
        Ok(self.prob_of_score(self.complex_score(s, r, o)?))
    }

    /// Raw scores of `(s, r, x)` for every entity `x`.
    fn object_scores(&self, s: usize, r: usize) -> Vec<f64> {
        let d = self.dim;
        let mut q_re = vec![0.0; d];
        let mut q_im = vec![0.0; d];
        for k in 0..d {
            let (a, b) = (self.entities.re[s * d + k], self.entities.im[s * d + k]);
            let (c, e) = (self.relations.re[r * d + k], self.relations.im[r * d + k]);
            q_re[k] = a * c - b * e;
            q_im[k] = a * e + b * c;
        }
        (0..self.entity_count())
            .map(|o| {
                let (ore, oim) = (&self.entities.re[o * d..(o + 1) * d], &self.entities.im[o * d..(o + 1) * d]);
                (0..d).map(|k| q_re[k] * ore[k] + q_im[k] * oim[k]).sum()
            })
            .collect()
    }

    /// Raw scores of `(x, r, o)` for every entity `x`.
    fn subject_scores(&self, r: usize, o: usize) -> Vec<f64> {
        let d = self.dim;
        // score = Re(e_s * (w_r * conj(e_o))) = sum s_re*p_re - s_im*p_im
        let mut p_re = vec![0.0; d];
        let mut p_im = vec![0.0; d];
        for k in 0..d {
            let (c, e) = (self.relations.re[r * d + k], self.relations.im[r * d + k]);
            let (a, b) = (self.entities.re[o * d + k], -self.entities.im[o * d + k]);
            p_re[k] = c * a - e * b;
            p_im[k] = c * b + e * a;
        }
        (0..self.entity_count())
            .map(|s| {
                let (sre, sim) = (&self.entities.re[s * d..(s + 1) * d], &self.entities.im[s * d..(s + 1) * d]);
                (0..d).map(|k| sre[k] * p_re[k] - sim[k] * p_im[k]).sum()
            })
            .collect()
    }

    fn top(&self, raw: Vec<f64>, m: usize, threshold: f64) -> Vec<(EntityId, f64)> {
        let mut out: Vec<(EntityId, f64)> = raw
            .into_iter()
            .enumerate()
            .map(|(i, x)| (EntityId(i as u32), self.prob_of_score(x)))
            .filter(|&(_, p)| p > threshold)
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out.truncate(m);
        out
    }

    /// Top-`m` objects of `(s, r, ?)` with probability above `threshold`.
    pub fn predict_objects(
        &self,
        s: EntityId,
        r: RelationId,
        m: usize,
        threshold: f64,
    ) -> Result<Vec<(EntityId, f64)>> {
        self.check(s, r, s)?;
        Ok(self.top(self.object_scores(s.index(), r.index()), m, threshold))
    }

    /// Top-`m` subjects of `(?, r, o)` with probability above `threshold`.
    pub fn predict_subjects(
        &self,
        r: RelationId,
        o: EntityId,
        m: usize,
        threshold: f64,
    ) -> Result<Vec<(EntityId, f64)>> {
        self.check(o, r, o)?;
        Ok(self.top(self.subject_scores(r.index(), o.index()), m, threshold))
    }

    // ---- loss and gradient ----

    /// Weighted BCE over the samples plus an L2 term on every row a sample touches.
    pub fn loss(&self, samples: &[Sample], l2: f64) -> f64 {
        let d = self.dim;
        let sq = |b: &Block, row: usize| -> f64 {
            (0..d)
                .map(|k| b.re[row * d + k].powi(2) + b.im[row * d + k].powi(2))
                .sum()
        };
        samples
            .iter()
            .map(|s| {
                let x = self.raw(s.subject, s.relation, s.object);
                let bce = s.label * softplus(-x) + (1.0 - s.label) * softplus(x);
                let reg = sq(&self.entities, s.subject)
                    + sq(&self.relations, s.relation)
                    + sq(&self.entities, s.object);
                s.weight * (bce + l2 * reg)
            })
            .sum()
    }

    /// Analytic gradient of [`ComplExModel::loss`].
    pub fn gradient(&self, samples: &[Sample], l2: f64) -> SparseGrad {
        let d = self.dim;
        let mut g = SparseGrad::default();
        for smp in samples {
            let x = self.raw(smp.subject, smp.relation, smp.object);
            let dx = smp.weight * (sigmoid(x) - smp.label);
            let (s, r, o) = (smp.subject, smp.relation, smp.object);
            let e = &self.entities;
            let w = &self.relations;
            let mut gs = vec![0.0; 2 * d];
            let mut gr = vec![0.0; 2 * d];
            let mut go = vec![0.0; 2 * d];
            for k in 0..d {
                let (sr, si) = (e.re[s * d + k], e.im[s * d + k]);
                let (rr, ri) = (w.re[r * d + k], w.im[r * d + k]);
                let (or, oi) = (e.re[o * d + k], e.im[o * d + k]);
                let reg = 2.0 * l2 * smp.weight;
                gs[k] = dx * (rr * or + ri * oi) + reg * sr;
                gs[d + k] = dx * (rr * oi - ri * or) + reg * si;
                gr[k] = dx * (sr * or + si * oi) + reg * rr;
                gr[d + k] = dx * (sr * oi - si * or) + reg * ri;
                go[k] = dx * (sr * rr - si * ri) + reg * or;
                go[d + k] = dx * (sr * ri + si * rr) + reg * oi;
            }
            for (key, v) in [
                ((Table::Entity, s), gs),
                ((Table::Relation, r), gr),
                ((Table::Entity, o), go),
            ] {
                let slot = g.rows.entry(key).or_insert_with(|| vec![0.0; 2 * d]);
                for (a, b) in slot.iter_mut().zip(v) {
                    *a += b;
                }
            }
        }
        g
    }

    fn all_finite(&self) -> bool {
        self.entities.all_finite() && self.relations.all_finite()
    }

    // ---- persistence ----

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        for v in [
            MODEL_VERSION,
            self.dim as u32,
            self.entity_count() as u32,
            self.relation_count() as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.calibration.scale.to_le_bytes());
        out.extend_from_slice(&self.calibration.bias.to_le_bytes());
        for name in self.entity_names.iter().chain(&self.relation_names) {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
        }
        for block in [&self.entities, &self.relations] {
            for v in block.re.iter().chain(&block.im) {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut take = |n: usize, what: &str| -> Result<&[u8]> {
            if bytes.len() - pos < n {
                return Err(Error::Format {
                    offset: pos as u64,
                    message: format!("truncated {what}"),
                });
            }
            let s = &bytes[pos..pos + n];
            pos += n;
            Ok(s)
        };
        if take(4, "magic")? != MODEL_MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: "bad magic, expected CBRK".into(),
            });
        }
        let u32_at = |b: &[u8]| u32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        let version = u32_at(take(4, "version")?);
        if version != MODEL_VERSION {
            return Err(Error::Format {
                offset: 4,
                message: format!("unsupported model version {version}"),
            });
        }
        let dim = u32_at(take(4, "dim")?) as usize;
        let n_ent = u32_at(take(4, "entity count")?) as usize;
        let n_rel = u32_at(take(4, "relation count")?) as usize;
        let f64_at = |b: &[u8]| {
            let mut a = [0u8; 8];
            a.copy_from_slice(b);
            f64::from_le_bytes(a)
        };
        let scale = f64_at(take(8, "calibration scale")?);
        let bias = f64_at(take(8, "calibration bias")?);
        let mut names = Vec::with_capacity(n_ent + n_rel);
        for _ in 0..n_ent + n_rel {
            let len = u32_at(take(4, "name length")?) as usize;
            let raw = take(len, "name")?;
            names.push(String::from_utf8(raw.to_vec()).map_err(|_| Error::Format {
                offset: 0,
                message: "name is not UTF-8".into(),
            })?);
        }
        let mut read_block = |rows: usize| -> Result<Block> {
            let mut b = Block::zeros(rows, dim);
            for v in b.re.iter_mut().chain(b.im.iter_mut()) {
                let c = take(4, "embedding block")?;
                *v = f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
            }
            Ok(b)
        };
        let entities = read_block(n_ent)?;
        let relations = read_block(n_rel)?;
        let relation_names = names.split_off(n_ent);
        Ok(Self {
            dim,
            entity_names: names,
            relation_names,
            entities,
            relations,
            calibration: Calibration { scale, bias },
        })
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Re-indexes rows to match `kg`'s entity and relation ids. Names the
    /// model has never seen get zero rows.
    pub fn aligned_to(&self, kg: &KnowledgeGraph) -> Self {
        let d = self.dim;
        let ent_pos: HashMap<&str, usize> = self
            .entity_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let rel_pos: HashMap<&str, usize> = self
            .relation_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut out = ComplExModel::zeros(kg, d);
        out.calibration = self.calibration;
        for e in kg.entities() {
            if let Some(&src) = ent_pos.get(kg.entity_name(e)) {
                let dst = e.index();
                out.entities.re[dst * d..(dst + 1) * d]
                    .copy_from_slice(&self.entities.re[src * d..(src + 1) * d]);
                out.entities.im[dst * d..(dst + 1) * d]
                    .copy_from_slice(&self.entities.im[src * d..(src + 1) * d]);
            }
        }
        for r in kg.relations() {
            if let Some(&src) = rel_pos.get(kg.relation_name(r)) {
                let dst = r.index();
                out.relations.re[dst * d..(dst + 1) * d]
                    .copy_from_slice(&self.relations.re[src * d..(src + 1) * d]);
                out.relations.im[dst * d..(dst + 1) * d]
                    .copy_from_slice(&self.relations.im[src * d..(src + 1) * d]);
            }
        }
        out
    }
}

fn symbolic_rows(kg: &KnowledgeGraph) -> Vec<(usize, usize, usize)> {
    kg.triples()
        .iter()
        .filter_map(|t| match t.relation {
            Rel::Symbolic(r) => Some((t.subject.index(), r.index(), t.object.index())),
            Rel::FreeForm(_) => None,
        })
        .collect()
}

/// Trains ComplEx on the symbolic triples of `kg`.
pub fn train(kg: &KnowledgeGraph, cfg: &KbcTrainConfig) -> Result<ComplExModel> {
    cfg.validate()?;
    let mut triples = symbolic_rows(kg);
    if triples.is_empty() {
        return Err(Error::Training("no symbolic triples to train on".into()));
    }
    let mut rng = StableRng::new(cfg.seed);
    let mut model = ComplExModel::random(kg, cfg.dim, rng.next_u64(), 1.0 / (cfg.dim as f64).sqrt());

    rng.shuffle(&mut triples);
    let n_cal = (triples.len() as f64 * cfg.calibration_fraction).floor() as usize;
    let (cal, train_set): (Vec<_>, Vec<_>) = if n_cal >= 1 && triples.len() - n_cal >= 1 {
        (triples[..n_cal].to_vec(), triples[n_cal..].to_vec())
    } else {
        (triples.clone(), triples.clone())
    };

    let n_ent = model.entity_count() as u64;
    let neg_weight = 1.0 / cfg.negatives_per_positive as f64;
    let mut accum_e = Block::zeros(model.entity_count(), cfg.dim);
    let mut accum_r = Block::zeros(model.relation_count(), cfg.dim);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut samples = Vec::with_capacity(cfg.negatives_per_positive + 1);
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            let (s, r, o) = train_set[i];
            samples.clear();
            samples.push(Sample {
                subject: s,
                relation: r,
                object: o,
                label: 1.0,
                weight: 1.0,
            });
            for _ in 0..cfg.negatives_per_positive {
                let x = rng.below(n_ent) as usize;
                let (ns, no) = if rng.below(2) == 0 { (x, o) } else { (s, x) };
                samples.push(Sample {
                    subject: ns,
                    relation: r,
                    object: no,
                    label: 0.0,
                    weight: neg_weight,
                });
            }
            let grad = model.gradient(&samples, cfg.l2_weight);
            let mut keys: Vec<_> = grad.rows.keys().copied().collect();
            keys.sort_by_key(|(t, row)| (matches!(t, Table::Relation), *row));
            for key in keys {
                let g = &grad.rows[&key];
                let (params, accum) = match key.0 {
                    Table::Entity => (&mut model.entities, &mut accum_e),
                    Table::Relation => (&mut model.relations, &mut accum_r),
                };
                let base = key.1 * cfg.dim;
                for k in 0..cfg.dim {
                    for (part, acc, gv) in [
                        (&mut params.re, &mut accum.re, g[k]),
                        (&mut params.im, &mut accum.im, g[cfg.dim + k]),
                    ] {
                        acc[base + k] += gv * gv;
                        part[base + k] -= cfg.learning_rate * gv / (acc[base + k].sqrt() + 1e-10);
                    }
                }
            }
        }
        if !model.all_finite() {
            return Err(Error::Training(format!("non-finite parameters after epoch {epoch}")));
        }
    }

    model.calibration = fit_calibration(&model, &cal, &mut rng, 4);
    Ok(model)
}

/// Platt scaling: logistic regression of labels on raw scores, by Newton's
/// method. Falls back to the identity map if the fit is not increasing.
fn fit_calibration(
    model: &ComplExModel,
    positives: &[(usize, usize, usize)],
    rng: &mut StableRng,
    negatives_each: usize,
) -> Calibration {
    let n_ent = model.entity_count() as u64;
    let known: HashSet<(usize, usize, usize)> = positives.iter().copied().collect();
    let mut data: Vec<(f64, f64)> = Vec::new();
    for &(s, r, o) in positives {
        data.push((model.raw(s, r, o), 1.0));
        for _ in 0..negatives_each {
            let x = rng.below(n_ent) as usize;
            let t = if rng.below(2) == 0 { (x, r, o) } else { (s, r, x) };
            if !known.contains(&t) {
                data.push((model.raw(t.0, t.1, t.2), 0.0));
            }
        }
    }
    let (mut a, mut b) = (1.0f64, 0.0f64);
    for _ in 0..100 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 1e-9, 0.0, 1e-9);
        for &(x, y) in &data {
            let p = sigmoid(a * x + b);
            let w = p * (1.0 - p);
            ga += (p - y) * x;
            gb += p - y;
            haa += w * x * x;
            hab += w * x;
            hbb += w;
        }
        // small ridge keeps the step finite on separable data
        haa += 1e-6;
        hbb += 1e-6;
        let det = haa * hbb - hab * hab;
        if det.abs() < 1e-18 {
            break;
        }
        let da = (hbb * ga - hab * gb) / det;
        let db = (haa * gb - hab * ga) / det;
        a -= da;
        b -= db;
        if !a.is_finite() || !b.is_finite() {
            return Calibration::default();
        }
        if da.abs() < 1e-10 && db.abs() < 1e-10 {
            break;
        }
        // keep separable data from driving the slope to infinity
        if a > 50.0 {
            a = 50.0;
        }
    }
    if a > 0.0 {
        Calibration { scale: a, bias: b }
    } else {
        Calibration::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KbcMetrics {
    pub mrr: f64,
    pub hits_at_1: f64,
    pub hits_at_3: f64,
    pub hits_at_10: f64,
    pub queries: usize,
}

/// Filtered ranking metrics over object and subject prediction for each
/// held-out triple. Ranks are optimistic: `1 + #{candidates scoring strictly
/// higher}` after removing every other known true triple.
pub fn evaluate_kbc(
    model: &ComplExModel,
    held_out: &[(EntityId, RelationId, EntityId)],
    known: &KnowledgeGraph,
) -> Result<KbcMetrics> {
    if held_out.is_empty() {
        return Err(Error::Contract("empty held-out set".into()));
    }
    let mut known_set: HashSet<(usize, usize, usize)> = symbolic_rows(known).into_iter().collect();
    known_set.extend(held_out.iter().map(|(s, r, o)| (s.index(), r.index(), o.index())));
    let mut ranks = Vec::with_capacity(held_out.len() * 2);
    for &(s, r, o) in held_out {
        model.check(s, r, o)?;
        let (s, r, o) = (s.index(), r.index(), o.index());
        let scores = model.object_scores(s, r);
        let truth = scores[o];
        let better = scores
            .iter()
            .enumerate()
            .filter(|&(x, &v)| x != o && v > truth && !known_set.contains(&(s, r, x)))
            .count();
        ranks.push(better + 1);
        let scores = model.subject_scores(r, o);
        let truth = scores[s];
        let better = scores
            .iter()
            .enumerate()
            .filter(|&(x, &v)| x != s && v > truth && !known_set.contains(&(x, r, o)))
            .count();
        ranks.push(better + 1);
    }
    let n = ranks.len() as f64;
    let frac = |k: usize| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
    Ok(KbcMetrics {
        mrr: ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n,
        hits_at_1: frac(1),
        hits_at_3: frac(3),
        hits_at_10: frac(10),
        queries: ranks.len(),
    })
}

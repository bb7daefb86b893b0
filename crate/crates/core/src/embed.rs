//! Masked-question normalization, question embedders and the CBRE embedding
//! file format.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MASK_TOKEN: &str = "<MASK>";

const CBRE_MAGIC: &[u8; 4] = b"CBRE";
const CBRE_VERSION: u32 = 1;

/// How bracketed entity mentions are rendered in the masked token list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// Every token of a mention becomes `<MASK>`.
    #[default]
    PerToken,
    /// Each mention becomes a single `<MASK>`.
    Collapse,
    /// Mentions are kept as ordinary tokens.
    Off,
}

impl MaskMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskMode::PerToken => "per-token",
            MaskMode::Collapse => "collapse",
            MaskMode::Off => "off",
        }
    }
}

impl std::str::FromStr for MaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-token" | "per_token" => Ok(MaskMode::PerToken),
            "collapse" => Ok(MaskMode::Collapse),
            "off" => Ok(MaskMode::Off),
            other => Err(Error::Config(format!("unknown mask mode {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedQuestion {
    pub raw: String,
    pub masked: Vec<String>,
    pub mention_count: usize,
    /// Surface forms of the bracketed mentions, in order.
    pub mentions: Vec<String>,
    pub mode: MaskMode,
}

impl MaskedQuestion {
    pub fn masked_text(&self) -> String {
        self.masked.join(" ")
    }
}

fn normalize_token(tok: &str) -> Option<String> {
    let t: String = tok
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect();
    (!t.is_empty()).then_some(t)
}

/// Splits a question with `[bracketed]` mentions into masked tokens.
pub fn mask_question(raw: &str, mode: MaskMode) -> Result<MaskedQuestion> {
    let mut masked = Vec::new();
    let mut mentions = Vec::new();
    let mut outside = String::new();
    let mut inside: Option<(usize, String)> = None;

    let flush_outside = |buf: &mut String, out: &mut Vec<String>| {
        out.extend(buf.split_whitespace().filter_map(normalize_token));
        buf.clear();
    };

    for (i, c) in raw.chars().enumerate() {
        let column = i + 1;
        match (c, inside.as_mut()) {
            ('[', Some(_)) => {
                return Err(Error::Bracket {
                    column,
                    message: "nested '['".into(),
                })
            }
            ('[', None) => {
                flush_outside(&mut outside, &mut masked);
                inside = Some((column, String::new()));
            }
            (']', None) => {
                return Err(Error::Bracket {
                    column,
                    message: "unmatched ']'".into(),
                })
            }
            (']', Some(_)) => {
                let (_, text) = inside.take().unwrap_or_default();
                let words: Vec<&str> = text.split_whitespace().collect();
                match mode {
                    MaskMode::PerToken => {
                        masked.extend(words.iter().map(|_| MASK_TOKEN.to_string()))
                    }
                    MaskMode::Collapse => masked.push(MASK_TOKEN.to_string()),
                    MaskMode::Off => masked.extend(words.iter().copied().filter_map(normalize_token)),
                }
                mentions.push(text.trim().to_string());
            }
            (c, Some((_, buf))) => buf.push(c),
            (c, None) => outside.push(c),
        }
    }
    if let Some((column, _)) = inside {
        return Err(Error::Bracket {
            column,
            message: "unclosed '['".into(),
        });
    }
    flush_outside(&mut outside, &mut masked);
    Ok(MaskedQuestion {
        raw: raw.to_string(),
        masked,
        mention_count: mentions.len(),
        mentions,
        mode,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Contract("embedding dimension must be positive".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("embedding has non-finite entries".into()));
        }
        Ok(Self { values })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        Self {
            values: self.values.iter().map(|&v| (f64::from(v) / n) as f32).collect(),
        }
    }
}

/// Cosine similarity; 0 when either side is the zero vector.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Contract(format!(
            "embedding dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(cosine_slices(a.values(), b.values()))
}

pub(crate) fn cosine_slices(a: &[f32], b: &[f32]) -> f64 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// Maps a masked question to a vector of fixed dimension.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, question: &MaskedQuestion) -> Result<EmbeddingVector>;
}

fn fnv1a(seed: u64, parts: &[&[u8]]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for part in parts {
        for &b in *part {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Signed feature hashing of unigrams and bigrams, L2-normalized.
#[derive(Debug, Clone, Copy)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < 8 {
            return Err(Error::Config(format!("hash embedder needs dim >= 8, got {dim}")));
        }
        Ok(Self { dim, seed })
    }

    pub fn embed_tokens(&self, tokens: &[String]) -> EmbeddingVector {
        let mut acc = vec![0.0f64; self.dim];
        let mut add = |parts: &[&[u8]]| {
            let bucket = fnv1a(self.seed, parts) % self.dim as u64;
            let sign = if fnv1a(self.seed ^ 0x5bd1_e995, parts) & 1 == 0 {
                1.0
            } else {
                -1.0
            };
            acc[bucket as usize] += sign;
        };
        for t in tokens {
            add(&[b"u", t.as_bytes()]);
        }
        for w in tokens.windows(2) {
            add(&[b"b", w[0].as_bytes(), w[1].as_bytes()]);
        }
        let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        let values = if norm == 0.0 {
            vec![0.0; self.dim]
        } else {
            acc.iter().map(|v| (v / norm) as f32).collect()
        };
        EmbeddingVector { values }
    }
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, question: &MaskedQuestion) -> Result<EmbeddingVector> {
        Ok(self.embed_tokens(&question.masked))
    }
}

/// Keyed embedding vectors sharing one dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    keys: Vec<String>,
    vectors: Vec<EmbeddingVector>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
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
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn insert(&mut self, key: impl Into<String>, v: EmbeddingVector) -> Result<()> {
        let key = key.into();
        if v.dim() != self.dim {
            return Err(Error::Contract(format!(
                "vector for {key} has dim {}, table has {}",
                v.dim(),
                self.dim
            )));
        }
        if self.index.contains_key(&key) {
            return Err(Error::Validation(format!("duplicate embedding key {key}")));
        }
        self.index.insert(key.clone(), self.keys.len());
        self.keys.push(key);
        self.vectors.push(v);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&EmbeddingVector> {
        self.index.get(key).map(|&i| &self.vectors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &EmbeddingVector)> {
        self.keys.iter().map(String::as_str).zip(&self.vectors)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(CBRE_MAGIC)?;
        w.write_all(&CBRE_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.keys.len() as u64).to_le_bytes())?;
        for (k, v) in self.iter() {
            w.write_all(&(k.len() as u32).to_le_bytes())?;
            w.write_all(k.as_bytes())?;
            for x in v.values() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("write to Vec");
        buf
    }

    /// Parses a CBRE block. Vectors whose norm is more than 1e-3 away from 1
    /// (and nonzero) are re-normalized.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4, "magic")?;
        if magic != CBRE_MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: "bad magic, expected CBRE".into(),
            });
        }
        let version = cur.u32("version")?;
        if version != CBRE_VERSION {
            return Err(Error::Format {
                offset: 4,
                message: format!("unsupported version {version}"),
            });
        }
        let dim = cur.u32("dim")? as usize;
        let count = cur.u64("count")?;
        if dim == 0 && count > 0 {
            return Err(Error::Format {
                offset: 8,
                message: "zero dimension".into(),
            });
        }
        let mut table = EmbeddingTable::new(dim);
        for _ in 0..count {
            let record_at = cur.pos as u64;
            let klen = cur.u32("key length")? as usize;
            let key = std::str::from_utf8(cur.take(klen, "key")?)
                .map_err(|_| Error::Format {
                    offset: record_at + 4,
                    message: "key is not UTF-8".into(),
                })?
                .to_string();
            let raw = cur.take(dim * 4, "vector")?;
            let values: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let v = EmbeddingVector::new(values).map_err(|e| Error::Format {
                offset: record_at,
                message: e.to_string(),
            })?;
            let n = v.norm();
            let v = if n != 0.0 && (n - 1.0).abs() > 1e-3 {
                v.normalized()
            } else {
                v
            };
            table.insert(key, v).map_err(|e| Error::Format {
                offset: record_at,
                message: e.to_string(),
            })?;
        }
        if cur.pos != bytes.len() {
            return Err(Error::Format {
                offset: cur.pos as u64,
                message: "trailing bytes after last record".into(),
            });
        }
        Ok(table)
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos as u64,
                message: format!("truncated {what}"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }
}

/// Looks up precomputed vectors by masked question text.
#[derive(Debug, Clone)]
pub struct TableEmbedder {
    table: EmbeddingTable,
}

impl TableEmbedder {
    pub fn new(table: EmbeddingTable) -> Self {
        Self { table }
    }
}

impl Embedder for TableEmbedder {
    fn dim(&self) -> usize {
        self.table.dim()
    }

    fn embed(&self, question: &MaskedQuestion) -> Result<EmbeddingVector> {
        let key = question.masked_text();
        self.table
            .get(&key)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("no precomputed embedding for \"{key}\"")))
    }
}

//! Fixed-length per-example representations: salience over the vocabulary
//! (S1), salience through the embedding matrix (S2), and the PMI,
//! mean-embedding and encoder baselines (B1, B2, B3).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EmbeddingTable, Example, Vocabulary};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RepError {
    #[error("token {token} of {id} is not in the vocabulary")]
    OutOfVocabulary { id: String, token: String },
    #[error("example {0} has no salience aligned with its tokens")]
    MissingSalience(String),
    #[error("example {0} has no prediction")]
    MissingPrediction(String),
    #[error("example {0} has no encoding")]
    MissingEncoding(String),
    #[error("encoding of {id} has dimension {found}, expected {expected}")]
    EncodingDim { id: String, expected: usize, found: usize },
    #[error("example {0} has no tokens")]
    EmptyExample(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("embedding table is bound to a different vocabulary")]
    EmbeddingMismatch,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("class {0} has no examples")]
    EmptyClass(usize),
    #[error("PMI table does not cover class {0}")]
    ClassOutOfRange(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RepKind {
    S1Vocab,
    S2Emb,
    B1Pmi,
    B2AvgEmb,
    B3Cls,
}

impl RepKind {
    pub const ALL: [RepKind; 5] = [RepKind::S1Vocab, RepKind::S2Emb, RepKind::B1Pmi, RepKind::B2AvgEmb, RepKind::B3Cls];

    pub fn short_name(self) -> &'static str {
        match self {
            RepKind::S1Vocab => "s1",
            RepKind::S2Emb => "s2",
            RepKind::B1Pmi => "b1",
            RepKind::B2AvgEmb => "b2",
            RepKind::B3Cls => "b3",
        }
    }

    pub fn from_short_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.short_name() == s)
    }

    /// Vocabulary-indexed kinds are stored sparse.
    pub fn is_vocab_dim(self) -> bool {
        matches!(self, RepKind::S1Vocab | RepKind::B1Pmi)
    }
}

/// One representation row. Sparse indices are strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Row {
    Sparse { indices: Vec<u32>, values: Vec<f64> },
    Dense(Vec<f64>),
}

impl Row {
    pub fn sparse(pairs: Vec<(u32, f64)>) -> Row {
        let (indices, values) = pairs.into_iter().unzip();
        Row::Sparse { indices, values }
    }

    /// `(index, value)` for every stored entry in index order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (idx, vals): (Option<&[u32]>, &[f64]) = match self {
            Row::Sparse { indices, values } => (Some(indices), values),
            Row::Dense(v) => (None, v),
        };
        vals.iter().enumerate().map(move |(i, &v)| (idx.map_or(i, |ix| ix[i] as usize), v))
    }

    pub fn nnz(&self) -> usize {
        self.entries().filter(|(_, v)| *v != 0.0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.entries().all(|(_, v)| v == 0.0)
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (j, v) in self.entries() {
            out[j] = v;
        }
        out
    }

    /// Squared L2 norm accumulated in index order.
    pub fn norm_sq(&self) -> f64 {
        self.entries().fold(0.0, |acc, (_, v)| acc + v * v)
    }

    /// Dot product with a dense vector, accumulated in index order.
    pub fn dot_dense(&self, y: &[f64]) -> f64 {
        self.entries().fold(0.0, |acc, (j, v)| acc + v * y[j])
    }

    /// Σ (x_j − y_j)² over the union of indices in increasing order. Indices
    /// absent from both rows add exactly 0, so sparse and dense forms of the
    /// same vectors give bit-identical results.
    pub fn sq_dist(&self, other: &Row) -> f64 {
        let mut a = self.entries().peekable();
        let mut b = other.entries().peekable();
        let mut acc = 0.0;
        loop {
            let d = match (a.peek().copied(), b.peek().copied()) {
                (None, None) => return acc,
                (Some((i, x)), Some((j, y))) if i == j => {
                    a.next();
                    b.next();
                    x - y
                }
                (Some((i, x)), Some((j, _))) if i < j => {
                    a.next();
                    x
                }
                (Some((_, x)), None) => {
                    a.next();
                    x
                }
                (_, Some((_, y))) => {
                    b.next();
                    -y
                }
            };
            acc += d * d;
        }
    }

    pub fn divide(&mut self, f: f64) {
        match self {
            Row::Sparse { values, .. } | Row::Dense(values) => values.iter_mut().for_each(|v| *v /= f),
        }
    }
}

/// Divides the row by its L2 norm; returns false (row untouched) for zero rows.
pub fn normalize_row(row: &mut Row) -> bool {
    let n = libm::sqrt(row.norm_sq());
    if n == 0.0 {
        return false;
    }
    row.divide(n);
    true
}

/// n×dim matrix of one representation kind, rows aligned with `row_ids`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepMatrix {
    pub kind: RepKind,
    pub dim: usize,
    pub k: Option<usize>,
    pub normalized: bool,
    pub row_ids: Vec<String>,
    pub rows: Vec<Row>,
    /// Positions of all-zero rows (no salience, no in-vocabulary tokens, ...).
    pub zero_rows: Vec<usize>,
    pub vocab_ref: Option<u64>,
    pub embedding_ref: Option<u64>,
}

impl RepMatrix {
    pub fn new(kind: RepKind, dim: usize, k: Option<usize>, normalized: bool, row_ids: Vec<String>, rows: Vec<Row>) -> Self {
        let zero_rows = rows.iter().enumerate().filter(|(_, r)| r.is_zero()).map(|(i, _)| i).collect();
        RepMatrix { kind, dim, k, normalized, row_ids, rows, zero_rows, vocab_ref: None, embedding_ref: None }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.row_ids.iter().position(|r| r == id)
    }

    /// The rows at `positions`, in that order.
    pub fn select(&self, positions: &[usize]) -> RepMatrix {
        let ids = positions.iter().map(|&i| self.row_ids[i].clone()).collect();
        let rows = positions.iter().map(|&i| self.rows[i].clone()).collect();
        let mut m = RepMatrix::new(self.kind, self.dim, self.k, self.normalized, ids, rows);
        m.vocab_ref = self.vocab_ref;
        m.embedding_ref = self.embedding_ref;
        m
    }

    pub fn dense_rows(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.to_dense(self.dim)).collect()
    }
}

fn token_ids(ex: &Example, vocab: &Vocabulary) -> Result<Vec<usize>, RepError> {
    ex.tokens
        .iter()
        .map(|t| vocab.get(t).ok_or_else(|| RepError::OutOfVocabulary { id: ex.id.clone(), token: t.clone() }))
        .collect()
}

/// Per-vocabulary-entry salience for one example before normalization:
/// duplicates keep the value of largest magnitude (sign retained, first
/// occurrence on ties), then only the top-k by magnitude survive (ties to
/// the lower vocabulary index). Returned in index order.
pub fn s1_entries(ex: &Example, vocab: &Vocabulary, k: usize) -> Result<Vec<(u32, f64)>, RepError> {
    if k == 0 {
        return Err(RepError::ZeroK);
    }
    if ex.salience.len() != ex.tokens.len() {
        return Err(RepError::MissingSalience(ex.id.clone()));
    }
    let ids = token_ids(ex, vocab)?;
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    for (&j, &s) in ids.iter().zip(&ex.salience) {
        let e = best.entry(j).or_insert(s);
        if libm::fabs(s) > libm::fabs(*e) {
            *e = s;
        }
    }
    let mut ranked: Vec<(usize, f64)> = best.into_iter().filter(|(_, v)| *v != 0.0).collect();
    ranked.sort_by(|a, b| libm::fabs(b.1).total_cmp(&libm::fabs(a.1)).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked.sort_by_key(|e| e.0);
    Ok(ranked.into_iter().map(|(j, v)| (j as u32, v)).collect())
}

/// S1: one row per example over the vocabulary, top-k, unit L2 norm.
pub fn build_s1_vocab(corpus: &Corpus, vocab: &Vocabulary, k: usize) -> Result<RepMatrix, RepError> {
    let mut rows = Vec::with_capacity(corpus.len());
    for ex in corpus.examples() {
        let mut row = Row::sparse(s1_entries(ex, vocab, k)?);
        normalize_row(&mut row);
        rows.push(row);
    }
    let mut m = RepMatrix::new(RepKind::S1Vocab, vocab.len(), Some(k), true, ids(corpus), rows);
    m.vocab_ref = Some(vocab.fingerprint());
    Ok(m)
}

/// S2: the un-normalized top-k S1 row times the embedding matrix, then unit norm.
pub fn build_s2_emb(corpus: &Corpus, vocab: &Vocabulary, emb: &EmbeddingTable, k: usize) -> Result<RepMatrix, RepError> {
    if emb.vocab_ref != vocab.fingerprint() || emb.rows() != vocab.len() {
        return Err(RepError::EmbeddingMismatch);
    }
    let mut rows = Vec::with_capacity(corpus.len());
    for ex in corpus.examples() {
        let mut out = vec![0.0; emb.dim];
        for (j, v) in s1_entries(ex, vocab, k)? {
            for (o, e) in out.iter_mut().zip(emb.row(j as usize)) {
                *o += v * e;
            }
        }
        let mut row = Row::Dense(out);
        normalize_row(&mut row);
        rows.push(row);
    }
    let mut m = RepMatrix::new(RepKind::S2Emb, emb.dim, Some(k), true, ids(corpus), rows);
    m.vocab_ref = Some(vocab.fingerprint());
    m.embedding_ref = Some(emb.vocab_ref);
    Ok(m)
}

fn ids(corpus: &Corpus) -> Vec<String> {
    corpus.examples().iter().map(|e| e.id.clone()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Smoothing {
    None,
    /// Adds α to every joint (token, class) presence count.
    AddAlpha(f64),
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::AddAlpha(0.5)
    }
}

/// PMI(token; class) from example-level presence, conditioned on the
/// predicted label, natural log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmiTable {
    pub num_classes: usize,
    /// Row-major |V|×C.
    pub values: Vec<f64>,
    /// Number of examples containing each token.
    pub token_counts: Vec<usize>,
    pub class_counts: Vec<usize>,
    /// Row-major |V|×C joint presence counts.
    pub joint_counts: Vec<usize>,
    pub n_examples: usize,
    pub smoothing: Smoothing,
}

impl PmiTable {
    pub fn get(&self, token: usize, class: usize) -> f64 {
        self.values[token * self.num_classes + class]
    }

    pub fn vocab_len(&self) -> usize {
        self.token_counts.len()
    }
}

pub fn compute_pmi(train: &Corpus, vocab: &Vocabulary, num_classes: usize, smoothing: Smoothing) -> Result<PmiTable, RepError> {
    if train.is_empty() {
        return Err(RepError::EmptyCorpus);
    }
    let v = vocab.len();
    let mut token_counts = vec![0usize; v];
    let mut class_counts = vec![0usize; num_classes];
    let mut joint = vec![0usize; v * num_classes];
    for ex in train.examples() {
        let c = ex.predicted_label.ok_or_else(|| RepError::MissingPrediction(ex.id.clone()))?;
        if c >= num_classes {
            return Err(RepError::ClassOutOfRange(c));
        }
        class_counts[c] += 1;
        let present: BTreeSet<usize> = token_ids(ex, vocab)?.into_iter().collect();
        for j in present {
            token_counts[j] += 1;
            joint[j * num_classes + c] += 1;
        }
    }
    if let Some(c) = class_counts.iter().position(|&n| n == 0) {
        return Err(RepError::EmptyClass(c));
    }
    let n = train.len() as f64;
    let alpha = match smoothing {
        Smoothing::None => 0.0,
        Smoothing::AddAlpha(a) => a,
    };
    let mut values = vec![0.0; v * num_classes];
    for j in 0..v {
        let pv = token_counts[j] as f64 / n;
        for c in 0..num_classes {
            let pc = class_counts[c] as f64 / n;
            let pvc = (joint[j * num_classes + c] as f64 + alpha) / n;
            values[j * num_classes + c] = libm::log(pvc / (pv * pc));
        }
    }
    Ok(PmiTable {
        num_classes,
        values,
        token_counts,
        class_counts,
        joint_counts: joint,
        n_examples: train.len(),
        smoothing,
    })
}

/// B1: binary presence weighted by PMI(token; predicted class), unit norm.
pub fn build_b1_pmi(corpus: &Corpus, vocab: &Vocabulary, pmi: &PmiTable) -> Result<RepMatrix, RepError> {
    if pmi.vocab_len() != vocab.len() {
        return Err(RepError::EmbeddingMismatch);
    }
    let mut rows = Vec::with_capacity(corpus.len());
    for ex in corpus.examples() {
        let c = ex.predicted_label.ok_or_else(|| RepError::MissingPrediction(ex.id.clone()))?;
        if c >= pmi.num_classes {
            return Err(RepError::ClassOutOfRange(c));
        }
        let present: BTreeSet<usize> = ex.tokens.iter().filter_map(|t| vocab.get(t)).collect();
        let mut row = Row::sparse(present.into_iter().map(|j| (j as u32, pmi.get(j, c))).collect());
        normalize_row(&mut row);
        rows.push(row);
    }
    let mut m = RepMatrix::new(RepKind::B1Pmi, vocab.len(), None, true, ids(corpus), rows);
    m.vocab_ref = Some(vocab.fingerprint());
    Ok(m)
}

/// B2: mean token embedding. Unit-normalized only when `normalize` is set.
pub fn build_b2_avg_emb(corpus: &Corpus, vocab: &Vocabulary, emb: &EmbeddingTable, normalize: bool) -> Result<RepMatrix, RepError> {
    if emb.vocab_ref != vocab.fingerprint() || emb.rows() != vocab.len() {
        return Err(RepError::EmbeddingMismatch);
    }
    let mut rows = Vec::with_capacity(corpus.len());
    for ex in corpus.examples() {
        if ex.tokens.is_empty() {
            return Err(RepError::EmptyExample(ex.id.clone()));
        }
        let mut out = vec![0.0; emb.dim];
        for j in token_ids(ex, vocab)? {
            for (o, e) in out.iter_mut().zip(emb.row(j)) {
                *o += e;
            }
        }
        let n = ex.tokens.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        let mut row = Row::Dense(out);
        if normalize {
            normalize_row(&mut row);
        }
        rows.push(row);
    }
    let mut m = RepMatrix::new(RepKind::B2AvgEmb, emb.dim, None, normalize, ids(corpus), rows);
    m.vocab_ref = Some(vocab.fingerprint());
    m.embedding_ref = Some(emb.vocab_ref);
    Ok(m)
}

/// B3: the examples' own encodings, verbatim unless `normalize` is set.
pub fn build_b3_encoding(corpus: &Corpus, normalize: bool) -> Result<RepMatrix, RepError> {
    let mut dim = None;
    let mut rows = Vec::with_capacity(corpus.len());
    for ex in corpus.examples() {
        let enc = ex.encoding.as_ref().ok_or_else(|| RepError::MissingEncoding(ex.id.clone()))?;
        match dim {
            None => dim = Some(enc.len()),
            Some(d) if d != enc.len() => return Err(RepError::EncodingDim { id: ex.id.clone(), expected: d, found: enc.len() }),
            _ => {}
        }
        let mut row = Row::Dense(enc.clone());
        if normalize {
            normalize_row(&mut row);
        }
        rows.push(row);
    }
    Ok(RepMatrix::new(RepKind::B3Cls, dim.unwrap_or(0), None, normalize, ids(corpus), rows))
}

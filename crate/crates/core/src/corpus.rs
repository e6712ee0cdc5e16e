//! Examples, corpora, vocabularies and embedding tables.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::numeric::{NumericMatcher, PatternError, TextPattern};
use crate::rng;

const PROB_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("salience length mismatch for {id}: {tokens} tokens, {salience} salience values")]
    SalienceLength { id: String, tokens: usize, salience: usize },
    #[error("invalid probs for {id}: {reason}")]
    InvalidProbs { id: String, reason: String },
    #[error("pred {pred} of {id} is not argmax(probs) = {argmax}")]
    PredictionMismatch { id: String, pred: usize, argmax: usize },
    #[error("encoding of {id} has dimension {found}, expected {expected}")]
    EncodingDim { id: String, expected: usize, found: usize },
    #[error("non-finite value in {field} of {id}")]
    NonFinite { id: String, field: &'static str },
    #[error("duplicate example id {0}")]
    DuplicateId(String),
    #[error("corpus is empty")]
    Empty,
    #[error("sample of {requested} requested but only {available} examples match")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("sample_n requires a seed")]
    SampleWithoutSeed,
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

impl CorpusError {
    /// Short name of the violated invariant.
    pub fn kind(&self) -> &'static str {
        match self {
            CorpusError::SalienceLength { .. } => "salience length mismatch",
            CorpusError::InvalidProbs { .. } => "invalid probs",
            CorpusError::PredictionMismatch { .. } => "prediction mismatch",
            CorpusError::EncodingDim { .. } => "encoding dimension mismatch",
            CorpusError::NonFinite { .. } => "non-finite value",
            CorpusError::DuplicateId(_) => "duplicate id",
            _ => "invalid record",
        }
    }

    /// Name of the record field an invariant violation refers to.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            CorpusError::SalienceLength { .. } => Some("salience"),
            CorpusError::InvalidProbs { .. } => Some("probs"),
            CorpusError::PredictionMismatch { .. } => Some("pred"),
            CorpusError::EncodingDim { .. } => Some("encoding"),
            CorpusError::NonFinite { field, .. } => Some(field),
            CorpusError::DuplicateId(_) => Some("id"),
            _ => None,
        }
    }
}

/// One classified text instance.
///
/// `predicted_label`, `probs` and `salience` are empty on raw (unscored)
/// examples such as generator output or freshly inserted counterfactuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub tokens: Vec<String>,
    pub gold_label: usize,
    pub predicted_label: Option<usize>,
    pub probs: Vec<f64>,
    /// Set when `probs` was filled in as one-hot from `predicted_label`.
    pub probs_synthesized: bool,
    pub salience: Vec<f64>,
    pub encoding: Option<Vec<f64>>,
    pub tags: BTreeSet<String>,
}

impl Example {
    pub fn raw(id: &str, tokens: &[&str], gold_label: usize) -> Self {
        Example {
            id: id.to_string(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            gold_label,
            predicted_label: None,
            probs: Vec::new(),
            probs_synthesized: false,
            salience: Vec::new(),
            encoding: None,
            tags: BTreeSet::new(),
        }
    }

    /// A scored example whose gold label equals the supplied prediction.
    pub fn annotated(id: &str, tokens: &[&str], pred: usize, probs: Vec<f64>, salience: Vec<f64>) -> Self {
        let mut ex = Example::raw(id, tokens, pred);
        ex.predicted_label = Some(pred);
        ex.probs = probs;
        ex.salience = salience;
        ex
    }

    pub fn with_tag(mut self, tag: &str) -> Self {
        self.tags.insert(tag.to_string());
        self
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.contains(tag)
    }

    pub fn contains_token(&self, token: &str) -> bool {
        self.tokens.iter().any(|t| t == token)
    }

    /// Tokens joined by single spaces, the form text patterns are matched on.
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn is_annotated(&self) -> bool {
        self.predicted_label.is_some() && self.salience.len() == self.tokens.len()
    }

    /// Marks the example as needing rescoring after an edit.
    pub fn clear_scores(&mut self) {
        self.predicted_label = None;
        self.probs.clear();
        self.probs_synthesized = false;
        self.salience.clear();
    }

    /// Fills one-hot probs from the prediction when probs are missing.
    pub fn synthesize_probs(&mut self, num_classes: usize) {
        if let (Some(p), true) = (self.predicted_label, self.probs.is_empty()) {
            let n = num_classes.max(p + 1);
            self.probs = (0..n).map(|c| if c == p { 1.0 } else { 0.0 }).collect();
            self.probs_synthesized = true;
        }
    }

    /// Checks the per-example invariants. Empty `probs`/`salience` are
    /// accepted here; loaders decide whether they are required.
    pub fn validate(&self) -> Result<(), CorpusError> {
        if !self.salience.is_empty() && self.salience.len() != self.tokens.len() {
            return Err(CorpusError::SalienceLength {
                id: self.id.clone(),
                tokens: self.tokens.len(),
                salience: self.salience.len(),
            });
        }
        if self.salience.iter().any(|s| !s.is_finite()) {
            return Err(CorpusError::NonFinite { id: self.id.clone(), field: "salience" });
        }
        if let Some(enc) = &self.encoding {
            if enc.iter().any(|v| !v.is_finite()) {
                return Err(CorpusError::NonFinite { id: self.id.clone(), field: "encoding" });
            }
        }
        if self.probs.is_empty() {
            return Ok(());
        }
        let bad = |reason: String| CorpusError::InvalidProbs { id: self.id.clone(), reason };
        if let Some(p) = self.probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(bad(format!("entry {p} outside [0, 1]")));
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(bad(format!("sum {sum} != 1")));
        }
        let am = argmax(&self.probs);
        match self.predicted_label {
            Some(pred) if pred != am => Err(CorpusError::PredictionMismatch { id: self.id.clone(), pred, argmax: am }),
            None => Err(bad("probs given without pred".to_string())),
            _ => Ok(()),
        }
    }
}

/// Index of the largest entry; ties go to the lower index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// An ordered dataset with unique example ids.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Corpus {
    pub split_name: String,
    examples: Vec<Example>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn new(split_name: &str, examples: Vec<Example>) -> Result<Self, CorpusError> {
        let mut index = BTreeMap::new();
        let mut enc_dim = None;
        for (i, ex) in examples.iter().enumerate() {
            ex.validate()?;
            if index.insert(ex.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(ex.id.clone()));
            }
            if let Some(enc) = &ex.encoding {
                match enc_dim {
                    None => enc_dim = Some(enc.len()),
                    Some(d) if d != enc.len() => {
                        return Err(CorpusError::EncodingDim { id: ex.id.clone(), expected: d, found: enc.len() })
                    }
                    _ => {}
                }
            }
        }
        Ok(Corpus { split_name: split_name.to_string(), examples, index })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<Example> {
        self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Example> {
        self.index.get(id).map(|&i| &self.examples[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Number of classes implied by labels and prob vectors.
    pub fn num_classes(&self) -> usize {
        self.examples
            .iter()
            .map(|e| {
                let l = e.gold_label.max(e.predicted_label.unwrap_or(0)) + 1;
                l.max(e.probs.len())
            })
            .max()
            .unwrap_or(0)
    }

    /// Total occurrences of every token.
    pub fn token_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for ex in &self.examples {
            for t in &ex.tokens {
                *counts.entry(t.clone()).or_insert(0) += 1;
            }
        }
        counts
    }
}

/// Filters applied by [`slice`]; each present field must hold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Selector {
    pub predicted_label: Option<usize>,
    pub gold_label: Option<usize>,
    pub tag: Option<String>,
    pub contains_token: Option<String>,
    pub sample_n: Option<usize>,
    pub seed: Option<u64>,
}

impl Selector {
    pub fn matches(&self, ex: &Example) -> bool {
        self.predicted_label.is_none_or(|p| ex.predicted_label == Some(p))
            && self.gold_label.is_none_or(|g| ex.gold_label == g)
            && self.tag.as_deref().is_none_or(|t| ex.has_tag(t))
            && self.contains_token.as_deref().is_none_or(|t| ex.contains_token(t))
    }
}

/// Filters the corpus, then optionally draws `sample_n` examples uniformly
/// without replacement. Sampled examples keep corpus order.
pub fn slice(corpus: &Corpus, sel: &Selector) -> Result<Corpus, CorpusError> {
    let mut kept: Vec<&Example> = corpus.examples.iter().filter(|e| sel.matches(e)).collect();
    if let Some(n) = sel.sample_n {
        let seed = sel.seed.ok_or(CorpusError::SampleWithoutSeed)?;
        if n > kept.len() {
            return Err(CorpusError::SampleTooLarge { requested: n, available: kept.len() });
        }
        let mut r = rng::seeded(seed);
        let mut picked = index::sample(&mut r, kept.len(), n).into_vec();
        picked.sort_unstable();
        kept = picked.into_iter().map(|i| kept[i]).collect();
    }
    Corpus::new(&corpus.split_name, kept.into_iter().cloned().collect())
}

/// Predicates available to [`tag_by_predicate`].
#[derive(Debug, Clone)]
pub enum Predicate {
    AlwaysTrue,
    AlwaysFalse,
    NumericPattern(NumericMatcher),
    Regex(TextPattern),
}

impl Predicate {
    /// Looks up a registry name: `numeric_pattern`, `always_true`,
    /// `always_false` or `regex:<expr>`.
    pub fn from_name(name: &str) -> Result<Self, CorpusError> {
        match name {
            "always_true" => Ok(Predicate::AlwaysTrue),
            "always_false" => Ok(Predicate::AlwaysFalse),
            "numeric_pattern" => Ok(Predicate::NumericPattern(NumericMatcher::new())),
            _ => match name.strip_prefix("regex:") {
                Some(expr) => Ok(Predicate::Regex(TextPattern::new(expr)?)),
                None => Err(CorpusError::UnknownPredicate(name.to_string())),
            },
        }
    }

    pub fn matches(&self, ex: &Example) -> bool {
        match self {
            Predicate::AlwaysTrue => true,
            Predicate::AlwaysFalse => false,
            Predicate::NumericPattern(m) => m.detect_tokens(&ex.tokens).is_some(),
            Predicate::Regex(p) => p.is_match(&ex.text()),
        }
    }
}

/// Adds `tag` to every example matching `pred`. Idempotent.
pub fn tag_by_predicate(corpus: &Corpus, tag: &str, pred: &Predicate) -> Corpus {
    let examples = corpus
        .examples
        .iter()
        .map(|e| {
            let mut e = e.clone();
            if pred.matches(&e) {
                e.tags.insert(tag.to_string());
            }
            e
        })
        .collect();
    Corpus { split_name: corpus.split_name.clone(), examples, index: corpus.index.clone() }
}

pub const DEFAULT_SPECIAL_TOKENS: [&str; 5] = ["[CLS]", "[SEP]", "[MASK]", "[PAD]", "[UNK]"];

/// Every ASCII punctuation character as its own token, plus "``" and "''".
pub fn default_punctuation() -> Vec<String> {
    let mut p: Vec<String> = (0x21u8..0x7f).map(char::from).filter(char::is_ascii_punctuation).map(String::from).collect();
    p.push("``".to_string());
    p.push("''".to_string());
    p
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VocabError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("duplicate vocabulary token {0}")]
    Duplicate(String),
    #[error("token {0} is not in the vocabulary")]
    OutOfVocabulary(String),
}

/// Token/index bijection plus the special and punctuation filter sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
    pub special_tokens: BTreeSet<String>,
    pub punctuation: BTreeSet<String>,
}

impl Vocabulary {
    pub fn from_tokens<S: AsRef<str>>(tokens: Vec<String>, special: &[S], punct: &[S]) -> Result<Self, VocabError> {
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(VocabError::Duplicate(t.clone()));
            }
        }
        Ok(Vocabulary {
            tokens,
            index,
            special_tokens: special.iter().map(|s| s.as_ref().to_string()).collect(),
            punctuation: punct.iter().map(|s| s.as_ref().to_string()).collect(),
        })
    }

    /// Distinct corpus tokens in order of first occurrence.
    pub fn from_corpus<S: AsRef<str>>(corpus: &Corpus, special: &[S], punct: &[S]) -> Result<Self, VocabError> {
        if corpus.is_empty() {
            return Err(VocabError::EmptyCorpus);
        }
        let mut seen = BTreeSet::new();
        let mut tokens = Vec::new();
        for ex in corpus.examples() {
            for t in &ex.tokens {
                if !seen.contains(t.as_str()) {
                    seen.insert(t.clone());
                    tokens.push(t.clone());
                }
            }
        }
        Self::from_tokens(tokens, special, punct)
    }

    /// Rebuilds the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn require(&self, token: &str) -> Result<usize, VocabError> {
        self.get(token).ok_or_else(|| VocabError::OutOfVocabulary(token.to_string()))
    }

    pub fn is_special(&self, i: usize) -> bool {
        self.special_tokens.contains(&self.tokens[i])
    }

    pub fn is_punctuation(&self, i: usize) -> bool {
        self.punctuation.contains(&self.tokens[i])
    }

    /// FNV-1a over the token list; binds embedding tables and matrices to one vocabulary.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in &self.tokens {
            for b in t.bytes().chain(core::iter::once(0)) {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbeddingError {
    #[error("row {row} has dimension {found}, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, found: usize },
    #[error("vocabulary token {0} has no embedding")]
    MissingToken(String),
    #[error("non-finite value in embedding row {0}")]
    NonFinite(usize),
    #[error("embedding table has {found} rows, vocabulary has {expected}")]
    RowCount { expected: usize, found: usize },
    #[error("no embedding rows")]
    Empty,
}

/// |V|×d matrix aligned to a vocabulary's order, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub data: Vec<f64>,
    pub vocab_ref: u64,
}

impl EmbeddingTable {
    pub fn from_matrix(vocab: &Vocabulary, dim: usize, data: Vec<f64>) -> Result<Self, EmbeddingError> {
        if data.len() != vocab.len() * dim {
            return Err(EmbeddingError::RowCount { expected: vocab.len(), found: data.len() / dim.max(1) });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(i / dim.max(1)));
        }
        Ok(EmbeddingTable { dim, data, vocab_ref: vocab.fingerprint() })
    }

    /// Aligns `(token, vector)` rows to `vocab`. Rows for tokens outside the
    /// vocabulary are ignored. With `strict == false` missing tokens get the
    /// zero vector and are returned in the second element.
    pub fn align(vocab: &Vocabulary, rows: &[(String, Vec<f64>)], strict: bool) -> Result<(Self, Vec<String>), EmbeddingError> {
        let dim = rows.first().map(|r| r.1.len()).ok_or(EmbeddingError::Empty)?;
        let mut data = alloc::vec![0.0; vocab.len() * dim];
        let mut have = alloc::vec![false; vocab.len()];
        for (row, (tok, v)) in rows.iter().enumerate() {
            if v.len() != dim {
                return Err(EmbeddingError::DimensionMismatch { row, expected: dim, found: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(EmbeddingError::NonFinite(row));
            }
            if let Some(j) = vocab.get(tok) {
                data[j * dim..(j + 1) * dim].copy_from_slice(v);
                have[j] = true;
            }
        }
        let missing: Vec<String> = (0..vocab.len()).filter(|&j| !have[j]).map(|j| vocab.token(j).to_string()).collect();
        if strict {
            if let Some(t) = missing.first() {
                return Err(EmbeddingError::MissingToken(t.clone()));
            }
        }
        Ok((EmbeddingTable { dim, data, vocab_ref: vocab.fingerprint() }, missing))
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }
}

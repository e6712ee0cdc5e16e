//! On-disk formats: JSONL example records, embedding TSV, representation
//! matrices, projection TSV pairs, JSON reports and toy-model files. Every
//! writer goes through [`write_atomic`].

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use salience_core::analyze::Projection;
use salience_core::corpus::{Corpus, CorpusError, EmbeddingTable, Example, Vocabulary};
use salience_core::represent::{RepKind, RepMatrix, Row};
use salience_core::synthetic::{PersistError, ToyModel};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Fs { path: PathBuf, source: std::io::Error },
    #[error("{}: {message} at line {line}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}: {} at line {line}: {source}", path.display(), source.kind())]
    Invariant { path: PathBuf, line: usize, field: &'static str, source: CorpusError },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Model { path: PathBuf, source: PersistError },
}

impl IoError {
    fn fs(path: &Path, source: std::io::Error) -> Self {
        IoError::Fs { path: path.to_path_buf(), source }
    }

    fn parse(path: &Path, line: usize, message: impl ToString) -> Self {
        IoError::Parse { path: path.to_path_buf(), line, message: message.to_string() }
    }

    fn format(path: &Path, message: impl ToString) -> Self {
        IoError::Format { path: path.to_path_buf(), message: message.to_string() }
    }

    /// The record field an invariant violation names, if any.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            IoError::Invariant { field, .. } => Some(field),
            _ => None,
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            IoError::Parse { line, .. } | IoError::Invariant { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place. Parent directories are created.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| IoError::fs(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::fs(dir, e))?;
    tmp.write_all(bytes).map_err(|e| IoError::fs(path, e))?;
    tmp.as_file().sync_all().map_err(|e| IoError::fs(path, e))?;
    tmp.persist(path).map_err(|e| IoError::fs(path, e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::fs(path, e))
}

/// One JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub id: String,
    pub tokens: Vec<String>,
    pub label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub salience: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

impl Record {
    pub fn from_example(e: &Example) -> Self {
        Record {
            id: e.id.clone(),
            tokens: e.tokens.clone(),
            label: e.gold_label,
            pred: e.predicted_label,
            probs: (!e.probs.is_empty() && !e.probs_synthesized).then(|| e.probs.clone()),
            salience: (!e.salience.is_empty()).then(|| e.salience.clone()),
            encoding: e.encoding.clone(),
            tags: e.tags.iter().cloned().collect(),
        }
    }

    /// Converts to an example; missing probs with a prediction present become
    /// one-hot and are flagged as synthesized.
    pub fn into_example(self, num_classes: usize) -> Example {
        let mut e = Example::raw(&self.id, &[], self.label);
        e.tokens = self.tokens;
        e.predicted_label = self.pred;
        e.probs = self.probs.unwrap_or_default();
        e.salience = self.salience.unwrap_or_default();
        e.encoding = self.encoding;
        e.tags = self.tags.into_iter().collect::<BTreeSet<_>>();
        e.synthesize_probs(num_classes);
        e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Class count used for synthesized probabilities.
    pub num_classes: usize,
    /// Reject records without `pred` and `salience`.
    pub require_annotations: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { num_classes: 2, require_annotations: false }
    }
}

pub fn parse_examples(path: &Path, text: &str, opts: LoadOptions) -> Result<Corpus, IoError> {
    let mut examples = Vec::new();
    let mut seen = HashSet::new();
    let mut enc_dim: Option<usize> = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| IoError::parse(path, lineno, e))?;
        let invariant = |source: CorpusError| IoError::Invariant {
            path: path.to_path_buf(),
            line: lineno,
            field: source.field().unwrap_or("record"),
            source,
        };
        if opts.require_annotations {
            for (field, missing) in [("pred", rec.pred.is_none()), ("salience", rec.salience.is_none())] {
                if missing {
                    return Err(IoError::parse(path, lineno, format!("missing field {field}")));
                }
            }
        }
        let ex = rec.into_example(opts.num_classes);
        ex.validate().map_err(invariant)?;
        if let Some(enc) = &ex.encoding {
            match enc_dim {
                Some(d) if d != enc.len() => {
                    return Err(invariant(CorpusError::EncodingDim { id: ex.id.clone(), expected: d, found: enc.len() }))
                }
                _ => enc_dim = Some(enc.len()),
            }
        }
        if !seen.insert(ex.id.clone()) {
            return Err(invariant(CorpusError::DuplicateId(ex.id.clone())));
        }
        examples.push(ex);
    }
    let split = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Corpus::new(&split, examples).map_err(|e| IoError::format(path, e))
}

pub fn load_examples(path: &Path, opts: LoadOptions) -> Result<Corpus, IoError> {
    parse_examples(path, &read_text(path)?, opts)
}

pub fn examples_to_string(corpus: &Corpus) -> String {
    let mut out = String::new();
    for e in corpus.examples() {
        out.push_str(&serde_json::to_string(&Record::from_example(e)).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn save_examples(path: &Path, corpus: &Corpus) -> Result<(), IoError> {
    write_atomic(path, examples_to_string(corpus).as_bytes())
}

/// `token<TAB>f1<TAB>f2...` rows, in file order.
pub fn parse_embedding_rows(path: &Path, text: &str) -> Result<Vec<(String, Vec<f64>)>, IoError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let token = parts.next().unwrap_or_default().to_string();
        let values = parts
            .map(|p| p.trim().parse::<f64>().map_err(|e| IoError::parse(path, i + 1, format!("bad value {p:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err(IoError::parse(path, i + 1, "row has no values"));
        }
        rows.push((token, values));
    }
    Ok(rows)
}

/// Loads an embedding TSV aligned to `vocab`. Returns the tokens that had no
/// row (only possible with `strict == false`; they get zero vectors).
pub fn load_embeddings(path: &Path, vocab: &Vocabulary, strict: bool) -> Result<(EmbeddingTable, Vec<String>), IoError> {
    let rows = parse_embedding_rows(path, &read_text(path)?)?;
    EmbeddingTable::align(vocab, &rows, strict).map_err(|e| IoError::format(path, e))
}

pub fn embeddings_to_string(vocab: &Vocabulary, emb: &EmbeddingTable) -> String {
    let mut out = String::new();
    for j in 0..vocab.len() {
        out.push_str(vocab.token(j));
        for v in emb.row(j) {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    out
}

pub fn save_embeddings(path: &Path, vocab: &Vocabulary, emb: &EmbeddingTable) -> Result<(), IoError> {
    write_atomic(path, embeddings_to_string(vocab, emb).as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RepHeader {
    kind: String,
    dim: usize,
    k: Option<usize>,
    normalized: bool,
    n: usize,
    sparse: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vocab_ref: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding_ref: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RepLine {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    indices: Option<Vec<u32>>,
    values: Vec<f64>,
}

/// Header line followed by one `{id, indices?, values}` line per row.
pub fn rep_to_string(rep: &RepMatrix) -> String {
    let header = RepHeader {
        kind: rep.kind.short_name().to_string(),
        dim: rep.dim,
        k: rep.k,
        normalized: rep.normalized,
        n: rep.len(),
        sparse: rep.kind.is_vocab_dim(),
        vocab_ref: rep.vocab_ref,
        embedding_ref: rep.embedding_ref,
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for (id, row) in rep.row_ids.iter().zip(&rep.rows) {
        let line = match row {
            Row::Sparse { indices, values } => RepLine { id: id.clone(), indices: Some(indices.clone()), values: values.clone() },
            Row::Dense(v) => RepLine { id: id.clone(), indices: None, values: v.clone() },
        };
        out.push_str(&serde_json::to_string(&line).expect("rows serialize"));
        out.push('\n');
    }
    out
}

pub fn save_rep(path: &Path, rep: &RepMatrix) -> Result<(), IoError> {
    write_atomic(path, rep_to_string(rep).as_bytes())
}

pub fn parse_rep(path: &Path, text: &str) -> Result<RepMatrix, IoError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| IoError::format(path, "missing header line"))?;
    let h: RepHeader = serde_json::from_str(first).map_err(|e| IoError::parse(path, 1, e))?;
    let kind = RepKind::from_short_name(&h.kind).ok_or_else(|| IoError::parse(path, 1, format!("unknown kind {}", h.kind)))?;
    let mut ids = Vec::with_capacity(h.n);
    let mut rows = Vec::with_capacity(h.n);
    for (i, line) in lines {
        let l: RepLine = serde_json::from_str(line).map_err(|e| IoError::parse(path, i + 1, e))?;
        let row = match l.indices {
            Some(indices) => {
                if indices.len() != l.values.len() {
                    return Err(IoError::parse(path, i + 1, "indices and values differ in length"));
                }
                if indices.windows(2).any(|w| w[0] >= w[1]) || indices.last().is_some_and(|&j| j as usize >= h.dim) {
                    return Err(IoError::parse(path, i + 1, "indices must be increasing and below dim"));
                }
                Row::Sparse { indices, values: l.values }
            }
            None => {
                if l.values.len() != h.dim {
                    return Err(IoError::parse(path, i + 1, format!("{} values, dim is {}", l.values.len(), h.dim)));
                }
                Row::Dense(l.values)
            }
        };
        ids.push(l.id);
        rows.push(row);
    }
    if rows.len() != h.n {
        return Err(IoError::format(path, format!("header says {} rows, found {}", h.n, rows.len())));
    }
    let mut rep = RepMatrix::new(kind, h.dim, h.k, h.normalized, ids, rows);
    rep.vocab_ref = h.vocab_ref;
    rep.embedding_ref = h.embedding_ref;
    Ok(rep)
}

pub fn load_rep(path: &Path) -> Result<RepMatrix, IoError> {
    parse_rep(path, &read_text(path)?)
}

/// `x` with six significant digits, trailing zeros trimmed.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let s = format!("{x:.5e}");
    let (mant, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, mant.parse::<f64>().expect("mantissa") * 10f64.powi(exp));
        trim_zeros(&fixed)
    } else {
        format!("{}e{exp}", trim_zeros(mant))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Metadata columns available for a projection export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaField {
    Id,
    Pred,
    Gold,
    Cluster,
    Tags,
}

impl MetaField {
    pub fn name(self) -> &'static str {
        match self {
            MetaField::Id => "id",
            MetaField::Pred => "pred",
            MetaField::Gold => "gold",
            MetaField::Cluster => "cluster",
            MetaField::Tags => "tags",
        }
    }
}

fn tsv_cell(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// Cluster id of a row id.
pub type ClusterOf<'a> = &'a dyn Fn(&str) -> Option<usize>;

/// `vectors.tsv` (no header) and `metadata.tsv` (header row) contents.
/// Rows without an example keep empty cells; rows without a cluster too.
pub fn projection_tsv(
    proj: &Projection,
    corpus: &Corpus,
    clusters: Option<ClusterOf<'_>>,
    fields: &[MetaField],
) -> (String, String) {
    let mut vectors = String::new();
    let mut meta = fields.iter().map(|f| f.name()).collect::<Vec<_>>().join("\t");
    meta.push('\n');
    for (id, c) in proj.row_ids.iter().zip(&proj.coords) {
        vectors.push_str(&c.iter().map(|v| sig6(*v)).collect::<Vec<_>>().join("\t"));
        vectors.push('\n');
        let ex = corpus.get(id);
        let cells: Vec<String> = fields
            .iter()
            .map(|f| match f {
                MetaField::Id => tsv_cell(id),
                MetaField::Pred => ex.and_then(|e| e.predicted_label).map(|p| p.to_string()).unwrap_or_default(),
                MetaField::Gold => ex.map(|e| e.gold_label.to_string()).unwrap_or_default(),
                MetaField::Cluster => clusters.and_then(|f| f(id)).map(|c| c.to_string()).unwrap_or_default(),
                MetaField::Tags => ex.map(|e| tsv_cell(&e.tags.iter().cloned().collect::<Vec<_>>().join(","))).unwrap_or_default(),
            })
            .collect();
        meta.push_str(&cells.join("\t"));
        meta.push('\n');
    }
    (vectors, meta)
}

/// Reads a `vectors.tsv` back into coordinate rows.
pub fn parse_vectors(path: &Path, text: &str) -> Result<Vec<Vec<f64>>, IoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            l.split('\t')
                .map(|v| v.parse::<f64>().map_err(|e| IoError::parse(path, i + 1, format!("bad value {v:?}: {e}"))))
                .collect()
        })
        .collect()
}

/// Pretty JSON plus a trailing newline.
pub fn json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    write_atomic(path, json_string(value).as_bytes())
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| IoError::parse(path, e.line(), e))
}

pub fn save_model(path: &Path, model: &ToyModel) -> Result<(), IoError> {
    write_atomic(path, &model.to_bytes())
}

pub fn load_model(path: &Path) -> Result<ToyModel, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::fs(path, e))?;
    ToyModel::from_bytes(&bytes).map_err(|source| IoError::Model { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_formats() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(-12.3456789), "-12.3457");
        assert_eq!(sig6(123456789.0), "1.23457e8");
        assert_eq!(sig6(0.000123456789), "0.000123457");
        assert_eq!(sig6(1.5e-9), "1.5e-9");
        assert_eq!(sig6(999999.5), "1e6");
    }

    #[test]
    fn line_numbers_in_errors() {
        let p = Path::new("x.jsonl");
        let text = "{\"id\":\"a\",\"tokens\":[\"x\"],\"label\":0}\n\n{\"id\":\"b\",\"tokens\":[\"x\"],\"label\":0,\"salience\":[1,2]}\n";
        let err = parse_examples(p, text, LoadOptions::default()).unwrap_err();
        assert_eq!((err.line(), err.field()), (Some(3), Some("salience")));
        let err = parse_examples(p, "{\"id\":\"a\"", LoadOptions::default()).unwrap_err();
        assert_eq!(err.line(), Some(1));
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let line = "{\"id\":\"a\",\"tokens\":[],\"label\":0}\n";
        let err = parse_examples(Path::new("d"), &line.repeat(2), LoadOptions::default()).unwrap_err();
        assert_eq!((err.line(), err.field()), (Some(2), Some("id")));
    }

    #[test]
    fn synthesized_probs_not_written_back() {
        let text = "{\"id\":\"a\",\"tokens\":[\"x\"],\"label\":1,\"pred\":1}\n";
        let c = parse_examples(Path::new("s"), text, LoadOptions::default()).unwrap();
        assert_eq!(c.examples()[0].probs, [0.0, 1.0]);
        assert!(c.examples()[0].probs_synthesized);
        assert_eq!(examples_to_string(&c), text);
    }
}

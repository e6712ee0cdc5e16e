//! Session configuration, read from TOML or JSON. Relative paths resolve
//! against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use salience_core::analyze::{KMeansParams, TsneParams};
use salience_core::corpus::Selector;
use salience_core::represent::{RepKind, Smoothing};
use salience_core::sensitivity::{LabelSource, Mode};
use salience_core::synthetic::{ShortcutSpec, ToyConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Annotated JSONL examples to analyze.
    pub examples: Option<PathBuf>,
    /// Embedding TSV aligned by token.
    pub embeddings: Option<PathBuf>,
    /// Corpus for PMI and token counts; defaults to `examples`.
    pub train: Option<PathBuf>,
    /// Toy model file; used for scoring and, absent a TSV, for embeddings.
    pub model: Option<PathBuf>,
    /// Precomputed `vectors.tsv`, reused by the service instead of t-SNE.
    pub projection: Option<PathBuf>,
    /// Static files served at `/`.
    pub static_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths { examples: None, embeddings: None, train: None, model: None, projection: None, static_dir: None, output_dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepConfig {
    /// One of s1, s2, b1, b2, b3.
    pub kind: String,
    pub k: usize,
    /// L2-normalize the B2 and B3 baselines.
    pub normalize_baselines: bool,
    /// Additive PMI smoothing; 0 disables it.
    pub pmi_alpha: f64,
    /// Require an embedding row for every vocabulary token.
    pub strict_embeddings: bool,
}

impl Default for RepConfig {
    fn default() -> Self {
        RepConfig { kind: "s1".into(), k: 5, normalize_baselines: false, pmi_alpha: 0.5, strict_embeddings: false }
    }
}

impl RepConfig {
    pub fn rep_kind(&self) -> Result<RepKind, ConfigError> {
        RepKind::from_short_name(&self.kind).ok_or_else(|| ConfigError::Invalid(format!("unknown representation {:?}", self.kind)))
    }

    pub fn smoothing(&self) -> Smoothing {
        if self.pmi_alpha > 0.0 {
            Smoothing::AddAlpha(self.pmi_alpha)
        } else {
            Smoothing::None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub exaggeration: f64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        let p = TsneParams::default();
        TsneConfig { perplexity: p.perplexity, iterations: p.iterations, learning_rate: p.learning_rate, exaggeration: p.exaggeration }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub n_clusters: usize,
    pub n_neighbors: usize,
    /// Tag scored by cluster precision and recall.
    pub tag: Option<String>,
    pub top_terms: usize,
    pub restarts: usize,
    pub include_zero_rows: bool,
    pub tsne: TsneConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { n_clusters: 3, n_neighbors: 5, tag: None, top_terms: 10, restarts: 10, include_zero_rows: false, tsne: TsneConfig::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub kmeans: u64,
    pub tsne: u64,
    pub sensitivity: u64,
    pub synth: u64,
}

impl Seeds {
    pub fn all(seed: u64) -> Self {
        Seeds { kmeans: seed, tsne: seed, sensitivity: seed, synth: seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagRule {
    pub tag: String,
    /// Predicate registry name, e.g. `numeric_pattern` or `regex:...`.
    pub predicate: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Filters {
    pub predicted_label: Option<usize>,
    pub gold_label: Option<usize>,
    pub tag: Option<String>,
    pub drop_special: bool,
    pub drop_punctuation: bool,
    /// Tags applied to the loaded examples before slicing.
    pub tag_rules: Vec<TagRule>,
}

impl Default for Filters {
    fn default() -> Self {
        Filters { predicted_label: None, gold_label: None, tag: None, drop_special: true, drop_punctuation: true, tag_rules: Vec::new() }
    }
}

impl Filters {
    pub fn selector(&self) -> Selector {
        Selector { predicted_label: self.predicted_label, gold_label: self.gold_label, tag: self.tag.clone(), ..Selector::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityOptions {
    pub mode: Mode,
    pub target_class: usize,
    pub m: usize,
    /// `pmi`, `aggregated`, `identity`, or a file with one term per line.
    pub seed_list: String,
    /// Explicit terms; override `seed_list` when non-empty.
    pub terms: Vec<String>,
    pub n_terms: usize,
    pub min_count: usize,
    pub label_source: LabelSource,
}

impl Default for SensitivityOptions {
    fn default() -> Self {
        SensitivityOptions {
            mode: Mode::Insertion,
            target_class: 1,
            m: 100,
            seed_list: "pmi".into(),
            terms: Vec::new(),
            n_terms: 10,
            min_count: 5,
            label_source: LabelSource::Gold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Base JSONL corpus; the built-in sentiment corpus when absent.
    pub base: Option<PathBuf>,
    pub base_size: usize,
    pub spec: ShortcutSpec,
    pub model: ToyConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { base: None, base_size: 2000, spec: ShortcutSpec::default(), model: ToyConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerConfig {
    /// Remote scoring endpoint; takes precedence over `paths.model`.
    pub url: Option<String>,
    pub batch_size: usize,
    pub retries: usize,
    pub timeout_secs: u64,
    pub num_classes: usize,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig { url: None, batch_size: 32, retries: 3, timeout_secs: 30, num_classes: 2 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub paths: Paths,
    pub rep: RepConfig,
    pub analysis: AnalysisConfig,
    pub seeds: Seeds,
    pub filters: Filters,
    pub sensitivity: SensitivityOptions,
    pub synth: SynthConfig,
    pub scorer: ScorerConfig,
}

impl SessionConfig {
    /// Reads `.json` files as JSON and everything else as TOML.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let parse = |message: String| ConfigError::Parse { path: path.to_path_buf(), message };
        let mut cfg: SessionConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| parse(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| parse(e.to_string()))?
        };
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        for slot in [&mut p.examples, &mut p.embeddings, &mut p.train, &mut p.model, &mut p.projection, &mut p.static_dir, &mut self.synth.base] {
            if let Some(path) = slot.as_mut() {
                fix(path);
            }
        }
        fix(&mut p.output_dir);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.rep.rep_kind()?;
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.rep.k == 0 {
            return bad("rep.k must be at least 1");
        }
        if self.analysis.n_clusters == 0 {
            return bad("analysis.n_clusters must be at least 1");
        }
        if self.analysis.tsne.perplexity.is_nan() || self.analysis.tsne.perplexity <= 0.0 {
            return bad("analysis.tsne.perplexity must be positive");
        }
        if self.analysis.restarts == 0 {
            return bad("analysis.restarts must be at least 1");
        }
        if self.scorer.batch_size == 0 {
            return bad("scorer.batch_size must be at least 1");
        }
        self.synth.spec.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn kmeans_params(&self) -> KMeansParams {
        KMeansParams {
            restarts: self.analysis.restarts,
            include_zero_rows: self.analysis.include_zero_rows,
            ..KMeansParams::new(self.analysis.n_clusters, self.seeds.kmeans)
        }
    }

    pub fn tsne_params(&self) -> TsneParams {
        let t = &self.analysis.tsne;
        TsneParams {
            perplexity: t.perplexity,
            iterations: t.iterations,
            learning_rate: t.learning_rate,
            exaggeration: t.exaggeration,
            seed: self.seeds.tsne,
            ..TsneParams::default()
        }
    }
}

//! Loads a configured session (examples, vocabulary, embeddings, scorer) and
//! runs the analyses the CLI and the service share.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use salience_core::analyze::{
    aggregate_salient_terms, cluster_metrics, cluster_top_terms, kmeans, AnalyzeError, ClusterReport, Projection, TermFilter,
};
use salience_core::corpus::{
    default_punctuation, slice, tag_by_predicate, Corpus, CorpusError, EmbeddingTable, Predicate, VocabError, Vocabulary,
    DEFAULT_SPECIAL_TOKENS,
};
use salience_core::represent::{
    build_b1_pmi, build_b2_avg_emb, build_b3_encoding, build_s1_vocab, build_s2_emb, compute_pmi, PmiTable, RepError, RepKind, RepMatrix,
};
use salience_core::sensitivity::{
    counterfactual_change, fixtures, masking_change, pmi_seed_list, ModelScorer, SeedList, SensitivityConfig, SensitivityError,
    SensitivityReport,
};
use salience_core::synthetic::ToyModel;

use crate::config::{ConfigError, SessionConfig};
use crate::io::{self, IoError, LoadOptions};
use crate::remote::RemoteScorer;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Analyze(#[from] AnalyzeError),
    #[error(transparent)]
    Sensitivity(#[from] SensitivityError),
}

impl From<RepError> for PipelineError {
    fn from(e: RepError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<CorpusError> for PipelineError {
    fn from(e: CorpusError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<VocabError> for PipelineError {
    fn from(e: VocabError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

/// Everything loaded from a [`SessionConfig`].
pub struct Workspace {
    pub config: SessionConfig,
    /// All loaded examples after tag rules.
    pub full: Corpus,
    /// `full` restricted by the configured filters.
    pub corpus: Corpus,
    /// Corpus for PMI and token counts.
    pub train: Corpus,
    pub vocab: Vocabulary,
    pub embeddings: Option<EmbeddingTable>,
    /// Vocabulary tokens without an embedding row.
    pub missing_embeddings: Vec<String>,
    pub model: Option<ToyModel>,
    pub scorer: Option<Box<dyn ModelScorer + Send + Sync>>,
}

fn require<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, PipelineError> {
    p.as_deref().ok_or_else(|| PipelineError::Config(ConfigError::Invalid(format!("paths.{what} is not set"))))
}

impl Workspace {
    pub fn load(config: SessionConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let opts = LoadOptions { num_classes: config.scorer.num_classes, require_annotations: false };
        let mut full = io::load_examples(require(&config.paths.examples, "examples")?, opts)?;
        for rule in &config.filters.tag_rules {
            let pred = Predicate::from_name(&rule.predicate)?;
            full = tag_by_predicate(&full, &rule.tag, &pred);
        }
        let corpus = slice(&full, &config.filters.selector())?;
        let train = match &config.paths.train {
            Some(p) => io::load_examples(p, opts)?,
            None => full.clone(),
        };
        let mut seen = std::collections::BTreeSet::new();
        let tokens: Vec<String> = full
            .examples()
            .iter()
            .chain(train.examples())
            .flat_map(|e| e.tokens.iter())
            .filter(|t| seen.insert(t.as_str()))
            .cloned()
            .collect();
        let vocab = Vocabulary::from_tokens(tokens, &DEFAULT_SPECIAL_TOKENS.map(String::from)[..], &default_punctuation())?;
        let model = config.paths.model.as_deref().map(io::load_model).transpose()?;
        let (embeddings, missing_embeddings) = match (&config.paths.embeddings, &model) {
            (Some(p), _) => {
                let (e, m) = io::load_embeddings(p, &vocab, config.rep.strict_embeddings)?;
                (Some(e), m)
            }
            (None, Some(m)) => {
                let rows: Vec<(String, Vec<f64>)> = (0..m.vocab.len()).map(|j| (m.vocab.token(j).to_string(), m.embedding(j).to_vec())).collect();
                let (e, miss) = EmbeddingTable::align(&vocab, &rows, config.rep.strict_embeddings).map_err(|e| PipelineError::Data(e.to_string()))?;
                (Some(e), miss)
            }
            _ => (None, Vec::new()),
        };
        let scorer: Option<Box<dyn ModelScorer + Send + Sync>> = match (&config.scorer.url, &model) {
            (Some(url), _) => Some(Box::new(RemoteScorer::with_options(
                url,
                config.scorer.num_classes,
                config.scorer.batch_size,
                config.scorer.retries,
                Duration::from_secs(config.scorer.timeout_secs),
            ))),
            (None, Some(m)) => Some(Box::new(m.clone())),
            _ => None,
        };
        Ok(Workspace { config, full, corpus, train, vocab, embeddings, missing_embeddings, model, scorer })
    }

    pub fn num_classes(&self) -> usize {
        self.full.num_classes().max(self.train.num_classes()).max(self.config.scorer.num_classes)
    }

    pub fn term_filter(&self) -> TermFilter {
        TermFilter { special: self.config.filters.drop_special, punctuation: self.config.filters.drop_punctuation }
    }

    pub fn pmi(&self) -> Result<PmiTable, PipelineError> {
        Ok(compute_pmi(&self.train, &self.vocab, self.num_classes(), self.config.rep.smoothing())?)
    }

    fn embeddings(&self) -> Result<&EmbeddingTable, PipelineError> {
        self.embeddings.as_ref().ok_or_else(|| ConfigError::Invalid("this representation needs paths.embeddings or paths.model".into()).into())
    }

    /// Builds `kind` over the filtered corpus.
    pub fn build(&self, kind: RepKind) -> Result<RepMatrix, PipelineError> {
        let c = &self.corpus;
        let k = self.config.rep.k;
        let norm = self.config.rep.normalize_baselines;
        Ok(match kind {
            RepKind::S1Vocab => build_s1_vocab(c, &self.vocab, k)?,
            RepKind::S2Emb => build_s2_emb(c, &self.vocab, self.embeddings()?, k)?,
            RepKind::B1Pmi => build_b1_pmi(c, &self.vocab, &self.pmi()?)?,
            RepKind::B2AvgEmb => build_b2_avg_emb(c, &self.vocab, self.embeddings()?, norm)?,
            RepKind::B3Cls => build_b3_encoding(c, norm)?,
        })
    }

    pub fn configured_rep(&self) -> Result<RepMatrix, PipelineError> {
        self.build(self.config.rep.rep_kind()?)
    }

    /// k-means, plus metrics against the configured tag and top terms for
    /// S1.
    pub fn cluster(&self, rep: &RepMatrix) -> Result<ClusterReport, PipelineError> {
        let mut report = kmeans(rep, &self.config.kmeans_params())?;
        if let Some(tag) = &self.config.analysis.tag {
            report = cluster_metrics(&report, &self.corpus, tag)?;
        }
        if rep.kind == RepKind::S1Vocab {
            let terms = cluster_top_terms(rep, &report, self.config.analysis.top_terms, &self.vocab, self.term_filter())?;
            for (s, t) in report.per_cluster.iter_mut().zip(terms) {
                s.top_terms = Some(t);
            }
        }
        Ok(report)
    }

    pub fn project(&self, rep: &RepMatrix) -> Result<Projection, PipelineError> {
        Ok(salience_core::analyze::tsne(rep, &self.config.tsne_params())?)
    }

    pub fn seed_list(&self) -> Result<SeedList, PipelineError> {
        let s = &self.config.sensitivity;
        if !s.terms.is_empty() {
            return Ok(SeedList { name: "configured terms".into(), terms: s.terms.clone(), provenance: salience_core::sensitivity::Provenance::Manual });
        }
        Ok(match s.seed_list.as_str() {
            "pmi" => pmi_seed_list(&self.pmi()?, &self.vocab, s.target_class, s.n_terms, s.min_count).0,
            "aggregated" => {
                let rep = build_s1_vocab(&self.corpus, &self.vocab, self.config.rep.k)?;
                aggregate_salient_terms(&rep, &self.train.token_counts(), s.n_terms, s.min_count, &self.vocab, self.term_filter())?.0
            }
            "identity" => SeedList::manual("identity terms", &fixtures::IDENTITY_TERMS),
            path => {
                let p = Path::new(path);
                let text = std::fs::read_to_string(p).map_err(|source| IoError::Fs { path: p.to_path_buf(), source })?;
                let terms: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
                SeedList::manual(&p.display().to_string(), &terms)
            }
        })
    }

    pub fn sensitivity(&self) -> Result<SensitivityReport, PipelineError> {
        let scorer = self.scorer.as_deref().ok_or_else(|| ConfigError::Invalid("sensitivity needs scorer.url or paths.model".into()))?;
        let s = &self.config.sensitivity;
        let seeds = self.seed_list()?;
        let mut cfg = SensitivityConfig::new(s.target_class, s.m, self.config.seeds.sensitivity);
        cfg.label_source = s.label_source;
        let scorer: &dyn ModelScorer = &scorer;
        Ok(match s.mode {
            salience_core::sensitivity::Mode::Insertion => counterfactual_change(scorer, &self.corpus, &seeds, &cfg)?,
            salience_core::sensitivity::Mode::Masking => masking_change(scorer, &self.corpus, &seeds, &cfg)?,
        })
    }
}

/// Cluster id per row id.
pub fn cluster_lookup(report: &ClusterReport) -> BTreeMap<String, usize> {
    report.row_ids.iter().cloned().zip(report.assignments.iter().copied()).collect()
}

//! Seed-list driven sensitivity probes: insert a term at a random position
//! or mask all its occurrences, rescore, and average the change in the
//! target-class probability.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Example, Vocabulary};
use crate::represent::PmiTable;
use crate::rng;

pub const MASK_TOKEN: &str = "[MASK]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Manual,
    PmiTop,
    AggregatedSalience,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedList {
    pub name: String,
    pub terms: Vec<String>,
    pub provenance: Provenance,
}

impl SeedList {
    pub fn manual(name: &str, terms: &[&str]) -> Self {
        SeedList { name: name.to_string(), terms: terms.iter().map(|t| t.to_string()).collect(), provenance: Provenance::Manual }
    }

    pub fn validate(&self) -> Result<(), SensitivityError> {
        if self.terms.is_empty() {
            return Err(SensitivityError::EmptySeedList);
        }
        for (i, t) in self.terms.iter().enumerate() {
            if self.terms[..i].contains(t) {
                return Err(SensitivityError::DuplicateTerm(t.clone()));
            }
        }
        Ok(())
    }
}

/// Reference seed lists for toxicity-style probes.
pub mod fixtures {
    pub const IDENTITY_TERMS: [&str; 13] = [
        "atheist", "queer", "gay", "transgender", "lesbian", "homosexual", "feminist", "black", "white", "heterosexual", "islam",
        "muslim", "bisexual",
    ];
    pub const PMI_TOXIC: [&str; 10] = ["fuck", "fucking", "nipple", "bitch", "suck", "sucking", "lick", "cock", "asshole", "sucker"];
    pub const AGGREGATED_TOXIC: [&str; 10] = ["fuck", "fucking", "shit", "stupid", "idiot", "bitch", "suck", "asshole", "ass", "dick"];
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SensitivityError {
    #[error("scorer failed on {id}: {message}")]
    Scorer { id: String, message: String },
    #[error("scorer returned {found} rows for {expected} inputs")]
    BatchSize { expected: usize, found: usize },
    #[error("m = {m} exceeds the {available} examples of the slice")]
    SampleTooLarge { m: usize, available: usize },
    #[error("example {id} has class {class}, which the slice must exclude")]
    SliceClass { id: String, class: usize },
    #[error("example {id} has class {class}, but masking needs every slice example in class {target}")]
    SliceNotTarget { id: String, class: usize, target: usize },
    #[error("example {0} only has synthesized probabilities")]
    SynthesizedProbs(String),
    #[error("target class {target} outside a {classes}-class distribution")]
    TargetClass { target: usize, classes: usize },
    #[error("seed list is empty")]
    EmptySeedList,
    #[error("duplicate seed term {0}")]
    DuplicateTerm(String),
    #[error("slice is empty")]
    EmptySlice,
}

/// Error text from a scoring backend.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreError(pub String);

/// Maps token sequences to class probability distributions.
pub trait ModelScorer {
    fn num_classes(&self) -> usize;
    /// One distribution per input, in input order.
    fn score_batch(&self, inputs: &[Vec<String>]) -> Result<Vec<Vec<f64>>, ScoreError>;
}

impl<T: ModelScorer + ?Sized> ModelScorer for Box<T> {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn score_batch(&self, inputs: &[Vec<String>]) -> Result<Vec<Vec<f64>>, ScoreError> {
        (**self).score_batch(inputs)
    }
}

impl<T: ModelScorer + ?Sized> ModelScorer for &T {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn score_batch(&self, inputs: &[Vec<String>]) -> Result<Vec<Vec<f64>>, ScoreError> {
        (**self).score_batch(inputs)
    }
}

/// Returns the same distribution for every input.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantScorer(pub Vec<f64>);

impl ModelScorer for ConstantScorer {
    fn num_classes(&self) -> usize {
        self.0.len()
    }
    fn score_batch(&self, inputs: &[Vec<String>]) -> Result<Vec<Vec<f64>>, ScoreError> {
        Ok(inputs.iter().map(|_| self.0.clone()).collect())
    }
}

/// Copy of `ex` with `term` at a uniformly random position in 0..=len.
/// Scores are cleared.
pub fn insert_term(ex: &Example, term: &str, r: &mut rng::Rng) -> Example {
    let pos = r.random_range(0..=ex.tokens.len());
    insert_term_at(ex, term, pos)
}

pub fn insert_term_at(ex: &Example, term: &str, pos: usize) -> Example {
    let mut out = ex.clone();
    out.tokens.insert(pos.min(out.tokens.len()), term.to_string());
    out.clear_scores();
    out
}

/// Copy of `ex` with every `term` token replaced by `mask`, plus the number
/// of replacements. Scores are cleared only when something changed.
pub fn mask_term(ex: &Example, term: &str, mask: &str) -> (Example, usize) {
    let mut out = ex.clone();
    let mut count = 0;
    for t in out.tokens.iter_mut() {
        if t == term {
            *t = mask.to_string();
            count += 1;
        }
    }
    if count > 0 {
        out.clear_scores();
    }
    (out, count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Insertion,
    Masking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Gold,
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityConfig {
    pub target_class: usize,
    /// Examples per term for insertion.
    pub m: usize,
    pub seed: u64,
    pub mask_token: String,
    /// Which label decides that a slice example is (not) of the target class.
    pub label_source: LabelSource,
    pub with_replacement: bool,
    /// Insert every term into the same sample instead of one sample per term.
    pub shared_sample: bool,
}

impl SensitivityConfig {
    pub fn new(target_class: usize, m: usize, seed: u64) -> Self {
        SensitivityConfig {
            target_class,
            m,
            seed,
            mask_token: MASK_TOKEN.to_string(),
            label_source: LabelSource::Gold,
            with_replacement: false,
            shared_sample: false,
        }
    }

    fn label(&self, ex: &Example) -> Option<usize> {
        match self.label_source {
            LabelSource::Gold => Some(ex.gold_label),
            LabelSource::Predicted => ex.predicted_label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermResult {
    pub term: String,
    pub mean_delta: f64,
    /// Population standard deviation of this term's deltas.
    pub stddev: f64,
    /// Examples scored for this term.
    pub n_examples: usize,
    /// Replaced tokens (masking only).
    pub occurrence_count: usize,
    /// Every recorded delta, in example order.
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Mean over every (term, example) delta.
    pub mean_delta: f64,
    /// Population standard deviation across per-term means.
    pub stddev: f64,
    pub total_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub mode: Mode,
    pub seed_list: String,
    pub config: SensitivityConfig,
    pub per_term: Vec<TermResult>,
    pub aggregate: Aggregate,
    /// Terms found in no example (masking); excluded from the aggregate.
    pub absent_terms: Vec<String>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

fn score_target(scorer: &dyn ModelScorer, exs: &[Example], target: usize) -> Result<Vec<f64>, SensitivityError> {
    let inputs: Vec<Vec<String>> = exs.iter().map(|e| e.tokens.clone()).collect();
    let out = scorer.score_batch(&inputs).map_err(|e| SensitivityError::Scorer {
        id: exs.first().map(|e| e.id.clone()).unwrap_or_default(),
        message: e.0,
    })?;
    if out.len() != exs.len() {
        return Err(SensitivityError::BatchSize { expected: exs.len(), found: out.len() });
    }
    out.iter()
        .zip(exs)
        .map(|(p, e)| {
            p.get(target).copied().ok_or_else(|| SensitivityError::Scorer {
                id: e.id.clone(),
                message: alloc::format!("distribution of length {} has no class {target}", p.len()),
            })
        })
        .collect()
}

fn build_report(mode: Mode, seeds: &SeedList, cfg: &SensitivityConfig, per_term: Vec<TermResult>) -> SensitivityReport {
    let counted: Vec<&TermResult> = per_term.iter().filter(|t| t.n_examples > 0).collect();
    let all: Vec<f64> = counted.iter().flat_map(|t| t.deltas.iter().copied()).collect();
    let means: Vec<f64> = counted.iter().map(|t| t.mean_delta).collect();
    let total_count = match mode {
        Mode::Insertion => all.len(),
        Mode::Masking => per_term.iter().map(|t| t.occurrence_count).sum(),
    };
    let aggregate = Aggregate { mean_delta: mean_std(&all).0, stddev: mean_std(&means).1, total_count };
    let absent_terms = per_term.iter().filter(|t| t.n_examples == 0).map(|t| t.term.clone()).collect();
    SensitivityReport { mode, seed_list: seeds.name.clone(), config: cfg.clone(), per_term, aggregate, absent_terms }
}

fn check_common(scorer: &dyn ModelScorer, slice: &Corpus, seeds: &SeedList, cfg: &SensitivityConfig) -> Result<(), SensitivityError> {
    seeds.validate()?;
    if cfg.target_class >= scorer.num_classes() {
        return Err(SensitivityError::TargetClass { target: cfg.target_class, classes: scorer.num_classes() });
    }
    if let Some(e) = slice.examples().iter().find(|e| e.probs_synthesized) {
        return Err(SensitivityError::SynthesizedProbs(e.id.clone()));
    }
    Ok(())
}

/// Counterfactual insertion: every seed term goes into `m` sampled
/// non-target examples; the report's aggregate is the equal-weight mean of
/// all (term, example) deltas.
pub fn counterfactual_change(
    scorer: &dyn ModelScorer,
    slice: &Corpus,
    seeds: &SeedList,
    cfg: &SensitivityConfig,
) -> Result<SensitivityReport, SensitivityError> {
    check_common(scorer, slice, seeds, cfg)?;
    if let Some(e) = slice.examples().iter().find(|e| cfg.label(e) == Some(cfg.target_class)) {
        return Err(SensitivityError::SliceClass { id: e.id.clone(), class: cfg.target_class });
    }
    let n = slice.len();
    if n == 0 {
        return Err(SensitivityError::EmptySlice);
    }
    if cfg.m > n && !cfg.with_replacement {
        return Err(SensitivityError::SampleTooLarge { m: cfg.m, available: n });
    }
    let base = score_target(scorer, slice.examples(), cfg.target_class)?;
    let draw = |r: &mut rng::Rng| -> Vec<usize> {
        if cfg.with_replacement {
            (0..cfg.m).map(|_| r.random_range(0..n)).collect()
        } else {
            index::sample(r, n, cfg.m).into_vec()
        }
    };
    let mut shared = rng::derive(cfg.seed, 0);
    let shared_idx = if cfg.shared_sample { Some(draw(&mut shared)) } else { None };
    let mut per_term = Vec::with_capacity(seeds.terms.len());
    for (ti, term) in seeds.terms.iter().enumerate() {
        let mut r = rng::derive(cfg.seed, ti as u64 + 1);
        let idx = match &shared_idx {
            Some(s) => s.clone(),
            None => draw(&mut r),
        };
        let modified: Vec<Example> = idx.iter().map(|&i| insert_term(&slice.examples()[i], term, &mut r)).collect();
        let after = score_target(scorer, &modified, cfg.target_class)?;
        let deltas: Vec<f64> = idx.iter().zip(&after).map(|(&i, a)| a - base[i]).collect();
        let (mean_delta, stddev) = mean_std(&deltas);
        per_term.push(TermResult { term: term.clone(), mean_delta, stddev, n_examples: deltas.len(), occurrence_count: 0, deltas });
    }
    Ok(build_report(Mode::Insertion, seeds, cfg, per_term))
}

/// Masking: every example containing a seed term has all its occurrences
/// replaced by the mask token and is rescored.
pub fn masking_change(
    scorer: &dyn ModelScorer,
    slice: &Corpus,
    seeds: &SeedList,
    cfg: &SensitivityConfig,
) -> Result<SensitivityReport, SensitivityError> {
    check_common(scorer, slice, seeds, cfg)?;
    if let Some(e) = slice.examples().iter().find(|e| cfg.label(e).is_some_and(|l| l != cfg.target_class)) {
        return Err(SensitivityError::SliceNotTarget { id: e.id.clone(), class: cfg.label(e).unwrap_or_default(), target: cfg.target_class });
    }
    let mut per_term = Vec::with_capacity(seeds.terms.len());
    for term in &seeds.terms {
        let hits: Vec<&Example> = slice.examples().iter().filter(|e| e.contains_token(term)).collect();
        let originals: Vec<Example> = hits.iter().map(|e| (*e).clone()).collect();
        let mut count = 0;
        let masked: Vec<Example> = hits
            .iter()
            .map(|e| {
                let (m, c) = mask_term(e, term, &cfg.mask_token);
                count += c;
                m
            })
            .collect();
        let (before, after) = if hits.is_empty() {
            (Vec::new(), Vec::new())
        } else {
            (score_target(scorer, &originals, cfg.target_class)?, score_target(scorer, &masked, cfg.target_class)?)
        };
        let deltas: Vec<f64> = after.iter().zip(&before).map(|(a, b)| a - b).collect();
        let (mean_delta, stddev) = mean_std(&deltas);
        per_term.push(TermResult { term: term.clone(), mean_delta, stddev, n_examples: deltas.len(), occurrence_count: count, deltas });
    }
    Ok(build_report(Mode::Masking, seeds, cfg, per_term))
}

/// Top `n_terms` tokens by PMI with `target_class` among tokens present in
/// at least `min_count` examples (ties to the lower vocabulary index). The
/// flag is set when fewer than `n_terms` qualify.
pub fn pmi_seed_list(pmi: &PmiTable, vocab: &Vocabulary, target_class: usize, n_terms: usize, min_count: usize) -> (SeedList, bool) {
    let mut cands: Vec<(usize, f64)> = (0..pmi.vocab_len())
        .filter(|&j| pmi.token_counts[j] >= min_count && target_class < pmi.num_classes)
        .map(|j| (j, pmi.get(j, target_class)))
        .collect();
    cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    cands.truncate(n_terms);
    let short = cands.len() < n_terms;
    let terms = cands.into_iter().map(|(j, _)| vocab.token(j).to_string()).collect();
    (SeedList { name: alloc::format!("PMI(token; class {target_class})"), terms, provenance: Provenance::PmiTop }, short)
}

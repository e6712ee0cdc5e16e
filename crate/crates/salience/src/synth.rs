//! End-to-end shortcut experiment: generate the dataset, train the toy
//! classifier and annotate every example with its Grad-L2 salience.

use std::path::Path;

use salience_core::corpus::{Corpus, EmbeddingTable, Vocabulary};
use salience_core::synthetic::{
    annotate_with_model, generate_shortcut_dataset, sentiment_base, ShortcutSpec, ToyConfig, ToyModel, TrainReport, SYNTHETIC_TAG,
};

use crate::config::{SessionConfig, SynthConfig};
use crate::io;
use crate::pipeline::PipelineError;

pub struct ShortcutRun {
    pub base: Corpus,
    pub dataset: Corpus,
    pub model: ToyModel,
    pub report: TrainReport,
    /// `dataset` with predictions, probabilities and salience.
    pub annotated: Corpus,
}

impl ShortcutRun {
    pub fn embeddings(&self) -> EmbeddingTable {
        EmbeddingTable::from_matrix(&self.model.vocab, self.model.config.d, self.model.embeddings().to_vec()).expect("model shapes agree")
    }
}

/// Runs generation and training from `base`; `seed` drives both.
pub fn run_on(base: Corpus, spec: &ShortcutSpec, model: &ToyConfig, seed: u64) -> Result<ShortcutRun, PipelineError> {
    let spec = ShortcutSpec { seed, ..spec.clone() };
    let dataset = generate_shortcut_dataset(&base, &spec).map_err(|e| PipelineError::Data(e.to_string()))?;
    let vocab = Vocabulary::from_corpus::<&str>(&dataset, &[], &[])?;
    let cfg = ToyConfig { seed, ..model.clone() };
    let (model, report) = ToyModel::train(&dataset, vocab, cfg).map_err(|e| PipelineError::Data(e.to_string()))?;
    let annotated = annotate_with_model(&model, &dataset).map_err(|e| PipelineError::Data(e.to_string()))?;
    Ok(ShortcutRun { base, dataset, model, report, annotated })
}

pub fn run(cfg: &SynthConfig, seed: u64) -> Result<ShortcutRun, PipelineError> {
    let base = match &cfg.base {
        Some(p) => io::load_examples(p, io::LoadOptions::default())?,
        None => sentiment_base(cfg.base_size, seed),
    };
    run_on(base, &cfg.spec, &cfg.model, seed)
}

/// Writes the run into `dir` together with a `session.toml` that analyzes
/// the class-0 predictions against the synthetic tag.
pub fn write_run(dir: &Path, run: &ShortcutRun, parent: &SessionConfig) -> Result<(), PipelineError> {
    io::save_examples(&dir.join("base.jsonl"), &run.base)?;
    io::save_examples(&dir.join("dataset.jsonl"), &run.dataset)?;
    io::save_examples(&dir.join("annotated.jsonl"), &run.annotated)?;
    io::save_model(&dir.join("model.bin"), &run.model)?;
    io::save_embeddings(&dir.join("embeddings.tsv"), &run.model.vocab, &run.embeddings())?;
    io::save_json(&dir.join("train_report.json"), &run.report)?;
    let mut session = SessionConfig { rep: parent.rep.clone(), analysis: parent.analysis.clone(), seeds: parent.seeds.clone(), ..SessionConfig::default() };
    session.paths.examples = Some("annotated.jsonl".into());
    session.paths.embeddings = Some("embeddings.tsv".into());
    session.paths.model = Some("model.bin".into());
    session.paths.output_dir = ".".into();
    session.filters.predicted_label = Some(0);
    session.analysis.tag.get_or_insert_with(|| SYNTHETIC_TAG.to_string());
    session.synth = parent.synth.clone();
    session.synth.base = None;
    io::write_atomic(&dir.join("session.toml"), session.to_toml().as_bytes())?;
    Ok(())
}

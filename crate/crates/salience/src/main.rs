use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use salience::config::{ConfigError, SessionConfig};
use salience::io::{self, IoError, MetaField};
use salience::pipeline::{cluster_lookup, PipelineError, Workspace};
use salience::service::{self, Session};
use salience::synth;
use salience_core::analyze::{nearest_neighbors, NeighborConstraint, Query};
use salience_core::sensitivity::Mode;

#[derive(Parser)]
#[command(name = "salience", version, about = "Cluster, project and probe per-example salience maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Session config (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// JSONL examples; overrides paths.examples.
    #[arg(long, global = true)]
    examples: Option<PathBuf>,
    /// Output directory; overrides paths.output_dir.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Top-k salience entries kept per example.
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    clusters: Option<usize>,
    /// Sets every seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    perplexity: Option<f64>,
    /// Tag scored by cluster precision and recall.
    #[arg(long, global = true)]
    tag: Option<String>,
    #[arg(long, global = true, value_enum)]
    rep: Option<RepArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RepArg {
    S1,
    S2,
    B1,
    B2,
    B3,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Insertion,
    Masking,
}

#[derive(Subcommand)]
enum Command {
    /// Build a representation matrix.
    Represent {
        #[command(flatten)]
        common: Common,
    },
    /// k-means over a representation, with tag metrics and top terms.
    Cluster {
        #[command(flatten)]
        common: Common,
    },
    /// Nearest neighbors of one example.
    Neighbors {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        id: String,
        #[arg(long)]
        n: Option<usize>,
        /// Keep neighbors whose gold label equals the query's prediction.
        #[arg(long)]
        same_label_as_pred: bool,
    },
    /// t-SNE projection exported as vectors.tsv and metadata.tsv.
    Project {
        #[command(flatten)]
        common: Common,
    },
    /// Insertion or masking sensitivity of a seed list.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Comma-separated terms; overrides the configured seed list.
        #[arg(long, value_delimiter = ',')]
        terms: Vec<String>,
    },
    /// Generate the shortcut dataset, train the toy model and annotate.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Serve the JSON API for a session.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory holding session.toml (as written by `synth`).
        #[arg(long)]
        session_dir: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Data(String),
    Runtime(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(_) => Failure::Config(e.to_string()),
            PipelineError::Io(_) | PipelineError::Data(_) => Failure::Data(e.to_string()),
            PipelineError::Analyze(_) | PipelineError::Sensitivity(_) => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        PipelineError::Io(e).into()
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load_config(c: &Common) -> Result<SessionConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => SessionConfig::load(p)?,
        None => SessionConfig::default(),
    };
    if let Some(p) = &c.examples {
        cfg.paths.examples = Some(p.clone());
    }
    if let Some(p) = &c.out_dir {
        cfg.paths.output_dir = p.clone();
    }
    if let Some(k) = c.k {
        cfg.rep.k = k;
    }
    if let Some(n) = c.clusters {
        cfg.analysis.n_clusters = n;
    }
    if let Some(s) = c.seed {
        cfg.seeds = salience::config::Seeds::all(s);
    }
    if let Some(p) = c.perplexity {
        cfg.analysis.tsne.perplexity = p;
    }
    if let Some(t) = &c.tag {
        cfg.analysis.tag = Some(t.clone());
    }
    if let Some(r) = c.rep {
        cfg.rep.kind = ["s1", "s2", "b1", "b2", "b3"][r as usize].to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sanitize(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.+".contains(c) { c } else { '_' }).collect()
}

fn report(path: &Path) {
    println!("wrote {}", path.display());
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Represent { common } => {
            let ws = Workspace::load(load_config(&common)?)?;
            let rep = ws.configured_rep()?;
            let path = ws.config.paths.output_dir.join(format!("rep_{}.jsonl", rep.kind.short_name()));
            io::save_rep(&path, &rep)?;
            report(&path);
        }
        Command::Cluster { common } => {
            let ws = Workspace::load(load_config(&common)?)?;
            let rep = ws.configured_rep()?;
            let clusters = ws.cluster(&rep)?;
            let path = ws.config.paths.output_dir.join(format!("clusters_{}.json", rep.kind.short_name()));
            io::save_json(&path, &clusters)?;
            if let Some(b) = clusters.best() {
                println!(
                    "best cluster {}: size {} precision {:.3} recall {:.3}",
                    b.id,
                    b.size,
                    b.precision.unwrap_or(f64::NAN),
                    b.recall.unwrap_or(f64::NAN)
                );
            }
            report(&path);
        }
        Command::Neighbors { common, id, n, same_label_as_pred } => {
            let ws = Workspace::load(load_config(&common)?)?;
            let rep = ws.configured_rep()?;
            let n = n.unwrap_or(ws.config.analysis.n_neighbors);
            let constraint = NeighborConstraint { same_label_as_query_prediction: same_label_as_pred, scope: None };
            let list = nearest_neighbors(&rep, &ws.corpus, &Query::Id(id.clone()), n, &constraint).map_err(|e| Failure::Data(e.to_string()))?;
            let path = ws.config.paths.output_dir.join(format!("neighbors_{}_{}.json", rep.kind.short_name(), sanitize(&id)));
            io::save_json(&path, &list)?;
            report(&path);
        }
        Command::Project { common } => {
            let ws = Workspace::load(load_config(&common)?)?;
            let rep = ws.configured_rep()?;
            let proj = ws.project(&rep)?;
            let clusters = ws.cluster(&rep).ok().map(|c| cluster_lookup(&c));
            let lookup = clusters.as_ref().map(|m| move |id: &str| m.get(id).copied());
            let fields = [MetaField::Id, MetaField::Pred, MetaField::Gold, MetaField::Cluster, MetaField::Tags];
            let (vectors, meta) = io::projection_tsv(&proj, &ws.corpus, lookup.as_ref().map(|f| f as &dyn Fn(&str) -> Option<usize>), &fields);
            let dir = &ws.config.paths.output_dir;
            io::write_atomic(&dir.join("vectors.tsv"), vectors.as_bytes())?;
            io::write_atomic(&dir.join("metadata.tsv"), meta.as_bytes())?;
            let summary = serde_json::json!({
                "params": proj.params,
                "effective_perplexity": proj.effective_perplexity,
                "perplexity_reduced": proj.perplexity_reduced,
                "kl_after_exaggeration": proj.kl_after_exaggeration,
                "final_kl": proj.final_kl,
                "kl_history": proj.kl_history,
            });
            io::save_json(&dir.join("projection.json"), &summary)?;
            if proj.perplexity_reduced {
                eprintln!("warning: perplexity reduced to {:.3} for {} rows", proj.effective_perplexity, rep.len());
            }
            report(&dir.join("vectors.tsv"));
            report(&dir.join("metadata.tsv"));
        }
        Command::Sensitivity { common, mode, terms } => {
            let mut cfg = load_config(&common)?;
            if let Some(m) = mode {
                cfg.sensitivity.mode = match m {
                    ModeArg::Insertion => Mode::Insertion,
                    ModeArg::Masking => Mode::Masking,
                };
            }
            if !terms.is_empty() {
                cfg.sensitivity.terms = terms;
            }
            let ws = Workspace::load(cfg)?;
            let rep = ws.sensitivity()?;
            let name = match rep.mode {
                Mode::Insertion => "insertion",
                Mode::Masking => "masking",
            };
            let path = ws.config.paths.output_dir.join(format!("sensitivity_{name}.json"));
            io::save_json(&path, &rep)?;
            println!("{} mean delta {:.4} (sd {:.4} over terms)", rep.seed_list, rep.aggregate.mean_delta, rep.aggregate.stddev);
            report(&path);
        }
        Command::Synth { common } => {
            let cfg = load_config(&common)?;
            let run = synth::run(&cfg.synth, cfg.seeds.synth)?;
            synth::write_run(&cfg.paths.output_dir, &run, &cfg)?;
            println!(
                "trained: loss {:.4} -> {:.4}, train accuracy {:.3}",
                run.report.initial_loss,
                run.report.epoch_losses.last().copied().unwrap_or(f64::NAN),
                run.report.train_accuracy
            );
            report(&cfg.paths.output_dir);
        }
        Command::Serve { mut common, port, session_dir } => {
            if let Some(d) = session_dir {
                common.config = Some(d.join("session.toml"));
            }
            let ws = Workspace::load(load_config(&common)?)?;
            let session = Arc::new(Session::build(ws)?);
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Runtime(e.to_string()))?;
            rt.block_on(service::serve(session, port)).map_err(|e| Failure::Runtime(e.to_string()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Config(m) => (2, m),
                Failure::Data(m) => (3, m),
                Failure::Runtime(m) => (4, m),
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

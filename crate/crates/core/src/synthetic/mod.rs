//! Planted-shortcut datasets and a small differentiable classifier whose
//! Grad-L2 salience feeds the rest of the pipeline.

mod generate;
mod model;
mod persist;

pub use generate::{SINGLE_TAG, generate_shortcut_dataset, sentiment_base, ShortcutSpec, ShortcutTerms, SyntheticError, SYNTHETIC_TAG};
pub use model::{annotate_with_model, Head, ToyConfig, ToyError, ToyModel, TrainReport};
pub use persist::PersistError;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusError, Example};
use crate::rng;

pub const SYNTHETIC_TAG: &str = "synthetic";
pub const SINGLE_TAG: &str = "single_insert";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SyntheticError {
    #[error("fraction {name} = {value} outside [0, 1]")]
    Fraction { name: &'static str, value: f64 },
    #[error("untouched + single_insert fractions sum to {0}, not 1")]
    FractionSum(f64),
    #[error("example {id} has label {label}; the generator needs binary labels")]
    NonBinary { id: String, label: usize },
    #[error("need {needed} class-{class} examples for the combination sample, base has {available}")]
    BaseTooSmall { class: usize, needed: usize, available: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortcutTerms {
    pub common: String,
    pub class0: String,
    pub class1: String,
}

impl Default for ShortcutTerms {
    fn default() -> Self {
        ShortcutTerms { common: "common".into(), class0: "class_0".into(), class1: "class_1".into() }
    }
}

impl ShortcutTerms {
    pub fn class_term(&self, class: usize) -> &str {
        if class == 0 {
            &self.class0
        } else {
            &self.class1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShortcutSpec {
    pub terms: ShortcutTerms,
    pub untouched_fraction: f64,
    pub single_insert_fraction: f64,
    pub combo_fraction: f64,
    pub seed: u64,
}

impl Default for ShortcutSpec {
    fn default() -> Self {
        ShortcutSpec { terms: ShortcutTerms::default(), untouched_fraction: 0.75, single_insert_fraction: 0.25, combo_fraction: 0.25, seed: 0 }
    }
}

impl ShortcutSpec {
    pub fn validate(&self) -> Result<(), SyntheticError> {
        for (name, value) in [
            ("untouched_fraction", self.untouched_fraction),
            ("single_insert_fraction", self.single_insert_fraction),
            ("combo_fraction", self.combo_fraction),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SyntheticError::Fraction { name, value });
            }
        }
        let s = self.untouched_fraction + self.single_insert_fraction;
        if (s - 1.0).abs() > 1e-9 {
            return Err(SyntheticError::FractionSum(s));
        }
        Ok(())
    }
}

fn round(x: f64) -> usize {
    libm::round(x) as usize
}

/// Builds the shortcut dataset from a binary-labelled base corpus.
///
/// After a seeded shuffle, `round(single_insert_fraction·n)` base examples
/// get one of the three terms (uniformly) at a random position with their
/// label unchanged; the rest stay byte-identical. Then `⌊combo_fraction·n⌋`
/// base examples, split evenly between the classes (class 0 takes the odd
/// one), receive the common term and a class term at random positions and
/// take that term's class as label. Combination labels are balanced the same
/// way and assigned in shuffled order. Combination examples are appended,
/// tagged [`SYNTHETIC_TAG`], with id `<base id>+syn`.
pub fn generate_shortcut_dataset(base: &Corpus, spec: &ShortcutSpec) -> Result<Corpus, SyntheticError> {
    spec.validate()?;
    if let Some(e) = base.examples().iter().find(|e| e.gold_label > 1) {
        return Err(SyntheticError::NonBinary { id: e.id.clone(), label: e.gold_label });
    }
    let n = base.len();
    let mut r = rng::seeded(spec.seed);
    let t = &spec.terms;
    let singles_terms = [t.common.as_str(), t.class0.as_str(), t.class1.as_str()];

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut r);
    let mut single = alloc::vec![false; n];
    for &i in &order[..round(spec.single_insert_fraction * n as f64).min(n)] {
        single[i] = true;
    }
    let mut out: Vec<Example> = Vec::with_capacity(n + n / 4 + 1);
    for (i, ex) in base.examples().iter().enumerate() {
        if single[i] {
            let term = *singles_terms.choose(&mut r).expect("three terms");
            let mut e = ex.clone();
            let pos = r.random_range(0..=e.tokens.len());
            e.tokens.insert(pos, term.to_string());
            e.clear_scores();
            e.encoding = None;
            e.tags.insert(SINGLE_TAG.to_string());
            out.push(e);
        } else {
            out.push(ex.clone());
        }
    }

    let n_combo = libm::floor(spec.combo_fraction * n as f64) as usize;
    let per_class = [n_combo.div_ceil(2), n_combo / 2];
    let mut picks = Vec::with_capacity(n_combo);
    for (class, &need) in per_class.iter().enumerate() {
        let pool: Vec<usize> = (0..n).filter(|&i| base.examples()[i].gold_label == class).collect();
        if need > pool.len() {
            return Err(SyntheticError::BaseTooSmall { class, needed: need, available: pool.len() });
        }
        let mut chosen = index::sample(&mut r, pool.len(), need).into_vec();
        chosen.sort_unstable();
        picks.extend(chosen.into_iter().map(|k| pool[k]));
    }
    let mut labels: Vec<usize> = (0..n_combo).map(|k| usize::from(k >= per_class[0])).collect();
    labels.shuffle(&mut r);
    for (&i, &label) in picks.iter().zip(&labels) {
        let mut e = base.examples()[i].clone();
        let pos = r.random_range(0..=e.tokens.len());
        e.tokens.insert(pos, t.common.clone());
        let pos = r.random_range(0..=e.tokens.len());
        e.tokens.insert(pos, t.class_term(label).to_string());
        e.id = format!("{}+syn", e.id);
        e.gold_label = label;
        e.clear_scores();
        e.encoding = None;
        e.tags.insert(SYNTHETIC_TAG.to_string());
        out.push(e);
    }
    Ok(Corpus::new(&base.split_name, out)?)
}

const POSITIVE: [&str; 20] = [
    "good", "great", "excellent", "wonderful", "superb", "brilliant", "delightful", "charming", "moving", "beautiful", "fun",
    "enjoyable", "touching", "clever", "funny", "witty", "engaging", "lovely", "solid", "fine",
];
const NEGATIVE: [&str; 20] = [
    "bad", "awful", "terrible", "boring", "dull", "poor", "weak", "mess", "tedious", "bland", "stupid", "annoying", "lame",
    "painful", "worst", "ugly", "flat", "clumsy", "silly", "pointless",
];
const NEUTRAL: [&str; 84] = [
    "the", "a", "an", "of", "to", "and", "is", "it", "this", "that", "film", "movie", "story", "plot", "actor", "actors", "scene",
    "scenes", "director", "script", "ending", "music", "character", "characters", "in", "on", "with", "for", "as", "its", "was",
    "be", "by", "at", "from", "one", "all", "just", "some", "more", "than", "about", "like", "very", "really", "quite", "rather",
    "too", "so", "but", "not", "time", "way", "work", "year", "life", "man", "woman", "world", "people", "family", "love", "war",
    "city", "night", "day", "hour", "minutes", "part", "end", "kind", "lot", "thing", "things", "up", "out", "who", "what", "has",
    "have", "there", "when", ".", ",",
];

/// A seeded two-class sentiment corpus: 6–18 neutral tokens plus 1–3
/// polarity words of the example's class. Labels alternate 0, 1, 0, ...
pub fn sentiment_base(n: usize, seed: u64) -> Corpus {
    let mut r = rng::seeded(seed);
    let examples = (0..n)
        .map(|i| {
            let label = i % 2;
            let len = r.random_range(6..=18);
            let mut tokens: Vec<String> = (0..len).map(|_| NEUTRAL.choose(&mut r).expect("non-empty").to_string()).collect();
            let polar = if label == 1 { &POSITIVE } else { &NEGATIVE };
            for _ in 0..r.random_range(1..=3) {
                let pos = r.random_range(0..=tokens.len());
                tokens.insert(pos, polar.choose(&mut r).expect("non-empty").to_string());
            }
            let mut e = Example::raw(&format!("b{i}"), &[], label);
            e.tokens = tokens;
            e
        })
        .collect();
    Corpus::new("synthetic-base", examples).expect("generated ids are unique")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn eight_examples_trace() {
        let base = sentiment_base(8, 1);
        let out = generate_shortcut_dataset(&base, &ShortcutSpec::default()).unwrap();
        assert_eq!(out.len(), 10);
        let syn: Vec<&Example> = out.examples().iter().filter(|e| e.has_tag(SYNTHETIC_TAG)).collect();
        assert_eq!(syn.len(), 2);
        let mut labels: Vec<usize> = syn.iter().map(|e| e.gold_label).collect();
        labels.sort();
        assert_eq!(labels, [0, 1]);
        assert_eq!(out.examples().iter().filter(|e| e.has_tag(SINGLE_TAG)).count(), 2);
    }

    #[test]
    fn degenerate_spec_is_identity() {
        let base = sentiment_base(12, 3);
        let spec = ShortcutSpec { untouched_fraction: 1.0, single_insert_fraction: 0.0, combo_fraction: 0.0, ..Default::default() };
        assert_eq!(generate_shortcut_dataset(&base, &spec).unwrap(), base);
    }

    #[test]
    fn bad_specs() {
        let base = sentiment_base(4, 0);
        let spec = ShortcutSpec { untouched_fraction: 0.5, ..Default::default() };
        assert_eq!(generate_shortcut_dataset(&base, &spec), Err(SyntheticError::FractionSum(0.75)));
        let spec = ShortcutSpec { combo_fraction: 1.5, ..Default::default() };
        assert!(matches!(generate_shortcut_dataset(&base, &spec), Err(SyntheticError::Fraction { .. })));
        let lopsided = Corpus::new("t", vec![Example::raw("a", &["x"], 0), Example::raw("b", &["y"], 0)]).unwrap();
        let spec = ShortcutSpec { combo_fraction: 1.0, ..Default::default() };
        assert!(matches!(generate_shortcut_dataset(&lopsided, &spec), Err(SyntheticError::BaseTooSmall { class: 1, .. })));
    }

    #[test]
    fn base_is_seeded() {
        assert_eq!(sentiment_base(20, 5), sentiment_base(20, 5));
        assert_ne!(sentiment_base(20, 5), sentiment_base(20, 6));
    }
}

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{AnalyzeError, ClusterReport};
use crate::corpus::Vocabulary;
use crate::represent::{RepKind, RepMatrix};
use crate::sensitivity::{Provenance, SeedList};

/// Which vocabulary classes to drop from term lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermFilter {
    pub special: bool,
    pub punctuation: bool,
}

impl Default for TermFilter {
    fn default() -> Self {
        TermFilter { special: true, punctuation: true }
    }
}

impl TermFilter {
    pub const NONE: TermFilter = TermFilter { special: false, punctuation: false };

    fn drops(&self, vocab: &Vocabulary, j: usize) -> bool {
        (self.special && vocab.is_special(j)) || (self.punctuation && vocab.is_punctuation(j))
    }

    fn names(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.special {
            v.push("special".to_string());
        }
        if self.punctuation {
            v.push("punctuation".to_string());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermWeight {
    pub token: String,
    pub weight: f64,
}

/// Terms ranked by weight (non-increasing; ties by vocabulary index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermWeights {
    pub scope: String,
    pub filters: Vec<String>,
    pub terms: Vec<TermWeight>,
}

fn check_vocab_kind(rep: &RepMatrix, allow_b1: bool) -> Result<(), AnalyzeError> {
    match rep.kind {
        RepKind::S1Vocab => Ok(()),
        RepKind::B1Pmi if allow_b1 => Ok(()),
        _ if allow_b1 => Err(AnalyzeError::WrongKind { expected: "vocabulary-indexed (S1 or B1)" }),
        _ => Err(AnalyzeError::WrongKind { expected: "S1" }),
    }
}

/// Column means over `positions`, minus filtered tokens, ranked.
fn column_means(rep: &RepMatrix, positions: &[usize], vocab: &Vocabulary, filter: TermFilter) -> Vec<(usize, f64)> {
    let mut sums: BTreeMap<usize, f64> = BTreeMap::new();
    for &p in positions {
        for (j, v) in rep.rows[p].entries() {
            *sums.entry(j).or_insert(0.0) += v;
        }
    }
    let n = positions.len() as f64;
    let mut out: Vec<(usize, f64)> = sums
        .into_iter()
        .map(|(j, s)| (j, s / n))
        .filter(|&(j, w)| w != 0.0 && !filter.drops(vocab, j))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

fn to_weights(scope: String, filter: TermFilter, vocab: &Vocabulary, ranked: Vec<(usize, f64)>) -> TermWeights {
    TermWeights {
        scope,
        filters: filter.names(),
        terms: ranked.into_iter().map(|(j, weight)| TermWeight { token: vocab.token(j).to_string(), weight }).collect(),
    }
}

/// The `n_terms` highest mean-salience terms of every cluster.
pub fn cluster_top_terms(
    rep: &RepMatrix,
    report: &ClusterReport,
    n_terms: usize,
    vocab: &Vocabulary,
    filter: TermFilter,
) -> Result<Vec<TermWeights>, AnalyzeError> {
    check_vocab_kind(rep, false)?;
    let pos: BTreeMap<&str, usize> = rep.row_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut members = alloc::vec![Vec::new(); report.n_clusters];
    for (id, &c) in report.row_ids.iter().zip(&report.assignments) {
        members[c].push(*pos.get(id.as_str()).ok_or_else(|| AnalyzeError::UnknownId(id.clone()))?);
    }
    members
        .iter()
        .enumerate()
        .map(|(c, m)| {
            if m.is_empty() {
                return Err(AnalyzeError::EmptyCluster(c));
            }
            let mut ranked = column_means(rep, m, vocab, filter);
            ranked.truncate(n_terms);
            Ok(to_weights(format!("cluster {c}"), filter, vocab, ranked))
        })
        .collect()
}

/// Full ranked column-mean term list over a subset of rows.
pub fn word_cloud(rep: &RepMatrix, positions: &[usize], vocab: &Vocabulary, filter: TermFilter, scope: &str) -> Result<TermWeights, AnalyzeError> {
    check_vocab_kind(rep, true)?;
    if positions.is_empty() {
        return Err(AnalyzeError::EmptySubset);
    }
    Ok(to_weights(scope.to_string(), filter, vocab, column_means(rep, positions, vocab, filter)))
}

/// Seed terms from S1 column means over a slice, keeping tokens that occur
/// at least `min_count` times in `train_counts`. The flag is set when fewer
/// than `n_terms` survive.
pub fn aggregate_salient_terms(
    rep: &RepMatrix,
    train_counts: &BTreeMap<String, usize>,
    n_terms: usize,
    min_count: usize,
    vocab: &Vocabulary,
    filter: TermFilter,
) -> Result<(SeedList, bool), AnalyzeError> {
    check_vocab_kind(rep, false)?;
    if rep.is_empty() {
        return Err(AnalyzeError::EmptySubset);
    }
    let all: Vec<usize> = (0..rep.len()).collect();
    let terms: Vec<String> = column_means(rep, &all, vocab, filter)
        .into_iter()
        .filter(|&(j, w)| w > 0.0 && train_counts.get(vocab.token(j)).copied().unwrap_or(0) >= min_count)
        .take(n_terms)
        .map(|(j, _)| vocab.token(j).to_string())
        .collect();
    let short = terms.len() < n_terms;
    Ok((SeedList { name: "aggregated salient terms".to_string(), terms, provenance: Provenance::AggregatedSalience }, short))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::represent::Row;
    use alloc::vec;

    fn vocab() -> Vocabulary {
        let toks = ["awful", "[CLS]", ".", "idiot", "fine"].iter().map(|s| s.to_string()).collect();
        Vocabulary::from_tokens(toks, &["[CLS]"], &["."]).unwrap()
    }

    fn s1(rows: Vec<Row>) -> RepMatrix {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        RepMatrix::new(RepKind::S1Vocab, 5, Some(5), true, ids, rows)
    }

    #[test]
    fn hand_column_means() {
        let m = s1(vec![
            Row::sparse(vec![(0, 0.6), (3, 0.8)]),
            Row::sparse(vec![(0, 1.0)]),
            Row::sparse(vec![(2, 0.6), (4, 0.8)]),
        ]);
        let w = word_cloud(&m, &[0, 1, 2], &vocab(), TermFilter::NONE, "all").unwrap();
        let got: Vec<(&str, f64)> = w.terms.iter().map(|t| (t.token.as_str(), t.weight)).collect();
        assert_eq!(got, [("awful", 1.6 / 3.0), ("idiot", 0.8 / 3.0), ("fine", 0.8 / 3.0), (".", 0.6 / 3.0)]);
        let f = word_cloud(&m, &[0, 1, 2], &vocab(), TermFilter::default(), "all").unwrap();
        let kept: Vec<&str> = f.terms.iter().map(|t| t.token.as_str()).collect();
        assert_eq!(kept, ["awful", "idiot", "fine"]);
    }

    #[test]
    fn single_row_cloud_equals_row() {
        let m = s1(vec![Row::sparse(vec![(0, 0.6), (3, 0.8)])]);
        let w = word_cloud(&m, &[0], &vocab(), TermFilter::NONE, "one").unwrap();
        assert_eq!(w.terms[0], TermWeight { token: "idiot".into(), weight: 0.8 });
        let twice = s1(vec![Row::sparse(vec![(0, 0.6), (3, 0.8)]); 2]);
        assert_eq!(word_cloud(&twice, &[0, 1], &vocab(), TermFilter::NONE, "one").unwrap(), w);
        assert_eq!(word_cloud(&m, &[], &vocab(), TermFilter::NONE, "none"), Err(AnalyzeError::EmptySubset));
    }

    #[test]
    fn aggregated_terms_respect_min_count() {
        let m = s1(vec![Row::sparse(vec![(3, 0.9), (4, 0.1)])]);
        let counts: BTreeMap<String, usize> = [("idiot".to_string(), 25), ("fine".to_string(), 3)].into_iter().collect();
        let (seeds, short) = aggregate_salient_terms(&m, &counts, 10, 20, &vocab(), TermFilter::default()).unwrap();
        assert_eq!(seeds.terms, ["idiot"]);
        assert!(short);
        let (seeds, short) = aggregate_salient_terms(&m, &counts, 10, 26, &vocab(), TermFilter::default()).unwrap();
        assert!(seeds.terms.is_empty() && short);
    }
}

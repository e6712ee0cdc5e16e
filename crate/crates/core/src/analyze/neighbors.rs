use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::AnalyzeError;
use crate::corpus::Corpus;
use crate::represent::{RepMatrix, Row};

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    Id(String),
    /// An outside vector; `label` stands in for the query's prediction.
    Vector { row: Row, label: Option<usize> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NeighborConstraint {
    /// Keep only candidates whose gold label equals the query's prediction.
    pub same_label_as_query_prediction: bool,
    /// Restrict candidates to these ids.
    pub scope: Option<BTreeSet<String>>,
}

impl NeighborConstraint {
    fn describe(&self, label: Option<usize>) -> String {
        let mut parts = Vec::new();
        if self.same_label_as_query_prediction {
            parts.push(format!("gold_label == {}", label.map_or(-1, |l| l as i64)));
        }
        if let Some(s) = &self.scope {
            parts.push(format!("id in scope of {}", s.len()));
        }
        if parts.is_empty() {
            String::from("none")
        } else {
            parts.join(" && ")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborList {
    pub query_id: Option<String>,
    pub neighbors: Vec<Neighbor>,
    pub constraint: String,
    /// Set when fewer than the requested number of candidates exist.
    pub short: bool,
}

/// Exact Euclidean nearest neighbors by full scan. Ties keep row order.
pub fn nearest_neighbors(
    rep: &RepMatrix,
    corpus: &Corpus,
    query: &Query,
    n: usize,
    constraint: &NeighborConstraint,
) -> Result<NeighborList, AnalyzeError> {
    let (qrow, qpos, qid, label) = match query {
        Query::Id(id) => {
            let pos = rep.position(id).ok_or_else(|| AnalyzeError::UnknownId(id.clone()))?;
            let ex = corpus.get(id).ok_or_else(|| AnalyzeError::UnknownId(id.clone()))?;
            (&rep.rows[pos], Some(pos), Some(id.clone()), ex.predicted_label)
        }
        Query::Vector { row, label } => {
            if let Some((j, _)) = row.entries().find(|(j, _)| *j >= rep.dim) {
                return Err(AnalyzeError::QueryDim { expected: rep.dim, found: j + 1 });
            }
            if let Row::Dense(v) = row {
                if v.len() != rep.dim {
                    return Err(AnalyzeError::QueryDim { expected: rep.dim, found: v.len() });
                }
            }
            (row, None, None, *label)
        }
    };
    if constraint.same_label_as_query_prediction && label.is_none() {
        return Err(AnalyzeError::QueryLabel);
    }
    let mut cands = Vec::new();
    for (i, row) in rep.rows.iter().enumerate() {
        if Some(i) == qpos {
            continue;
        }
        let id = &rep.row_ids[i];
        if let Some(scope) = &constraint.scope {
            if !scope.contains(id) {
                continue;
            }
        }
        if constraint.same_label_as_query_prediction {
            let ex = corpus.get(id).ok_or_else(|| AnalyzeError::UnknownId(id.clone()))?;
            if Some(ex.gold_label) != label {
                continue;
            }
        }
        cands.push((qrow.sq_dist(row), i));
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let short = cands.len() < n;
    let neighbors = cands
        .into_iter()
        .take(n)
        .map(|(d, i)| Neighbor { id: rep.row_ids[i].clone(), distance: libm::sqrt(d) })
        .collect();
    Ok(NeighborList { query_id: qid, neighbors, constraint: constraint.describe(label), short })
}

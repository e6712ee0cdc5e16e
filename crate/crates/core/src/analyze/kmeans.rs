use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{AnalyzeError, TermWeights};
use crate::corpus::Corpus;
use crate::represent::{RepMatrix, Row};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub n_clusters: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    /// Relative to the mean per-dimension variance of the data.
    pub tol: f64,
    /// Cluster all-zero rows too instead of leaving them out.
    pub include_zero_rows: bool,
}

impl KMeansParams {
    pub fn new(n_clusters: usize, seed: u64) -> Self {
        KMeansParams { n_clusters, seed, restarts: 10, max_iter: 300, tol: 1e-4, include_zero_rows: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub id: usize,
    pub size: usize,
    pub size_fraction: f64,
    pub tagged: Option<usize>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub top_terms: Option<TermWeights>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub n_clusters: usize,
    /// Clustered rows; `assignments[i]` is the cluster of `row_ids[i]`.
    pub row_ids: Vec<String>,
    pub assignments: Vec<usize>,
    /// Zero rows left out of clustering.
    pub excluded_ids: Vec<String>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after every assignment step of the kept run.
    pub inertia_history: Vec<f64>,
    /// Final inertia of every restart, in restart order.
    pub restart_inertias: Vec<f64>,
    pub per_cluster: Vec<ClusterStats>,
    pub tag: Option<String>,
    pub best_precision_cluster: Option<usize>,
    pub seed: u64,
    pub restarts: usize,
    pub iterations_run: usize,
    pub converged: bool,
}

impl ClusterReport {
    pub fn cluster_of(&self, id: &str) -> Option<usize> {
        self.row_ids.iter().position(|r| r == id).map(|i| self.assignments[i])
    }

    pub fn members(&self, cluster: usize) -> impl Iterator<Item = &str> {
        self.row_ids.iter().zip(&self.assignments).filter(move |(_, &a)| a == cluster).map(|(id, _)| id.as_str())
    }

    pub fn best(&self) -> Option<&ClusterStats> {
        self.best_precision_cluster.map(|c| &self.per_cluster[c])
    }
}

struct Run {
    centroids: Vec<Vec<f64>>,
    assignments: Vec<usize>,
    inertia: f64,
    history: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn norm_sq(c: &[f64]) -> f64 {
    c.iter().fold(0.0, |a, v| a + v * v)
}

/// Squared distance from a row to a dense centroid with precomputed norm.
fn dist_to(row: &Row, c: &[f64], c_norm: f64) -> f64 {
    match row {
        Row::Dense(x) => x.iter().zip(c).fold(0.0, |a, (x, c)| a + (x - c) * (x - c)),
        Row::Sparse { .. } => {
            let d = row.entries().fold(c_norm, |a, (j, x)| a + (x - c[j]) * (x - c[j]) - c[j] * c[j]);
            d.max(0.0)
        }
    }
}

fn assign(points: &[&Row], centroids: &[Vec<f64>], out: &mut [usize], dists: &mut [f64]) -> f64 {
    let norms: Vec<f64> = centroids.iter().map(|c| norm_sq(c)).collect();
    let mut inertia = 0.0;
    for (i, p) in points.iter().enumerate() {
        let mut best = (f64::INFINITY, 0);
        for (k, c) in centroids.iter().enumerate() {
            let d = dist_to(p, c, norms[k]);
            if d < best.0 {
                best = (d, k);
            }
        }
        out[i] = best.1;
        dists[i] = best.0;
        inertia += best.0;
    }
    inertia
}

fn plus_plus(points: &[&Row], dim: usize, k: usize, r: &mut rng::Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[r.random_range(0..n)].to_dense(dim)];
    let mut d2: Vec<f64> = points.iter().map(|p| dist_to(p, &centroids[0], norm_sq(&centroids[0]))).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = r.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            r.random_range(0..n)
        };
        let c = points[pick].to_dense(dim);
        let cn = norm_sq(&c);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist_to(p, &c, cn));
        }
        centroids.push(c);
    }
    centroids
}

fn lloyd(points: &[&Row], dim: usize, p: &KMeansParams, tol_abs: f64, r: &mut rng::Rng) -> Run {
    let n = points.len();
    let k = p.n_clusters;
    let mut centroids = plus_plus(points, dim, k, r);
    let mut assignments = vec![0; n];
    let mut dists = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < p.max_iter {
        history.push(assign(points, &centroids, &mut assignments, &mut dists));
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, pt) in points.iter().enumerate() {
            counts[assignments[i]] += 1;
            for (j, v) in pt.entries() {
                sums[assignments[i]][j] += v;
            }
        }
        // Empty clusters take over the points farthest from their centroids.
        let mut far: Vec<usize> = (0..n).collect();
        far.sort_by(|&a, &b| dists[b].total_cmp(&dists[a]).then(a.cmp(&b)));
        let mut far = far.into_iter();
        let mut shift = 0.0;
        for c in 0..k {
            let next = if counts[c] == 0 {
                match far.next() {
                    Some(i) => points[i].to_dense(dim),
                    None => centroids[c].clone(),
                }
            } else {
                let m = counts[c] as f64;
                sums[c].iter().map(|s| s / m).collect()
            };
            shift += next.iter().zip(&centroids[c]).fold(0.0, |a, (x, y)| a + (x - y) * (x - y));
            centroids[c] = next;
        }
        iterations += 1;
        if shift <= tol_abs {
            converged = true;
            break;
        }
    }
    let inertia = assign(points, &centroids, &mut assignments, &mut dists);
    history.push(inertia);
    Run { centroids, assignments, inertia, history, iterations, converged }
}

fn mean_variance(points: &[&Row], dim: usize) -> f64 {
    let n = points.len() as f64;
    let mut sum = vec![0.0; dim];
    let mut sq = vec![0.0; dim];
    for p in points {
        for (j, v) in p.entries() {
            sum[j] += v;
            sq[j] += v * v;
        }
    }
    let total: f64 = sum.iter().zip(&sq).map(|(s, q)| q / n - (s / n) * (s / n)).sum();
    total / dim.max(1) as f64
}

/// Lloyd's algorithm with k-means++ seeding; the restart with the lowest
/// inertia is kept (earliest on ties). Restart `i` draws from stream `i` of
/// `seed`.
pub fn kmeans(rep: &RepMatrix, p: &KMeansParams) -> Result<ClusterReport, AnalyzeError> {
    if p.n_clusters == 0 {
        return Err(AnalyzeError::NoClusters);
    }
    let mut ids = Vec::new();
    let mut excluded = Vec::new();
    let mut points = Vec::new();
    for (i, row) in rep.rows.iter().enumerate() {
        if row.entries().any(|(_, v)| !v.is_finite()) {
            return Err(AnalyzeError::NonFinite(i));
        }
        if !p.include_zero_rows && row.is_zero() {
            excluded.push(rep.row_ids[i].clone());
        } else {
            ids.push(rep.row_ids[i].clone());
            points.push(row);
        }
    }
    if p.n_clusters > points.len() {
        return Err(AnalyzeError::TooManyClusters { requested: p.n_clusters, rows: points.len() });
    }
    let tol_abs = p.tol * mean_variance(&points, rep.dim);
    let mut best: Option<Run> = None;
    let mut restart_inertias = Vec::new();
    for restart in 0..p.restarts.max(1) {
        let mut r = rng::derive(p.seed, restart as u64);
        let run = lloyd(&points, rep.dim, p, tol_abs, &mut r);
        restart_inertias.push(run.inertia);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one restart");
    let n = points.len();
    let mut sizes = vec![0usize; p.n_clusters];
    for &a in &run.assignments {
        sizes[a] += 1;
    }
    let per_cluster = sizes
        .iter()
        .enumerate()
        .map(|(id, &size)| ClusterStats {
            id,
            size,
            size_fraction: size as f64 / n as f64,
            tagged: None,
            precision: None,
            recall: None,
            top_terms: None,
        })
        .collect();
    Ok(ClusterReport {
        n_clusters: p.n_clusters,
        row_ids: ids,
        assignments: run.assignments,
        excluded_ids: excluded,
        centroids: run.centroids,
        inertia: run.inertia,
        inertia_history: run.history,
        restart_inertias,
        per_cluster,
        tag: None,
        best_precision_cluster: None,
        seed: p.seed,
        restarts: p.restarts.max(1),
        iterations_run: run.iterations,
        converged: run.converged,
    })
}

/// Precision, recall and size of every cluster against `tag`, and the
/// best-precision cluster (ties: larger recall, then lower id). Recall is
/// relative to every tagged example of `corpus`.
pub fn cluster_metrics(report: &ClusterReport, corpus: &Corpus, tag: &str) -> Result<ClusterReport, AnalyzeError> {
    let total = corpus.examples().iter().filter(|e| e.has_tag(tag)).count();
    if total == 0 {
        return Err(AnalyzeError::TagAbsent(tag.into()));
    }
    let mut tagged = BTreeMap::new();
    for (id, &c) in report.row_ids.iter().zip(&report.assignments) {
        let ex = corpus.get(id).ok_or_else(|| AnalyzeError::UnknownId(id.clone()))?;
        if ex.has_tag(tag) {
            *tagged.entry(c).or_insert(0usize) += 1;
        }
    }
    let mut out = report.clone();
    let mut best: Option<(f64, f64, usize)> = None;
    for s in out.per_cluster.iter_mut() {
        let t = tagged.get(&s.id).copied().unwrap_or(0);
        s.tagged = Some(t);
        s.recall = Some(t as f64 / total as f64);
        s.precision = if s.size > 0 { Some(t as f64 / s.size as f64) } else { None };
        if let (Some(pr), Some(rc)) = (s.precision, s.recall) {
            if best.is_none_or(|(bp, br, _)| pr > bp || (pr == bp && rc > br)) {
                best = Some((pr, rc, s.id));
            }
        }
    }
    out.tag = Some(tag.into());
    out.best_precision_cluster = best.map(|b| b.2);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::represent::RepKind;
    use alloc::string::ToString;

    pub(crate) fn dense(points: &[&[f64]]) -> RepMatrix {
        let ids = (0..points.len()).map(|i| i.to_string()).collect();
        let rows = points.iter().map(|p| Row::Dense(p.to_vec())).collect();
        RepMatrix::new(RepKind::B2AvgEmb, points[0].len(), None, false, ids, rows)
    }

    #[test]
    fn two_blobs() {
        let m = dense(&[&[1.0, 0.0], &[1.0, 1.0], &[10.0, 0.0], &[10.0, 1.0]]);
        let r = kmeans(&m, &KMeansParams::new(2, 0)).unwrap();
        assert_eq!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.assignments[2], r.assignments[3]);
        assert_ne!(r.assignments[0], r.assignments[2]);
        assert!((r.inertia - 1.0).abs() < 1e-12);
        let s: f64 = r.per_cluster.iter().map(|c| c.size_fraction).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k_equals_n() {
        let m = dense(&[&[-1.0], &[1.0], &[5.0]]);
        let r = kmeans(&m, &KMeansParams::new(3, 4)).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut a = r.assignments.clone();
        a.sort();
        assert_eq!(a, [0, 1, 2]);
    }

    #[test]
    fn identical_rows_are_not_an_error() {
        let m = dense(&[&[1.0, 1.0][..]; 5]);
        let r = kmeans(&m, &KMeansParams::new(2, 1)).unwrap();
        assert_eq!(r.inertia, 0.0);
        assert!(r.per_cluster.iter().any(|c| c.size >= 4));
    }

    #[test]
    fn errors() {
        let m = dense(&[&[2.0], &[1.0]]);
        assert_eq!(kmeans(&m, &KMeansParams::new(3, 0)).unwrap_err(), AnalyzeError::TooManyClusters { requested: 3, rows: 2 });
        assert_eq!(kmeans(&m, &KMeansParams::new(0, 0)).unwrap_err(), AnalyzeError::NoClusters);
    }

    #[test]
    fn zero_rows_excluded_by_default() {
        let m = dense(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let r = kmeans(&m, &KMeansParams::new(2, 0)).unwrap();
        assert_eq!(r.excluded_ids, ["0"]);
        assert_eq!(r.row_ids.len(), 2);
        let mut p = KMeansParams::new(2, 0);
        p.include_zero_rows = true;
        assert_eq!(kmeans(&m, &p).unwrap().row_ids.len(), 3);
    }
}

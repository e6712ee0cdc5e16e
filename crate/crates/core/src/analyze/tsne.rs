use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::AnalyzeError;
use crate::represent::RepMatrix;
use crate::rng;

const ENTROPY_TOL: f64 = 1e-5;
const BANDWIDTH_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub seed: u64,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub out_dim: usize,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            perplexity: 30.0,
            iterations: 1000,
            seed: 0,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            learning_rate: 200.0,
            momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            out_dim: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub coords: Vec<Vec<f64>>,
    pub row_ids: Vec<String>,
    pub params: TsneParams,
    /// Perplexity actually targeted (reduced when there are too few rows).
    pub effective_perplexity: f64,
    pub perplexity_reduced: bool,
    /// |H(P_i) − ln(perplexity)| for every row after the bandwidth search.
    pub entropy_errors: Vec<f64>,
    /// KL(P‖Q) right after the exaggeration phase.
    pub kl_after_exaggeration: f64,
    pub final_kl: f64,
    /// (iteration, KL) every 50 iterations and at the end.
    pub kl_history: Vec<(usize, f64)>,
}

/// Conditional row P_{·|i} for squared distances `d` at precision `beta`;
/// returns the Shannon entropy (nats).
fn row_affinities(d: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let dmin = d.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, o) in out.iter_mut().enumerate() {
        *o = if j == i { 0.0 } else { libm::exp(-(d[j] - dmin) * beta) };
        sum += *o;
    }
    let mut h = 0.0;
    for (j, o) in out.iter_mut().enumerate() {
        if j == i {
            continue;
        }
        *o /= sum;
        if *o > 0.0 {
            h -= *o * libm::log(*o);
        }
    }
    h
}

/// Bisects the Gaussian precision of every row to hit entropy ln(perplexity).
fn joint_probabilities(d2: &[Vec<f64>], perplexity: f64) -> (Vec<f64>, Vec<f64>) {
    let n = d2.len();
    let target = libm::log(perplexity);
    let mut cond = vec![0.0; n * n];
    let mut errors = Vec::with_capacity(n);
    let mut row = vec![0.0; n];
    for i in 0..n {
        let (mut lo, mut hi, mut beta) = (0.0f64, f64::INFINITY, 1.0f64);
        let mut h = row_affinities(&d2[i], i, beta, &mut row);
        for _ in 0..BANDWIDTH_STEPS {
            if (h - target).abs() < ENTROPY_TOL {
                break;
            }
            if h > target {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
            h = row_affinities(&d2[i], i, beta, &mut row);
        }
        errors.push((h - target).abs());
        cond[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64);
        }
    }
    (p, errors)
}

fn kl(p: &[f64], y: &[Vec<f64>]) -> f64 {
    let n = y.len();
    let (num, z) = student_t(y);
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p[i * n + j];
            if i != j && pij > 0.0 {
                let q = (num[i * n + j] / z).max(f64::MIN_POSITIVE);
                kl += pij * libm::log(pij / q);
            }
        }
    }
    kl
}

fn student_t(y: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let mut z = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = y[i].iter().zip(&y[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            let v = 1.0 / (1.0 + d);
            num[i * n + j] = v;
            num[j * n + i] = v;
            z += 2.0 * v;
        }
    }
    (num, z)
}

/// Exact O(n²) t-SNE with early exaggeration, momentum and per-coordinate gains.
pub fn tsne(rep: &RepMatrix, params: &TsneParams) -> Result<Projection, AnalyzeError> {
    let n = rep.len();
    if n < 2 {
        return Err(AnalyzeError::TooFewRows);
    }
    for (i, r) in rep.rows.iter().enumerate() {
        if r.entries().any(|(_, v)| !v.is_finite()) {
            return Err(AnalyzeError::NonFinite(i));
        }
    }
    let max_perp = (n - 1) as f64 / 3.0;
    let reduced = params.perplexity > max_perp;
    let perplexity = if reduced { max_perp.max(1.0) } else { params.perplexity };

    let d2: Vec<Vec<f64>> = rep.rows.iter().map(|a| rep.rows.iter().map(|b| a.sq_dist(b)).collect()).collect();
    let (p, entropy_errors) = joint_probabilities(&d2, perplexity);

    let mut r = rng::seeded(params.seed);
    let dim = params.out_dim;
    let mut y: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| 1e-4 * r.sample::<f64, _>(StandardNormal)).collect()).collect();
    let mut update = vec![vec![0.0; dim]; n];
    let mut gains = vec![vec![1.0f64; dim]; n];
    let mut kl_history = Vec::new();
    let mut kl_after = f64::NAN;
    let mut grad = vec![vec![0.0; dim]; n];
    for it in 0..params.iterations {
        let exag = if it < params.exaggeration_iters { params.exaggeration } else { 1.0 };
        let momentum = if it < params.momentum_switch { params.momentum } else { params.final_momentum };
        let (num, z) = student_t(&y);
        for i in 0..n {
            grad[i].iter_mut().for_each(|g| *g = 0.0);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = (exag * p[i * n + j] - num[i * n + j] / z) * num[i * n + j];
                for k in 0..dim {
                    grad[i][k] += 4.0 * w * (y[i][k] - y[j][k]);
                }
            }
        }
        for i in 0..n {
            for k in 0..dim {
                let g = grad[i][k];
                gains[i][k] = if (g > 0.0) != (update[i][k] > 0.0) { gains[i][k] + 0.2 } else { gains[i][k] * 0.8 };
                gains[i][k] = gains[i][k].max(0.01);
                update[i][k] = momentum * update[i][k] - params.learning_rate * gains[i][k] * g;
                y[i][k] += update[i][k];
            }
        }
        for k in 0..dim {
            let mean = y.iter().map(|v| v[k]).sum::<f64>() / n as f64;
            y.iter_mut().for_each(|v| v[k] -= mean);
        }
        if it + 1 == params.exaggeration_iters {
            kl_after = kl(&p, &y);
        }
        if (it + 1) % 50 == 0 || it + 1 == params.iterations {
            kl_history.push((it + 1, kl(&p, &y)));
        }
    }
    let final_kl = kl(&p, &y);
    if params.iterations < params.exaggeration_iters || kl_after.is_nan() {
        kl_after = final_kl;
    }
    Ok(Projection {
        coords: y,
        row_ids: rep.row_ids.clone(),
        params: params.clone(),
        effective_perplexity: perplexity,
        perplexity_reduced: reduced,
        entropy_errors,
        kl_after_exaggeration: kl_after,
        final_kl,
        kl_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::represent::{RepKind, Row};
    use alloc::string::ToString;

    #[test]
    fn shape_and_finiteness() {
        let rows: Vec<Row> = (0..12).map(|i| Row::Dense(vec![i as f64, (i * i % 5) as f64])).collect();
        let ids = (0..12).map(|i| i.to_string()).collect();
        let m = RepMatrix::new(RepKind::B2AvgEmb, 2, None, false, ids, rows);
        let p = tsne(&m, &TsneParams { iterations: 300, ..Default::default() }).unwrap();
        assert_eq!(p.coords.len(), 12);
        assert!(p.coords.iter().all(|c| c.len() == 2 && c.iter().all(|v| v.is_finite())));
        assert!(p.perplexity_reduced);
        assert!(p.kl_history.iter().all(|(_, k)| k.is_finite()));
    }

    #[test]
    fn joint_p_sums_to_one() {
        let d2 = vec![vec![0.0, 1.0, 4.0, 9.0], vec![1.0, 0.0, 1.0, 4.0], vec![4.0, 1.0, 0.0, 1.0], vec![9.0, 4.0, 1.0, 0.0]];
        let (p, err) = joint_probabilities(&d2, 2.5);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(err.iter().all(|e| *e < 1e-4));
    }
}

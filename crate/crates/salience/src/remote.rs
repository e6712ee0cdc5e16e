//! HTTP scorer: POST `{"instances":[{"tokens":[...]}]}`, expect
//! `{"probs":[[...]]}` with one distribution per instance, in order.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use salience_core::sensitivity::{ModelScorer, ScoreError};

const PROB_TOL: f64 = 1e-6;

#[derive(Serialize)]
struct Instance<'a> {
    tokens: &'a [String],
}

#[derive(Serialize)]
struct Request<'a> {
    instances: Vec<Instance<'a>>,
}

#[derive(Deserialize)]
struct Response {
    probs: Vec<Vec<f64>>,
}

pub struct RemoteScorer {
    url: String,
    agent: ureq::Agent,
    num_classes: usize,
    batch_size: usize,
    retries: usize,
    backoff: Duration,
}

impl RemoteScorer {
    pub fn new(url: &str, num_classes: usize) -> Self {
        Self::with_options(url, num_classes, 32, 3, Duration::from_secs(30))
    }

    pub fn with_options(url: &str, num_classes: usize, batch_size: usize, retries: usize, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        RemoteScorer { url: url.to_string(), agent, num_classes, batch_size: batch_size.max(1), retries, backoff: Duration::from_millis(100) }
    }

    /// Base delay between attempts; doubled after every failure.
    pub fn backoff(mut self, d: Duration) -> Self {
        self.backoff = d;
        self
    }

    fn post_once(&self, batch: &[Vec<String>]) -> Result<Vec<Vec<f64>>, Attempt> {
        let body = Request { instances: batch.iter().map(|t| Instance { tokens: t }).collect() };
        let mut resp = self.agent.post(&self.url).send_json(&body).map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        if status >= 500 || status == 429 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(Attempt::Fatal(format!("HTTP {status}")));
        }
        let parsed: Response = resp.body_mut().read_json().map_err(|e| Attempt::Fatal(format!("bad response body: {e}")))?;
        Ok(parsed.probs)
    }

    fn post(&self, batch: &[Vec<String>]) -> Result<Vec<Vec<f64>>, ScoreError> {
        let mut delay = self.backoff;
        let mut last = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            match self.post_once(batch) {
                Ok(p) => return Ok(p),
                Err(Attempt::Fatal(m)) => return Err(ScoreError(format!("{}: {m}", self.url))),
                Err(Attempt::Retry(m)) => last = m,
            }
        }
        Err(ScoreError(format!("{}: giving up after {} attempts: {last}", self.url, self.retries + 1)))
    }

    fn check(&self, probs: &[f64], i: usize) -> Result<(), ScoreError> {
        if probs.len() != self.num_classes {
            return Err(ScoreError(format!("instance {i}: {} probabilities for {} classes", probs.len(), self.num_classes)));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(ScoreError(format!("instance {i}: probability outside [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(ScoreError(format!("instance {i}: probabilities sum to {sum}")));
        }
        Ok(())
    }
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

impl ModelScorer for RemoteScorer {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn score_batch(&self, inputs: &[Vec<String>]) -> Result<Vec<Vec<f64>>, ScoreError> {
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(self.batch_size) {
            let probs = self.post(chunk)?;
            if probs.len() != chunk.len() {
                return Err(ScoreError(format!("{} distributions for {} instances", probs.len(), chunk.len())));
            }
            for p in &probs {
                self.check(p, out.len())?;
                out.push(p.clone());
            }
        }
        Ok(out)
    }
}

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{argmax, Corpus, Example, Vocabulary};
use crate::rng;
use crate::sensitivity::{ModelScorer, ScoreError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ToyError {
    #[error("token {token} of {id} is not in the model vocabulary")]
    OutOfVocabulary { id: String, token: String },
    #[error("training diverged at epoch {0}")]
    Diverged(usize),
    #[error("label {label} of {id} exceeds the model's {classes} classes")]
    Label { id: String, label: usize, classes: usize },
    #[error("training corpus is empty")]
    Empty,
}

/// Output head placed on top of the pooled token features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Linear logits from the pooled features.
    Linear,
    /// One softplus hidden layer, then linear logits.
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub head: Head,
    /// Token embedding size.
    pub d: usize,
    /// Per-token feature width.
    pub features: usize,
    /// Hidden width of the Mlp head.
    pub hidden: usize,
    /// Softplus sharpness.
    pub beta: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub seed: u64,
    pub held_out: f64,
    pub train_embeddings: bool,
    /// Standard deviation of the initial embeddings.
    pub embedding_scale: f64,
    /// Initial per-token feature bias.
    pub feature_bias: f64,
    /// Multiplier on the default initial scale of the head weights.
    pub head_init: f64,
    /// Square the per-token softplus features, so a token's gradient grows
    /// with its activation.
    pub squared_features: bool,
    pub num_classes: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            head: Head::Mlp,
            d: 32,
            features: 32,
            hidden: 32,
            beta: 3.0,
            lr: 0.01,
            epochs: 30,
            batch_size: 16,
            weight_decay: 0.05,
            seed: 0,
            held_out: 0.1,
            train_embeddings: false,
            embedding_scale: 0.18,
            feature_bias: 0.0,
            head_init: 1.0,
            squared_features: true,
            num_classes: 2,
        }
    }
}

/// Offsets of every parameter block inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Layout {
    v: usize,
    d: usize,
    f: usize,
    h: usize,
    c: usize,
    head: Head,
    emb: usize,
    a: usize,
    a0: usize,
    w1: usize,
    b1: usize,
    wa: usize,
    ba: usize,
    len: usize,
}

impl Layout {
    fn new(head: Head, v: usize, d: usize, f: usize, h: usize, c: usize) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let emb = take(v * d);
        let a = take(f * d);
        let a0 = take(f);
        let (w1, b1, wa) = match head {
            Head::Linear => (0, 0, take(c * f)),
            Head::Mlp => (take(h * f), take(h), take(c * h)),
        };
        let ba = take(c);
        Layout { v, d, f, h, c, head, emb, a, a0, w1, b1, wa, ba, len: at }
    }
}

/// Bag-of-features text classifier: every token embedding passes through a
/// softplus feature map, features are summed over the sequence, and a head
/// maps the sum to class logits. Tokens outside the vocabulary contribute
/// nothing (padding).
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub vocab: Vocabulary,
    pub config: ToyConfig,
    layout: Layout,
    params: Vec<f64>,
}

struct Trace {
    ids: Vec<Option<usize>>,
    pre: Vec<Vec<f64>>,
    pooled: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

fn softplus(x: f64, beta: f64) -> f64 {
    let z = beta * x;
    if z > 30.0 {
        x
    } else {
        libm::log1p(libm::exp(z)) / beta
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| libm::exp(l - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

fn matvec(w: &[f64], x: &[f64], rows: usize, out: &mut [f64]) {
    let cols = x.len();
    for r in 0..rows {
        out[r] += w[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// out += Wᵀ y for row-major W (rows × cols).
fn matvec_t(w: &[f64], y: &[f64], cols: usize, out: &mut [f64]) {
    for (r, &yr) in y.iter().enumerate() {
        if yr != 0.0 {
            for (o, a) in out.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
                *o += a * yr;
            }
        }
    }
}

/// g += y ⊗ x for row-major g.
fn outer(g: &mut [f64], y: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, &yr) in y.iter().enumerate() {
        if yr != 0.0 {
            for (gv, xv) in g[r * cols..(r + 1) * cols].iter_mut().zip(x) {
                *gv += yr * xv;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss before the first update.
    pub initial_loss: f64,
    /// Mean training loss after each epoch.
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: f64,
    pub held_out_accuracy: Option<f64>,
    pub n_train: usize,
    pub n_held_out: usize,
}

impl ToyModel {
    /// Randomly initialised model over `vocab`.
    pub fn new(vocab: Vocabulary, config: ToyConfig) -> Self {
        let layout = Layout::new(config.head, vocab.len(), config.d, config.features, config.hidden, config.num_classes);
        let mut r = rng::derive(config.seed, 1);
        let mut params = vec![0.0; layout.len];
        let mut normal = |p: &mut [f64], std: f64| p.iter_mut().for_each(|x| *x = std * r.sample::<f64, _>(StandardNormal));
        let l = layout;
        normal(&mut params[l.emb..l.emb + l.v * l.d], config.embedding_scale);
        normal(&mut params[l.a..l.a + l.f * l.d], 1.0 / libm::sqrt(l.d as f64));
        params[l.a0..l.a0 + l.f].iter_mut().for_each(|x| *x = config.feature_bias);
        let hs = config.head_init;
        match l.head {
            Head::Linear => normal(&mut params[l.wa..l.wa + l.c * l.f], hs / libm::sqrt(l.f as f64)),
            Head::Mlp => {
                normal(&mut params[l.w1..l.w1 + l.h * l.f], hs / libm::sqrt(l.f as f64));
                normal(&mut params[l.wa..l.wa + l.c * l.h], hs / libm::sqrt(l.h as f64));
            }
        }
        ToyModel { vocab, config, layout, params }
    }

    pub(crate) fn from_parts(vocab: Vocabulary, config: ToyConfig, params: Vec<f64>) -> Option<Self> {
        let layout = Layout::new(config.head, vocab.len(), config.d, config.features, config.hidden, config.num_classes);
        (params.len() == layout.len).then_some(ToyModel { vocab, config, layout, params })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_classes(&self) -> usize {
        self.layout.c
    }

    pub fn embedding(&self, token: usize) -> &[f64] {
        let l = &self.layout;
        &self.params[l.emb + token * l.d..l.emb + (token + 1) * l.d]
    }

    pub fn embedding_mut(&mut self, token: usize) -> &mut [f64] {
        let l = self.layout;
        &mut self.params[l.emb + token * l.d..l.emb + (token + 1) * l.d]
    }

    /// The embedding matrix, row-major |V|×d.
    pub fn embeddings(&self) -> &[f64] {
        let l = &self.layout;
        &self.params[l.emb..l.emb + l.v * l.d]
    }

    fn feature(&self, z: f64) -> f64 {
        let s = softplus(z, self.config.beta);
        if self.config.squared_features {
            s * s
        } else {
            s
        }
    }

    fn feature_slope(&self, z: f64) -> f64 {
        let b = self.config.beta;
        if self.config.squared_features {
            2.0 * softplus(z, b) * sigmoid(b * z)
        } else {
            sigmoid(b * z)
        }
    }

    fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<Option<usize>> {
        tokens.iter().map(|t| self.vocab.get(t.as_ref())).collect()
    }

    fn strict_ids(&self, ex: &Example) -> Result<Vec<Option<usize>>, ToyError> {
        let ids = self.ids(&ex.tokens);
        match ids.iter().position(|i| i.is_none()) {
            Some(p) => Err(ToyError::OutOfVocabulary { id: ex.id.clone(), token: ex.tokens[p].clone() }),
            None => Ok(ids),
        }
    }

    /// Forward pass with embeddings overridden by `emb` where given.
    fn forward_with(&self, ids: Vec<Option<usize>>, emb: Option<&[Vec<f64>]>) -> Trace {
        let l = &self.layout;
        let p = &self.params;
        let mut pooled = vec![0.0; l.f];
        let mut pre = Vec::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            let e: &[f64] = match (emb, id) {
                (Some(m), _) => &m[i],
                (None, Some(j)) => self.embedding(*j),
                (None, None) => {
                    pre.push(Vec::new());
                    continue;
                }
            };
            let mut z = p[l.a0..l.a0 + l.f].to_vec();
            matvec(&p[l.a..l.a + l.f * l.d], e, l.f, &mut z);
            for (acc, v) in pooled.iter_mut().zip(&z) {
                *acc += self.feature(*v);
            }
            pre.push(z);
        }
        let mut hidden_pre = Vec::new();
        let mut hidden = Vec::new();
        let mut logits = p[l.ba..l.ba + l.c].to_vec();
        match l.head {
            Head::Linear => matvec(&p[l.wa..l.wa + l.c * l.f], &pooled, l.c, &mut logits),
            Head::Mlp => {
                hidden_pre = p[l.b1..l.b1 + l.h].to_vec();
                matvec(&p[l.w1..l.w1 + l.h * l.f], &pooled, l.h, &mut hidden_pre);
                hidden = hidden_pre.iter().map(|&x| softplus(x, self.config.beta)).collect();
                matvec(&p[l.wa..l.wa + l.c * l.h], &hidden, l.c, &mut logits);
            }
        }
        Trace { ids, pre, pooled, hidden_pre, hidden, logits }
    }

    /// Backpropagates `dlogits`. Adds parameter gradients into `grad` when
    /// given and returns the gradient with respect to every token embedding
    /// (empty for padding tokens).
    fn backward(&self, t: &Trace, dlogits: &[f64], emb: Option<&[Vec<f64>]>, mut grad: Option<&mut [f64]>) -> Vec<Vec<f64>> {
        let l = &self.layout;
        let p = &self.params;
        let mut dpooled = vec![0.0; l.f];
        if let Some(g) = grad.as_deref_mut() {
            g[l.ba..l.ba + l.c].iter_mut().zip(dlogits).for_each(|(a, b)| *a += b);
        }
        match l.head {
            Head::Linear => {
                matvec_t(&p[l.wa..l.wa + l.c * l.f], dlogits, l.f, &mut dpooled);
                if let Some(g) = grad.as_deref_mut() {
                    outer(&mut g[l.wa..l.wa + l.c * l.f], dlogits, &t.pooled);
                }
            }
            Head::Mlp => {
                let mut dh = vec![0.0; l.h];
                matvec_t(&p[l.wa..l.wa + l.c * l.h], dlogits, l.h, &mut dh);
                let beta = self.config.beta;
                let dhp: Vec<f64> = dh.iter().zip(&t.hidden_pre).map(|(d, &x)| d * sigmoid(beta * x)).collect();
                matvec_t(&p[l.w1..l.w1 + l.h * l.f], &dhp, l.f, &mut dpooled);
                if let Some(g) = grad.as_deref_mut() {
                    outer(&mut g[l.wa..l.wa + l.c * l.h], dlogits, &t.hidden);
                    outer(&mut g[l.w1..l.w1 + l.h * l.f], &dhp, &t.pooled);
                    g[l.b1..l.b1 + l.h].iter_mut().zip(&dhp).for_each(|(a, b)| *a += b);
                }
            }
        }
        let train_emb = self.config.train_embeddings;
        let mut demb = Vec::with_capacity(t.ids.len());
        for (i, id) in t.ids.iter().enumerate() {
            if t.pre[i].is_empty() {
                demb.push(Vec::new());
                continue;
            }
            let dz: Vec<f64> = t.pre[i].iter().zip(&dpooled).map(|(&z, d)| d * self.feature_slope(z)).collect();
            let mut de = vec![0.0; l.d];
            matvec_t(&p[l.a..l.a + l.f * l.d], &dz, l.d, &mut de);
            if let Some(g) = grad.as_deref_mut() {
                let e: &[f64] = match emb {
                    Some(m) => &m[i],
                    None => self.embedding(id.expect("non-padding token")),
                };
                outer(&mut g[l.a..l.a + l.f * l.d], &dz, e);
                g[l.a0..l.a0 + l.f].iter_mut().zip(&dz).for_each(|(a, b)| *a += b);
                if train_emb {
                    if let Some(j) = id {
                        g[l.emb + j * l.d..l.emb + (j + 1) * l.d].iter_mut().zip(&de).for_each(|(a, b)| *a += b);
                    }
                }
            }
            demb.push(de);
        }
        demb
    }

    pub fn logits<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        self.forward_with(self.ids(tokens), None).logits
    }

    pub fn predict<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        softmax(&self.logits(tokens))
    }

    /// Logits for explicit per-token embedding vectors (all tokens treated
    /// as present); used by gradient checks.
    pub fn logits_from_embeddings(&self, emb: &[Vec<f64>]) -> Vec<f64> {
        self.forward_with(vec![Some(0); emb.len()], Some(emb)).logits
    }

    /// ∂ logit[class] / ∂ e_i for explicit embeddings.
    pub fn logit_grad_from_embeddings(&self, emb: &[Vec<f64>], class: usize) -> Vec<Vec<f64>> {
        let t = self.forward_with(vec![Some(0); emb.len()], Some(emb));
        let mut d = vec![0.0; self.layout.c];
        d[class] = 1.0;
        self.backward(&t, &d, Some(emb), None)
    }

    /// Grad-L2 salience: the L2 norm of the gradient of the predicted-class
    /// logit with respect to each token's embedding.
    pub fn grad_l2_salience(&self, ex: &Example) -> Result<(usize, Vec<f64>, Vec<f64>), ToyError> {
        let ids = self.strict_ids(ex)?;
        let t = self.forward_with(ids, None);
        let probs = softmax(&t.logits);
        let pred = argmax(&probs);
        let mut d = vec![0.0; self.layout.c];
        d[pred] = 1.0;
        let grads = self.backward(&t, &d, None, None);
        let sal = grads.iter().map(|g| libm::sqrt(g.iter().map(|x| x * x).sum::<f64>())).collect();
        Ok((pred, probs, sal))
    }

    fn loss_and_grad(&self, ids: Vec<Option<usize>>, label: usize, grad: Option<&mut [f64]>) -> (f64, usize) {
        let t = self.forward_with(ids, None);
        let probs = softmax(&t.logits);
        let loss = -libm::log(probs[label].max(1e-300));
        if let Some(g) = grad {
            let mut d = probs.clone();
            d[label] -= 1.0;
            self.backward(&t, &d, None, Some(g));
        }
        (loss, argmax(&probs))
    }

    /// Trains a fresh model on the gold labels of `corpus` with AdamW on
    /// mini-batches; a seeded `held_out` fraction is kept for evaluation.
    pub fn train(corpus: &Corpus, vocab: Vocabulary, config: ToyConfig) -> Result<(ToyModel, TrainReport), ToyError> {
        if corpus.is_empty() {
            return Err(ToyError::Empty);
        }
        let mut model = ToyModel::new(vocab, config.clone());
        let mut data = Vec::with_capacity(corpus.len());
        for ex in corpus.examples() {
            if ex.gold_label >= config.num_classes {
                return Err(ToyError::Label { id: ex.id.clone(), label: ex.gold_label, classes: config.num_classes });
            }
            data.push((model.strict_ids(ex)?, ex.gold_label));
        }
        let mut r = rng::derive(config.seed, 2);
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut r);
        let n_held = libm::round(config.held_out * data.len() as f64) as usize;
        let (held, train) = order.split_at(n_held.min(data.len().saturating_sub(1)));
        let mut train = train.to_vec();

        let mean_loss = |m: &ToyModel, idx: &[usize]| -> (f64, f64) {
            let mut loss = 0.0;
            let mut correct = 0;
            for &i in idx {
                let (l, pred) = m.loss_and_grad(data[i].0.clone(), data[i].1, None);
                loss += l;
                correct += usize::from(pred == data[i].1);
            }
            (loss / idx.len().max(1) as f64, correct as f64 / idx.len().max(1) as f64)
        };
        let initial_loss = mean_loss(&model, &train).0;
        let n = model.params.len();
        let (mut m1, mut m2) = (vec![0.0; n], vec![0.0; n]);
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let l = model.layout;
        let emb_range = l.emb..l.emb + l.v * l.d;
        // Biases are exempt from weight decay.
        let mut decay = vec![config.weight_decay; n];
        let biases = match l.head {
            Head::Linear => vec![(l.a0, l.f), (l.ba, l.c)],
            Head::Mlp => vec![(l.a0, l.f), (l.b1, l.h), (l.ba, l.c)],
        };
        for (o, len) in biases {
            decay[o..o + len].iter_mut().for_each(|x| *x = 0.0);
        }
        let mut step = 0i32;
        let mut grad = vec![0.0; n];
        let mut epoch_losses = Vec::with_capacity(config.epochs);
        for epoch in 0..config.epochs {
            train.shuffle(&mut r);
            for batch in train.chunks(config.batch_size.max(1)) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                for &i in batch {
                    model.loss_and_grad(data[i].0.clone(), data[i].1, Some(&mut grad));
                }
                let scale = 1.0 / batch.len() as f64;
                step += 1;
                let (c1, c2) = (1.0 - libm::pow(b1, step as f64), 1.0 - libm::pow(b2, step as f64));
                for k in 0..n {
                    if !config.train_embeddings && emb_range.contains(&k) {
                        continue;
                    }
                    let g = grad[k] * scale;
                    m1[k] = b1 * m1[k] + (1.0 - b1) * g;
                    m2[k] = b2 * m2[k] + (1.0 - b2) * g * g;
                    let p = &mut model.params[k];
                    *p -= config.lr * decay[k] * *p;
                    *p -= config.lr * (m1[k] / c1) / (libm::sqrt(m2[k] / c2) + eps);
                }
            }
            let (loss, _) = mean_loss(&model, &train);
            if !loss.is_finite() {
                return Err(ToyError::Diverged(epoch));
            }
            epoch_losses.push(loss);
        }
        let train_accuracy = mean_loss(&model, &train).1;
        let held_out_accuracy = (!held.is_empty()).then(|| mean_loss(&model, held).1);
        let report = TrainReport {
            initial_loss,
            epoch_losses,
            train_accuracy,
            held_out_accuracy,
            n_train: train.len(),
            n_held_out: held.len(),
        };
        Ok((model, report))
    }

    /// Fraction of `corpus` (optionally only examples tagged `tag`) whose
    /// gold label is predicted.
    pub fn accuracy(&self, corpus: &Corpus, tag: Option<&str>) -> f64 {
        let exs: Vec<&Example> = corpus.examples().iter().filter(|e| tag.is_none_or(|t| e.has_tag(t))).collect();
        let ok = exs.iter().filter(|e| argmax(&self.predict(&e.tokens)) == e.gold_label).count();
        ok as f64 / exs.len().max(1) as f64
    }
}

/// Fills prediction, probabilities and Grad-L2 salience on every example.
pub fn annotate_with_model(model: &ToyModel, corpus: &Corpus) -> Result<Corpus, ToyError> {
    let mut out = Vec::with_capacity(corpus.len());
    for ex in corpus.examples() {
        let (pred, probs, sal) = model.grad_l2_salience(ex)?;
        let mut e = ex.clone();
        e.predicted_label = Some(pred);
        e.probs = probs;
        e.probs_synthesized = false;
        e.salience = sal;
        out.push(e);
    }
    Ok(Corpus::new(&corpus.split_name, out).expect("ids unchanged"))
}

impl ModelScorer for ToyModel {
    fn num_classes(&self) -> usize {
        self.layout.c
    }

    fn score_batch(&self, inputs: &[Vec<String>]) -> Result<Vec<Vec<f64>>, ScoreError> {
        Ok(inputs.iter().map(|t| self.predict(t)).collect())
    }
}

impl ToyModel {
    /// Tokens of the model vocabulary, for callers that need owned strings.
    pub fn vocabulary_tokens(&self) -> Vec<String> {
        self.vocab.tokens().iter().map(|t| t.to_string()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tiny(head: Head, seed: u64) -> ToyModel {
        let tokens: Vec<String> = ["a", "b", "c", "d", "e"].iter().map(|t| t.to_string()).collect();
        let vocab = Vocabulary::from_tokens::<&str>(tokens, &[], &[]).unwrap();
        let cfg = ToyConfig { head, d: 4, features: 5, hidden: 3, feature_bias: 0.1, embedding_scale: 1.0, seed, ..Default::default() };
        let mut m = ToyModel::new(vocab, cfg);
        let mut r = rng::derive(seed, 9);
        m.params_mut().iter_mut().for_each(|p| *p += 0.3 * r.sample::<f64, _>(StandardNormal));
        m
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        for head in [Head::Linear, Head::Mlp] {
            let mut m = tiny(head, 3);
            m.config.train_embeddings = true;
            let ex = Example::raw("x", &["a", "c", "c", "e"], 1);
            let ids = m.strict_ids(&ex).unwrap();
            let mut g = vec![0.0; m.params.len()];
            m.loss_and_grad(ids.clone(), 1, Some(&mut g));
            let h = 1e-6;
            for (k, &gk) in g.iter().enumerate() {
                let orig = m.params[k];
                m.params[k] = orig + h;
                let up = m.loss_and_grad(ids.clone(), 1, None).0;
                m.params[k] = orig - h;
                let down = m.loss_and_grad(ids.clone(), 1, None).0;
                m.params[k] = orig;
                let fd = (up - down) / (2.0 * h);
                assert!((fd - gk).abs() <= 1e-6 * (1.0 + fd.abs()), "{head:?} param {k}: {fd} vs {gk}");
            }
        }
    }

    #[test]
    fn unknown_tokens_are_padding() {
        let m = tiny(Head::Mlp, 1);
        assert_eq!(m.predict(&["a", "zzz", "b"]), m.predict(&["a", "b"]));
        let p = m.predict(&["a", "b"]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separable_corpus_is_learned() {
        let exs = (0..40).map(|i| Example::raw(&alloc::format!("e{i}"), if i % 2 == 0 { &["x", "n"] } else { &["y", "n"] }, i % 2)).collect();
        let corpus = Corpus::new("t", exs).unwrap();
        let vocab = Vocabulary::from_corpus::<&str>(&corpus, &[], &[]).unwrap();
        for head in [Head::Linear, Head::Mlp] {
            let cfg = ToyConfig { head, held_out: 0.0, ..Default::default() };
            let (m, rep) = ToyModel::train(&corpus, vocab.clone(), cfg.clone()).unwrap();
            assert_eq!(rep.train_accuracy, 1.0, "{head:?}");
            assert!(rep.epoch_losses.last().unwrap() < &rep.initial_loss);
            let (m2, _) = ToyModel::train(&corpus, vocab.clone(), cfg).unwrap();
            assert_eq!(m.params(), m2.params());
        }
    }

    #[test]
    fn bytes_round_trip() {
        let m = tiny(Head::Mlp, 2);
        let back = ToyModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.vocab, m.vocab);
        assert_eq!(ToyModel::from_bytes(b"nope"), Err(crate::synthetic::PersistError::Truncated(0)));
    }
}

//! The trainable plan model: a categorical next-token model over the closed
//! vocabulary with order-2 context truncation (instruction category plus the
//! previous two tokens).
//!
//! Parameterization: a context holds one weight per vocabulary token and
//! emits `p(k) = (exp(w_k) + alpha) / (sum_j exp(w_j) + alpha * V)`. The
//! `alpha` floor keeps every token's mass nonzero, so out-of-distribution
//! sequences score finite perplexity. A context that was never touched has
//! all-zero weights and is exactly uniform.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PlannerError;
use crate::vocab::Vocab;

pub const PLANNER_SCHEMA: &str = "planner/1";
pub const DEFAULT_ALPHA: f64 = 0.1;
pub const CONTEXT_ORDER: usize = 2;

/// One training or scoring sequence: an instruction-category condition and
/// the plan's flat token ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub category: u8,
    pub tokens: Vec<u16>,
}

pub type ContextKey = (u8, u16, u16);

fn key_string(k: &ContextKey) -> String {
    format!("{}|{}|{}", k.0, k.1, k.2)
}

fn parse_key(s: &str) -> Option<ContextKey> {
    let mut it = s.split('|');
    let a = it.next()?.parse().ok()?;
    let b = it.next()?.parse().ok()?;
    let c = it.next()?.parse().ok()?;
    Some((a, b, c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PlannerModelWire {
    schema: String,
    alpha: f64,
    order: usize,
    vocab_size: usize,
    epochs_trained: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    final_nll: Option<f64>,
    contexts: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerModel {
    pub alpha: f64,
    pub epochs_trained: u32,
    pub final_nll: Option<f64>,
    contexts: BTreeMap<ContextKey, Vec<f64>>,
    vocab_size: usize,
}

impl Default for PlannerModel {
    fn default() -> Self {
        Self::uniform()
    }
}

impl PlannerModel {
    /// Untrained model: every context is uniform over the vocabulary.
    pub fn uniform() -> Self {
        PlannerModel {
            alpha: DEFAULT_ALPHA,
            epochs_trained: 0,
            final_nll: None,
            contexts: BTreeMap::new(),
            vocab_size: Vocab::global().len(),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn context_of(&self, category: u8, history: &[u16]) -> ContextKey {
        let pad = Vocab::global().pad_id();
        let n = history.len();
        let prev2 = if n >= 2 { history[n - 2] } else { pad };
        let prev1 = if n >= 1 { history[n - 1] } else { pad };
        (category, prev2, prev1)
    }

    fn weights(&self, key: &ContextKey) -> Option<&Vec<f64>> {
        self.contexts.get(key)
    }

    /// Full probability vector for a context. Sums to one within 1e-9.
    pub fn probs(&self, key: &ContextKey) -> Vec<f64> {
        let v = self.vocab_size;
        match self.weights(key) {
            None => vec![1.0 / v as f64; v],
            Some(w) => {
                let mut e: Vec<f64> = w.iter().map(|x| x.exp()).collect();
                let z: f64 = e.iter().sum::<f64>() + self.alpha * v as f64;
                for x in &mut e {
                    *x = (*x + self.alpha) / z;
                }
                e
            }
        }
    }

    pub fn prob_of(&self, key: &ContextKey, token: u16) -> f64 {
        self.probs(key)[token as usize]
    }

    /// Probabilities restricted and renormalized to a legal token set.
    pub fn masked_probs(&self, key: &ContextKey, legal: &[u16]) -> Vec<f64> {
        let p = self.probs(key);
        let total: f64 = legal.iter().map(|&t| p[t as usize]).sum();
        legal.iter().map(|&t| p[t as usize] / total).collect()
    }

    /// Mean per-token negative log-likelihood over a corpus.
    pub fn nll(&self, corpus: &[TokenStream]) -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for stream in corpus {
            let mut history: Vec<u16> = Vec::new();
            for &tok in &stream.tokens {
                let key = self.context_of(stream.category, &history);
                total -= self.prob_of(&key, tok).ln();
                history.push(tok);
                count += 1;
            }
        }
        if count == 0 {
            return 0.0;
        }
        total / count as f64
    }

    /// Perplexity: `exp(total NLL / total tokens)`, exactly consistent with
    /// [`Self::nll`].
    pub fn perplexity(&self, corpus: &[TokenStream]) -> f64 {
        self.nll(corpus).exp()
    }

    /// Occurrence counts per (context, next token).
    fn count_events(&self, corpus: &[TokenStream]) -> BTreeMap<ContextKey, Vec<u32>> {
        let mut events: BTreeMap<ContextKey, Vec<u32>> = BTreeMap::new();
        for stream in corpus {
            let mut history: Vec<u16> = Vec::new();
            for &tok in &stream.tokens {
                let key = self.context_of(stream.category, &history);
                events.entry(key).or_insert_with(|| vec![0; self.vocab_size])[tok as usize] += 1;
                history.push(tok);
            }
        }
        events
    }

    /// Mean NLL and its gradient with respect to every touched context's
    /// weights. Gradients for untouched contexts are zero and omitted.
    pub fn nll_and_grad(&self, corpus: &[TokenStream]) -> (f64, BTreeMap<ContextKey, Vec<f64>>) {
        let events = self.count_events(corpus);
        let v = self.vocab_size;
        let total_tokens: u32 = events.values().map(|c| c.iter().sum::<u32>()).sum();
        let mut nll = 0.0;
        let mut grads = BTreeMap::new();
        for (key, counts) in &events {
            let zero = vec![0.0; v];
            let w = self.weights(key).unwrap_or(&zero);
            let e: Vec<f64> = w.iter().map(|x| x.exp()).collect();
            let z: f64 = e.iter().sum::<f64>() + self.alpha * v as f64;
            let n_ctx: u32 = counts.iter().sum();
            let mut g = vec![0.0; v];
            for j in 0..v {
                // d(-log p_k)/dw_j = e_j/Z - [j==k] * e_j/(e_j + alpha)
                g[j] = n_ctx as f64 * e[j] / z - counts[j] as f64 * e[j] / (e[j] + self.alpha);
            }
            for (j, &c) in counts.iter().enumerate() {
                if c > 0 {
                    nll -= c as f64 * ((e[j] + self.alpha) / z).ln();
                }
            }
            for x in &mut g {
                *x /= total_tokens as f64;
            }
            grads.insert(*key, g);
        }
        (nll / total_tokens as f64, grads)
    }

    /// Full-batch gradient descent on the smoothed NLL. Returns the NLL
    /// recorded after each epoch (index 0 is the pre-training value).
    pub fn train(
        &mut self,
        corpus: &[TokenStream],
        epochs: u32,
        step: f64,
    ) -> Result<Vec<f64>, PlannerError> {
        if corpus.is_empty() || corpus.iter().all(|s| s.tokens.is_empty()) {
            return Err(PlannerError::Data("cannot train on an empty corpus".into()));
        }
        let mut history = vec![self.nll(corpus)];
        for _ in 0..epochs {
            let (_, grads) = self.nll_and_grad(corpus);
            for (key, g) in grads {
                let w = self
                    .contexts
                    .entry(key)
                    .or_insert_with(|| vec![0.0; self.vocab_size]);
                for (wj, gj) in w.iter_mut().zip(g.iter()) {
                    *wj -= step * gj;
                }
            }
            history.push(self.nll(corpus));
        }
        self.epochs_trained += epochs;
        self.final_nll = history.last().copied();
        Ok(history)
    }

    // Raw weight access for finite-difference checks.
    pub fn weight(&self, key: &ContextKey, token: u16) -> f64 {
        self.weights(key).map(|w| w[token as usize]).unwrap_or(0.0)
    }

    pub fn set_weight(&mut self, key: &ContextKey, token: u16, value: f64) {
        let v = self.vocab_size;
        let w = self.contexts.entry(*key).or_insert_with(|| vec![0.0; v]);
        w[token as usize] = value;
    }

    pub fn to_json(&self) -> String {
        let wire = PlannerModelWire {
            schema: PLANNER_SCHEMA.to_string(),
            alpha: self.alpha,
            order: CONTEXT_ORDER,
            vocab_size: self.vocab_size,
            epochs_trained: self.epochs_trained,
            final_nll: self.final_nll,
            contexts: self
                .contexts
                .iter()
                .map(|(k, w)| (key_string(k), w.clone()))
                .collect(),
        };
        crate::util::canonical_json(&wire)
    }

    pub fn from_json(json: &str) -> Result<PlannerModel, PlannerError> {
        let wire: PlannerModelWire =
            serde_json::from_str(json).map_err(|e| PlannerError::Data(e.to_string()))?;
        if wire.schema != PLANNER_SCHEMA {
            return Err(PlannerError::Data(format!("unknown schema {}", wire.schema)));
        }
        if wire.vocab_size != Vocab::global().len() {
            return Err(PlannerError::Data(format!(
                "model vocabulary size {} does not match engine vocabulary {}",
                wire.vocab_size,
                Vocab::global().len()
            )));
        }
        let mut contexts = BTreeMap::new();
        for (k, w) in wire.contexts {
            let key =
                parse_key(&k).ok_or_else(|| PlannerError::Data(format!("bad context key {k}")))?;
            if w.len() != wire.vocab_size {
                return Err(PlannerError::Data(format!("context {k} has wrong width")));
            }
            contexts.insert(key, w);
        }
        Ok(PlannerModel {
            alpha: wire.alpha,
            epochs_trained: wire.epochs_trained,
            final_nll: wire.final_nll,
            contexts,
            vocab_size: wire.vocab_size,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::rng_for;
    use rand::Rng;

    fn toy_corpus(seed: u64, streams: usize, len: usize) -> Vec<TokenStream> {
        let v = Vocab::global().len() as u16;
        let mut rng = rng_for(seed, &["toy_corpus"]);
        (0..streams)
            .map(|_| TokenStream {
                category: rng.gen_range(0..3),
                tokens: (0..len).map(|_| rng.gen_range(0..v)).collect(),
            })
            .collect()
    }

    #[test]
    fn uniform_model_probabilities_sum_to_one() {
        let m = PlannerModel::uniform();
        let key = m.context_of(0, &[]);
        let p = m.probs(&key);
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|&x| (x - 1.0 / m.vocab_size() as f64).abs() < 1e-12));
    }

    #[test]
    fn uniform_perplexity_equals_vocab_size() {
        let m = PlannerModel::uniform();
        let corpus = toy_corpus(1, 4, 12);
        let v = m.vocab_size() as f64;
        assert!((m.perplexity(&corpus) - v).abs() < 1e-9);
    }

    #[test]
    fn perplexity_is_exp_of_mean_nll() {
        let mut m = PlannerModel::uniform();
        let corpus = toy_corpus(2, 6, 10);
        m.train(&corpus, 5, 0.5).unwrap();
        assert!((m.perplexity(&corpus) - m.nll(&corpus).exp()).abs() < 1e-12);
        let again = m.perplexity(&corpus);
        assert_eq!(again, m.perplexity(&corpus));
    }

    #[test]
    fn training_decreases_nll_monotonically() {
        let mut m = PlannerModel::uniform();
        let corpus = toy_corpus(3, 8, 14);
        let history = m.train(&corpus, 10, 0.5).unwrap();
        for w in history.windows(2) {
            assert!(w[1] < w[0], "NLL must strictly decrease: {history:?}");
        }
    }

    #[test]
    fn empty_corpus_is_a_data_error() {
        let mut m = PlannerModel::uniform();
        assert!(matches!(m.train(&[], 1, 0.1), Err(PlannerError::Data(_))));
    }

    #[test]
    fn single_plan_corpus_memorizes() {
        let mut m = PlannerModel::uniform();
        let corpus = vec![TokenStream {
            category: 1,
            tokens: vec![3, 7, 7, 12, 5, 101],
        }];
        m.train(&corpus, 400, 4.0).unwrap();
        // The sequence probability approaches one up to the smoothing floor.
        let mut prob = 1.0;
        let mut history: Vec<u16> = Vec::new();
        for &t in &corpus[0].tokens {
            let key = m.context_of(1, &history);
            prob *= m.prob_of(&key, t);
            history.push(t);
        }
        assert!(prob >= 0.99, "memorized probability {prob}");
    }

    #[test]
    fn shuffled_corpus_scores_worse_than_structured() {
        let a = TokenStream { category: 0, tokens: vec![1, 2, 3, 4, 5, 6] };
        let b = TokenStream { category: 0, tokens: vec![1, 2, 3, 9, 8, 7] };
        let structured: Vec<TokenStream> =
            (0..20).map(|i| if i % 2 == 0 { a.clone() } else { b.clone() }).collect();
        let mut shuffled = structured.clone();
        let mut rng = rng_for(9, &["shuffle"]);
        for s in &mut shuffled {
            use rand::seq::SliceRandom;
            s.tokens.shuffle(&mut rng);
        }
        let mut ms = PlannerModel::uniform();
        ms.train(&structured, 30, 1.0).unwrap();
        let mut mu = PlannerModel::uniform();
        mu.train(&shuffled, 30, 1.0).unwrap();
        assert!(
            ms.final_nll.unwrap() < mu.final_nll.unwrap(),
            "structured {:?} vs shuffled {:?}",
            ms.final_nll,
            mu.final_nll
        );
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut worst: f64 = 0.0;
        for seed in 0..100u64 {
            let mut m = PlannerModel::uniform();
            let corpus = toy_corpus(seed, 2, 5);
            let (_, g0) = m.nll_and_grad(&corpus);
            // Random warm start so gradients are generic.
            let mut rng = rng_for(seed, &["warm"]);
            for key in g0.keys() {
                for t in 0..m.vocab_size() as u16 {
                    if rng.gen_bool(0.1) {
                        m.set_weight(key, t, rng.gen_range(-1.0..1.0));
                    }
                }
            }
            let (_, grads) = m.nll_and_grad(&corpus);
            let h = 1e-5;
            let mut rng = rng_for(seed, &["fdpick"]);
            for (key, g) in &grads {
                // Spot-check a handful of coordinates per context.
                for _ in 0..6 {
                    let t = rng.gen_range(0..m.vocab_size() as u16);
                    let w0 = m.weight(key, t);
                    m.set_weight(key, t, w0 + h);
                    let up = m.nll(&corpus);
                    m.set_weight(key, t, w0 - h);
                    let dn = m.nll(&corpus);
                    m.set_weight(key, t, w0);
                    let fd = (up - dn) / (2.0 * h);
                    let analytic = g[t as usize];
                    let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-8);
                    worst = worst.max(rel);
                    assert!(
                        rel < 1e-5,
                        "seed {seed}: grad mismatch at {key:?}/{t}: {analytic} vs {fd}"
                    );
                }
            }
        }
        assert!(worst > 0.0);
    }

    #[test]
    fn model_json_round_trips() {
        let mut m = PlannerModel::uniform();
        let corpus = toy_corpus(5, 3, 8);
        m.train(&corpus, 3, 0.5).unwrap();
        let json = m.to_json();
        let back = PlannerModel::from_json(&json).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), json);
    }
}

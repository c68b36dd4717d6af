use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::ArticleCorpus;
use crate::error::{Error, Result};
use crate::numcore::{axpy, dot, sigmoid, softmax, Matrix};

use super::{OutputLayer, PvdmConfig, TopicEmbeddingSpace};

/// One prediction: `target` from the mean of the document vector and the
/// `context` word vectors, contrasted against `negatives` (ignored under
/// full softmax).
#[derive(Debug, Clone, Copy)]
pub struct PvdmExample<'a> {
    pub context: &'a [usize],
    pub target: usize,
    pub negatives: &'a [usize],
}

/// Cumulative unigram^0.75 distribution for drawing negatives.
#[derive(Debug, Clone)]
struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NoiseTable { cumulative }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let u = rng.gen::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

fn draw_negatives<R: Rng>(noise: &NoiseTable, target: usize, k: usize, rng: &mut R, out: &mut Vec<usize>) {
    out.clear();
    for _ in 0..k {
        let w = noise.sample(rng);
        if w != target {
            out.push(w);
        }
    }
}

fn mean_input(words: &Matrix, doc: &[f64], context: &[usize]) -> Vec<f64> {
    let mut h = doc.to_vec();
    for &c in context {
        axpy(1.0, words.row(c), &mut h);
    }
    let n = (1 + context.len()) as f64;
    h.iter_mut().for_each(|x| *x /= n);
    h
}

/// Loss at `h`, its gradient with respect to `h`, and the output rows'
/// gradients as `(row, coefficient)` meaning `d/d out[row] = coefficient · h`.
fn output_grad(
    out: &Matrix,
    h: &[f64],
    target: usize,
    negatives: &[usize],
    layer: OutputLayer,
) -> (f64, Vec<f64>, Vec<(usize, f64)>) {
    let mut dh = vec![0.0; h.len()];
    let mut rows = Vec::new();
    let loss = match layer {
        OutputLayer::NegativeSampling { .. } => {
            let mut loss = 0.0;
            for (w, label) in std::iter::once((target, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0))) {
                let score = dot(out.row(w), h);
                let s = sigmoid(score);
                // -ln σ(score) for the positive, -ln σ(-score) for negatives.
                loss += if label == 1.0 { softplus(-score) } else { softplus(score) };
                let coef = s - label;
                axpy(coef, out.row(w), &mut dh);
                rows.push((w, coef));
            }
            loss
        }
        OutputLayer::FullSoftmax => {
            let logits = out.matvec(h);
            let p = softmax(&logits);
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
            for (w, &pw) in p.iter().enumerate() {
                let coef = pw - if w == target { 1.0 } else { 0.0 };
                axpy(coef, out.row(w), &mut dh);
                rows.push((w, coef));
            }
            lse - logits[target]
        }
    };
    (loss, dh, rows)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Loss of one example as a function of the document vector.
pub fn pvdm_example_loss(words: &Matrix, out: &Matrix, doc: &[f64], ex: PvdmExample<'_>, layer: OutputLayer) -> f64 {
    let h = mean_input(words, doc, ex.context);
    output_grad(out, &h, ex.target, ex.negatives, layer).0
}

/// Gradient of [`pvdm_example_loss`] with respect to the document vector.
pub fn pvdm_example_grad(words: &Matrix, out: &Matrix, doc: &[f64], ex: PvdmExample<'_>, layer: OutputLayer) -> Vec<f64> {
    let h = mean_input(words, doc, ex.context);
    let (_, mut dh, _) = output_grad(out, &h, ex.target, ex.negatives, layer);
    let n = (1 + ex.context.len()) as f64;
    dh.iter_mut().for_each(|x| *x /= n);
    dh
}

fn context_of(tokens: &[usize], j: usize, window: usize, buf: &mut Vec<usize>) {
    buf.clear();
    let lo = j.saturating_sub(window);
    let hi = (j + window + 1).min(tokens.len());
    buf.extend((lo..hi).filter(|&i| i != j).map(|i| tokens[i]));
}

fn negatives_for(layer: OutputLayer) -> usize {
    match layer {
        OutputLayer::NegativeSampling { negatives } => negatives,
        OutputLayer::FullSoftmax => 0,
    }
}

/// Trains PV-DM (mean of document and context vectors) over title + body of
/// every article with a linearly decaying learning rate. Single worker;
/// identical inputs and seed give identical vectors.
pub fn train_pvdm(articles: &ArticleCorpus, cfg: &PvdmConfig) -> Result<TopicEmbeddingSpace> {
    cfg.validate()?;
    if articles.is_empty() {
        return Err(Error::EmptyCorpus("no articles to embed".into()));
    }
    let texts: Vec<Vec<String>> = articles.articles.values().map(|a| a.indexed_tokens()).collect();

    let mut freq: HashMap<&str, u64> = HashMap::new();
    for t in texts.iter().flatten() {
        *freq.entry(t.as_str()).or_default() += 1;
    }
    let mut vocab: Vec<(&str, u64)> = freq
        .into_iter()
        .filter(|&(_, c)| c as usize >= cfg.min_count.max(1))
        .collect();
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if vocab.is_empty() {
        return Err(Error::EmptyCorpus("article vocabulary is empty".into()));
    }
    let words: Vec<String> = vocab.iter().map(|(w, _)| w.to_string()).collect();
    let word_counts: Vec<u64> = vocab.iter().map(|&(_, c)| c).collect();
    let word_index: HashMap<String, usize> = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    let docs_tokens: Vec<Vec<usize>> = texts
        .iter()
        .map(|t| t.iter().filter_map(|w| word_index.get(w).copied()).collect())
        .collect();

    let dim = cfg.dim;
    let scale = 0.5 / dim as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut word_vectors = Matrix::uniform(words.len(), dim, scale, &mut rng);
    let mut docs = Matrix::uniform(docs_tokens.len(), dim, scale, &mut rng);
    let mut output = Matrix::zeros(words.len(), dim);
    let noise = NoiseTable::new(&word_counts);
    let k = negatives_for(cfg.output);

    let per_epoch: usize = docs_tokens.iter().map(Vec::len).sum();
    let total = (per_epoch * cfg.epochs).max(1) as f64;
    let mut processed = 0usize;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut context = Vec::new();
    let mut negatives = Vec::new();

    for _ in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        for (d, tokens) in docs_tokens.iter().enumerate() {
            for j in 0..tokens.len() {
                let alpha = cfg.alpha - (cfg.alpha - cfg.min_alpha) * (processed as f64 / total);
                processed += 1;
                context_of(tokens, j, cfg.window, &mut context);
                draw_negatives(&noise, tokens[j], k, &mut rng, &mut negatives);
                let h = mean_input(&word_vectors, docs.row(d), &context);
                let (loss, dh, rows) = output_grad(&output, &h, tokens[j], &negatives, cfg.output);
                loss_sum += loss;
                for (w, coef) in rows {
                    axpy(-alpha * coef, &h, output.row_mut(w));
                }
                let step = -alpha / (1 + context.len()) as f64;
                axpy(step, &dh, docs.row_mut(d));
                for &c in &context {
                    axpy(step, &dh, word_vectors.row_mut(c));
                }
            }
        }
        let mean = loss_sum / per_epoch.max(1) as f64;
        if !mean.is_finite() || !docs.is_finite() {
            return Err(Error::Numeric("doc2vec diverged; lower alpha".into()));
        }
        log::debug!("pvdm epoch loss {mean:.5}");
        epoch_losses.push(mean);
    }

    Ok(TopicEmbeddingSpace {
        config: *cfg,
        article_ids: articles.articles.keys().cloned().collect(),
        titles: articles.articles.values().map(|a| a.title.clone()).collect(),
        docs,
        words,
        word_index,
        word_counts,
        word_vectors,
        output_weights: output,
        epoch_losses,
    })
}

/// Fits a fresh document vector to `tokens` with word and output weights
/// frozen. Unknown words are skipped; with `steps == 0` or no known words
/// the seeded initialization is returned.
pub fn infer_vector<S: AsRef<str>>(space: &TopicEmbeddingSpace, tokens: &[S], steps: usize, seed: u64) -> Vec<f64> {
    let dim = space.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut doc = Matrix::uniform(1, dim, 0.5 / dim as f64, &mut rng).into_vec();
    let known: Vec<usize> = tokens
        .iter()
        .filter_map(|t| space.word_index.get(t.as_ref()).copied())
        .collect();
    if known.is_empty() || steps == 0 {
        return doc;
    }
    let cfg = space.config;
    let noise = NoiseTable::new(&space.word_counts);
    let k = negatives_for(cfg.output);
    let mut context = Vec::new();
    let mut negatives = Vec::new();
    for step in 0..steps {
        let alpha = cfg.alpha - (cfg.alpha - cfg.min_alpha) * (step as f64 / steps as f64);
        for j in 0..known.len() {
            context_of(&known, j, cfg.window, &mut context);
            draw_negatives(&noise, known[j], k, &mut rng, &mut negatives);
            let h = mean_input(&space.word_vectors, &doc, &context);
            let (_, dh, _) = output_grad(&space.output_weights, &h, known[j], &negatives, cfg.output);
            axpy(-alpha / (1 + context.len()) as f64, &dh, &mut doc);
        }
    }
    doc
}

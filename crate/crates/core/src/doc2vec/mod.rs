//! PV-DM paragraph vectors: the topic-embedding space.

mod store;
mod train;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::numcore::Matrix;

pub use store::{load_store, read_store, write_store};
pub use train::{infer_vector, pvdm_example_grad, pvdm_example_loss, train_pvdm, PvdmExample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputLayer {
    NegativeSampling { negatives: usize },
    /// Exact softmax over the whole vocabulary; only sensible for tiny
    /// vocabularies.
    FullSoftmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PvdmConfig {
    pub dim: usize,
    /// Context words on each side of the predicted word.
    pub window: usize,
    pub epochs: usize,
    pub output: OutputLayer,
    pub alpha: f64,
    pub min_alpha: f64,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for PvdmConfig {
    fn default() -> Self {
        PvdmConfig {
            dim: 200,
            window: 5,
            epochs: 20,
            output: OutputLayer::NegativeSampling { negatives: 5 },
            alpha: 0.025,
            min_alpha: 0.0001,
            min_count: 1,
            seed: 1,
        }
    }
}

impl PvdmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("doc2vec needs at least one epoch".into()));
        }
        if !(self.alpha > 0.0 && self.min_alpha >= 0.0 && self.min_alpha <= self.alpha) {
            return Err(Error::Config("need 0 <= min_alpha <= alpha, alpha > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    /// `1 - cos`.
    Cosine,
}

impl Metric {
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Cosine => 1.0 - cosine(a, b),
        }
    }
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Article embeddings plus the word model needed to embed new text.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicEmbeddingSpace {
    config: PvdmConfig,
    article_ids: Vec<String>,
    titles: Vec<String>,
    docs: Matrix,
    words: Vec<String>,
    word_index: HashMap<String, usize>,
    word_counts: Vec<u64>,
    word_vectors: Matrix,
    output_weights: Matrix,
    epoch_losses: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SpaceMeta {
    format: String,
    version: u32,
    config: PvdmConfig,
    titles: Vec<String>,
    word_counts: Vec<u64>,
    epoch_losses: Vec<f64>,
}

const SPACE_FORMAT: &str = "dialtrack-topic-space";

impl TopicEmbeddingSpace {
    /// A space with article vectors only. `article_ids` must be strictly
    /// ascending. Inference on such a space returns the initialization.
    pub fn from_vectors(article_ids: Vec<String>, titles: Vec<String>, docs: Matrix) -> Result<Self> {
        if article_ids.len() != docs.rows() || titles.len() != docs.rows() {
            return Err(Error::Dimension("ids, titles and vectors disagree in count".into()));
        }
        if article_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Consistency("article ids must be unique and sorted".into()));
        }
        let dim = docs.cols();
        Ok(TopicEmbeddingSpace {
            config: PvdmConfig {
                dim,
                ..PvdmConfig::default()
            },
            article_ids,
            titles,
            docs,
            words: Vec::new(),
            word_index: HashMap::new(),
            word_counts: Vec::new(),
            word_vectors: Matrix::zeros(0, dim),
            output_weights: Matrix::zeros(0, dim),
            epoch_losses: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.docs.cols()
    }

    pub fn len(&self) -> usize {
        self.article_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.article_ids.is_empty()
    }

    pub fn config(&self) -> &PvdmConfig {
        &self.config
    }

    pub fn article_ids(&self) -> &[String] {
        &self.article_ids
    }

    pub fn position(&self, article: &str) -> Option<usize> {
        self.article_ids
            .binary_search_by(|a| a.as_str().cmp(article))
            .ok()
    }

    pub fn embedding(&self, article: &str) -> Option<&[f64]> {
        self.position(article).map(|p| self.docs.row(p))
    }

    pub fn embedding_at(&self, pos: usize) -> &[f64] {
        self.docs.row(pos)
    }

    pub fn title(&self, article: &str) -> Option<&str> {
        self.position(article).map(|p| self.titles[p].as_str())
    }

    pub fn doc_vectors(&self) -> &Matrix {
        &self.docs
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word_vector(&self, word: &str) -> Option<&[f64]> {
        self.word_index.get(word).map(|&i| self.word_vectors.row(i))
    }

    /// Mean training loss per predicted word, one entry per epoch.
    pub fn epoch_losses(&self) -> &[f64] {
        &self.epoch_losses
    }

    /// Exact nearest article; ties go to the smaller id.
    pub fn nearest(&self, query: &[f64], metric: Metric) -> Option<(&str, f64)> {
        self.nearest_among(query, metric, 0..self.len())
    }

    pub fn nearest_among<I>(&self, query: &[f64], metric: Metric, candidates: I) -> Option<(&str, f64)>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut best: Option<(usize, f64)> = None;
        for pos in candidates {
            let d = metric.distance(query, self.docs.row(pos));
            match best {
                Some((bp, bd)) if d > bd || (d == bd && pos > bp) => {}
                _ => best = Some((pos, d)),
            }
        }
        best.map(|(p, d)| (self.article_ids[p].as_str(), d))
    }

    pub fn articles_text(&self) -> String {
        write_store(&self.article_ids, &self.docs)
    }

    pub fn content_hash(&self) -> String {
        fsutil::sha256_hex(self.articles_text().as_bytes())
    }

    /// Writes `meta.json`, `articles.vec`, `words.vec` and `output.vec`
    /// under `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let meta = SpaceMeta {
            format: SPACE_FORMAT.into(),
            version: 1,
            config: self.config,
            titles: self.titles.clone(),
            word_counts: self.word_counts.clone(),
            epoch_losses: self.epoch_losses.clone(),
        };
        let meta = serde_json::to_string_pretty(&meta).expect("meta serializes");
        fsutil::write_atomic(&dir.join("meta.json"), meta.as_bytes())?;
        fsutil::write_atomic(&dir.join("articles.vec"), self.articles_text().as_bytes())?;
        fsutil::write_atomic(
            &dir.join("words.vec"),
            write_store(&self.words, &self.word_vectors).as_bytes(),
        )?;
        fsutil::write_atomic(
            &dir.join("output.vec"),
            write_store(&self.words, &self.output_weights).as_bytes(),
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: SpaceMeta = serde_json::from_str(&fsutil::read_to_string(&dir.join("meta.json"))?)
            .map_err(|e| Error::Format(format!("space meta: {e}")))?;
        if meta.format != SPACE_FORMAT || meta.version != 1 {
            return Err(Error::Format(format!("unsupported space {} v{}", meta.format, meta.version)));
        }
        let (article_ids, docs) = load_store(&dir.join("articles.vec"))?;
        let (words, word_vectors) = load_store(&dir.join("words.vec"))?;
        let (out_words, output_weights) = load_store(&dir.join("output.vec"))?;
        if out_words != words || meta.word_counts.len() != words.len() {
            return Err(Error::Consistency("word and output tables disagree".into()));
        }
        let mut space = Self::from_vectors(article_ids, meta.titles, docs)?;
        if !words.is_empty() && (word_vectors.cols() != space.dim() || output_weights.cols() != space.dim()) {
            return Err(Error::Dimension("word vectors differ in width from article vectors".into()));
        }
        space.config = meta.config;
        space.word_index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        space.words = words;
        space.word_counts = meta.word_counts;
        space.word_vectors = if word_vectors.rows() == 0 { Matrix::zeros(0, space.dim()) } else { word_vectors };
        space.output_weights = if output_weights.rows() == 0 { Matrix::zeros(0, space.dim()) } else { output_weights };
        space.epoch_losses = meta.epoch_losses;
        Ok(space)
    }
}

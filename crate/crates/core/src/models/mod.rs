//! The LRCN joint tracker and its CNN-only, LSTM-only and random baselines.
//!
//! Every learned model shares one parameter layout: an optional word
//! embedding and convolution, an optional LSTM, and linear domain and topic
//! heads. The heads read the LSTM state (or the pooled CNN features when
//! there is no LSTM) after dropout.

mod network;
mod predict;
mod train;

use serde::{Deserialize, Serialize};

use crate::corpus::{encode, tokenize, Vocabulary, NULL_ID};
use crate::doc2vec::{infer_vector, TopicEmbeddingSpace};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::numcore::{Checkpoint, Matrix, ParamId, ParamStore};
use crate::seed;

pub use network::{Supervision, WindowInput};
pub use predict::{SessionState, StreamPrediction};
pub use train::{train, EpochRecord, TrainOptions, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lrcn,
    /// Heads read the pooled features of the current utterance only.
    CnnOnly,
    /// LSTM over inferred paragraph vectors of each utterance.
    LstmOnly,
    /// Uniform guesses over domains and training articles.
    Random,
}

impl ModelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Lrcn => "LRCN",
            ModelKind::CnnOnly => "CNN",
            ModelKind::LstmOnly => "LSTM",
            ModelKind::Random => "Random",
        }
    }

    fn has_cnn(&self) -> bool {
        matches!(self, ModelKind::Lrcn | ModelKind::CnnOnly)
    }

    fn has_lstm(&self) -> bool {
        matches!(self, ModelKind::Lrcn | ModelKind::LstmOnly)
    }
}

/// Which heads are trained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "D")]
    D,
    #[serde(rename = "T")]
    T,
    #[default]
    #[serde(rename = "D+T")]
    DT,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::D => "D",
            Regime::T => "T",
            Regime::DT => "D+T",
        }
    }

    /// `(λx, λy)` after masking the disabled head.
    pub fn lambdas(&self, lambda_x: f64, lambda_y: f64) -> (f64, f64) {
        match self {
            Regime::D => (lambda_x, 0.0),
            Regime::T => (0.0, lambda_y),
            Regime::DT => (lambda_x, lambda_y),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossPlacement {
    /// Supervise only the newest utterance of each window.
    #[default]
    FinalStep,
    /// Supervise every real utterance of each window.
    AllSteps,
}

/// Architecture and inference-time settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// History length H, including the current utterance.
    pub window: usize,
    pub word_dim: usize,
    pub filters: usize,
    pub filter_height: usize,
    pub hidden: usize,
    pub drop_prob: f64,
    pub loss_placement: LossPlacement,
    pub init_scale: f64,
    pub forget_bias: f64,
    /// Inference steps for paragraph-vector inputs of the LSTM-only model.
    pub infer_steps: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            window: 20,
            word_dim: 200,
            filters: 64,
            filter_height: 1,
            hidden: 300,
            drop_prob: 0.2,
            loss_placement: LossPlacement::FinalStep,
            init_scale: 0.05,
            forget_bias: 1.0,
            infer_steps: 20,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("window", self.window),
            ("word_dim", self.word_dim),
            ("filters", self.filters),
            ("filter_height", self.filter_height),
            ("hidden", self.hidden),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(0.0..1.0).contains(&self.drop_prob) {
            return Err(Error::Config(format!("drop_prob {} is outside [0, 1)", self.drop_prob)));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(Error::Config("init_scale must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Scalar parameter count for a model of `kind`:
    ///
    /// ```text
    /// cnn  = V·K + F·M·K + F
    /// lstm = 4·Hs·(I + Hs + 1)   with I = F (LRCN) or Kt (LSTM-only)
    /// head = (D + Kt)·(R + 1)    with R = Hs, or F without an LSTM
    /// ```
    pub fn param_count(&self, kind: ModelKind, vocab: usize, domains: usize, topic_dim: usize) -> usize {
        let (k, f, m, hs) = (self.word_dim, self.filters, self.filter_height, self.hidden);
        let cnn = vocab * k + f * m * k + f;
        let heads = |r: usize| (domains + topic_dim) * (r + 1);
        match kind {
            ModelKind::Lrcn => cnn + 4 * hs * (f + hs + 1) + heads(hs),
            ModelKind::CnnOnly => cnn + heads(f),
            ModelKind::LstmOnly => 4 * hs * (topic_dim + hs + 1) + heads(hs),
            ModelKind::Random => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub regime: Regime,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Reload the parameters of the best epoch once training completes.
    pub restore_best: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            batch_size: 5,
            lambda_x: 1.0,
            lambda_y: 1.0,
            regime: Regime::DT,
            lr: 0.001,
            epochs: 10,
            seed: 1,
            restore_best: true,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be positive".into()));
        }
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.lambda_x) || !ok(self.lambda_y) {
            return Err(Error::Config("loss weights must be finite and non-negative".into()));
        }
        let (lx, ly) = self.lambdas();
        if lx == 0.0 && ly == 0.0 {
            return Err(Error::Config("both loss weights are zero under this regime".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }

    pub fn lambdas(&self) -> (f64, f64) {
        self.regime.lambdas(self.lambda_x, self.lambda_y)
    }
}

/// Parameter handles by layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Layout {
    pub embedding: Option<ParamId>,
    pub conv: Option<(ParamId, ParamId)>,
    pub lstm: Option<(ParamId, ParamId, ParamId)>,
    pub domain: (ParamId, ParamId),
    pub topic: (ParamId, ParamId),
}

/// Everything needed to rebuild a tracker besides its weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrackerMeta {
    kind: ModelKind,
    config: ModelConfig,
    domains: Vec<String>,
    topic_dim: usize,
    regime: Option<Regime>,
    seed: u64,
    random_articles: Vec<String>,
    vocab: String,
}

/// A domain and topic tracker of any [`ModelKind`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tracker {
    kind: ModelKind,
    config: ModelConfig,
    domains: Vec<String>,
    vocab: Vocabulary,
    topic_dim: usize,
    regime: Option<Regime>,
    seed: u64,
    pub(crate) params: ParamStore,
    pub(crate) layout: Option<Layout>,
    random_articles: Vec<String>,
    /// Paragraph-vector model used to featurize utterances (LSTM-only).
    encoder: Option<TopicEmbeddingSpace>,
}

fn init_layout(
    kind: ModelKind,
    cfg: &ModelConfig,
    vocab: usize,
    domains: usize,
    topic_dim: usize,
    seed_value: u64,
) -> (ParamStore, Option<Layout>) {
    let mut params = ParamStore::new();
    if kind == ModelKind::Random {
        return (params, None);
    }
    let mut rng = seed::rng(seed_value, "init");
    let s = cfg.init_scale;
    let (embedding, conv) = if kind.has_cnn() {
        let mut table = Matrix::uniform(vocab, cfg.word_dim, s, &mut rng);
        table.row_mut(NULL_ID as usize).fill(0.0);
        let e = params.add("embedding", table);
        let w = params.add(
            "conv.w",
            Matrix::uniform(cfg.filters, cfg.filter_height * cfg.word_dim, s, &mut rng),
        );
        let b = params.add("conv.b", Matrix::zeros(1, cfg.filters));
        (Some(e), Some((w, b)))
    } else {
        (None, None)
    };
    let lstm = kind.has_lstm().then(|| {
        let input = if kind.has_cnn() { cfg.filters } else { topic_dim };
        let hs = cfg.hidden;
        let w_x = params.add("lstm.w_x", Matrix::uniform(4 * hs, input, s, &mut rng));
        let w_h = params.add("lstm.w_h", Matrix::uniform(4 * hs, hs, s, &mut rng));
        let mut bias = Matrix::zeros(1, 4 * hs);
        bias.as_mut_slice()[hs..2 * hs].fill(cfg.forget_bias);
        let b = params.add("lstm.b", bias);
        (w_x, w_h, b)
    });
    let repr = if kind.has_lstm() { cfg.hidden } else { cfg.filters };
    let dw = params.add("domain.w", Matrix::uniform(domains, repr, s, &mut rng));
    let db = params.add("domain.b", Matrix::zeros(1, domains));
    let tw = params.add("topic.w", Matrix::uniform(topic_dim, repr, s, &mut rng));
    let tb = params.add("topic.b", Matrix::zeros(1, topic_dim));
    (
        params,
        Some(Layout {
            embedding,
            conv,
            lstm,
            domain: (dw, db),
            topic: (tw, tb),
        }),
    )
}

impl Tracker {
    /// Builds an untrained tracker. `space` fixes the topic width, supplies
    /// the random baseline's candidate articles and, for the LSTM-only
    /// model, featurizes utterances.
    pub fn build(
        kind: ModelKind,
        config: &ModelConfig,
        domains: &[String],
        vocab: &Vocabulary,
        space: &TopicEmbeddingSpace,
        seed_value: u64,
    ) -> Result<Tracker> {
        config.validate()?;
        if domains.len() < 2 {
            return Err(Error::Config("a tracker needs at least two domains".into()));
        }
        let topic_dim = space.dim();
        let (params, layout) = init_layout(kind, config, vocab.len(), domains.len(), topic_dim, seed_value);
        Ok(Tracker {
            kind,
            config: *config,
            domains: domains.to_vec(),
            vocab: vocab.clone(),
            topic_dim,
            regime: None,
            seed: seed_value,
            params,
            layout,
            random_articles: space.article_ids().to_vec(),
            encoder: (kind == ModelKind::LstmOnly).then(|| space.clone()),
        })
    }

    /// Copies vectors of known words into the embedding table. Returns how
    /// many vocabulary entries were initialized.
    pub fn load_pretrained(&mut self, keys: &[String], vectors: &Matrix) -> Result<usize> {
        let Some(id) = self.layout.and_then(|l| l.embedding) else {
            return Err(Error::Config(format!("{} has no word embeddings", self.kind.label())));
        };
        if vectors.cols() != self.config.word_dim {
            return Err(Error::Config(format!(
                "pretrained vectors have width {} but word_dim is {}",
                vectors.cols(),
                self.config.word_dim
            )));
        }
        let table = self.params.get_mut(id);
        let mut hits = 0;
        for (row, key) in keys.iter().enumerate() {
            if let Some(tok) = self.vocab.id(key).filter(|&t| t != NULL_ID) {
                table.row_mut(tok as usize).copy_from_slice(vectors.row(row));
                hits += 1;
            }
        }
        Ok(hits)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn domains(&self) -> &[String] {
        &self.domains
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn topic_dim(&self) -> usize {
        self.topic_dim
    }

    pub fn regime(&self) -> Option<Regime> {
        self.regime
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn random_articles(&self) -> &[String] {
        &self.random_articles
    }

    /// Restricts the random baseline to these articles.
    pub fn set_random_articles(&mut self, mut articles: Vec<String>) -> Result<()> {
        articles.sort();
        articles.dedup();
        if articles.is_empty() {
            return Err(Error::Config("random baseline needs at least one article".into()));
        }
        self.random_articles = articles;
        Ok(())
    }

    /// Row label such as `LRCN (D+T)`.
    pub fn name(&self) -> String {
        match (self.kind, self.regime) {
            (ModelKind::Random, _) | (_, None) => self.kind.label().to_string(),
            (k, Some(r)) => format!("{} ({})", k.label(), r.label()),
        }
    }

    /// Encodes one utterance into the model's input representation.
    pub fn encode_text(&self, text: &str) -> WindowInput {
        match self.kind {
            ModelKind::Lrcn | ModelKind::CnnOnly => WindowInput::Tokens(encode(&self.vocab, text)),
            ModelKind::LstmOnly => {
                let space = self.encoder.as_ref().expect("LSTM-only tracker keeps its encoder");
                let tokens = tokenize(text);
                WindowInput::Features(infer_vector(
                    space,
                    &tokens,
                    self.config.infer_steps,
                    seed::derive(self.seed, "infer"),
                ))
            }
            ModelKind::Random => WindowInput::Features(Vec::new()),
        }
    }

    fn meta(&self) -> TrackerMeta {
        TrackerMeta {
            kind: self.kind,
            config: self.config,
            domains: self.domains.clone(),
            topic_dim: self.topic_dim,
            regime: self.regime,
            seed: self.seed,
            random_articles: self.random_articles.clone(),
            vocab: self.vocab.to_text(),
        }
    }

    /// Hash over what fixes the parameter shapes.
    pub fn config_hash(&self) -> String {
        let key = serde_json::json!({
            "kind": self.kind,
            "config": self.config,
            "domains": self.domains,
            "topic_dim": self.topic_dim,
            "vocab": fsutil::sha256_hex(self.vocab.to_text().as_bytes()),
        });
        fsutil::sha256_hex(key.to_string().as_bytes())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config_hash: self.config_hash(),
            meta: serde_json::json!({ "tracker": self.meta() }),
            params: self.params.clone(),
            adam: None,
        }
    }

    /// Rebuilds a tracker. The LSTM-only model needs the paragraph-vector
    /// space it was trained with.
    pub fn from_checkpoint(ckpt: &Checkpoint, space: Option<&TopicEmbeddingSpace>) -> Result<Tracker> {
        let meta: TrackerMeta = serde_json::from_value(
            ckpt.meta
                .get("tracker")
                .cloned()
                .ok_or_else(|| Error::Format("checkpoint lacks tracker metadata".into()))?,
        )
        .map_err(|e| Error::Format(format!("tracker metadata: {e}")))?;
        let vocab = Vocabulary::from_text(&meta.vocab)?;
        let (template, layout) = init_layout(
            meta.kind,
            &meta.config,
            vocab.len(),
            meta.domains.len(),
            meta.topic_dim,
            meta.seed,
        );
        let shapes = |p: &ParamStore| p.iter().map(|q| (q.name.clone(), q.value.shape())).collect::<Vec<_>>();
        if shapes(&template) != shapes(&ckpt.params) {
            return Err(Error::Consistency("checkpoint arrays do not match the model layout".into()));
        }
        let encoder = match meta.kind {
            ModelKind::LstmOnly => {
                let s = space.ok_or_else(|| {
                    Error::Config("the LSTM-only model needs its paragraph-vector space".into())
                })?;
                if s.dim() != meta.topic_dim {
                    return Err(Error::Consistency("space width differs from the checkpoint".into()));
                }
                Some(s.clone())
            }
            _ => None,
        };
        let tracker = Tracker {
            kind: meta.kind,
            config: meta.config,
            domains: meta.domains,
            vocab,
            topic_dim: meta.topic_dim,
            regime: meta.regime,
            seed: meta.seed,
            params: ckpt.params.clone(),
            layout,
            random_articles: meta.random_articles,
            encoder,
        };
        if tracker.config_hash() != ckpt.config_hash {
            return Err(Error::Consistency("checkpoint config hash mismatch".into()));
        }
        Ok(tracker)
    }
}

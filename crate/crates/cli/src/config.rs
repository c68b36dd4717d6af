use std::path::{Path, PathBuf};

use dialtrack::eval::Averaging;
use dialtrack::models::ModelConfig;
use dialtrack::tfidf::TfIdfVariant;
use dialtrack::{seed, Error, PvdmConfig, Result, TrainingConfig};
use serde::{Deserialize, Serialize};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "DIALTRACK_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dialogues: Option<PathBuf>,
    pub articles: Option<PathBuf>,
    /// Pretrained word vectors in GloVe text format.
    pub embeddings: Option<PathBuf>,
    /// Output of `prepare`, input of everything after it.
    pub prepared: PathBuf,
    /// Parent directory for training runs.
    pub runs: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            dialogues: None,
            articles: None,
            embeddings: None,
            prepared: PathBuf::from("prepared"),
            runs: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Articles with fewer words are dropped before indexing.
    pub min_words: usize,
    pub vocab_min_count: usize,
    /// Train / validation / test shares of the concatenated sequence.
    pub split: [f64; 3],
    /// Separate sessions by `window - 1` NULL slots.
    pub pad: bool,
    /// TF-IDF matches averaged into each target.
    pub k: usize,
    pub tfidf: TfIdfVariant,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            min_words: 50,
            vocab_min_count: 1,
            split: [0.6, 0.2, 0.2],
            pad: false,
            k: 1,
            tfidf: TfIdfVariant::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Val,
    #[default]
    Test,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub averaging: Averaging,
    pub split: SplitName,
    /// Resolve topics among target articles only.
    pub restrict_to_targets: bool,
}

/// Everything a pipeline run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every stage derives its own stream from it.
    pub seed: u64,
    pub paths: Paths,
    pub data: DataConfig,
    /// Its `seed` is replaced by one derived from the master seed.
    pub doc2vec: PvdmConfig,
    pub model: ModelConfig,
    /// Its `seed` is replaced by one derived from the master seed.
    pub training: TrainingConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            paths: Paths::default(),
            data: DataConfig::default(),
            doc2vec: PvdmConfig::default(),
            model: ModelConfig::default(),
            training: TrainingConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&dialtrack::fsutil::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every knob before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.doc2vec.validate()?;
        self.model.validate()?;
        self.training.validate()?;
        if self.data.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        let s = self.data.split;
        if s.iter().any(|r| !(r.is_finite() && *r > 0.0)) || (s.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split {s:?} must be three positive shares summing to 1")));
        }
        Ok(())
    }

    pub fn doc2vec_config(&self) -> PvdmConfig {
        PvdmConfig {
            seed: seed::derive(self.seed, "doc2vec"),
            ..self.doc2vec
        }
    }

    pub fn training_config(&self) -> TrainingConfig {
        TrainingConfig {
            seed: seed::derive(self.seed, "train"),
            ..self.training
        }
    }

    pub fn init_seed(&self) -> u64 {
        seed::derive(self.seed, "init")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reference_hyperparameters() {
        let c = RunConfig::default();
        assert_eq!((c.model.window, c.model.word_dim, c.model.filters, c.model.filter_height), (20, 200, 64, 1));
        assert_eq!(c.training.batch_size, 5);
        assert_eq!(c.data.min_words, 50);
        assert_eq!(c.data.split, [0.6, 0.2, 0.2]);
        c.validate().unwrap();
    }

    #[test]
    fn partial_toml_and_round_trip() {
        let c = RunConfig::from_toml("seed = 7\n[model]\nwindow = 5\n[training]\nregime = \"T\"\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.model.window, 5);
        assert_eq!(c.model.hidden, 300);
        assert_eq!(c.training.regime, dialtrack::Regime::T);
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(RunConfig::from_toml("[model]\nwindw = 5\n").is_err());
        let mut c = RunConfig::default();
        c.data.split = [0.5, 0.2, 0.2];
        assert!(c.validate().is_err());
        c = RunConfig::default();
        c.model.drop_prob = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn stage_seeds_are_derived() {
        let mut c = RunConfig::default();
        c.training.seed = 999;
        let (a, b) = (c.training_config().seed, c.doc2vec_config().seed);
        assert_ne!(a, b);
        c.seed = 2;
        assert_ne!(c.training_config().seed, a);
    }
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dialtrack::corpus::{
    build_vocab, concat_and_split, load_articles, load_dialogues, parse_dialogues, write_dialogues, Session,
    Splits,
};
use dialtrack::doc2vec::train_pvdm;
use dialtrack::fsutil::{read_to_string, sha256_hex, write_atomic};
use dialtrack::tfidf::{assign_targets, load_targets, targets_to_jsonl, TfIdfVariant};
use dialtrack::{
    DialogueCorpus, Error, PvdmConfig, TargetAssignment, TfIdfIndex, TopicEmbeddingSpace, Vocabulary,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{CliError, Stage};

pub const MANIFEST: &str = "manifest.json";
const FORMAT: &str = "dialtrack-prepared";
const VERSION: u32 = 1;

const DIALOGUES: &str = "dialogues.jsonl";
const VOCAB: &str = "vocab.txt";
const INDEX: &str = "index.json";
const SPACE: &str = "space";
const TARGETS: &str = "targets.jsonl";

/// Settings that fix the prepared sequence and its targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedSettings {
    pub seed: u64,
    pub min_words: usize,
    pub vocab_min_count: usize,
    pub split: [f64; 3],
    pub pad: bool,
    pub window: usize,
    pub k: usize,
    pub tfidf: TfIdfVariant,
    pub doc2vec: PvdmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub sessions: usize,
    pub utterances: usize,
    pub articles: usize,
    pub dropped_short: usize,
    pub vocab: usize,
    pub targeted: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub settings: PreparedSettings,
    /// SHA-256 of the raw input files.
    pub inputs: BTreeMap<String, String>,
    pub counts: Counts,
    /// SHA-256 of every artifact, keyed by path relative to the directory.
    pub files: BTreeMap<String, String>,
}

/// Loaded artifacts of a prepared directory.
pub struct Prepared {
    pub manifest: Manifest,
    pub dialogues: DialogueCorpus,
    pub splits: Splits,
    pub vocab: Vocabulary,
    pub index: TfIdfIndex,
    pub space: TopicEmbeddingSpace,
    pub targets: TargetAssignment,
}

fn settings(cfg: &RunConfig) -> PreparedSettings {
    PreparedSettings {
        seed: cfg.seed,
        min_words: cfg.data.min_words,
        vocab_min_count: cfg.data.vocab_min_count,
        split: cfg.data.split,
        pad: cfg.data.pad,
        window: cfg.model.window,
        k: cfg.data.k,
        tfidf: cfg.data.tfidf,
        doc2vec: cfg.doc2vec_config(),
    }
}

fn input_path(p: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    p.clone()
        .ok_or_else(|| CliError::new(Stage::Config, Error::Config(format!("no {what} path given"))))
}

/// The training split as a corpus of its own, for vocabulary counting.
fn train_corpus(splits: &Splits, domains: &[String]) -> DialogueCorpus {
    DialogueCorpus {
        sessions: vec![Session {
            id: "train".into(),
            utterances: splits.train.real().map(|(_, u)| u.clone()).collect(),
        }],
        domain_set: domains.to_vec(),
    }
}

/// Runs load, filter, index, embed and target assignment, then publishes
/// the artifacts under `cfg.paths.prepared` in one rename.
pub fn prepare(cfg: &RunConfig) -> Result<Manifest, CliError> {
    cfg.validate().map_err(CliError::config)?;
    let dialogues_path = input_path(&cfg.paths.dialogues, "dialogues")?;
    let articles_path = input_path(&cfg.paths.articles, "articles")?;
    let s = settings(cfg);

    let load = |e| CliError::new(Stage::Load, e);
    let dialogues = load_dialogues(&dialogues_path).map_err(load)?;
    let articles = load_articles(&articles_path, s.min_words).map_err(load)?;
    let mut inputs = BTreeMap::new();
    for (name, path) in [("dialogues", &dialogues_path), ("articles", &articles_path)] {
        let bytes = fs::read(path).map_err(|e| load(Error::io(path, e)))?;
        inputs.insert(name.to_string(), sha256_hex(&bytes));
    }

    let splits = concat_and_split(&dialogues, s.split, s.pad, s.window).map_err(load)?;
    let vocab = build_vocab(&train_corpus(&splits, &dialogues.domain_set), s.vocab_min_count).map_err(load)?;
    let index = TfIdfIndex::build(&articles, s.tfidf).map_err(|e| CliError::new(Stage::Index, e))?;
    log::info!("indexed {} articles ({} dropped as short)", articles.len(), articles.dropped_short);
    let space = train_pvdm(&articles, &s.doc2vec).map_err(|e| CliError::new(Stage::Embed, e))?;
    log::info!("embedded {} articles in {} dimensions", space.len(), space.dim());

    let whole = dialtrack::corpus::concat(&dialogues, s.pad, s.window);
    let targets = assign_targets(&index, &space, &whole, s.k).map_err(|e| CliError::new(Stage::Target, e))?;

    let out = &cfg.paths.prepared;
    let staging = sibling(out, "staging");
    let write = |e| CliError::new(Stage::Write, e);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| write(Error::io(&staging, e)))?;
    }
    write_atomic(&staging.join(DIALOGUES), write_dialogues(&dialogues).as_bytes()).map_err(write)?;
    write_atomic(&staging.join(VOCAB), vocab.to_text().as_bytes()).map_err(write)?;
    write_atomic(&staging.join(INDEX), index.to_json().as_bytes()).map_err(write)?;
    space.save(&staging.join(SPACE)).map_err(write)?;
    write_atomic(&staging.join(TARGETS), targets_to_jsonl(&targets).as_bytes()).map_err(write)?;

    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        settings: s,
        inputs,
        counts: Counts {
            sessions: dialogues.sessions.len(),
            utterances: dialogues.len(),
            articles: articles.len(),
            dropped_short: articles.dropped_short,
            vocab: vocab.len(),
            targeted: targets.len(),
            train: splits.train.real().count(),
            val: splits.val.real().count(),
            test: splits.test.real().count(),
        },
        files: hash_files(&staging).map_err(write)?,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&staging.join(MANIFEST), json.as_bytes()).map_err(write)?;
    publish(&staging, out).map_err(write)?;
    Ok(manifest)
}

fn sibling(path: &Path, tag: &str) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.{tag}"))
}

/// Replaces `out` with `staging`, keeping the old directory until the new
/// one is in place.
fn publish(staging: &Path, out: &Path) -> dialtrack::Result<()> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let old = sibling(out, "old");
    if old.exists() {
        fs::remove_dir_all(&old).map_err(|e| Error::io(&old, e))?;
    }
    if out.exists() {
        fs::rename(out, &old).map_err(|e| Error::io(out, e))?;
    }
    fs::rename(staging, out).map_err(|e| Error::io(out, e))?;
    if old.exists() {
        fs::remove_dir_all(&old).map_err(|e| Error::io(&old, e))?;
    }
    Ok(())
}

fn hash_files(dir: &Path) -> dialtrack::Result<BTreeMap<String, String>> {
    let mut files = BTreeMap::new();
    let mut pending = vec![dir.to_path_buf()];
    while let Some(d) = pending.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let path = entry.map_err(|e| Error::io(&d, e))?.path();
            if path.is_dir() {
                pending.push(path);
                continue;
            }
            let rel = path.strip_prefix(dir).expect("under dir");
            let key = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            if key == MANIFEST {
                continue;
            }
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            files.insert(key, sha256_hex(&bytes));
        }
    }
    Ok(files)
}

/// Loads a prepared directory, checking every artifact against the manifest.
pub fn load(dir: &Path) -> Result<Prepared, CliError> {
    let err = |e| CliError::new(Stage::Load, e);
    let text = read_to_string(&dir.join(MANIFEST)).map_err(err)?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| err(Error::Format(format!("manifest: {e}"))))?;
    if manifest.format != FORMAT || manifest.version != VERSION {
        return Err(err(Error::Format(format!("unsupported prepared directory v{}", manifest.version))));
    }
    let actual = hash_files(dir).map_err(err)?;
    if actual != manifest.files {
        return Err(err(Error::Consistency(format!(
            "{} does not match its manifest; rerun prepare",
            dir.display()
        ))));
    }
    let s = &manifest.settings;
    let dialogues = parse_dialogues(&read_to_string(&dir.join(DIALOGUES)).map_err(err)?).map_err(err)?;
    let splits = concat_and_split(&dialogues, s.split, s.pad, s.window).map_err(err)?;
    let vocab = Vocabulary::from_text(&read_to_string(&dir.join(VOCAB)).map_err(err)?).map_err(err)?;
    let index = TfIdfIndex::from_json(&read_to_string(&dir.join(INDEX)).map_err(err)?).map_err(err)?;
    let space = TopicEmbeddingSpace::load(&dir.join(SPACE)).map_err(err)?;
    let targets = load_targets(&dir.join(TARGETS), Some(&space)).map_err(err)?;
    Ok(Prepared {
        manifest,
        dialogues,
        splits,
        vocab,
        index,
        space,
        targets,
    })
}

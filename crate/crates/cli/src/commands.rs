use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use dialtrack::corpus::synth::{generate_synthetic, SynthConfig};
use dialtrack::corpus::{write_articles, write_dialogues, UtteranceSeq};
use dialtrack::doc2vec::load_store;
use dialtrack::eval::{evaluate, render_predictions, render_report, EvalOptions, EvalReport, ReportFormat};
use dialtrack::fsutil::write_atomic;
use dialtrack::models::{train, TrainOptions, TrainReport};
use dialtrack::numcore::Checkpoint;
use dialtrack::{seed, Error, ModelKind, Regime, Tracker};

use crate::config::{RunConfig, SplitName};
use crate::prepared::{self, Prepared};
use crate::{
    placement, Cli, CliError, Command, EvaluateArgs, PredictArgs, PrepareArgs, Preset, Stage, SynthArgs,
    TrainArgs,
};

pub const MODEL_CHECKPOINT: &str = "model.ckpt";

fn io_err(stage: Stage, path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::new(stage, Error::io(path, e))
}

/// Config file (if any) with the global flags applied.
pub fn base_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(CliError::config)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = &cli.prepared {
        cfg.paths.prepared = p.clone();
    }
    Ok(cfg)
}

pub fn dispatch(cli: Cli, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = base_config(&cli)?;
    let w = |e: std::io::Error| CliError::new(Stage::Write, Error::io("<stdout>", e));
    match cli.command {
        Command::Synth(a) => synth(&cfg, &a, out),
        Command::Prepare(a) => {
            apply_prepare(&mut cfg, &a);
            let m = prepared::prepare(&cfg)?;
            writeln!(
                out,
                "prepared {}: {} utterances ({} / {} / {}), {} articles, vocabulary {}, {} targets",
                cfg.paths.prepared.display(),
                m.counts.utterances,
                m.counts.train,
                m.counts.val,
                m.counts.test,
                m.counts.articles,
                m.counts.vocab,
                m.counts.targeted
            )
            .map_err(w)
        }
        Command::Train(a) => {
            apply_train(&mut cfg, &a);
            let (dir, report) = train_cmd(&cfg, &a)?;
            out.write_all(report.render_text().as_bytes()).map_err(w)?;
            writeln!(out, "saved {}", dir.join(MODEL_CHECKPOINT).display()).map_err(w)
        }
        Command::Evaluate(a) => {
            let (_, report) = evaluate_cmd(&mut cfg, &a)?;
            out.write_all(render_report(&report, ReportFormat::Text).as_bytes()).map_err(w)
        }
        Command::Predict(a) => predict_cmd(&cfg, &a, input, out),
        Command::Config => {
            cfg.validate().map_err(CliError::config)?;
            out.write_all(cfg.to_toml().as_bytes()).map_err(w)
        }
    }
}

fn synth_config(a: &SynthArgs) -> SynthConfig {
    let mut c = match a.preset {
        Preset::Small => SynthConfig {
            domains: SynthConfig::uniform_domains(3),
            articles: 5,
            sessions: 2,
            utterances_per_session: 20,
            ..SynthConfig::default()
        },
        Preset::Toursg => SynthConfig::default(),
        Preset::Followup => SynthConfig {
            domains: SynthConfig::uniform_domains(4),
            articles: 12,
            sessions: 8,
            utterances_per_session: 60,
            followup_rate: 0.4,
            ..SynthConfig::default()
        },
    };
    if let Some(v) = a.sessions {
        c.sessions = v;
    }
    if let Some(v) = a.utterances_per_session {
        c.utterances_per_session = v;
    }
    if let Some(v) = a.articles {
        c.articles = v;
    }
    if let Some(v) = a.followup_rate {
        c.followup_rate = v;
    }
    c
}

/// Writes `dialogues.jsonl`, `articles.jsonl` and `topics.txt` (the
/// generating article of each utterance, in corpus order).
fn synth(cfg: &RunConfig, a: &SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let data = generate_synthetic(&synth_config(a), seed::derive(cfg.seed, "synth"))
        .map_err(|e| CliError::new(Stage::Synth, e))?;
    let write = |name: &str, text: String| {
        write_atomic(&a.out.join(name), text.as_bytes()).map_err(|e| CliError::new(Stage::Write, e))
    };
    write("dialogues.jsonl", write_dialogues(&data.dialogues))?;
    write("articles.jsonl", write_articles(&data.articles))?;
    write("topics.txt", data.topics.iter().map(|t| format!("{t}\n")).collect())?;
    writeln!(
        out,
        "wrote {} utterances in {} sessions and {} articles to {}",
        data.dialogues.len(),
        data.dialogues.sessions.len(),
        data.articles.len(),
        a.out.display()
    )
    .map_err(|e| CliError::new(Stage::Write, Error::io("<stdout>", e)))
}

fn apply_prepare(cfg: &mut RunConfig, a: &PrepareArgs) {
    if a.dialogues.is_some() {
        cfg.paths.dialogues = a.dialogues.clone();
    }
    if a.articles.is_some() {
        cfg.paths.articles = a.articles.clone();
    }
    if let Some(v) = a.k {
        cfg.data.k = v;
    }
    if let Some(v) = a.min_words {
        cfg.data.min_words = v;
    }
    if let Some(v) = a.dim {
        cfg.doc2vec.dim = v;
    }
    if let Some(v) = a.doc2vec_epochs {
        cfg.doc2vec.epochs = v;
    }
    if let Some(v) = a.window {
        cfg.model.window = v;
    }
    if a.pad {
        cfg.data.pad = true;
    }
}

fn apply_train(cfg: &mut RunConfig, a: &TrainArgs) {
    let t = &mut cfg.training;
    if let Some(r) = a.regime {
        t.regime = r.into();
    }
    if let Some(v) = a.epochs {
        t.epochs = v;
    }
    if let Some(v) = a.lr {
        t.lr = v;
    }
    if let Some(v) = a.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = a.lambda_x {
        t.lambda_x = v;
    }
    if let Some(v) = a.lambda_y {
        t.lambda_y = v;
    }
    let m = &mut cfg.model;
    if let Some(v) = a.drop_prob {
        m.drop_prob = v;
    }
    if let Some(v) = a.word_dim {
        m.word_dim = v;
    }
    if let Some(v) = a.filters {
        m.filters = v;
    }
    if let Some(v) = a.filter_height {
        m.filter_height = v;
    }
    if let Some(v) = a.hidden {
        m.hidden = v;
    }
    if let Some(v) = a.window {
        m.window = v;
    }
    if let Some(p) = a.loss_placement {
        m.loss_placement = placement(p);
    }
    if a.embeddings.is_some() {
        cfg.paths.embeddings = a.embeddings.clone();
    }
}

fn slug(kind: ModelKind, regime: Regime) -> String {
    let k = match kind {
        ModelKind::Lrcn => "lrcn",
        ModelKind::CnnOnly => "cnn",
        ModelKind::LstmOnly => "lstm",
        ModelKind::Random => return "random".into(),
    };
    let r = match regime {
        Regime::D => "d",
        Regime::T => "t",
        Regime::DT => "dt",
    };
    format!("{k}-{r}")
}

fn load_prepared(cfg: &RunConfig) -> Result<Prepared, CliError> {
    prepared::load(&cfg.paths.prepared)
}

/// Trains per the config and writes `last.ckpt`, `best.ckpt`, the final
/// `model.ckpt` and the training report into the run directory.
pub fn train_cmd(cfg: &RunConfig, a: &TrainArgs) -> Result<(PathBuf, TrainReport), CliError> {
    cfg.validate().map_err(CliError::config)?;
    let kind: ModelKind = a.model.into();
    let p = load_prepared(cfg)?;
    let s = &p.manifest.settings;
    if s.pad && s.window != cfg.model.window {
        return Err(CliError::config(Error::Config(format!(
            "sessions were padded for window {}, but the model window is {}; rerun prepare",
            s.window, cfg.model.window
        ))));
    }
    let tcfg = cfg.training_config();
    let dir = a.out.clone().unwrap_or_else(|| cfg.paths.runs.join(slug(kind, tcfg.regime)));
    let stage = |e| CliError::new(Stage::Train, e);
    let mut tracker = Tracker::build(kind, &cfg.model, &p.dialogues.domain_set, &p.vocab, &p.space, cfg.init_seed())
        .map_err(CliError::config)?;
    if let Some(path) = &cfg.paths.embeddings {
        let (keys, vectors) = load_store(path).map_err(|e| CliError::new(Stage::Load, e))?;
        let n = tracker.load_pretrained(&keys, &vectors).map_err(stage)?;
        log::info!("initialised {n} word vectors from {}", path.display());
    }
    let opts = TrainOptions {
        checkpoint_dir: Some(dir.clone()),
        resume: a.resume,
        ..TrainOptions::default()
    };
    let report = train(&mut tracker, &p.splits.train, Some(&p.splits.val), &p.targets, &p.space, &tcfg, &opts)
        .map_err(|e| match e {
            Error::Config(_) => CliError::config(e),
            e => stage(e),
        })?;
    let write = |e| CliError::new(Stage::Write, e);
    tracker.to_checkpoint().save(&dir.join(MODEL_CHECKPOINT)).map_err(write)?;
    write_atomic(&dir.join("train_report.json"), report.to_json().as_bytes()).map_err(write)?;
    Ok((dir, report))
}

fn split_seq(p: &Prepared, split: SplitName) -> &UtteranceSeq {
    match split {
        SplitName::Train => &p.splits.train,
        SplitName::Val => &p.splits.val,
        SplitName::Test => &p.splits.test,
    }
}

fn split_label(split: SplitName) -> &'static str {
    match split {
        SplitName::Train => "train",
        SplitName::Val => "val",
        SplitName::Test => "test",
    }
}

/// Scores a checkpoint or the random baseline and writes `report.json`,
/// `report.txt` and optionally `predictions.txt`.
pub fn evaluate_cmd(cfg: &mut RunConfig, a: &EvaluateArgs) -> Result<(PathBuf, EvalReport), CliError> {
    if let Some(v) = a.split {
        cfg.eval.split = v;
    }
    if let Some(v) = a.averaging {
        cfg.eval.averaging = v.into();
    }
    cfg.eval.restrict_to_targets |= a.restrict_to_targets;
    cfg.validate().map_err(CliError::config)?;
    let p = load_prepared(cfg)?;
    let label = split_label(cfg.eval.split);
    let (tracker, default_dir) = match &a.checkpoint {
        Some(path) => {
            let ckpt = Checkpoint::load(path).map_err(|e| CliError::new(Stage::Load, e))?;
            let t = Tracker::from_checkpoint(&ckpt, Some(&p.space)).map_err(|e| CliError::new(Stage::Load, e))?;
            let parent = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (t, parent.join(format!("eval-{label}")))
        }
        None => {
            let domains = &p.dialogues.domain_set;
            let mut t = Tracker::build(ModelKind::Random, &cfg.model, domains, &p.vocab, &p.space, seed::derive(cfg.seed, "random"))
                .map_err(CliError::config)?;
            train(&mut t, &p.splits.train, None, &p.targets, &p.space, &cfg.training_config(), &TrainOptions::default())
                .map_err(|e| CliError::new(Stage::Train, e))?;
            (t, cfg.paths.runs.join("random").join(format!("eval-{label}")))
        }
    };
    let candidates = cfg.eval.restrict_to_targets.then(|| {
        let mut ids: Vec<String> = p
            .targets
            .targets
            .values()
            .flat_map(|t| t.articles.iter().cloned())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    });
    let opts = EvalOptions {
        averaging: cfg.eval.averaging,
        candidates,
    };
    let report = evaluate(&tracker, split_seq(&p, cfg.eval.split), &p.targets, &p.space, &opts)
        .map_err(|e| CliError::new(Stage::Evaluate, e))?;
    let dir = a.out.clone().unwrap_or(default_dir);
    let write = |name: &str, text: String| {
        write_atomic(&dir.join(name), text.as_bytes()).map_err(|e| CliError::new(Stage::Write, e))
    };
    write("report.json", report.to_json())?;
    write("report.txt", render_report(&report, ReportFormat::Text))?;
    if a.dump_predictions {
        write("predictions.txt", render_predictions(&report))?;
    }
    Ok((dir, report))
}

/// Reads utterances line by line and writes
/// `domain<TAB>article<TAB>title<TAB>distance` for each.
pub fn predict_cmd(cfg: &RunConfig, a: &PredictArgs, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<(), CliError> {
    let p = load_prepared(cfg)?;
    let ckpt = Checkpoint::load(&a.checkpoint).map_err(|e| CliError::new(Stage::Load, e))?;
    let tracker = Tracker::from_checkpoint(&ckpt, Some(&p.space)).map_err(|e| CliError::new(Stage::Load, e))?;
    let mut state = tracker.new_session();
    let w = |e: std::io::Error| CliError::new(Stage::Write, Error::io("<stdout>", e));
    for line in input.lines() {
        let line = line.map_err(io_err(Stage::Predict, Path::new("<stdin>")))?;
        if line.trim() == "RESET" {
            state.reset();
            continue;
        }
        let pred = tracker
            .predict_stream(&mut state, &line, &p.space)
            .map_err(|e| CliError::new(Stage::Predict, e))?;
        writeln!(out, "{}\t{}\t{}\t{:.6}", pred.domain, pred.article, pred.title, pred.distance).map_err(w)?;
    }
    out.flush().map_err(w)
}

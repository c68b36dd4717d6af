use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::{make_windows, Slot, UtteranceSeq};
use crate::doc2vec::TopicEmbeddingSpace;
use crate::error::{Error, Result};
use crate::numcore::{AdamConfig, AdamState, Checkpoint, Mode, ParamStore};
use crate::seed;
use crate::tfidf::TargetAssignment;

use super::{LossPlacement, ModelKind, Supervision, Tracker, TrainingConfig, WindowInput};

pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const BEST_CHECKPOINT: &str = "best.ckpt";

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Where `last.ckpt` and `best.ckpt` are written after every epoch.
    pub checkpoint_dir: Option<PathBuf>,
    /// Continue from `last.ckpt` in `checkpoint_dir` when present.
    pub resume: bool,
    /// Return after this many total epochs even if more are configured.
    pub stop_after: Option<usize>,
    /// Skip the per-epoch accuracy passes.
    pub skip_accuracy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub train_domain_accuracy: Option<f64>,
    pub train_topic_accuracy: Option<f64>,
    pub val_domain_accuracy: Option<f64>,
    pub val_topic_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub model: String,
    pub config: TrainingConfig,
    pub epochs: Vec<EpochRecord>,
    /// Epoch with the lowest validation loss (training loss without a
    /// validation split). Zero before any epoch.
    pub best_epoch: usize,
    pub best_loss: Option<f64>,
    pub steps: u64,
    /// Sum of absolute gradient entries that reached each head.
    pub domain_head_grad_abs: f64,
    pub topic_head_grad_abs: f64,
    pub completed: bool,
}

impl TrainReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One line per epoch.
    pub fn render_text(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        let mut out = format!("{}\n{:>5}  {:>10}  {:>10}  {:>8}  {:>8}  {:>8}  {:>8}\n", self.model, "epoch", "train", "val", "trainD", "trainT", "valD", "valT");
        for e in &self.epochs {
            out += &format!(
                "{:>5}  {:>10.5}  {:>10}  {:>8}  {:>8}  {:>8}  {:>8}\n",
                e.epoch,
                e.train_loss,
                fmt(e.val_loss),
                fmt(e.train_domain_accuracy),
                fmt(e.train_topic_accuracy),
                fmt(e.val_domain_accuracy),
                fmt(e.val_topic_accuracy)
            );
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct TrainState {
    config: TrainingConfig,
    report: TrainReport,
}

struct Example {
    slots: Vec<Option<usize>>,
    /// `(step, domain, targeted position)` triples.
    sup: Vec<(usize, usize, Option<usize>)>,
}

fn examples(tracker: &Tracker, seq: &UtteranceSeq, targets: &TargetAssignment, ly: f64) -> Result<Vec<Example>> {
    let domain_of = |local: usize| -> Result<usize> {
        let u = seq.slots[local].utterance().expect("real slot");
        tracker
            .domains()
            .iter()
            .position(|d| *d == u.domain)
            .ok_or_else(|| Error::Consistency(format!("utterance domain {} unknown to the model", u.domain)))
    };
    let targeted = |local: usize| {
        let pos = seq.start + local;
        (ly > 0.0 && targets.get(pos).is_some()).then_some(pos)
    };
    let mut out = Vec::new();
    for w in make_windows(seq, tracker.config().window) {
        let steps: Vec<(usize, usize)> = match tracker.config().loss_placement {
            LossPlacement::FinalStep => vec![(w.slots.len() - 1, w.target)],
            LossPlacement::AllSteps => w
                .slots
                .iter()
                .enumerate()
                .filter_map(|(j, s)| s.filter(|&i| !matches!(seq.slots[i], Slot::Null)).map(|i| (j, i)))
                .collect(),
        };
        let sup = steps
            .into_iter()
            .map(|(j, local)| Ok((j, domain_of(local)?, targeted(local))))
            .collect::<Result<Vec<_>>>()?;
        out.push(Example { slots: w.slots, sup });
    }
    Ok(out)
}

fn supervision<'a>(ex: &Example, targets: &'a TargetAssignment) -> Vec<Supervision<'a>> {
    ex.sup
        .iter()
        .map(|&(step, domain, pos)| Supervision {
            step,
            domain,
            target: pos.and_then(|p| targets.get(p)).map(|t| t.embedding.as_slice()),
        })
        .collect()
}

fn mean_loss(
    tracker: &Tracker,
    inputs: &[Option<WindowInput>],
    exs: &[Example],
    targets: &TargetAssignment,
    lambdas: (f64, f64),
) -> Result<f64> {
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let mut total = 0.0;
    for ex in exs {
        let window = Tracker::window_inputs(inputs, &ex.slots);
        total += tracker.window_loss(
            tracker.params(),
            &window,
            &supervision(ex, targets),
            lambdas,
            Mode::Eval,
            &mut rng,
            None,
        )?;
    }
    Ok(total / exs.len().max(1) as f64)
}

/// Domain and topic accuracy of eval-mode predictions over `seq`.
pub(crate) fn accuracies(
    tracker: &Tracker,
    seq: &UtteranceSeq,
    targets: &TargetAssignment,
    space: &TopicEmbeddingSpace,
) -> Result<(f64, Option<f64>)> {
    let preds = tracker.predict_sequence(seq, space, None)?;
    let by_pos: std::collections::HashMap<usize, &str> =
        seq.real().map(|(p, u)| (p, u.domain.as_str())).collect();
    let mut dom = 0usize;
    let (mut top, mut n_top) = (0usize, 0usize);
    for p in &preds {
        if tracker.domains()[p.domain] == by_pos[&p.pos] {
            dom += 1;
        }
        if let Some(g) = targets.gold_article(p.pos) {
            n_top += 1;
            if g == p.article {
                top += 1;
            }
        }
    }
    let n = preds.len().max(1) as f64;
    Ok((dom as f64 / n, (n_top > 0).then(|| top as f64 / n_top as f64)))
}

fn checkpoint(tracker: &Tracker, adam: Option<&AdamState>, cfg: &TrainingConfig, report: &TrainReport) -> Checkpoint {
    let mut ckpt = tracker.to_checkpoint();
    ckpt.adam = adam.cloned();
    let state = TrainState {
        config: *cfg,
        report: report.clone(),
    };
    ckpt.meta["training"] = serde_json::to_value(state).expect("state serializes");
    ckpt
}

fn same_run(a: &TrainingConfig, b: &TrainingConfig) -> bool {
    TrainingConfig { epochs: 0, ..*a } == TrainingConfig { epochs: 0, ..*b }
}

/// Trains with Adam on stride-1 windows of `train_seq` in order, in
/// batches whose gradient is the mean over their windows.
///
/// Dropout noise is drawn from a stream derived from the seed and the epoch
/// number, so a run resumed from `last.ckpt` continues bit for bit.
pub fn train(
    tracker: &mut Tracker,
    train_seq: &UtteranceSeq,
    val_seq: Option<&UtteranceSeq>,
    targets: &TargetAssignment,
    space: &TopicEmbeddingSpace,
    cfg: &TrainingConfig,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    cfg.validate()?;
    tracker.regime = Some(cfg.regime);
    let lambdas = cfg.lambdas();
    let mut report = TrainReport {
        model: tracker.name(),
        config: *cfg,
        epochs: Vec::new(),
        best_epoch: 0,
        best_loss: None,
        steps: 0,
        domain_head_grad_abs: 0.0,
        topic_head_grad_abs: 0.0,
        completed: false,
    };
    let ckpt_path = |name: &str| opts.checkpoint_dir.as_ref().map(|d| d.join(name));

    if tracker.kind() == ModelKind::Random {
        let seen: Vec<String> = train_seq
            .real()
            .filter_map(|(p, _)| targets.gold_article(p).map(str::to_string))
            .collect();
        if !seen.is_empty() {
            tracker.set_random_articles(seen)?;
        }
        report.completed = true;
        for name in [LAST_CHECKPOINT, BEST_CHECKPOINT] {
            if let Some(p) = ckpt_path(name) {
                checkpoint(tracker, None, cfg, &report).save(&p)?;
            }
        }
        return Ok(report);
    }

    let train_inputs = tracker.encode_seq(train_seq);
    let train_ex = examples(tracker, train_seq, targets, lambdas.1)?;
    if train_ex.is_empty() {
        return Err(Error::EmptyCorpus("training split has no utterances".into()));
    }
    let val = match val_seq {
        Some(v) if v.real().next().is_some() => Some((v, tracker.encode_seq(v), examples(tracker, v, targets, lambdas.1)?)),
        _ => None,
    };
    let mut adam = AdamState::new(
        tracker.params(),
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut best_params: ParamStore = tracker.params().clone();

    if opts.resume {
        if let Some(last) = ckpt_path(LAST_CHECKPOINT).filter(|p| p.exists()) {
            let ckpt = Checkpoint::load(&last)?;
            if ckpt.config_hash != tracker.config_hash() {
                return Err(Error::Consistency("last.ckpt belongs to a different model".into()));
            }
            let state: TrainState = serde_json::from_value(ckpt.meta["training"].clone())
                .map_err(|e| Error::Format(format!("training state: {e}")))?;
            if !same_run(&state.config, cfg) {
                return Err(Error::Config("resume requires the same training config apart from epochs".into()));
            }
            tracker.params = ckpt.params;
            adam = ckpt
                .adam
                .ok_or_else(|| Error::Format("last.ckpt lacks optimizer state".into()))?;
            report = TrainReport {
                config: *cfg,
                ..state.report
            };
            best_params = match ckpt_path(BEST_CHECKPOINT).filter(|p| p.exists()) {
                Some(p) => Checkpoint::load(&p)?.params,
                None => tracker.params.clone(),
            };
            log::info!("resuming after epoch {}", report.epochs.len());
        }
    }

    let layout = tracker.layout.expect("learned model");
    let head_ids = [layout.domain.0, layout.domain.1, layout.topic.0, layout.topic.1];
    for epoch in report.epochs.len()..cfg.epochs {
        let mut rng = seed::rng(cfg.seed, &format!("dropout/{epoch}"));
        let mut loss_sum = 0.0;
        for (b, batch) in train_ex.chunks(cfg.batch_size).enumerate() {
            let mut grads = tracker.params.zero_grads();
            for ex in batch {
                let window = Tracker::window_inputs(&train_inputs, &ex.slots);
                let loss = tracker.window_loss(
                    &tracker.params,
                    &window,
                    &supervision(ex, targets),
                    lambdas,
                    Mode::Train,
                    &mut rng,
                    Some(&mut grads),
                )?;
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite loss in epoch {} batch {b}; lower the learning rate (now {:e})",
                        epoch + 1,
                        cfg.lr
                    )));
                }
                loss_sum += loss;
            }
            grads.scale(1.0 / batch.len() as f64);
            report.domain_head_grad_abs += grads.get(head_ids[0]).abs_sum() + grads.get(head_ids[1]).abs_sum();
            report.topic_head_grad_abs += grads.get(head_ids[2]).abs_sum() + grads.get(head_ids[3]).abs_sum();
            adam.step(&mut tracker.params, &grads);
            report.steps += 1;
        }
        if !tracker.params.is_finite() {
            return Err(Error::Numeric(format!(
                "parameters diverged in epoch {}; lower the learning rate (now {:e})",
                epoch + 1,
                cfg.lr
            )));
        }
        let train_loss = loss_sum / train_ex.len() as f64;
        let val_loss = match &val {
            Some((_, inputs, exs)) => Some(mean_loss(tracker, inputs, exs, targets, lambdas)?),
            None => None,
        };
        let (td, tt) = if opts.skip_accuracy {
            (None, None)
        } else {
            let (d, t) = accuracies(tracker, train_seq, targets, space)?;
            (Some(d), t)
        };
        let (vd, vt) = match (&val, opts.skip_accuracy) {
            (Some((v, _, _)), false) => {
                let (d, t) = accuracies(tracker, v, targets, space)?;
                (Some(d), t)
            }
            _ => (None, None),
        };
        report.epochs.push(EpochRecord {
            epoch: epoch + 1,
            train_loss,
            val_loss,
            train_domain_accuracy: td,
            train_topic_accuracy: tt,
            val_domain_accuracy: vd,
            val_topic_accuracy: vt,
        });
        log::info!("epoch {} train {train_loss:.5} val {val_loss:?}", epoch + 1);
        let monitored = val_loss.unwrap_or(train_loss);
        let improved = report.best_loss.is_none_or(|b| monitored < b);
        if improved {
            report.best_loss = Some(monitored);
            report.best_epoch = epoch + 1;
            best_params = tracker.params.clone();
        }
        report.completed = epoch + 1 == cfg.epochs;
        if improved {
            if let Some(p) = ckpt_path(BEST_CHECKPOINT) {
                checkpoint(tracker, None, cfg, &report).save(&p)?;
            }
        }
        if let Some(p) = ckpt_path(LAST_CHECKPOINT) {
            checkpoint(tracker, Some(&adam), cfg, &report).save(&p)?;
        }
        if opts.stop_after.is_some_and(|s| epoch + 1 >= s) && !report.completed {
            return Ok(report);
        }
    }
    report.completed = true;
    if cfg.restore_best {
        tracker.params = best_params;
    }
    Ok(report)
}

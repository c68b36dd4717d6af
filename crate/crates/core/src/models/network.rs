use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::{
    conv_maxpool_backward, conv_maxpool_forward, dropout, dropout_backward, embedding_backward, embedding_forward,
    joint_loss, linear_backward, linear_forward, lstm_step, lstm_step_backward, softmax, softmax_xent, softmax_xent_backward,
    squared_error, squared_error_backward, ConvCache, Grads, LstmCache, LstmGrads, LstmParams, Matrix, Mode,
    ParamStore,
};

use super::{Layout, Tracker};

/// One encoded utterance.
#[derive(Debug, Clone, PartialEq)]
pub enum WindowInput {
    /// Vocabulary ids, never empty.
    Tokens(Vec<u32>),
    /// A fixed feature vector (paragraph vector of the utterance).
    Features(Vec<f64>),
}

/// Gold labels for one window step.
#[derive(Debug, Clone, Copy)]
pub struct Supervision<'a> {
    pub step: usize,
    pub domain: usize,
    /// Topic target; `None` masks the regression term.
    pub target: Option<&'a [f64]>,
}

/// Head outputs at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub domain_probs: Vec<f64>,
    pub topic: Vec<f64>,
}

struct FeatureCache {
    ids: Vec<u32>,
    conv: Option<ConvCache>,
}

struct HeadCache {
    step: usize,
    input: Vec<f64>,
    mask: Vec<f64>,
    logits: Vec<f64>,
    topic: Vec<f64>,
}

struct Pass {
    features: Vec<Option<FeatureCache>>,
    lstm: Vec<LstmCache>,
    heads: Vec<HeadCache>,
}

fn row(m: &Matrix) -> &[f64] {
    m.as_slice()
}

impl Tracker {
    fn layout(&self) -> Result<Layout> {
        self.layout
            .ok_or_else(|| Error::Config("the random baseline has no network".into()))
    }

    fn featurize(&self, params: &ParamStore, l: &Layout, input: Option<&WindowInput>) -> Result<(Vec<f64>, FeatureCache)> {
        if let (Some(e), Some((cw, cb))) = (l.embedding, l.conv) {
            let ids = match input {
                None => Vec::new(),
                Some(WindowInput::Tokens(ids)) => ids.clone(),
                Some(WindowInput::Features(_)) => {
                    return Err(Error::Consistency("convolutional model fed feature vectors".into()))
                }
            };
            // Padding slots are a single all-zero row.
            let u = if ids.is_empty() {
                Matrix::zeros(1, self.config.word_dim)
            } else {
                embedding_forward(params.get(e), &ids)?
            };
            let (m, cache) = conv_maxpool_forward(&u, params.get(cw), row(params.get(cb)), self.config.filter_height)?;
            Ok((m, FeatureCache { ids, conv: Some(cache) }))
        } else {
            let x = match input {
                None => vec![0.0; self.topic_dim],
                Some(WindowInput::Features(v)) if v.len() == self.topic_dim => v.clone(),
                Some(WindowInput::Features(v)) => {
                    return Err(Error::Dimension(format!(
                        "feature vector of width {} for topic width {}",
                        v.len(),
                        self.topic_dim
                    )))
                }
                Some(WindowInput::Tokens(_)) => {
                    return Err(Error::Consistency("feature model fed token ids".into()))
                }
            };
            Ok((x, FeatureCache { ids: Vec::new(), conv: None }))
        }
    }

    fn run<R: Rng>(
        &self,
        params: &ParamStore,
        window: &[Option<&WindowInput>],
        head_steps: &[usize],
        mode: Mode,
        rng: &mut R,
    ) -> Result<Pass> {
        let l = self.layout()?;
        if window.is_empty() || head_steps.iter().any(|&s| s >= window.len()) {
            return Err(Error::Dimension("window is empty or a supervised step is outside it".into()));
        }
        let n = window.len();
        let mut features: Vec<Option<FeatureCache>> = (0..n).map(|_| None).collect();
        let mut lstm = Vec::new();
        let mut reprs: Vec<Option<Vec<f64>>> = vec![None; n];
        if let Some((wx, wh, b)) = l.lstm {
            let p = LstmParams {
                w_x: params.get(wx),
                w_h: params.get(wh),
                bias: row(params.get(b)),
            };
            let mut h = vec![0.0; self.config.hidden];
            let mut c = vec![0.0; self.config.hidden];
            for (j, input) in window.iter().enumerate() {
                let (x, fc) = self.featurize(params, &l, *input)?;
                let (h2, c2, cache) = lstm_step(&x, &h, &c, p)?;
                features[j] = Some(fc);
                lstm.push(cache);
                reprs[j] = Some(h2.clone());
                h = h2;
                c = c2;
            }
        } else {
            for &s in head_steps {
                if reprs[s].is_none() {
                    let (m, fc) = self.featurize(params, &l, window[s])?;
                    features[s] = Some(fc);
                    reprs[s] = Some(m);
                }
            }
        }
        let (dw, db) = l.domain;
        let (tw, tb) = l.topic;
        let mut heads = Vec::with_capacity(head_steps.len());
        for &s in head_steps {
            let r = reprs[s].as_ref().expect("representation computed");
            let (input, mask) = dropout(r, self.config.drop_prob, mode, rng);
            let logits = linear_forward(params.get(dw), row(params.get(db)), &input);
            let topic = linear_forward(params.get(tw), row(params.get(tb)), &input);
            heads.push(HeadCache {
                step: s,
                input,
                mask,
                logits,
                topic,
            });
        }
        Ok(Pass { features, lstm, heads })
    }

    fn feature_backward(&self, params: &ParamStore, l: &Layout, fc: &FeatureCache, dx: &[f64], grads: &mut Grads) {
        let (Some(e), Some((cw, cb)), Some(cache)) = (l.embedding, l.conv, fc.conv.as_ref()) else {
            return;
        };
        let du = {
            let [gw, gb] = grads.disjoint_mut([cw, cb]);
            conv_maxpool_backward(params.get(cw), cache, dx, gw, gb.as_mut_slice())
        };
        if !fc.ids.is_empty() {
            embedding_backward(grads.get_mut(e), &fc.ids, &du);
        }
    }

    /// Joint objective for one window, averaged over supervised steps.
    /// With `grads`, accumulates the gradient of the returned loss.
    #[allow(clippy::too_many_arguments)]
    pub fn window_loss<R: Rng>(
        &self,
        params: &ParamStore,
        window: &[Option<&WindowInput>],
        sup: &[Supervision<'_>],
        lambdas: (f64, f64),
        mode: Mode,
        rng: &mut R,
        grads: Option<&mut Grads>,
    ) -> Result<f64> {
        let (lx, ly) = lambdas;
        let l = self.layout()?;
        let steps: Vec<usize> = sup.iter().map(|s| s.step).collect();
        let pass = self.run(params, window, &steps, mode, rng)?;
        let scale = 1.0 / sup.len().max(1) as f64;
        let mut loss = 0.0;
        let mut d_heads = Vec::with_capacity(sup.len());
        for (s, head) in sup.iter().zip(&pass.heads) {
            let (probs, xent) = softmax_xent(&head.logits, s.domain);
            let se = match s.target {
                Some(t) if t.len() == head.topic.len() => squared_error(&head.topic, t),
                Some(_) => return Err(Error::Dimension("topic target width mismatch".into())),
                None => 0.0,
            };
            loss += scale * joint_loss(xent, se, lx, ly, s.target.is_some());
            let dl = (lx > 0.0).then(|| {
                let mut g = softmax_xent_backward(&probs, s.domain);
                g.iter_mut().for_each(|v| *v *= lx * scale);
                g
            });
            let dy = match s.target {
                Some(t) if ly > 0.0 => {
                    let mut g = squared_error_backward(&head.topic, t);
                    g.iter_mut().for_each(|v| *v *= ly * scale);
                    Some(g)
                }
                _ => None,
            };
            d_heads.push((dl, dy));
        }
        let Some(grads) = grads else {
            return Ok(loss);
        };

        let n = window.len();
        let width = if l.lstm.is_some() { self.config.hidden } else { self.config.filters };
        let mut d_repr = vec![vec![0.0; width]; n];
        let (dw, db) = l.domain;
        let (tw, tb) = l.topic;
        for (head, (dl, dy)) in pass.heads.iter().zip(&d_heads) {
            let mut dr = vec![0.0; width];
            if let Some(g) = dl {
                let [gw, gb] = grads.disjoint_mut([dw, db]);
                let d = linear_backward(params.get(dw), &head.input, g, gw, gb.as_mut_slice());
                dr.iter_mut().zip(d).for_each(|(a, b)| *a += b);
            }
            if let Some(g) = dy {
                let [gw, gb] = grads.disjoint_mut([tw, tb]);
                let d = linear_backward(params.get(tw), &head.input, g, gw, gb.as_mut_slice());
                dr.iter_mut().zip(d).for_each(|(a, b)| *a += b);
            }
            let dr = dropout_backward(&dr, &head.mask);
            d_repr[head.step].iter_mut().zip(dr).for_each(|(a, b)| *a += b);
        }

        if let Some((wx, wh, b)) = l.lstm {
            let p = LstmParams {
                w_x: params.get(wx),
                w_h: params.get(wh),
                bias: row(params.get(b)),
            };
            let mut dh_next = vec![0.0; self.config.hidden];
            let mut dc_next = vec![0.0; self.config.hidden];
            for j in (0..n).rev() {
                let dh: Vec<f64> = d_repr[j].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
                let (dx, dh_prev, dc_prev) = {
                    let [gx, gh, gb] = grads.disjoint_mut([wx, wh, b]);
                    let g = LstmGrads {
                        w_x: gx,
                        w_h: gh,
                        bias: gb.as_mut_slice(),
                    };
                    lstm_step_backward(p, &pass.lstm[j], &dh, &dc_next, g)
                };
                if let Some(fc) = &pass.features[j] {
                    self.feature_backward(params, &l, fc, &dx, grads);
                }
                dh_next = dh_prev;
                dc_next = dc_prev;
            }
        } else {
            for head in &pass.heads {
                if let Some(fc) = &pass.features[head.step] {
                    self.feature_backward(params, &l, fc, &d_repr[head.step], grads);
                }
            }
        }
        Ok(loss)
    }

    /// Eval-mode outputs at the last step of `window`.
    pub fn forward_window(&self, window: &[Option<&WindowInput>]) -> Result<StepOutput> {
        let last = window.len().checked_sub(1).ok_or_else(|| Error::Dimension("empty window".into()))?;
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let pass = self.run(&self.params, window, &[last], Mode::Eval, &mut rng)?;
        let head = pass.heads.into_iter().next().expect("one head step");
        Ok(StepOutput {
            domain_probs: softmax(&head.logits),
            topic: head.topic,
        })
    }
}

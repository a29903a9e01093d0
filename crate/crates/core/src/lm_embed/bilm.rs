use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{LmError, BOS, EOS};
use crate::numnet::loss::softmax_in_place;
use crate::numnet::{uniform_fan_in, AdamConfig, AdamState, LstmCell, LstmTrace, Params, Tensor};
use crate::par::{self, Parallelism};
use crate::rng;

/// Sequences per gradient work unit. Fixed so the reduction order, and therefore
/// the trained weights, do not depend on the thread count.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub embedding_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub min_freq: usize,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip: f64,
    /// Learning rate at the last epoch as a fraction of `lr`, reached linearly.
    pub lr_final_fraction: f64,
    pub seed: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            embedding_dim: 64,
            hidden: 64,
            layers: 2,
            epochs: 5,
            lr: 5e-3,
            batch: 32,
            min_freq: 2,
            clip: 5.0,
            lr_final_fraction: 0.1,
            seed: 0,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<(), LmError> {
        let bad = |m: &str| Err(LmError::InvalidConfig(m.to_string()));
        if self.embedding_dim != self.hidden {
            // Layer 0 of the contextual mix is the embedding copied into both
            // direction halves, so it must be as wide as a hidden state.
            return bad("embedding_dim must equal hidden");
        }
        if self.hidden == 0 || self.layers == 0 || self.batch == 0 {
            return bad("hidden, layers and batch must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(0.0..=1.0).contains(&self.lr_final_fraction) {
            return bad("lr_final_fraction must be in [0, 1]");
        }
        Ok(())
    }
}

/// Bidirectional LSTM language model. `emb`, `proj` and `proj_b` are shared by
/// both directions; `fwd` and `bwd` are separate stacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLm {
    pub emb: Tensor,
    pub fwd: Vec<LstmCell>,
    pub bwd: Vec<LstmCell>,
    pub proj: Tensor,
    pub proj_b: Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllParts {
    pub forward: f64,
    pub backward: f64,
    pub joint: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Per-epoch joint NLL divided by the number of predictions (2 per token).
    pub epoch_nll: Vec<f64>,
}

impl BiLm {
    pub fn init(vocab_size: usize, cfg: &LmConfig) -> Result<Self, LmError> {
        cfg.validate()?;
        let mut r = rng::seeded(rng::derive_str(cfg.seed, "lm-init"));
        let (d, h) = (cfg.embedding_dim, cfg.hidden);
        let stack = |r: &mut rng::Rng| {
            (0..cfg.layers)
                .map(|l| LstmCell::init(if l == 0 { d } else { h }, h, r))
                .collect::<Vec<_>>()
        };
        let emb = uniform_fan_in(&[vocab_size, d], d, &mut r);
        let fwd = stack(&mut r);
        let bwd = stack(&mut r);
        Ok(BiLm {
            emb,
            fwd,
            bwd,
            proj: uniform_fan_in(&[vocab_size, h], h, &mut r),
            proj_b: Tensor::zeros(&[vocab_size]),
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.emb.rows()
    }

    pub fn embedding_dim(&self) -> usize {
        self.emb.cols()
    }

    pub fn hidden(&self) -> usize {
        self.proj.cols()
    }

    pub fn layers(&self) -> usize {
        self.fwd.len()
    }

    fn run_stack(cells: &[LstmCell], first: Vec<Vec<f64>>) -> Result<Vec<LstmTrace>, LmError> {
        let mut traces: Vec<LstmTrace> = Vec::with_capacity(cells.len());
        for cell in cells {
            let input = match traces.last() {
                Some(t) => &t.hs,
                None => &first,
            };
            let tr = cell.forward_seq(input)?;
            traces.push(tr);
        }
        Ok(traces)
    }

    fn embed_ids(&self, ids: &[usize]) -> Vec<Vec<f64>> {
        ids.iter().map(|&i| self.emb.row(i).to_vec()).collect()
    }

    /// NLL of one direction, accumulating gradients when `grad` is given.
    fn direction(&self, backward: bool, inputs: &[usize], targets: &[usize], grad: Option<&mut BiLm>) -> Result<f64, LmError> {
        let cells = if backward { &self.bwd } else { &self.fwd };
        let traces = Self::run_stack(cells, self.embed_ids(inputs))?;
        let top = &traces.last().expect("at least one layer").hs;
        let v = self.vocab_size();
        let mut nll = 0.0;
        let mut dtop = Vec::with_capacity(if grad.is_some() { top.len() } else { 0 });
        let mut probs = vec![0.0; v];
        let mut grad = grad;
        for (h, &y) in top.iter().zip(targets) {
            probs.copy_from_slice(self.proj_b.data());
            self.proj.matvec_acc(h, &mut probs);
            softmax_in_place(&mut probs);
            nll -= probs[y].max(1e-300).ln();
            if let Some(g) = grad.as_deref_mut() {
                probs[y] -= 1.0;
                g.proj.outer_acc(&probs, h);
                for (gb, p) in g.proj_b.data_mut().iter_mut().zip(&probs) {
                    *gb += p;
                }
                let mut dh = vec![0.0; h.len()];
                self.proj.matvec_t_acc(&probs, &mut dh);
                dtop.push(dh);
            }
        }
        if let Some(g) = grad {
            let gcells = if backward { &mut g.bwd } else { &mut g.fwd };
            let mut upstream = dtop;
            for l in (0..cells.len()).rev() {
                upstream = cells[l].backward_seq(&traces[l], &upstream, &mut gcells[l]);
            }
            for (&id, dx) in inputs.iter().zip(&upstream) {
                for (ge, d) in g.emb.row_mut(id).iter_mut().zip(dx) {
                    *ge += d;
                }
            }
        }
        if !nll.is_finite() {
            return Err(crate::numnet::NumError::NonFiniteValue { op: "lm_nll" }.into());
        }
        Ok(nll)
    }

    fn framed(ids: &[usize]) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let n = ids.len();
        let f_in: Vec<usize> = std::iter::once(BOS).chain(ids[..n - 1].iter().copied()).collect();
        let b_in: Vec<usize> = std::iter::once(EOS).chain(ids[1..].iter().rev().copied()).collect();
        let b_tgt: Vec<usize> = ids.iter().rev().copied().collect();
        (f_in, b_in, b_tgt)
    }

    /// Joint NLL of `ids` with gradients added into `grad`.
    pub fn nll_and_grad(&self, ids: &[usize], grad: &mut BiLm) -> Result<f64, LmError> {
        if ids.is_empty() {
            return Err(LmError::EmptySequence);
        }
        let (f_in, b_in, b_tgt) = Self::framed(ids);
        let f = self.direction(false, &f_in, ids, Some(grad))?;
        let b = self.direction(true, &b_in, &b_tgt, Some(grad))?;
        Ok(f + b)
    }

    /// Hidden states per layer for contextualization: `out[l][i]` is
    /// `[h→(i, l) ; h←(i, l)]` for `l ≥ 1` and `[e_i ; e_i]` for `l = 0`.
    pub fn layer_states(&self, ids: &[usize]) -> Result<Vec<Vec<Vec<f64>>>, LmError> {
        if ids.is_empty() {
            return Err(LmError::EmptySequence);
        }
        let n = ids.len();
        let f_in: Vec<usize> = std::iter::once(BOS).chain(ids.iter().copied()).collect();
        let b_in: Vec<usize> = std::iter::once(EOS).chain(ids.iter().rev().copied()).collect();
        let ft = Self::run_stack(&self.fwd, self.embed_ids(&f_in))?;
        let bt = Self::run_stack(&self.bwd, self.embed_ids(&b_in))?;
        let mut out = Vec::with_capacity(self.layers() + 1);
        out.push(
            ids.iter()
                .map(|&id| {
                    let e = self.emb.row(id);
                    [e, e].concat()
                })
                .collect(),
        );
        for l in 0..self.layers() {
            out.push(
                (0..n)
                    .map(|i| [ft[l].hs[i + 1].as_slice(), bt[l].hs[n - i].as_slice()].concat())
                    .collect(),
            );
        }
        Ok(out)
    }
}

impl Params for BiLm {
    fn params(&self) -> Vec<&Tensor> {
        let mut v = vec![&self.emb];
        for c in self.fwd.iter().chain(&self.bwd) {
            v.extend(c.params());
        }
        v.push(&self.proj);
        v.push(&self.proj_b);
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = vec![&mut self.emb];
        for c in self.fwd.iter_mut().chain(self.bwd.iter_mut()) {
            v.extend(c.params_mut());
        }
        v.push(&mut self.proj);
        v.push(&mut self.proj_b);
        v
    }
}

/// Forward (left-to-right), backward (right-to-left) and joint NLL of one sequence.
pub fn lm_nll(lm: &BiLm, ids: &[usize]) -> Result<NllParts, LmError> {
    if ids.is_empty() {
        return Err(LmError::EmptySequence);
    }
    let (f_in, b_in, b_tgt) = BiLm::framed(ids);
    let forward = lm.direction(false, &f_in, ids, None)?;
    let backward = lm.direction(true, &b_in, &b_tgt, None)?;
    Ok(NllParts {
        forward,
        backward,
        joint: forward + backward,
    })
}

/// `exp(joint NLL / number of predictions)` over non-empty sequences.
pub fn perplexity(lm: &BiLm, sequences: &[Vec<usize>], mode: Parallelism) -> Result<f64, LmError> {
    let seqs: Vec<&Vec<usize>> = sequences.iter().filter(|s| !s.is_empty()).collect();
    if seqs.is_empty() {
        return Err(LmError::EmptySequence);
    }
    let nll = par::try_map(mode, &seqs, |s| lm_nll(lm, s).map(|p| p.joint))?;
    let preds: usize = seqs.iter().map(|s| 2 * s.len()).sum();
    Ok((nll.iter().sum::<f64>() / preds as f64).exp())
}

/// Mini-batch Adam on the joint NLL, normalized per prediction within each batch.
pub fn lm_train(
    vocab_size: usize,
    sequences: &[Vec<usize>],
    cfg: &LmConfig,
    mode: Parallelism,
) -> Result<(BiLm, TrainLog), LmError> {
    let mut lm = BiLm::init(vocab_size, cfg)?;
    let seqs: Vec<&Vec<usize>> = sequences.iter().filter(|s| !s.is_empty()).collect();
    if seqs.is_empty() {
        return Err(LmError::EmptyCorpus);
    }
    let mut opt = AdamState::new(AdamConfig::with_lr(cfg.lr), &lm.params());
    let mut shuffle_rng = rng::seeded(rng::derive_str(cfg.seed, "lm-shuffle"));
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        let progress = if cfg.epochs > 1 { epoch as f64 / (cfg.epochs - 1) as f64 } else { 0.0 };
        opt.config.lr = cfg.lr * (1.0 - (1.0 - cfg.lr_final_fraction) * progress);
        order.shuffle(&mut shuffle_rng);
        let mut total_nll = 0.0;
        let mut total_preds = 0usize;
        for batch in order.chunks(cfg.batch) {
            let chunks: Vec<&[usize]> = batch.chunks(GRAD_CHUNK).collect();
            let parts = par::try_map(mode, &chunks, |chunk| {
                let mut g = lm.zeros_like();
                let mut nll = 0.0;
                for &i in *chunk {
                    nll += lm.nll_and_grad(seqs[i], &mut g)?;
                }
                Ok::<_, LmError>((g, nll))
            })?;
            let preds: usize = batch.iter().map(|&i| 2 * seqs[i].len()).sum();
            let mut parts = parts.into_iter();
            let (mut grad, mut nll) = parts.next().expect("non-empty batch");
            for (g, l) in parts {
                grad.add_scaled(1.0, &g)?;
                nll += l;
            }
            grad.scale_all(1.0 / preds as f64);
            if cfg.clip > 0.0 {
                let norm = grad.global_norm();
                if norm > cfg.clip {
                    grad.scale_all(cfg.clip / norm);
                }
            }
            opt.step(lm.params_mut(), grad.params())?;
            total_nll += nll;
            total_preds += preds;
        }
        let mean = total_nll / total_preds as f64;
        log::info!("lm epoch {}: nll/prediction {mean:.4}", epoch + 1);
        log.epoch_nll.push(mean);
    }
    if !lm.all_finite() {
        return Err(crate::numnet::NumError::NonFiniteValue { op: "lm_train" }.into());
    }
    Ok((lm, log))
}

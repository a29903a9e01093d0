use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::sigmoid;
use super::{check_finite, check_len, init, NumError, Params, Result, Tensor};

/// Single LSTM layer. Gate blocks in `w_x`, `w_h` and `b` are stacked in the
/// order input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    pub w_x: Tensor,
    pub w_h: Tensor,
    pub b: Tensor,
}

/// Everything the backward pass needs from a forward run over one sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LstmTrace {
    pub inputs: Vec<Vec<f64>>,
    /// `hs[t]` is the hidden state after consuming `inputs[t]`.
    pub hs: Vec<Vec<f64>>,
    pub cs: Vec<Vec<f64>>,
    /// Post-activation gates `[i, f, g, o]`, each of length `hidden`.
    gates: Vec<Vec<f64>>,
    tanh_c: Vec<Vec<f64>>,
}

impl LstmTrace {
    pub fn len(&self) -> usize {
        self.hs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.hs.is_empty()
    }
}

impl LstmCell {
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut b = Tensor::zeros(&[4 * hidden]);
        b.data_mut()[hidden..2 * hidden].fill(1.0);
        LstmCell {
            w_x: init::uniform_fan_in(&[4 * hidden, input], input, rng),
            w_h: init::uniform_fan_in(&[4 * hidden, hidden], hidden, rng),
            b,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_h.cols()
    }

    /// Checked single step from `(h, c)`.
    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len("lstm_step", self.input_dim(), x.len())?;
        check_len("lstm_step", self.hidden_dim(), h.len())?;
        check_len("lstm_step", self.hidden_dim(), c.len())?;
        check_finite("lstm_step", x)?;
        check_finite("lstm_step", h)?;
        check_finite("lstm_step", c)?;
        let (h2, c2, _, _) = self.step_raw(x, h, c);
        check_finite("lstm_step", &h2)?;
        Ok((h2, c2))
    }

    fn step_raw(&self, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.hidden_dim();
        let mut z = self.b.data().to_vec();
        self.w_x.matvec_acc(x, &mut z);
        self.w_h.matvec_acc(h, &mut z);
        for (k, v) in z.iter_mut().enumerate() {
            *v = if (2 * n..3 * n).contains(&k) { v.tanh() } else { sigmoid(*v) };
        }
        let mut c2 = vec![0.0; n];
        let mut h2 = vec![0.0; n];
        let mut tc = vec![0.0; n];
        for j in 0..n {
            c2[j] = z[n + j] * c[j] + z[j] * z[2 * n + j];
            tc[j] = c2[j].tanh();
            h2[j] = z[3 * n + j] * tc[j];
        }
        (h2, c2, z, tc)
    }

    /// Runs the layer over `xs` from a zero initial state.
    pub fn forward_seq(&self, xs: &[Vec<f64>]) -> Result<LstmTrace> {
        let n = self.hidden_dim();
        for x in xs {
            check_len("lstm_forward", self.input_dim(), x.len())?;
            check_finite("lstm_forward", x)?;
        }
        let mut tr = LstmTrace {
            inputs: xs.to_vec(),
            ..Default::default()
        };
        let zero = vec![0.0; n];
        for x in xs {
            let h = tr.hs.last().unwrap_or(&zero);
            let c = tr.cs.last().unwrap_or(&zero);
            let (h2, c2, g, tc) = self.step_raw(x, h, c);
            tr.hs.push(h2);
            tr.cs.push(c2);
            tr.gates.push(g);
            tr.tanh_c.push(tc);
        }
        if tr.hs.iter().any(|h| h.iter().any(|v| !v.is_finite())) {
            return Err(NumError::NonFiniteValue { op: "lstm_forward" });
        }
        Ok(tr)
    }

    /// Backpropagation through time. `dhs[t]` is the loss gradient w.r.t.
    /// `trace.hs[t]` from layers above; parameter gradients accumulate into `grad`
    /// and the gradients w.r.t. each input are returned.
    pub fn backward_seq(&self, tr: &LstmTrace, dhs: &[Vec<f64>], grad: &mut LstmCell) -> Vec<Vec<f64>> {
        let n = self.hidden_dim();
        let steps = tr.len();
        debug_assert_eq!(dhs.len(), steps);
        let zero = vec![0.0; n];
        let mut dxs = vec![vec![0.0; self.input_dim()]; steps];
        let mut dh_next = vec![0.0; n];
        let mut dc_next = vec![0.0; n];
        let mut dz = vec![0.0; 4 * n];
        for t in (0..steps).rev() {
            let g = &tr.gates[t];
            let tc = &tr.tanh_c[t];
            let c_prev = if t > 0 { &tr.cs[t - 1] } else { &zero };
            let h_prev = if t > 0 { &tr.hs[t - 1] } else { &zero };
            for j in 0..n {
                let (i, f, cand, o) = (g[j], g[n + j], g[2 * n + j], g[3 * n + j]);
                let dh = dhs[t][j] + dh_next[j];
                let dc = dc_next[j] + dh * o * (1.0 - tc[j] * tc[j]);
                dz[j] = dc * cand * i * (1.0 - i);
                dz[n + j] = dc * c_prev[j] * f * (1.0 - f);
                dz[2 * n + j] = dc * i * (1.0 - cand * cand);
                dz[3 * n + j] = dh * tc[j] * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            grad.w_x.outer_acc(&dz, &tr.inputs[t]);
            grad.w_h.outer_acc(&dz, h_prev);
            for (gb, d) in grad.b.data_mut().iter_mut().zip(&dz) {
                *gb += d;
            }
            self.w_x.matvec_t_acc(&dz, &mut dxs[t]);
            dh_next.fill(0.0);
            self.w_h.matvec_t_acc(&dz, &mut dh_next);
        }
        dxs
    }
}

impl Params for LstmCell {
    fn params(&self) -> Vec<&Tensor> {
        vec![&self.w_x, &self.w_h, &self.b]
    }
    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_x, &mut self.w_h, &mut self.b]
    }
}

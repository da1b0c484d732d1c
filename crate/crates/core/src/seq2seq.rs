//! LSTM encoder over ST-Block features, autoregressive LSTM decoder with
//! an MLP position head, and the inner-product graph reconstruction
//! decoder.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::params::{xavier, Bound, ParamId, ParamStore};
use crate::tensor::{tape, Tape, Tensor, Var};

/// Forget-gate bias at initialization.
pub const FORGET_BIAS_INIT: f64 = 1.0;

/// Weights of one LSTM layer. Gate blocks are stacked in the order
/// input, forget, cell, output.
#[derive(Clone, Debug)]
pub struct LstmWeights {
    /// `[4H × D_in]`
    pub w_ih: ParamId,
    /// `[4H × H]`
    pub w_hh: ParamId,
    /// `[4H]`
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmWeights {
    pub fn new(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut bias = Tensor::zeros(&[4 * hidden]);
        bias.data_mut()[hidden..2 * hidden].fill(FORGET_BIAS_INIT);
        LstmWeights {
            w_ih: store.add(format!("{prefix}.w_ih"), xavier(rng, &[4 * hidden, input], input, 4 * hidden)),
            w_hh: store.add(format!("{prefix}.w_hh"), xavier(rng, &[4 * hidden, hidden], hidden, 4 * hidden)),
            bias: store.add(format!("{prefix}.bias"), bias),
            input,
            hidden,
        }
    }

    pub fn step(&self, tape: &Tape, p: &Bound, h: Var, c: Var, x: Var) -> Result<(Var, Var)> {
        lstm_cell(tape, h, c, x, p.var(self.w_ih), p.var(self.w_hh), p.var(self.bias))
    }
}

/// One LSTM step. State and input are vectors (`[H]`, `[D_in]`) or row
/// batches (`[R × H]`, `[R × D_in]`).
///
/// `i, f, o = sigmoid(·)`, `g = tanh(·)`, `c = f⊙c_prev + i⊙g`, `h = o⊙tanh(c)`.
pub fn lstm_cell(
    tape: &Tape,
    h_prev: Var,
    c_prev: Var,
    x: Var,
    w_ih: Var,
    w_hh: Var,
    bias: Var,
) -> Result<(Var, Var)> {
    let hs = tape.shape(h_prev);
    if hs.len() == 1 {
        let row = |v: Var| -> Result<Var> {
            let s = tape.shape(v);
            tape.reshape(v, &[1, s.iter().product()])
        };
        let (h, c) = lstm_cell(tape, row(h_prev)?, row(c_prev)?, row(x)?, w_ih, w_hh, bias)?;
        return Ok((tape.reshape(h, &hs)?, tape.reshape(c, &hs)?));
    }
    let hidden = *hs.last().unwrap_or(&0);
    let ws = tape.shape(w_hh);
    if ws != [4 * hidden, hidden] || tape.shape(c_prev) != hs {
        return Err(Error::dim("lstm_cell state", &hs, &ws));
    }
    let gates = tape.add(tape.matmul_nt(x, w_ih)?, tape.matmul_nt(h_prev, w_hh)?)?;
    let gates = tape.add_bias(gates, bias)?;
    let gate = |k: usize| tape.narrow(gates, 1, k * hidden, hidden);
    let i = tape.sigmoid(gate(0)?);
    let f = tape.sigmoid(gate(1)?);
    let g = tape.tanh(gate(2)?);
    let o = tape.sigmoid(gate(3)?);
    let c = tape.add(tape.mul(f, c_prev)?, tape.mul(i, g)?)?;
    let h = tape.mul(o, tape.tanh(c))?;
    Ok((h, c))
}

/// Affine output map `y = W_hy h + b_y` with `W_hy` shaped `[out × H]`.
/// `h` may be `[H]` or `[R × H]`.
pub fn output_proj(tape: &Tape, h: Var, w_hy: Var, b_y: Var) -> Result<Var> {
    let hs = tape.shape(h);
    if hs.len() == 1 {
        let row = tape.reshape(h, &[1, hs[0]])?;
        let y = output_proj(tape, row, w_hy, b_y)?;
        let out = tape.shape(y)[1];
        return tape.reshape(y, &[out]);
    }
    let y = tape.matmul_nt(h, w_hy)?;
    tape.add_bias(y, b_y)
}

/// Fully connected layer stored as `[out × in]` weight and `[out]` bias.
#[derive(Clone, Debug)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Dense {
    pub fn new(store: &mut ParamStore, prefix: &str, input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        Dense {
            weight: store.add(format!("{prefix}.weight"), xavier(rng, &[output, input], input, output)),
            bias: store.add(format!("{prefix}.bias"), Tensor::zeros(&[output])),
        }
    }

    pub fn forward(&self, tape: &Tape, p: &Bound, x: Var) -> Result<Var> {
        output_proj(tape, x, p.var(self.weight), p.var(self.bias))
    }
}

/// Shared LSTM run over each node's feature sequence.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub lstm: LstmWeights,
}

impl Encoder {
    /// `features` is `[R × T × F]`; returns the final `(h, c)`, each `[R × H]`.
    /// The initial state is zero.
    pub fn encode(&self, tape: &Tape, p: &Bound, features: Var) -> Result<(Var, Var)> {
        let fs = tape.shape(features);
        if fs.len() != 3 || fs[1] == 0 || fs[2] != self.lstm.input {
            return Err(Error::dim("encode", &fs, &[self.lstm.input]));
        }
        let zero = tape.constant(Tensor::zeros(&[fs[0], self.lstm.hidden]));
        let (mut h, mut c) = (zero, zero);
        for t in 0..fs[1] {
            let x = tape.select(features, 1, t)?;
            (h, c) = self.lstm.step(tape, p, h, c, x)?;
        }
        Ok((h, c))
    }
}

/// Source of the previous position fed to each decoder step after the first.
#[derive(Clone, Copy, Debug)]
pub enum DecodeMode {
    /// The decoder's own previous prediction.
    FreeRunning,
    /// Ground truth `[R × t_pred × 2]`.
    TeacherForcing(Var),
}

#[derive(Clone, Debug)]
pub struct Decoder {
    pub bridge_h: Dense,
    pub bridge_c: Dense,
    pub embed: Dense,
    pub lstm: LstmWeights,
    pub head_hidden: Dense,
    pub head_out: Dense,
}

impl Decoder {
    /// Position head `γ(h) = W₂ relu(W₁ h + b₁) + b₂`.
    pub fn head(&self, tape: &Tape, p: &Bound, h: Var) -> Result<Var> {
        let z = tape.relu(self.head_hidden.forward(tape, p, h)?);
        self.head_out.forward(tape, p, z)
    }

    /// Rolls out `t_pred` positions, `[R × t_pred × 2]`.
    ///
    /// The encoder state is projected to the decoder width. Each step's
    /// input is the embedded previous position concatenated with the
    /// ST-Block feature of the last observed step.
    #[allow(clippy::too_many_arguments)]
    pub fn decode(
        &self,
        tape: &Tape,
        p: &Bound,
        h_enc: Var,
        c_enc: Var,
        last_obs: Var,
        context: Var,
        t_pred: usize,
        mode: DecodeMode,
    ) -> Result<Var> {
        if t_pred == 0 {
            return Err(Error::Contract("decode needs t_pred >= 1".into()));
        }
        let rows = tape.shape(last_obs)[0];
        if let DecodeMode::TeacherForcing(gt) = mode {
            let gs = tape.shape(gt);
            if gs != [rows, t_pred, 2] {
                return Err(Error::dim("decode teacher forcing", &gs, &[rows, t_pred, 2]));
            }
        }
        let enc = tape.concat(&[h_enc, c_enc], 1)?;
        let mut h = self.bridge_h.forward(tape, p, enc)?;
        let mut c = self.bridge_c.forward(tape, p, enc)?;
        let mut prev = last_obs;
        let mut out = Vec::with_capacity(t_pred);
        for step in 0..t_pred {
            let emb = tape.relu(self.embed.forward(tape, p, prev)?);
            let x = tape.concat(&[emb, context], 1)?;
            (h, c) = self.lstm.step(tape, p, h, c, x)?;
            let pos = self.head(tape, p, h)?;
            out.push(pos);
            prev = match mode {
                DecodeMode::FreeRunning => pos,
                DecodeMode::TeacherForcing(gt) => tape.select(gt, 1, step)?,
            };
        }
        tape.stack(&out, 1)
    }
}

/// Probability that two nodes interact: `sigmoid(z_i · z_j)`.
pub fn link_prob(z_i: &[f64], z_j: &[f64]) -> Result<f64> {
    if z_i.len() != z_j.len() {
        return Err(Error::dim("link_prob", &[z_i.len()], &[z_j.len()]));
    }
    Ok(tape::sigmoid(z_i.iter().zip(z_j).map(|(a, b)| a * b).sum()))
}

/// Reconstruction loss of one graph: mean binary cross-entropy of
/// `Ã = A + I` under `p_ij = sigmoid(h_i · h_j)` over all `n²` ordered pairs.
pub fn reconstruction_loss(tape: &Tape, h: Var, adjacency: &Tensor) -> Result<Var> {
    let hs = tape.shape(h);
    let n = match (hs.as_slice(), adjacency.shape()) {
        ([n, _], [r, c]) if n == r && r == c && *n > 0 => *n,
        _ => return Err(Error::dim("reconstruction_loss", &hs, adjacency.shape())),
    };
    let mut target = adjacency.clone();
    for i in 0..n {
        target.data_mut()[i * n + i] = 1.0;
    }
    let h3 = tape.reshape(h, &[1, hs[0], hs[1]])?;
    let weights = Tensor::full(&[1, n, n], 1.0 / (n * n) as f64);
    reconstruction_loss_weighted(tape, h3, &target.reshape(&[1, n, n])?, &weights)
}

/// `Σ w_gij · BCE(sigmoid(h_gi · h_gj), target_gij)` over a stack of graphs,
/// `h` shaped `[G × n × d]`. Cross-entropy uses the logit form
/// `softplus(z) − y·z` so saturated logits stay finite.
pub fn reconstruction_loss_weighted(tape: &Tape, h: Var, target: &Tensor, weights: &Tensor) -> Result<Var> {
    let logits = tape.bmm_nt(h, h)?;
    let ls = tape.shape(logits);
    if target.shape() != ls || weights.shape() != ls {
        return Err(Error::dim("reconstruction target", &ls, target.shape()));
    }
    let y = tape.constant(target.clone());
    let w = tape.constant(weights.clone());
    let bce = tape.sub(tape.softplus(logits), tape.mul(y, logits)?)?;
    Ok(tape.sum(tape.mul(bce, w)?))
}

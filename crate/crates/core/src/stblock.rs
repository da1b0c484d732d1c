//! The spatio-temporal block: a gated causal temporal convolution, a
//! two-layer spectral graph convolution applied per timestep, a second
//! gated temporal convolution, and layer normalization over channels.
//!
//! Batched tensors flatten `(sample, node)` into one row axis of length
//! `R = B · n_max`, so `[R × T × C]` has the memory layout of
//! `[B × n_max × T × C]`.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::params::{xavier, Bound, ParamId, ParamStore};
use crate::tensor::{Activation, Tape, Tensor, Var};

/// PReLU slope at initialization.
pub const PRELU_INIT: f64 = 0.25;

/// One spectral graph convolution `act(a_norm · Z · W)` on a single graph:
/// `z` is `[n × C]`, `a_norm` is `[n × n]`, `w` is `[C × C']`.
pub fn gconv(tape: &Tape, z: Var, a_norm: Var, w: Var, act: Activation) -> Result<Var> {
    let mixed = tape.matmul(a_norm, z)?;
    let projected = tape.matmul(mixed, w)?;
    tape.activate(projected, act)
}

/// Two-layer graph embedding: ReLU first layer, linear second layer.
pub fn spatial_embed(tape: &Tape, x: Var, a_norm: Var, w0: Var, w1: Var) -> Result<Var> {
    let h = gconv(tape, x, a_norm, w0, Activation::Relu)?;
    gconv(tape, h, a_norm, w1, Activation::Linear)
}

/// [`gconv`] over a stack of graphs: `z` is `[G × n × C]`, `a_norm` is
/// `[G × n × n]`, `w` is `[C × C']`.
pub fn gconv_batched(tape: &Tape, z: Var, a_norm: Var, w: Var, act: Activation) -> Result<Var> {
    let zs = tape.shape(z);
    let ws = tape.shape(w);
    if zs.len() != 3 || ws.len() != 2 {
        return Err(Error::dim("gconv_batched", &zs, &ws));
    }
    let mixed = tape.bmm(a_norm, z)?;
    let flat = tape.reshape(mixed, &[zs[0] * zs[1], zs[2]])?;
    let projected = tape.matmul(flat, w)?;
    let out = tape.reshape(projected, &[zs[0], zs[1], ws[1]])?;
    tape.activate(out, act)
}

/// Gated causal unit `P(x) ⊙ sigmoid(Q(x))`, both convolutions causal
/// and length preserving. `x` is `[C_in × T]` or `[N × C_in × T]`.
pub fn temporal_conv(
    tape: &Tape,
    x: Var,
    p_kernel: Var,
    p_bias: Var,
    q_kernel: Var,
    q_bias: Var,
) -> Result<Var> {
    let p = tape.conv1d_causal(x, p_kernel, p_bias)?;
    let q = tape.conv1d_causal(x, q_kernel, q_bias)?;
    tape.mul(p, tape.sigmoid(q))
}

#[derive(Clone, Debug)]
pub struct GatedTemporalConv {
    pub p_kernel: ParamId,
    pub p_bias: ParamId,
    pub q_kernel: ParamId,
    pub q_bias: ParamId,
}

impl GatedTemporalConv {
    pub fn new(store: &mut ParamStore, prefix: &str, c_in: usize, c_out: usize, k: usize, rng: &mut ChaCha8Rng) -> Self {
        let shape = [c_out, c_in, k];
        GatedTemporalConv {
            p_kernel: store.add(format!("{prefix}.p_kernel"), xavier(rng, &shape, c_in * k, c_out * k)),
            p_bias: store.add(format!("{prefix}.p_bias"), Tensor::zeros(&[c_out])),
            q_kernel: store.add(format!("{prefix}.q_kernel"), xavier(rng, &shape, c_in * k, c_out * k)),
            q_bias: store.add(format!("{prefix}.q_bias"), Tensor::zeros(&[c_out])),
        }
    }

    pub fn forward(&self, tape: &Tape, p: &Bound, x: Var) -> Result<Var> {
        temporal_conv(
            tape,
            x,
            p.var(self.p_kernel),
            p.var(self.p_bias),
            p.var(self.q_kernel),
            p.var(self.q_bias),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StBlockConfig {
    pub c_in: usize,
    pub kernel_size: usize,
    pub tcn_hidden: usize,
    pub gcn_hidden: usize,
    pub gcn_out: usize,
    pub st_out: usize,
    /// Layer norm after every sub-layer instead of only at the block output.
    pub norm_each_sublayer: bool,
}

impl StBlockConfig {
    /// Channels of the block output: temporal stream then spatial stream.
    pub fn out_channels(&self) -> usize {
        self.st_out + self.gcn_out
    }
}

/// Graph context shared by every block of one batch.
#[derive(Clone, Debug)]
pub struct GraphContext {
    pub batch: usize,
    pub n_max: usize,
    pub steps: usize,
    /// `[steps · batch × n_max × n_max]`, timestep-major.
    pub a_norm: Var,
    /// `[batch · n_max]`, 1 for live nodes and 0 for padding.
    pub mask: Vec<f64>,
}

impl GraphContext {
    pub fn rows(&self) -> usize {
        self.batch * self.n_max
    }

    /// The node mask repeated once per timestep, for `[T·R × C]` layouts.
    fn mask_per_step(&self) -> Vec<f64> {
        self.mask.repeat(self.steps)
    }
}

/// Output of one ST-Block.
#[derive(Clone, Debug)]
pub struct StFeatures {
    /// `[R × T × (st_out + gcn_out)]`: temporal stream, then spatial stream.
    pub values: Var,
    /// Spatial embedding `H` per graph, `[T·B × n_max × gcn_out]`.
    pub spatial: Var,
    /// Temporal stream alone, `[R × T × st_out]`.
    pub temporal: Var,
}

#[derive(Clone, Debug)]
pub struct StBlock {
    pub config: StBlockConfig,
    pub tcn1: GatedTemporalConv,
    pub prelu1: ParamId,
    pub gcn_w0: ParamId,
    pub gcn_w1: ParamId,
    pub tcn2: GatedTemporalConv,
    pub prelu2: ParamId,
    pub norm_gain: ParamId,
    pub norm_bias: ParamId,
    /// Present only with `norm_each_sublayer`.
    pub sublayer_norms: Option<[(ParamId, ParamId); 2]>,
}

impl StBlock {
    pub fn new(store: &mut ParamStore, prefix: &str, config: StBlockConfig, rng: &mut ChaCha8Rng) -> Self {
        let c = &config;
        let tcn1 = GatedTemporalConv::new(store, &format!("{prefix}.tcn1"), c.c_in, c.tcn_hidden, c.kernel_size, rng);
        let prelu1 = store.add(format!("{prefix}.prelu1"), Tensor::new(&[1], vec![PRELU_INIT]).expect("shape"));
        let gcn_w0 = store.add(
            format!("{prefix}.gcn_w0"),
            xavier(rng, &[c.tcn_hidden, c.gcn_hidden], c.tcn_hidden, c.gcn_hidden),
        );
        let gcn_w1 = store.add(
            format!("{prefix}.gcn_w1"),
            xavier(rng, &[c.gcn_hidden, c.gcn_out], c.gcn_hidden, c.gcn_out),
        );
        let tcn2 = GatedTemporalConv::new(store, &format!("{prefix}.tcn2"), c.gcn_out, c.st_out, c.kernel_size, rng);
        let prelu2 = store.add(format!("{prefix}.prelu2"), Tensor::new(&[1], vec![PRELU_INIT]).expect("shape"));
        let norm_gain = store.add(format!("{prefix}.norm_gain"), Tensor::ones(&[c.st_out]));
        let norm_bias = store.add(format!("{prefix}.norm_bias"), Tensor::zeros(&[c.st_out]));
        let sublayer_norms = c.norm_each_sublayer.then(|| {
            [
                (
                    store.add(format!("{prefix}.norm1_gain"), Tensor::ones(&[c.tcn_hidden])),
                    store.add(format!("{prefix}.norm1_bias"), Tensor::zeros(&[c.tcn_hidden])),
                ),
                (
                    store.add(format!("{prefix}.norm2_gain"), Tensor::ones(&[c.gcn_out])),
                    store.add(format!("{prefix}.norm2_bias"), Tensor::zeros(&[c.gcn_out])),
                ),
            ]
        });
        StBlock {
            config,
            tcn1,
            prelu1,
            gcn_w0,
            gcn_w1,
            tcn2,
            prelu2,
            norm_gain,
            norm_bias,
            sublayer_norms,
        }
    }

    /// `x` is `[R × T × c_in]`. Padded rows are zeroed after every stage.
    pub fn forward(&self, tape: &Tape, p: &Bound, x: Var, g: &GraphContext) -> Result<StFeatures> {
        let c = &self.config;
        let (r, t) = (g.rows(), g.steps);
        let xs = tape.shape(x);
        if xs != [r, t, c.c_in] {
            return Err(Error::dim("st_block input", &xs, &[r, t, c.c_in]));
        }
        let an = tape.shape(g.a_norm);
        if an != [t * g.batch, g.n_max, g.n_max] {
            return Err(Error::Contract(format!(
                "st_block needs one normalized adjacency per timestep and sample ({}), got stack {:?}",
                t * g.batch,
                an
            )));
        }
        if g.mask.len() != r {
            return Err(Error::dim("st_block mask", &[r], &[g.mask.len()]));
        }
        let step_mask = g.mask_per_step();

        // temporal layer 1 on [R × C × T]
        let y = tape.permute(x, &[0, 2, 1])?;
        let y = self.tcn1.forward(tape, p, y)?;
        let y = tape.prelu(y, p.var(self.prelu1))?;
        let y = tape.row_scale(y, &g.mask)?;

        // spatial layers per timestep on [T·B × n × C]
        let y = tape.permute(y, &[2, 0, 1])?; // [T × R × C]
        let mut y = tape.reshape(y, &[t * g.batch, g.n_max, c.tcn_hidden])?;
        if let Some([(gain, bias), _]) = self.sublayer_norms {
            y = tape.layer_norm(y, p.var(gain), p.var(bias), 2)?;
            y = tape.row_scale(y, &step_mask)?;
        }
        let h = gconv_batched(tape, y, g.a_norm, p.var(self.gcn_w0), Activation::Relu)?;
        let h = tape.row_scale(h, &step_mask)?;
        let mut h = gconv_batched(tape, h, g.a_norm, p.var(self.gcn_w1), Activation::Linear)?;
        h = tape.row_scale(h, &step_mask)?;
        let spatial = h;
        if let Some([_, (gain, bias)]) = self.sublayer_norms {
            h = tape.layer_norm(h, p.var(gain), p.var(bias), 2)?;
            h = tape.row_scale(h, &step_mask)?;
        }

        // temporal layer 2 on [R × C × T]
        let y = tape.reshape(h, &[t, r, c.gcn_out])?;
        let y = tape.permute(y, &[1, 2, 0])?;
        let y = self.tcn2.forward(tape, p, y)?;
        let y = tape.prelu(y, p.var(self.prelu2))?;
        let y = tape.row_scale(y, &g.mask)?;

        let y = tape.permute(y, &[0, 2, 1])?; // [R × T × C]
        let y = tape.layer_norm(y, p.var(self.norm_gain), p.var(self.norm_bias), 2)?;
        let temporal = tape.row_scale(y, &g.mask)?;

        let s = tape.reshape(spatial, &[t, r, c.gcn_out])?;
        let s = tape.permute(s, &[1, 0, 2])?; // [R × T × C]
        let values = tape.concat(&[temporal, s], 2)?;
        Ok(StFeatures { values, spatial, temporal })
    }
}

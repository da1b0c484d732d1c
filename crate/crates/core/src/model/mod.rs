//! The full predictor: stacked ST-Blocks, the LSTM encoder and the
//! autoregressive decoder, plus parameter storage and checkpoints.

mod batch;
pub mod checkpoint;
pub mod gradcheck;
pub mod params;

pub use batch::PaddedBatch;
pub use params::{Bound, ParamId, ParamStore};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::SequenceBatch;
use crate::error::{Error, Result};
use crate::seq2seq::{DecodeMode, Decoder, Dense, Encoder, LstmWeights};
use crate::stblock::{GraphContext, StBlock, StBlockConfig};
use crate::tensor::{Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub t_obs: usize,
    pub t_pred: usize,
    pub kernel_size: usize,
    pub tcn_hidden: usize,
    pub gcn_hidden: usize,
    pub gcn_out: usize,
    pub st_out: usize,
    /// Number of stacked ST-Blocks.
    pub blocks: usize,
    pub norm_each_sublayer: bool,
    pub enc_hidden: usize,
    pub dec_hidden: usize,
    pub pos_embed: usize,
    pub head_hidden: usize,
    /// Edge cutoff in meters; `None` links every co-present pair.
    pub radius: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            t_obs: 8,
            t_pred: 12,
            kernel_size: 3,
            tcn_hidden: 32,
            gcn_hidden: 64,
            gcn_out: 32,
            st_out: 32,
            blocks: 1,
            norm_each_sublayer: false,
            enc_hidden: 32,
            dec_hidden: 64,
            pos_embed: 16,
            head_hidden: 32,
            radius: None,
        }
    }
}

impl ModelConfig {
    pub fn block_config(&self, index: usize) -> StBlockConfig {
        let mut c = StBlockConfig {
            c_in: 2,
            kernel_size: self.kernel_size,
            tcn_hidden: self.tcn_hidden,
            gcn_hidden: self.gcn_hidden,
            gcn_out: self.gcn_out,
            st_out: self.st_out,
            norm_each_sublayer: self.norm_each_sublayer,
        };
        if index > 0 {
            c.c_in = c.out_channels();
        }
        c
    }

    pub fn feature_channels(&self) -> usize {
        self.st_out + self.gcn_out
    }

    fn validate(&self) -> Result<()> {
        let dims = [
            self.t_obs,
            self.t_pred,
            self.kernel_size,
            self.tcn_hidden,
            self.gcn_hidden,
            self.gcn_out,
            self.st_out,
            self.blocks,
            self.enc_hidden,
            self.dec_hidden,
            self.pos_embed,
            self.head_hidden,
        ];
        if dims.contains(&0) {
            return Err(Error::Usage(format!("model dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Tape handles produced by one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardOutput {
    /// `[R × t_pred × 2]`, model coordinates.
    pub pred: Var,
    /// Last block's features `[R × t_obs × F]`.
    pub features: Var,
    /// Last block's spatial embedding `[t_obs · B × n_max × gcn_out]`.
    pub spatial: Var,
    /// Last block's temporal stream `[R × t_obs × st_out]`.
    pub temporal: Var,
}

#[derive(Clone, Debug)]
pub struct StLstm {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub blocks: Vec<StBlock>,
    pub encoder: Encoder,
    pub decoder: Decoder,
}

impl StLstm {
    /// Xavier-uniform weights, zero biases (forget gate 1.0), PReLU slope
    /// 0.25, unit layer-norm gains. Deterministic in `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let blocks = (0..config.blocks)
            .map(|b| StBlock::new(&mut store, &format!("st{b}"), config.block_config(b), &mut rng))
            .collect();
        let f = config.feature_channels();
        let encoder = Encoder {
            lstm: LstmWeights::new(&mut store, "encoder", f, config.enc_hidden, &mut rng),
        };
        let decoder = Decoder {
            bridge_h: Dense::new(&mut store, "bridge_h", 2 * config.enc_hidden, config.dec_hidden, &mut rng),
            bridge_c: Dense::new(&mut store, "bridge_c", 2 * config.enc_hidden, config.dec_hidden, &mut rng),
            embed: Dense::new(&mut store, "embed", 2, config.pos_embed, &mut rng),
            lstm: LstmWeights::new(&mut store, "decoder", config.pos_embed + f, config.dec_hidden, &mut rng),
            head_hidden: Dense::new(&mut store, "head.hidden", config.dec_hidden, config.head_hidden, &mut rng),
            head_out: Dense::new(&mut store, "head.out", config.head_hidden, 2, &mut rng),
        };
        Ok(StLstm {
            config,
            params: store,
            blocks,
            encoder,
            decoder,
        })
    }

    /// Same layout as [`StLstm::new`] with the given tensors.
    pub fn from_tensors(config: ModelConfig, tensors: Vec<Tensor>) -> Result<Self> {
        let mut model = StLstm::new(config, 0)?;
        model.params.load_tensors(tensors)?;
        Ok(model)
    }

    pub fn forward(&self, tape: &Tape, p: &Bound, batch: &PaddedBatch, teacher_forcing: bool) -> Result<ForwardOutput> {
        if batch.t_obs != self.config.t_obs || batch.t_pred != self.config.t_pred {
            return Err(Error::Contract(format!(
                "model expects {}/{} observed/predicted steps, batch has {}/{}",
                self.config.t_obs, self.config.t_pred, batch.t_obs, batch.t_pred
            )));
        }
        let ctx = GraphContext {
            batch: batch.batch,
            n_max: batch.n_max,
            steps: batch.t_obs,
            a_norm: tape.constant(batch.a_norm.clone()),
            mask: batch.mask.clone(),
        };
        let obs = tape.constant(batch.obs.clone());
        let mut x = obs;
        let mut last = None;
        for block in &self.blocks {
            let feats = block.forward(tape, p, x, &ctx)?;
            x = feats.values;
            last = Some(feats);
        }
        let feats = last.ok_or_else(|| Error::Contract("model without ST-Blocks".into()))?;
        let (h, c) = self.encoder.encode(tape, p, feats.values)?;
        let last_obs = tape.select(obs, 1, batch.t_obs - 1)?;
        let context = tape.select(feats.values, 1, batch.t_obs - 1)?;
        let mode = if teacher_forcing {
            DecodeMode::TeacherForcing(tape.constant(batch.gt.clone()))
        } else {
            DecodeMode::FreeRunning
        };
        let pred = self.decoder.decode(tape, p, h, c, last_obs, context, batch.t_pred, mode)?;
        Ok(ForwardOutput {
            pred,
            features: feats.values,
            spatial: feats.spatial,
            temporal: feats.temporal,
        })
    }

    /// Free-running predictions for several windows given in world
    /// coordinates; returns one `[n × t_pred × 2]` world-coordinate tensor
    /// per window.
    pub fn predict_many(&self, seqs: &[SequenceBatch]) -> Result<Vec<Tensor>> {
        if seqs.is_empty() {
            return Ok(Vec::new());
        }
        let normed: Vec<SequenceBatch> = seqs.iter().map(SequenceBatch::normalize).collect();
        let refs: Vec<&SequenceBatch> = normed.iter().collect();
        let batch = PaddedBatch::new(&refs, self.config.radius)?;
        let tape = Tape::new();
        let p = self.params.bind_frozen(&tape);
        let out = self.forward(&tape, &p, &batch, false)?;
        let pred = tape.value(out.pred);
        pred.check_finite("prediction")?;
        let t_pred = batch.t_pred;
        normed
            .iter()
            .enumerate()
            .map(|(b, s)| {
                let row0 = b * batch.n_max;
                let mut data = pred.data()[row0 * t_pred * 2..(row0 + s.n()) * t_pred * 2].to_vec();
                for (j, v) in data.iter_mut().enumerate() {
                    *v += s.origin[j % 2];
                }
                Tensor::new(&[s.n(), t_pred, 2], data)
            })
            .collect()
    }
}

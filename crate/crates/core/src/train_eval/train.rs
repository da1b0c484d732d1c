use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::batch_loss;
use super::optim::sgd_step;
use crate::dataio::{make_sequences, Scene, SequenceBatch};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, PaddedBatch, StLstm};
use crate::tensor::Tape;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lambda_recon: f64,
    pub grad_clip_norm: f64,
    pub seed: u64,
    pub t_obs: usize,
    pub t_pred: usize,
    /// Feed ground truth to the decoder during training.
    pub teacher_forcing: bool,
    /// Window start spacing, in timeline frames.
    pub stride: usize,
    /// Multiply the learning rate by `lr_decay_factor` every this many epochs.
    pub lr_decay_every: Option<usize>,
    pub lr_decay_factor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 250,
            batch_size: 128,
            lr: 0.001,
            lambda_recon: 0.1,
            grad_clip_norm: 10.0,
            seed: 0,
            t_obs: 8,
            t_pred: 12,
            teacher_forcing: true,
            stride: 1,
            lr_decay_every: None,
            lr_decay_factor: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.epochs > 0 && self.batch_size > 0 && self.t_obs > 0 && self.t_pred > 0 && self.stride > 0;
        if !positive {
            return Err(Error::Usage("epochs, batch size, horizons and stride must be positive".into()));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::Usage(format!("learning rate must be finite and >= 0, got {}", self.lr)));
        }
        if !(self.lambda_recon >= 0.0) {
            return Err(Error::Usage(format!("lambda must be >= 0, got {}", self.lambda_recon)));
        }
        if self.lr_decay_every == Some(0) {
            return Err(Error::Usage("lr decay interval must be positive".into()));
        }
        Ok(())
    }

    fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_decay_every {
            Some(every) => self.lr * self.lr_decay_factor.powi((epoch / every) as i32),
            None => self.lr,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub model: StLstm,
    /// Mean training loss per epoch.
    pub loss_curve: Vec<f64>,
    pub n_sequences: usize,
}

/// Trains `model` in place on windows already in world coordinates.
/// Windows are normalized, shuffled with a generator seeded from
/// `config.seed`, and grouped into padded batches.
pub fn train_on_sequences(model: &mut StLstm, config: &TrainConfig, seqs: &[SequenceBatch]) -> Result<Vec<f64>> {
    config.validate()?;
    if seqs.is_empty() {
        return Err(Error::Usage("no training sequences".into()));
    }
    let normed: Vec<SequenceBatch> = seqs.iter().map(SequenceBatch::normalize).collect();
    let mut order: Vec<usize> = (0..normed.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let lr = config.lr_at(epoch);
        let mut weighted = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let refs: Vec<&SequenceBatch> = chunk.iter().map(|&i| &normed[i]).collect();
            let batch = PaddedBatch::new(&refs, model.config.radius)?;
            let tape = Tape::new();
            let p = model.params.bind(&tape);
            let (loss, _) = batch_loss(model, &tape, &p, &batch, config.lambda_recon, config.teacher_forcing)?;
            let value = tape.value(loss).item()?;
            if !value.is_finite() {
                return Err(Error::Numerical(format!("loss became {value} in epoch {}", epoch + 1)));
            }
            let mut grads = tape.backward(loss)?;
            let grads: Vec<_> = p
                .vars()
                .iter()
                .map(|&v| grads.take(v).expect("every parameter is a tape leaf"))
                .collect();
            drop(tape);
            sgd_step(&mut model.params, &grads, lr, config.grad_clip_norm)?;
            weighted += value * chunk.len() as f64;
        }
        curve.push(weighted / normed.len() as f64);
    }
    Ok(curve)
}

/// Cuts training windows from `scenes`, builds a fresh model seeded with
/// `config.seed` and trains it. The model's horizons are taken from
/// `config`.
pub fn train(model_config: &ModelConfig, config: &TrainConfig, scenes: &[Scene]) -> Result<TrainOutput> {
    config.validate()?;
    let mut mc = model_config.clone();
    mc.t_obs = config.t_obs;
    mc.t_pred = config.t_pred;
    let mut seqs = Vec::new();
    for scene in scenes {
        seqs.extend(make_sequences(scene, config.t_obs, config.t_pred, config.stride)?);
    }
    if seqs.is_empty() {
        return Err(Error::Usage(format!(
            "no {}-frame windows in {} training scene(s)",
            config.t_obs + config.t_pred,
            scenes.len()
        )));
    }
    let mut model = StLstm::new(mc, config.seed)?;
    let loss_curve = train_on_sequences(&mut model, config, &seqs)?;
    Ok(TrainOutput {
        model,
        loss_curve,
        n_sequences: seqs.len(),
    })
}

pub fn loss_csv(curve: &[f64]) -> String {
    let mut out = String::from("epoch,mean_loss\n");
    for (i, v) in curve.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, v);
    }
    out
}

pub fn write_loss_csv(path: &Path, curve: &[f64]) -> Result<()> {
    fs::write(path, loss_csv(curve)).map_err(|e| Error::io(path, e))
}

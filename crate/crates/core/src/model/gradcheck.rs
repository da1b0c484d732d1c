//! Finite-difference check of every model parameter through the complete
//! training loss.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Bound, ModelConfig, PaddedBatch, StLstm};
use crate::dataio::SequenceBatch;
use crate::error::Result;
use crate::tensor::{analytic_gradients, compare_gradients, numeric_gradients, GradCheckReport, Tape, Tensor, Var};
use crate::train_eval::batch_loss;

#[derive(Clone, Debug, Serialize)]
pub struct GradSuiteConfig {
    pub seed: u64,
    pub h: f64,
    pub tolerance: f64,
    pub pedestrians: usize,
    pub t_obs: usize,
    pub t_pred: usize,
    pub lambda_recon: f64,
    /// Scales one analytic gradient by 1.01 before comparing; a negative
    /// control that must make the suite fail.
    pub corrupt: bool,
}

impl Default for GradSuiteConfig {
    fn default() -> Self {
        GradSuiteConfig {
            seed: 0,
            h: 1e-5,
            tolerance: 1e-4,
            pedestrians: 2,
            t_obs: 4,
            t_pred: 3,
            lambda_recon: 0.1,
            corrupt: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradSuiteReport {
    pub report: GradCheckReport,
    pub names: Vec<String>,
    pub n_scalars: usize,
    pub loss: f64,
    pub elapsed: Duration,
    pub passed: bool,
}

impl GradSuiteReport {
    pub fn worst_name(&self) -> &str {
        &self.names[self.report.worst_param]
    }
}

fn random_window(rng: &mut ChaCha8Rng, n: usize, t_obs: usize, t_pred: usize) -> Result<SequenceBatch> {
    let mut track = |t: usize| -> Result<Tensor> {
        let data = (0..n * t * 2).map(|_| rng.random_range(-2.0..2.0)).collect();
        Tensor::new(&[n, t, 2], data)
    };
    Ok(SequenceBatch {
        scene_name: "gradcheck".into(),
        start_frame: 0,
        ped_ids: (0..n as i64).collect(),
        positions_obs: track(t_obs)?,
        positions_gt: track(t_pred)?,
        node_mask: vec![true; n],
        origin: [0.0, 0.0],
    })
}

/// Default-width model with the requested horizons, free-running decode,
/// loss `l2 + λ·recon`.
pub fn full_model_grad_check(cfg: &GradSuiteConfig) -> Result<GradSuiteReport> {
    let start = Instant::now();
    let config = ModelConfig {
        t_obs: cfg.t_obs,
        t_pred: cfg.t_pred,
        ..ModelConfig::default()
    };
    let model = StLstm::new(config, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let window = random_window(&mut rng, cfg.pedestrians, cfg.t_obs, cfg.t_pred)?;
    let batch = PaddedBatch::new(&[&window], None)?;
    let params = model.params.tensors().to_vec();
    let f = |tape: &Tape, vars: &[Var]| {
        let p = Bound::from_vars(vars.to_vec());
        Ok(batch_loss(&model, tape, &p, &batch, cfg.lambda_recon, false)?.0)
    };
    let (loss, mut analytic) = analytic_gradients(&f, &params)?;
    if cfg.corrupt {
        if let Some(g) = analytic.last_mut() {
            *g = g.map(|v| v * 1.01);
        }
    }
    let numeric = numeric_gradients(&f, &params, cfg.h)?;
    let report = compare_gradients(&analytic, &numeric)?;
    Ok(GradSuiteReport {
        passed: report.passed(cfg.tolerance),
        report,
        names: model.params.names().to_vec(),
        n_scalars: model.params.num_scalars(),
        loss,
        elapsed: start.elapsed(),
    })
}

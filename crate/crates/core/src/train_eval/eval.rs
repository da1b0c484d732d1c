use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{collision_rate, per_node_errors, sampled_collision_rate, scene_collision_rate, CollisionProtocol, COLLISION_THRESHOLD};
use crate::dataio::{make_sequences, Scene, SequenceBatch};
use crate::error::{Error, Result};
use crate::model::StLstm;
use crate::tensor::Tensor;

/// Anything that maps observed windows to future positions. Inputs and
/// outputs are in world coordinates; output `k` is `[n_k × t_pred × 2]`.
pub trait Predictor: Sync {
    fn name(&self) -> &str;
    /// `(t_obs, t_pred)`
    fn horizons(&self) -> (usize, usize);
    fn predict(&self, seqs: &[SequenceBatch]) -> Result<Vec<Tensor>>;
}

impl Predictor for StLstm {
    fn name(&self) -> &str {
        "st-lstm"
    }

    fn horizons(&self) -> (usize, usize) {
        (self.config.t_obs, self.config.t_pred)
    }

    fn predict(&self, seqs: &[SequenceBatch]) -> Result<Vec<Tensor>> {
        self.predict_many(seqs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub stride: usize,
    pub collision_threshold: f64,
    /// Score ground truth instead of predictions for the collision column.
    pub gt_collision: bool,
    /// Restrict collision counting to this many random agents per draw.
    pub sample_agents: Option<usize>,
    pub seed: u64,
    /// Windows per prediction call; calls run on the worker pool.
    pub chunk_size: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            stride: 1,
            collision_threshold: COLLISION_THRESHOLD,
            gt_collision: false,
            sample_agents: None,
            seed: 0,
            chunk_size: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneReport {
    pub scene: String,
    pub n_sequences: usize,
    /// `None` when the scene yields no windows.
    pub ade_m: Option<f64>,
    pub fde_m: Option<f64>,
    pub collision_pct: Option<f64>,
}

impl SceneReport {
    /// Unweighted mean of the rows that carry values.
    pub fn average(name: &str, rows: &[SceneReport]) -> SceneReport {
        let mean = |f: fn(&SceneReport) -> Option<f64>| {
            let vals: Vec<f64> = rows.iter().filter_map(f).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        SceneReport {
            scene: name.to_string(),
            n_sequences: rows.iter().map(|r| r.n_sequences).sum(),
            ade_m: mean(|r| r.ade_m),
            fde_m: mean(|r| r.fde_m),
            collision_pct: mean(|r| r.collision_pct),
        }
    }

    fn csv_row(&self, out: &mut String) {
        let f = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            self.scene,
            self.n_sequences,
            f(self.ade_m),
            f(self.fde_m),
            f(self.collision_pct)
        );
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub predictor: String,
    pub t_obs: usize,
    pub t_pred: usize,
    pub options: EvalOptions,
    /// Sorted by scene name.
    pub scenes: Vec<SceneReport>,
    pub avg: SceneReport,
}

pub const CSV_HEADER: &str = "scene,n_sequences,ade_m,fde_m,collision_pct";

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for row in &self.scenes {
            row.csv_row(&mut out);
        }
        self.avg.csv_row(&mut out);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Picks at most `k` live nodes of a window, deterministically per window.
fn agent_subset(seq: &SequenceBatch, k: Option<usize>, seed: u64, index: usize) -> Vec<usize> {
    let live: Vec<usize> = (0..seq.n()).filter(|&i| seq.node_mask[i]).collect();
    match k {
        Some(k) if k < live.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let mut pick: Vec<usize> = sample(&mut rng, live.len(), k).into_iter().map(|i| live[i]).collect();
            pick.sort_unstable();
            pick
        }
        _ => live,
    }
}

fn evaluate_scene(predictor: &dyn Predictor, scene: &Scene, opts: &EvalOptions) -> Result<SceneReport> {
    let (t_obs, t_pred) = predictor.horizons();
    let seqs = make_sequences(scene, t_obs, t_pred, opts.stride)?;
    if seqs.is_empty() {
        return Ok(SceneReport {
            scene: scene.name.clone(),
            n_sequences: 0,
            ade_m: None,
            fde_m: None,
            collision_pct: None,
        });
    }
    let chunks: Vec<Vec<Tensor>> = seqs
        .par_chunks(opts.chunk_size.max(1))
        .map(|c| predictor.predict(c))
        .collect::<Result<_>>()?;
    let preds: Vec<Tensor> = chunks.into_iter().flatten().collect();
    if preds.len() != seqs.len() {
        return Err(Error::Contract(format!(
            "predictor returned {} trajectories for {} windows",
            preds.len(),
            seqs.len()
        )));
    }

    let (mut ade_sum, mut fde_sum, mut count) = (0.0, 0.0, 0usize);
    let mut frames = Vec::new();
    for (k, (seq, pred)) in seqs.iter().zip(&preds).enumerate() {
        for (i, (a, f)) in per_node_errors(pred, &seq.positions_gt)?.into_iter().enumerate() {
            if seq.node_mask[i] {
                ade_sum += a;
                fde_sum += f;
                count += 1;
            }
        }
        if !opts.gt_collision {
            let agents = agent_subset(seq, opts.sample_agents, opts.seed, k);
            for step in 0..t_pred {
                frames.push(
                    agents
                        .iter()
                        .map(|&i| {
                            let at = (i * t_pred + step) * 2;
                            [pred.data()[at], pred.data()[at + 1]]
                        })
                        .collect(),
                );
            }
        }
    }
    let collision = if opts.gt_collision {
        match opts.sample_agents {
            Some(agents) => sampled_collision_rate(
                scene,
                &CollisionProtocol {
                    agents,
                    threshold: opts.collision_threshold,
                    seed: opts.seed,
                    ..CollisionProtocol::default()
                },
            )?,
            None => scene_collision_rate(scene, opts.collision_threshold),
        }
    } else {
        collision_rate(&frames, opts.collision_threshold)
    };
    Ok(SceneReport {
        scene: scene.name.clone(),
        n_sequences: seqs.len(),
        ade_m: (count > 0).then(|| ade_sum / count as f64),
        fde_m: (count > 0).then(|| fde_sum / count as f64),
        collision_pct: Some(collision),
    })
}

/// ADE/FDE in meters and collision percentage per scene, plus an
/// unweighted AVG row. Windows are cut with the predictor's horizons.
pub fn evaluate(predictor: &dyn Predictor, scenes: &[Scene], opts: &EvalOptions) -> Result<EvalReport> {
    if opts.stride == 0 {
        return Err(Error::Usage("stride must be positive".into()));
    }
    let mut sorted: Vec<&Scene> = scenes.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    let rows = sorted
        .iter()
        .map(|s| evaluate_scene(predictor, s, opts))
        .collect::<Result<Vec<_>>>()?;
    let (t_obs, t_pred) = predictor.horizons();
    Ok(EvalReport {
        predictor: predictor.name().to_string(),
        t_obs,
        t_pred,
        options: opts.clone(),
        avg: SceneReport::average("AVG", &rows),
        scenes: rows,
    })
}

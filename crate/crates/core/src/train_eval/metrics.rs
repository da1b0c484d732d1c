use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::Scene;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Collision threshold in meters.
pub const COLLISION_THRESHOLD: f64 = 0.10;

/// Euclidean error per node and step, `[n][T]`.
fn displacements(pred: &Tensor, gt: &Tensor) -> Result<Vec<Vec<f64>>> {
    let s = pred.shape();
    if s != gt.shape() || s.len() != 3 || s[2] != 2 || s[1] == 0 {
        return Err(Error::dim("trajectory metric", s, gt.shape()));
    }
    let (p, g) = (pred.data(), gt.data());
    Ok((0..s[0])
        .map(|i| {
            (0..s[1])
                .map(|t| {
                    let at = (i * s[1] + t) * 2;
                    (p[at] - g[at]).hypot(p[at + 1] - g[at + 1])
                })
                .collect()
        })
        .collect())
}

/// Mean Euclidean distance over nodes and predicted steps.
pub fn ade(pred: &Tensor, gt: &Tensor) -> Result<f64> {
    let d = displacements(pred, gt)?;
    let count = d.iter().map(Vec::len).sum::<usize>();
    if count == 0 {
        return Err(Error::Contract("ade of an empty trajectory set".into()));
    }
    Ok(d.iter().flatten().sum::<f64>() / count as f64)
}

/// Mean Euclidean distance at the final predicted step.
pub fn fde(pred: &Tensor, gt: &Tensor) -> Result<f64> {
    let d = displacements(pred, gt)?;
    if d.is_empty() {
        return Err(Error::Contract("fde of an empty trajectory set".into()));
    }
    Ok(d.iter().map(|row| row[row.len() - 1]).sum::<f64>() / d.len() as f64)
}

/// Per-node ADE and FDE, for aggregating over many windows.
pub fn per_node_errors(pred: &Tensor, gt: &Tensor) -> Result<Vec<(f64, f64)>> {
    Ok(displacements(pred, gt)?
        .into_iter()
        .map(|row| (row.iter().sum::<f64>() / row.len() as f64, row[row.len() - 1]))
        .collect())
}

/// Share of colliding pedestrians in one frame, in `[0, 1]`. A pedestrian
/// collides when any other is strictly closer than `threshold`.
fn frame_collisions(frame: &[[f64; 2]], threshold: f64) -> f64 {
    let n = frame.len();
    if n < 2 {
        return 0.0;
    }
    let hit = (0..n)
        .filter(|&i| {
            (0..n).any(|j| j != i && (frame[i][0] - frame[j][0]).hypot(frame[i][1] - frame[j][1]) < threshold)
        })
        .count();
    hit as f64 / n as f64
}

/// Average over frames of the percentage of colliding pedestrians.
/// Frames with fewer than two pedestrians count as 0%.
pub fn collision_rate(frames: &[Vec<[f64; 2]>], threshold: f64) -> f64 {
    if frames.is_empty() {
        return 0.0;
    }
    100.0 * frames.iter().map(|f| frame_collisions(f, threshold)).sum::<f64>() / frames.len() as f64
}

/// [`collision_rate`] over every frame of a scene.
pub fn scene_collision_rate(scene: &Scene, threshold: f64) -> f64 {
    let frames: Vec<Vec<[f64; 2]>> = scene.timeline().into_iter().map(|f| f.into_values().collect()).collect();
    collision_rate(&frames, threshold)
}

/// Sampling protocol for ground-truth collision rates: each sample draws
/// `agents` pedestrians at random and keeps the first `window_secs` of
/// each one's track; the result is the mean rate over `samples` draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionProtocol {
    pub agents: usize,
    pub window_secs: f64,
    pub samples: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for CollisionProtocol {
    fn default() -> Self {
        CollisionProtocol {
            agents: 30,
            window_secs: 8.0,
            samples: 20,
            threshold: COLLISION_THRESHOLD,
            seed: 0,
        }
    }
}

pub fn sampled_collision_rate(scene: &Scene, protocol: &CollisionProtocol) -> Result<f64> {
    if protocol.samples == 0 || protocol.agents == 0 {
        return Err(Error::Usage("collision sampling needs at least one sample and one agent".into()));
    }
    let mut tracks: BTreeMap<i64, Vec<(i64, [f64; 2])>> = BTreeMap::new();
    for o in scene.observations() {
        tracks.entry(o.ped).or_default().push((o.frame, [o.x, o.y]));
    }
    let ids: Vec<i64> = tracks.keys().copied().collect();
    if ids.is_empty() {
        return Err(Error::Data(format!("scene {} has no pedestrians", scene.name)));
    }
    let window = (protocol.window_secs / scene.frame_interval).round().max(1.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(protocol.seed);
    let mut total = 0.0;
    for _ in 0..protocol.samples {
        let k = protocol.agents.min(ids.len());
        let mut frames: BTreeMap<i64, Vec<[f64; 2]>> = BTreeMap::new();
        let mut picked: Vec<usize> = sample(&mut rng, ids.len(), k).into_vec();
        picked.sort_unstable();
        for idx in picked {
            for &(frame, pos) in tracks[&ids[idx]].iter().take(window) {
                frames.entry(frame).or_default().push(pos);
            }
        }
        let frames: Vec<Vec<[f64; 2]>> = frames.into_values().collect();
        total += collision_rate(&frames, protocol.threshold);
    }
    Ok(total / protocol.samples as f64)
}

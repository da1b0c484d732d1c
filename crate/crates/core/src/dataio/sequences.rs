use serde::{Deserialize, Serialize};

use super::Scene;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One observation/prediction window of a scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceBatch {
    pub scene_name: String,
    /// Frame id of the first observed step.
    pub start_frame: i64,
    pub ped_ids: Vec<i64>,
    /// `[n × t_obs × 2]`
    pub positions_obs: Tensor,
    /// `[n × t_pred × 2]`
    pub positions_gt: Tensor,
    pub node_mask: Vec<bool>,
    /// Offset subtracted by [`SequenceBatch::normalize`]; zero in world coordinates.
    pub origin: [f64; 2],
}

impl SequenceBatch {
    pub fn n(&self) -> usize {
        self.ped_ids.len()
    }

    pub fn t_obs(&self) -> usize {
        self.positions_obs.shape()[1]
    }

    pub fn t_pred(&self) -> usize {
        self.positions_gt.shape()[1]
    }

    /// Position of node `i` at window step `s` (observed steps first).
    pub fn position(&self, i: usize, s: usize) -> [f64; 2] {
        let (src, s) = if s < self.t_obs() {
            (&self.positions_obs, s)
        } else {
            (&self.positions_gt, s - self.t_obs())
        };
        [src.at(&[i, s, 0]), src.at(&[i, s, 1])]
    }

    /// Shifts every position so the centroid of the masked-in pedestrians at
    /// the first observed step sits at the origin.
    pub fn normalize(&self) -> SequenceBatch {
        let live: Vec<usize> = (0..self.n()).filter(|&i| self.node_mask[i]).collect();
        let mut c = [0.0; 2];
        for &i in &live {
            let p = self.position(i, 0);
            c[0] += p[0];
            c[1] += p[1];
        }
        let k = live.len().max(1) as f64;
        let c = [c[0] / k, c[1] / k];
        let mut out = self.shifted(-c[0], -c[1]);
        out.origin = [self.origin[0] + c[0], self.origin[1] + c[1]];
        out
    }

    /// Restores world coordinates.
    pub fn denormalize(&self) -> SequenceBatch {
        let mut out = self.shifted(self.origin[0], self.origin[1]);
        out.origin = [0.0, 0.0];
        out
    }

    fn shifted(&self, dx: f64, dy: f64) -> SequenceBatch {
        let shift = |t: &Tensor| {
            let mut t = t.clone();
            for (j, v) in t.data_mut().iter_mut().enumerate() {
                *v += if j % 2 == 0 { dx } else { dy };
            }
            t
        };
        SequenceBatch {
            positions_obs: shift(&self.positions_obs),
            positions_gt: shift(&self.positions_gt),
            ..self.clone()
        }
    }

    /// Debug dump with positions as nested `[[x, y], ...]` arrays.
    pub fn to_json(&self) -> serde_json::Value {
        let nested = |t: &Tensor| -> Vec<Vec<[f64; 2]>> {
            let (n, steps) = (t.shape()[0], t.shape()[1]);
            (0..n)
                .map(|i| (0..steps).map(|s| [t.at(&[i, s, 0]), t.at(&[i, s, 1])]).collect())
                .collect()
        };
        serde_json::json!({
            "scene": self.scene_name,
            "start_frame": self.start_frame,
            "ped_ids": self.ped_ids,
            "node_mask": self.node_mask,
            "origin": self.origin,
            "positions_obs": nested(&self.positions_obs),
            "positions_gt": nested(&self.positions_gt),
        })
    }
}

/// Slides a window of `t_obs + t_pred` consecutive time steps over the
/// scene. A pedestrian joins a window only if observed at every step of
/// it; windows nobody qualifies for are dropped.
pub fn make_sequences(
    scene: &Scene,
    t_obs: usize,
    t_pred: usize,
    stride: usize,
) -> Result<Vec<SequenceBatch>> {
    if t_obs == 0 || t_pred == 0 || stride == 0 {
        return Err(Error::Contract(format!(
            "make_sequences needs positive t_obs/t_pred/stride, got {t_obs}/{t_pred}/{stride}"
        )));
    }
    let timeline = scene.timeline();
    let len = t_obs + t_pred;
    let Some(first) = scene.first_frame() else {
        return Ok(Vec::new());
    };
    let step = scene.frame_step();
    let mut out = Vec::new();
    if timeline.len() < len {
        return Ok(out);
    }
    for start in (0..=timeline.len() - len).step_by(stride) {
        let window = &timeline[start..start + len];
        let peds: Vec<i64> = window[0]
            .keys()
            .copied()
            .filter(|p| window.iter().all(|frame| frame.contains_key(p)))
            .collect();
        if peds.is_empty() {
            continue;
        }
        let n = peds.len();
        let mut obs = Vec::with_capacity(n * t_obs * 2);
        let mut gt = Vec::with_capacity(n * t_pred * 2);
        for p in &peds {
            for (s, frame) in window.iter().enumerate() {
                let dst = if s < t_obs { &mut obs } else { &mut gt };
                dst.extend_from_slice(&frame[p]);
            }
        }
        out.push(SequenceBatch {
            scene_name: scene.name.clone(),
            start_frame: first + start as i64 * step,
            ped_ids: peds,
            positions_obs: Tensor::new(&[n, t_obs, 2], obs)?,
            positions_gt: Tensor::new(&[n, t_pred, 2], gt)?,
            node_mask: vec![true; n],
            origin: [0.0, 0.0],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Observation;

    fn track(ped: i64, frames: std::ops::Range<i64>) -> Vec<Observation> {
        frames
            .map(|f| Observation { frame: f * 10, ped, x: f as f64, y: 2.0 * f as f64 })
            .collect()
    }

    #[test]
    fn exact_window_gives_one_batch() {
        let s = Scene::new("s", track(1, 0..20)).unwrap();
        let b = make_sequences(&s, 8, 12, 1).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].n(), 1);
        assert_eq!(b[0].positions_obs.shape(), &[1, 8, 2]);
        assert_eq!(b[0].positions_gt.shape(), &[1, 12, 2]);
        assert_eq!(b[0].position(0, 19), [19.0, 38.0]);
    }

    #[test]
    fn one_extra_frame_gives_two_batches() {
        let s = Scene::new("s", track(1, 0..21)).unwrap();
        let b = make_sequences(&s, 8, 12, 1).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b[1].start_frame, 10);
    }

    #[test]
    fn partial_track_is_excluded() {
        let mut obs = track(1, 0..20);
        obs.extend(track(2, 0..10));
        let s = Scene::new("s", obs).unwrap();
        let b = make_sequences(&s, 8, 12, 1).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].ped_ids, vec![1]);
    }

    #[test]
    fn gap_in_track_breaks_windows() {
        let mut obs = track(1, 0..25);
        obs.retain(|o| o.frame != 120);
        let s = Scene::new("s", obs).unwrap();
        assert!(make_sequences(&s, 8, 12, 1).unwrap().is_empty());
    }

    #[test]
    fn zero_stride_is_rejected() {
        let s = Scene::new("s", track(1, 0..20)).unwrap();
        assert!(make_sequences(&s, 8, 12, 0).is_err());
    }

    #[test]
    fn normalize_single_pedestrian() {
        let obs = (0..20)
            .map(|f| Observation { frame: f, ped: 1, x: 7.0 + f as f64, y: 3.0 })
            .collect();
        let b = &make_sequences(&Scene::new("s", obs).unwrap(), 8, 12, 1).unwrap()[0];
        let nb = b.normalize();
        assert_eq!(nb.origin, [7.0, 3.0]);
        assert_eq!(nb.position(0, 0), [0.0, 0.0]);
        let back = nb.denormalize();
        assert!(back.positions_obs.max_abs_diff(&b.positions_obs) < 1e-12);
        assert!(back.positions_gt.max_abs_diff(&b.positions_gt) < 1e-12);
        assert_eq!(back.origin, [0.0, 0.0]);
    }

    #[test]
    fn normalize_uses_centroid() {
        let mut obs = Vec::new();
        for f in 0..20 {
            obs.push(Observation { frame: f, ped: 1, x: 0.0, y: 0.0 });
            obs.push(Observation { frame: f, ped: 2, x: 2.0, y: 2.0 });
        }
        let b = &make_sequences(&Scene::new("s", obs).unwrap(), 8, 12, 1).unwrap()[0];
        let nb = b.normalize();
        assert_eq!(nb.origin, [1.0, 1.0]);
        assert_eq!(nb.position(0, 0), [-1.0, -1.0]);
        assert_eq!(nb.position(1, 0), [1.0, 1.0]);
    }

    #[test]
    fn json_dump_has_nested_positions() {
        let s = Scene::new("s", track(1, 0..20)).unwrap();
        let b = &make_sequences(&s, 8, 12, 1).unwrap()[0];
        let j = b.to_json();
        assert_eq!(j["positions_obs"][0].as_array().unwrap().len(), 8);
        assert_eq!(j["positions_gt"][0][11][0].as_f64(), Some(19.0));
    }
}

use crate::dataio::SequenceBatch;
use crate::error::{Error, Result};
use crate::graph::{adjacency_matrix, normalize_adjacency};
use crate::tensor::Tensor;

/// Several windows padded to a common node count and laid out for one
/// forward pass. Rows are `(sample, node)` pairs, `R = batch · n_max`.
#[derive(Clone, Debug)]
pub struct PaddedBatch {
    pub batch: usize,
    pub n_max: usize,
    pub t_obs: usize,
    pub t_pred: usize,
    /// Live node count per sample.
    pub counts: Vec<usize>,
    /// `[R × t_obs × 2]`
    pub obs: Tensor,
    /// `[R × t_pred × 2]`
    pub gt: Tensor,
    /// `[R]`, 1 for live nodes.
    pub mask: Vec<f64>,
    /// Binary adjacency per observed step, `[t_obs · batch × n_max × n_max]`.
    pub adjacency: Tensor,
    /// Normalized adjacency, same layout. Padded nodes carry a unit self-loop.
    pub a_norm: Tensor,
    /// `Ã = A + I` on live nodes, zero elsewhere.
    pub recon_target: Tensor,
    /// `1 / (n_b² · batch · t_obs)` on live pairs, zero elsewhere, so the
    /// weighted sum is the mean over graphs of each graph's mean pair loss.
    pub recon_weight: Tensor,
}

impl PaddedBatch {
    /// `seqs` are expected in model coordinates (normalized). Edges link
    /// masked-in pedestrians only; `radius` as in [`crate::graph::build_snapshot`].
    pub fn new(seqs: &[&SequenceBatch], radius: Option<f64>) -> Result<Self> {
        let first = seqs
            .first()
            .ok_or_else(|| Error::Contract("cannot pad an empty list of sequences".into()))?;
        let (t_obs, t_pred) = (first.t_obs(), first.t_pred());
        if let Some(bad) = seqs.iter().find(|s| s.t_obs() != t_obs || s.t_pred() != t_pred) {
            return Err(Error::dim(
                "PaddedBatch horizons",
                &[t_obs, t_pred],
                &[bad.t_obs(), bad.t_pred()],
            ));
        }
        let batch = seqs.len();
        let n_max = seqs.iter().map(|s| s.n()).max().unwrap_or(0);
        if n_max == 0 {
            return Err(Error::Contract("sequences without pedestrians".into()));
        }
        let rows = batch * n_max;
        let mut obs = Tensor::zeros(&[rows, t_obs, 2]);
        let mut gt = Tensor::zeros(&[rows, t_pred, 2]);
        let mut mask = vec![0.0; rows];
        let graphs = t_obs * batch;
        let mut adjacency = Tensor::zeros(&[graphs, n_max, n_max]);
        let mut a_norm = Tensor::zeros(&[graphs, n_max, n_max]);
        let mut recon_target = Tensor::zeros(&[graphs, n_max, n_max]);
        let mut recon_weight = Tensor::zeros(&[graphs, n_max, n_max]);
        let mut counts = Vec::with_capacity(batch);

        for (b, s) in seqs.iter().enumerate() {
            let n = s.n();
            let live: Vec<usize> = (0..n).filter(|&i| s.node_mask[i]).collect();
            if live.is_empty() {
                return Err(Error::Contract(format!(
                    "window at frame {} of {} has no live pedestrians",
                    s.start_frame, s.scene_name
                )));
            }
            counts.push(live.len());
            let row0 = b * n_max;
            let od = obs.data_mut();
            od[row0 * t_obs * 2..(row0 + n) * t_obs * 2].copy_from_slice(s.positions_obs.data());
            let gd = gt.data_mut();
            gd[row0 * t_pred * 2..(row0 + n) * t_pred * 2].copy_from_slice(s.positions_gt.data());
            for &i in &live {
                mask[row0 + i] = 1.0;
            }
            for i in 0..n {
                if !s.node_mask[i] {
                    // padded-out pedestrians carry no positions into the model
                    for v in &mut obs.data_mut()[(row0 + i) * t_obs * 2..(row0 + i + 1) * t_obs * 2] {
                        *v = 0.0;
                    }
                }
            }

            let k = live.len();
            let w = 1.0 / ((k * k) as f64 * graphs as f64);
            for t in 0..t_obs {
                let g = t * batch + b;
                let pos: Vec<[f64; 2]> = live.iter().map(|&i| s.position(i, t)).collect();
                let a = adjacency_matrix(&pos, radius);
                let an = normalize_adjacency(&a)?;
                let base = g * n_max * n_max;
                for (li, &i) in live.iter().enumerate() {
                    for (lj, &j) in live.iter().enumerate() {
                        let at = base + i * n_max + j;
                        let av = a.data()[li * k + lj];
                        adjacency.data_mut()[at] = av;
                        a_norm.data_mut()[at] = an.data()[li * k + lj];
                        recon_target.data_mut()[at] = if i == j { 1.0 } else { av };
                        recon_weight.data_mut()[at] = w;
                    }
                }
                for i in 0..n_max {
                    if i >= n || !s.node_mask[i] {
                        a_norm.data_mut()[base + i * n_max + i] = 1.0;
                    }
                }
            }
        }

        Ok(PaddedBatch {
            batch,
            n_max,
            t_obs,
            t_pred,
            counts,
            obs,
            gt,
            mask,
            adjacency,
            a_norm,
            recon_target,
            recon_weight,
        })
    }

    pub fn rows(&self) -> usize {
        self.batch * self.n_max
    }
}

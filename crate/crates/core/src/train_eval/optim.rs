use crate::error::{Error, Result};
use crate::model::ParamStore;
use crate::tensor::Tensor;

/// Clips `grads` to global norm `clip_norm` (no clipping when it is not a
/// positive finite number), then applies `p ← p − lr·g`. Returns the
/// global norm before clipping.
pub fn sgd_step(params: &mut ParamStore, grads: &[Tensor], lr: f64, clip_norm: f64) -> Result<f64> {
    if grads.len() != params.len() {
        return Err(Error::dim("sgd_step", &[params.len()], &[grads.len()]));
    }
    let mut sq = 0.0;
    for ((name, p), g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::Contract(format!(
                "gradient for {name} has shape {:?}, parameter has {:?}",
                g.shape(),
                p.shape()
            )));
        }
        if let Some((i, v)) = g.data().iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite gradient {v} in {name}[{i}]")));
        }
        sq += g.data().iter().map(|v| v * v).sum::<f64>();
    }
    let norm = sq.sqrt();
    let factor = if clip_norm.is_finite() && clip_norm > 0.0 && norm > clip_norm {
        clip_norm / norm
    } else {
        1.0
    };
    let step = lr * factor;
    for (p, g) in params.tensors_mut().iter_mut().zip(grads) {
        for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
            *pv -= step * gv;
        }
    }
    Ok(norm)
}

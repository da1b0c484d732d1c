use crate::error::{Error, Result};
use crate::model::{Bound, ForwardOutput, PaddedBatch, StLstm};
use crate::seq2seq::reconstruction_loss_weighted;
use crate::tensor::{Tape, Tensor, Var};

/// Mean squared displacement over live rows and all steps. `pred` and `gt`
/// are `[R × T × 2]`, `mask` has one weight per row.
pub fn l2_loss(tape: &Tape, pred: Var, gt: Var, mask: &[f64]) -> Result<Var> {
    let ps = tape.shape(pred);
    let gs = tape.shape(gt);
    if ps != gs || ps.len() != 3 || ps[2] != 2 || mask.len() != ps[0] {
        return Err(Error::dim("l2_loss", &ps, &gs));
    }
    let live: f64 = mask.iter().sum();
    if live <= 0.0 {
        return Err(Error::Contract("l2_loss over an empty mask".into()));
    }
    let scale = 1.0 / (live * ps[1] as f64);
    let d = tape.sub(pred, gt)?;
    let sq = tape.mul(d, d)?;
    let w: Vec<f64> = mask.iter().map(|m| m * scale).collect();
    Ok(tape.sum(tape.row_scale(sq, &w)?))
}

/// `l2_loss + λ · recon`, where the reconstruction term is weighted per
/// pair by `recon_weight` (see [`PaddedBatch`]).
#[allow(clippy::too_many_arguments)]
pub fn total_loss(
    tape: &Tape,
    pred: Var,
    gt: Var,
    mask: &[f64],
    spatial: Var,
    recon_target: &Tensor,
    recon_weight: &Tensor,
    lambda: f64,
) -> Result<Var> {
    if !(lambda >= 0.0) {
        return Err(Error::Contract(format!("reconstruction weight must be >= 0, got {lambda}")));
    }
    let l2 = l2_loss(tape, pred, gt, mask)?;
    if lambda == 0.0 {
        return Ok(l2);
    }
    let rec = reconstruction_loss_weighted(tape, spatial, recon_target, recon_weight)?;
    tape.add(l2, tape.scale(rec, lambda))
}

/// Forward pass plus training loss for one padded batch.
pub fn batch_loss(
    model: &StLstm,
    tape: &Tape,
    p: &Bound,
    batch: &PaddedBatch,
    lambda: f64,
    teacher_forcing: bool,
) -> Result<(Var, ForwardOutput)> {
    let out = model.forward(tape, p, batch, teacher_forcing)?;
    let gt = tape.constant(batch.gt.clone());
    let loss = total_loss(
        tape,
        out.pred,
        gt,
        &batch.mask,
        out.spatial,
        &batch.recon_target,
        &batch.recon_weight,
        lambda,
    )?;
    Ok((loss, out))
}

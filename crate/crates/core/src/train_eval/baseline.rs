use crate::dataio::SequenceBatch;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per node and coordinate, fits `x(t) = a + b·t` by least squares over
/// the observed steps and extrapolates `t_pred` steps. `obs` is `[n × T × 2]`.
pub fn linear_baseline(obs: &Tensor, t_pred: usize) -> Result<Tensor> {
    let s = obs.shape();
    if s.len() != 3 || s[2] != 2 {
        return Err(Error::dim("linear_baseline", s, &[0, 0, 2]));
    }
    let (n, t_obs) = (s[0], s[1]);
    if t_obs < 2 {
        return Err(Error::Contract(format!("linear baseline needs at least 2 observed steps, got {t_obs}")));
    }
    let tm = (t_obs - 1) as f64 / 2.0;
    let stt: f64 = (0..t_obs).map(|t| (t as f64 - tm).powi(2)).sum();
    let mut out = Tensor::zeros(&[n, t_pred, 2]);
    for i in 0..n {
        for k in 0..2 {
            let at = |t: usize| obs.data()[(i * t_obs + t) * 2 + k];
            let mean = (0..t_obs).map(at).sum::<f64>() / t_obs as f64;
            let sty: f64 = (0..t_obs).map(|t| (t as f64 - tm) * (at(t) - mean)).sum();
            let slope = sty / stt;
            for step in 0..t_pred {
                let t = (t_obs + step) as f64;
                out.data_mut()[(i * t_pred + step) * 2 + k] = mean + slope * (t - tm);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct LinearBaseline {
    pub t_obs: usize,
    pub t_pred: usize,
}

impl super::Predictor for LinearBaseline {
    fn name(&self) -> &str {
        "linear"
    }

    fn horizons(&self) -> (usize, usize) {
        (self.t_obs, self.t_pred)
    }

    fn predict(&self, seqs: &[SequenceBatch]) -> Result<Vec<Tensor>> {
        seqs.iter().map(|s| linear_baseline(&s.positions_obs, self.t_pred)).collect()
    }
}

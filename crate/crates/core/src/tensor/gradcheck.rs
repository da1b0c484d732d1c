use rayon::prelude::*;

use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Outcome of comparing tape gradients with central differences.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Maximum of `per_param`.
    pub max_rel_error: f64,
    /// Relative error per parameter tensor, in input order.
    pub per_param: Vec<f64>,
    pub worst_param: usize,
    /// Flat index of the largest absolute discrepancy inside `worst_param`.
    pub worst_element: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// `‖a − n‖ / max(‖a‖, ‖n‖, 1e-8)` over one parameter tensor.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n) * (a - n))
        .sum::<f64>()
        .sqrt();
    diff / norm(analytic).max(norm(numeric)).max(1e-8)
}

/// Evaluates `f` with every parameter as a differentiable leaf and returns
/// the loss value and its gradients.
pub fn analytic_gradients<F>(f: &F, params: &[Tensor]) -> Result<(f64, Vec<Tensor>)>
where
    F: Fn(&Tape, &[Var]) -> Result<Var>,
{
    let tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = f(&tape, &vars)?;
    let value = tape.value(loss).item()?;
    let mut grads = tape.backward(loss)?;
    let out = vars
        .iter()
        .map(|&v| grads.take(v).expect("leaf gradient"))
        .collect();
    Ok((value, out))
}

/// One tape holding every parameter as a constant leaf. Each evaluation
/// edits a single leaf element in place and rolls the tape back afterwards,
/// so parameters are copied once per worker rather than once per probe.
struct Probe {
    tape: Tape,
    vars: Vec<Var>,
    mark: usize,
}

impl Probe {
    fn new(params: &[Tensor]) -> Self {
        let tape = Tape::new();
        let vars = params.iter().map(|p| tape.constant(p.clone())).collect();
        let mark = tape.len();
        Probe { tape, vars, mark }
    }

    fn eval_at<F>(&self, f: &F, p: usize, j: usize, x: f64) -> Result<f64>
    where
        F: Fn(&Tape, &[Var]) -> Result<Var>,
    {
        self.tape.set_element(self.vars[p], j, x);
        let out = f(&self.tape, &self.vars).and_then(|loss| self.tape.value(loss).item());
        self.tape.truncate(self.mark);
        out
    }

    fn central<F>(&self, f: &F, p: usize, j: usize, orig: f64, h: f64) -> Result<f64>
    where
        F: Fn(&Tape, &[Var]) -> Result<Var>,
    {
        let plus = self.eval_at(f, p, j, orig + h);
        let minus = self.eval_at(f, p, j, orig - h);
        self.tape.set_element(self.vars[p], j, orig);
        Ok((plus? - minus?) / (2.0 * h))
    }
}

/// Central differences `(f(θ + h) − f(θ − h)) / 2h`, one element at a time.
/// Elements are spread over the worker pool.
pub fn numeric_gradients<F>(f: &F, params: &[Tensor], h: f64) -> Result<Vec<Tensor>>
where
    F: Fn(&Tape, &[Var]) -> Result<Var> + Sync,
{
    let probes: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .flat_map(|(p, t)| (0..t.len()).map(move |j| (p, j)))
        .collect();
    let flat = probes
        .par_iter()
        .map_init(|| Probe::new(params), |probe, &(p, j)| probe.central(f, p, j, params[p].data()[j], h))
        .collect::<Result<Vec<f64>>>()?;
    let mut rest = flat.as_slice();
    params
        .iter()
        .map(|t| {
            let (head, tail) = rest.split_at(t.len());
            rest = tail;
            Tensor::new(t.shape(), head.to_vec())
        })
        .collect()
}

/// Builds the report from matched analytic/numeric gradient lists.
pub fn compare(analytic: &[Tensor], numeric: &[Tensor]) -> Result<GradCheckReport> {
    if analytic.len() != numeric.len() || analytic.is_empty() {
        return Err(Error::Contract(format!(
            "grad check: {} analytic vs {} numeric gradients",
            analytic.len(),
            numeric.len()
        )));
    }
    let per_param: Vec<f64> = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| relative_error(a.data(), n.data()))
        .collect();
    let (worst_param, max_rel_error) = per_param
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, e)| {
            // NaN counts as worst
            if e > best.1 || e.is_nan() && !best.1.is_nan() {
                (i, e)
            } else {
                best
            }
        });
    let (a, n) = (&analytic[worst_param], &numeric[worst_param]);
    let worst_element = a
        .data()
        .iter()
        .zip(n.data())
        .map(|(x, y)| (x - y).abs())
        .enumerate()
        .fold((0, -1.0), |best, (i, d)| if d > best.1 { (i, d) } else { best })
        .0;
    Ok(GradCheckReport {
        max_rel_error,
        per_param,
        worst_param,
        worst_element,
        worst_analytic: a.data().get(worst_element).copied().unwrap_or(0.0),
        worst_numeric: n.data().get(worst_element).copied().unwrap_or(0.0),
    })
}

/// Compares tape gradients of `f` against central finite differences with
/// step `h`. The error of each parameter tensor is
/// `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖, 1e-8)`; the report's
/// headline is the maximum over parameters.
pub fn grad_check<F>(f: F, params: &[Tensor], h: f64) -> Result<GradCheckReport>
where
    F: Fn(&Tape, &[Var]) -> Result<Var> + Sync,
{
    let (_, analytic) = analytic_gradients(&f, params)?;
    let numeric = numeric_gradients(&f, params, h)?;
    compare(&analytic, &numeric)
}

use std::cell::{Ref, RefCell};
use std::rc::Rc;

use super::kernels::{self, ConvGeom};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Pointwise nonlinearity selector.
#[derive(Clone, Copy, Debug)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    /// Parametric ReLU with a learnable one-element slope.
    Prelu(Var),
    Linear,
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Bmm(Var, Var),
    BmmNt(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    AddBias(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Softplus(Var),
    Prelu(Var, Var),
    Conv1d {
        x: Var,
        w: Var,
        b: Var,
        geom: ConvGeom,
    },
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        clamped: Vec<bool>,
    },
    Permute(Var, Vec<usize>),
    Reshape(Var),
    Narrow {
        a: Var,
        axis: usize,
        start: usize,
    },
    Concat(Vec<Var>, usize),
    RowScale(Var, Rc<[f64]>),
    Sum(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Variance floor used by [`Tape::layer_norm`]. The normalizer is
/// `sqrt(max(var, LAYER_NORM_EPS))`.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Records primitive operations in topological order for reverse-mode
/// differentiation. Single-threaded; build one tape per forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Gradients of a scalar with respect to every differentiable node.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `v`; always `Some` for leaves that require grad.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, v: Var) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[v.0].value)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape.clone()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes.borrow()[v.0].requires_grad
    }

    fn push(&self, mut value: Tensor, op: Op, requires_grad: bool) -> Var {
        value.requires_grad = requires_grad;
        let op = if requires_grad { op } else { Op::Leaf };
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(nodes.len() - 1)
    }

    /// Drops every node recorded after the first `len`.
    pub(crate) fn truncate(&self, len: usize) {
        self.nodes.borrow_mut().truncate(len);
    }

    /// Overwrites one element of a recorded value in place. Only sound for
    /// leaves whose dependents have been truncated away.
    pub(crate) fn set_element(&self, v: Var, index: usize, value: f64) {
        self.nodes.borrow_mut()[v.0].value.data[index] = value;
    }

    fn rg(&self, vars: &[Var]) -> bool {
        let nodes = self.nodes.borrow();
        vars.iter().any(|v| nodes[v.0].requires_grad)
    }

    /// Registers a leaf; differentiable iff `t.requires_grad()`.
    pub fn var(&self, t: &Tensor) -> Var {
        let rg = t.requires_grad;
        self.push(t.clone(), Op::Leaf, rg)
    }

    pub fn constant(&self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn param(&self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    // ── linear algebra ──────────────────────────────────────────────

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
            let (m, k, n) = kernels::matmul_dims("matmul", &ta.shape, &tb.shape)?;
            let mut out = vec![0.0; m * n];
            kernels::matmul_nn(&ta.data, &tb.data, m, k, n, &mut out);
            Tensor::new(&[m, n], out)?
        };
        Ok(self.push(value, Op::MatMul(a, b), self.rg(&[a, b])))
    }

    /// `a · bᵀ` for a `[m×k]` and b `[n×k]`.
    pub fn matmul_nt(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
            let (m, k, n) = match (ta.shape.as_slice(), tb.shape.as_slice()) {
                ([m, k], [n, k2]) if k == k2 => (*m, *k, *n),
                _ => return Err(Error::dim("matmul_nt", &ta.shape, &tb.shape)),
            };
            let mut out = vec![0.0; m * n];
            kernels::matmul_nt(&ta.data, &tb.data, m, k, n, &mut out);
            Tensor::new(&[m, n], out)?
        };
        Ok(self.push(value, Op::MatMulNt(a, b), self.rg(&[a, b])))
    }

    /// Batched product `[B×m×k] · [B×k×n] → [B×m×n]`.
    pub fn bmm(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
            let (bs, m, k, n) = match (ta.shape.as_slice(), tb.shape.as_slice()) {
                ([b1, m, k], [b2, k2, n]) if b1 == b2 && k == k2 => (*b1, *m, *k, *n),
                _ => return Err(Error::dim("bmm", &ta.shape, &tb.shape)),
            };
            let mut out = vec![0.0; bs * m * n];
            for i in 0..bs {
                kernels::matmul_nn(
                    &ta.data[i * m * k..(i + 1) * m * k],
                    &tb.data[i * k * n..(i + 1) * k * n],
                    m,
                    k,
                    n,
                    &mut out[i * m * n..(i + 1) * m * n],
                );
            }
            Tensor::new(&[bs, m, n], out)?
        };
        Ok(self.push(value, Op::Bmm(a, b), self.rg(&[a, b])))
    }

    /// Batched `[B×m×k] · [B×n×k]ᵀ → [B×m×n]`.
    pub fn bmm_nt(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
            let (bs, m, k, n) = match (ta.shape.as_slice(), tb.shape.as_slice()) {
                ([b1, m, k], [b2, n, k2]) if b1 == b2 && k == k2 => (*b1, *m, *k, *n),
                _ => return Err(Error::dim("bmm_nt", &ta.shape, &tb.shape)),
            };
            let mut out = vec![0.0; bs * m * n];
            for i in 0..bs {
                kernels::matmul_nt(
                    &ta.data[i * m * k..(i + 1) * m * k],
                    &tb.data[i * n * k..(i + 1) * n * k],
                    m,
                    k,
                    n,
                    &mut out[i * m * n..(i + 1) * m * n],
                );
            }
            Tensor::new(&[bs, m, n], out)?
        };
        Ok(self.push(value, Op::BmmNt(a, b), self.rg(&[a, b])))
    }

    pub fn transpose(&self, a: Var) -> Result<Var> {
        if self.shape(a).len() != 2 {
            return Err(Error::Contract(format!(
                "transpose needs a matrix, got {:?}",
                self.shape(a)
            )));
        }
        self.permute(a, &[1, 0])
    }

    // ── elementwise ─────────────────────────────────────────────────

    fn zip(&self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let nodes = self.nodes.borrow();
        let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
        if ta.shape != tb.shape {
            return Err(Error::dim(op, &ta.shape, &tb.shape));
        }
        let data = ta.data.iter().zip(&tb.data).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(&ta.shape, data)
    }

    fn unary(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        self.nodes.borrow()[a.0].value.map(f)
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip("add", a, b, |x, y| x + y)?;
        Ok(self.push(v, Op::Add(a, b), self.rg(&[a, b])))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip("sub", a, b, |x, y| x - y)?;
        Ok(self.push(v, Op::Sub(a, b), self.rg(&[a, b])))
    }

    /// Hadamard product.
    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip("mul", a, b, |x, y| x * y)?;
        Ok(self.push(v, Op::Mul(a, b), self.rg(&[a, b])))
    }

    pub fn scale(&self, a: Var, s: f64) -> Var {
        let v = self.unary(a, |x| x * s);
        self.push(v, Op::Scale(a, s), self.rg(&[a]))
    }

    pub fn add_scalar(&self, a: Var, s: f64) -> Var {
        let v = self.unary(a, |x| x + s);
        self.push(v, Op::AddScalar(a), self.rg(&[a]))
    }

    /// Adds a `[C]` vector to every row of a `[.. × C]` tensor.
    pub fn add_bias(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
            let c = tb.len();
            if tb.rank() != 1 || ta.shape.last() != Some(&c) {
                return Err(Error::dim("add_bias", &ta.shape, &tb.shape));
            }
            let data = ta
                .data
                .iter()
                .enumerate()
                .map(|(i, &x)| x + tb.data[i % c])
                .collect();
            Tensor::new(&ta.shape, data)?
        };
        Ok(self.push(value, Op::AddBias(a, b), self.rg(&[a, b])))
    }

    // ── activations ─────────────────────────────────────────────────

    pub fn relu(&self, a: Var) -> Var {
        let v = self.unary(a, |x| x.max(0.0));
        self.push(v, Op::Relu(a), self.rg(&[a]))
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        let v = self.unary(a, sigmoid);
        self.push(v, Op::Sigmoid(a), self.rg(&[a]))
    }

    pub fn tanh(&self, a: Var) -> Var {
        let v = self.unary(a, f64::tanh);
        self.push(v, Op::Tanh(a), self.rg(&[a]))
    }

    /// `log(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&self, a: Var) -> Var {
        let v = self.unary(a, softplus);
        self.push(v, Op::Softplus(a), self.rg(&[a]))
    }

    /// `x` where positive, `alpha · x` elsewhere; `alpha` has one element.
    pub fn prelu(&self, x: Var, alpha: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let ta = &nodes[alpha.0].value;
            if ta.len() != 1 {
                return Err(Error::dim("prelu slope", &[1], &ta.shape));
            }
            let s = ta.data[0];
            nodes[x.0].value.map(|v| if v > 0.0 { v } else { s * v })
        };
        Ok(self.push(value, Op::Prelu(x, alpha), self.rg(&[x, alpha])))
    }

    pub fn activate(&self, x: Var, act: Activation) -> Result<Var> {
        Ok(match act {
            Activation::Relu => self.relu(x),
            Activation::Sigmoid => self.sigmoid(x),
            Activation::Tanh => self.tanh(x),
            Activation::Prelu(alpha) => self.prelu(x, alpha)?,
            Activation::Linear => x,
        })
    }

    // ── convolution / normalization ─────────────────────────────────

    /// Length-preserving causal convolution over the last axis.
    ///
    /// `x` is `[C_in × T]` or `[N × C_in × T]`, `kernel` is
    /// `[C_out × C_in × K]` and `bias` is `[C_out]`. The input is left-padded
    /// with `K − 1` zeros so output step `t` only sees inputs `≤ t`.
    pub fn conv1d_causal(&self, x: Var, kernel: Var, bias: Var) -> Result<Var> {
        let (value, geom) = {
            let nodes = self.nodes.borrow();
            let (tx, tw, tb) = (&nodes[x.0].value, &nodes[kernel.0].value, &nodes[bias.0].value);
            let (batch, c_in, t) = match tx.shape.as_slice() {
                [c, t] => (1, *c, *t),
                [n, c, t] => (*n, *c, *t),
                _ => return Err(Error::dim("conv1d_causal input", &tx.shape, &tw.shape)),
            };
            let (c_out, k) = match tw.shape.as_slice() {
                [o, i, k] if *i == c_in && *k >= 1 => (*o, *k),
                _ => return Err(Error::dim("conv1d_causal kernel", &tx.shape, &tw.shape)),
            };
            if tb.shape != [c_out] {
                return Err(Error::dim("conv1d_causal bias", &tw.shape, &tb.shape));
            }
            let geom = ConvGeom { batch, c_in, c_out, k, t };
            let mut out = vec![0.0; batch * c_out * t];
            kernels::conv1d_causal_forward(&tx.data, &tw.data, &tb.data, geom, &mut out);
            let shape = if tx.rank() == 2 { vec![c_out, t] } else { vec![batch, c_out, t] };
            (Tensor::new(&shape, out)?, geom)
        };
        Ok(self.push(
            value,
            Op::Conv1d { x, w: kernel, b: bias, geom },
            self.rg(&[x, kernel, bias]),
        ))
    }

    /// Normalizes to zero mean and unit variance along `axis`, then applies
    /// `gain` and `bias` (both shaped `[len(axis)]`).
    pub fn layer_norm(&self, x: Var, gain: Var, bias: Var, axis: usize) -> Result<Var> {
        let rank = self.shape(x).len();
        if axis >= rank {
            return Err(Error::Contract(format!("layer_norm axis {axis} on rank {rank}")));
        }
        if axis + 1 == rank {
            return self.layer_norm_last(x, gain, bias);
        }
        let mut perm: Vec<usize> = (0..rank).filter(|&d| d != axis).collect();
        perm.push(axis);
        let mut inverse = vec![0; rank];
        for (d, &p) in perm.iter().enumerate() {
            inverse[p] = d;
        }
        let moved = self.permute(x, &perm)?;
        let normed = self.layer_norm_last(moved, gain, bias)?;
        self.permute(normed, &inverse)
    }

    fn layer_norm_last(&self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let (value, xhat, inv_std, clamped) = {
            let nodes = self.nodes.borrow();
            let (tx, tg, tb) = (&nodes[x.0].value, &nodes[gain.0].value, &nodes[bias.0].value);
            let c = *tx.shape.last().unwrap_or(&0);
            if tg.shape != [c] || tb.shape != [c] || c == 0 {
                return Err(Error::dim("layer_norm", &tx.shape, &tg.shape));
            }
            let rows = tx.len() / c;
            let mut out = vec![0.0; tx.len()];
            let mut xhat = vec![0.0; tx.len()];
            let mut inv_std = vec![0.0; rows];
            let mut clamped = vec![false; rows];
            for r in 0..rows {
                let row = &tx.data[r * c..(r + 1) * c];
                let mean = row.iter().sum::<f64>() / c as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
                clamped[r] = var <= LAYER_NORM_EPS;
                let inv = 1.0 / var.max(LAYER_NORM_EPS).sqrt();
                inv_std[r] = inv;
                for j in 0..c {
                    let h = (row[j] - mean) * inv;
                    xhat[r * c + j] = h;
                    out[r * c + j] = h * tg.data[j] + tb.data[j];
                }
            }
            (Tensor::new(&tx.shape, out)?, xhat, inv_std, clamped)
        };
        Ok(self.push(
            value,
            Op::LayerNorm { x, gain, bias, xhat, inv_std, clamped },
            self.rg(&[x, gain, bias]),
        ))
    }

    // ── shape manipulation ──────────────────────────────────────────

    /// Output axis `d` is input axis `perm[d]`.
    pub fn permute(&self, a: Var, perm: &[usize]) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            let mut seen = vec![false; t.rank()];
            if perm.len() != t.rank() || perm.iter().any(|&p| p >= t.rank() || std::mem::replace(&mut seen[p], true)) {
                return Err(Error::dim("permute", &t.shape, perm));
            }
            let (shape, data) = kernels::permute(&t.data, &t.shape, perm);
            Tensor::new(&shape, data)?
        };
        Ok(self.push(value, Op::Permute(a, perm.to_vec()), self.rg(&[a])))
    }

    pub fn reshape(&self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.nodes.borrow()[a.0].value.clone().reshape(shape)?;
        Ok(self.push(value, Op::Reshape(a), self.rg(&[a])))
    }

    /// Slice `[start, start+len)` along `axis`.
    pub fn narrow(&self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            if axis >= t.rank() || start + len > t.shape[axis] {
                return Err(Error::Contract(format!(
                    "narrow axis {axis} [{start}, {}) out of range for {:?}",
                    start + len,
                    t.shape
                )));
            }
            let (outer, n, inner) = kernels::axis_split(&t.shape, axis);
            let mut data = Vec::with_capacity(outer * len * inner);
            for o in 0..outer {
                let base = o * n * inner + start * inner;
                data.extend_from_slice(&t.data[base..base + len * inner]);
            }
            let mut shape = t.shape.clone();
            shape[axis] = len;
            Tensor::new(&shape, data)?
        };
        Ok(self.push(value, Op::Narrow { a, axis, start }, self.rg(&[a])))
    }

    /// Index `idx` along `axis`, dropping that axis.
    pub fn select(&self, a: Var, axis: usize, idx: usize) -> Result<Var> {
        let mut shape = self.shape(a);
        let sliced = self.narrow(a, axis, idx, 1)?;
        shape.remove(axis);
        self.reshape(sliced, &shape)
    }

    pub fn concat(&self, parts: &[Var], axis: usize) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let first = &nodes[parts.first().ok_or_else(|| Error::Contract("concat of nothing".into()))?.0].value;
            if axis >= first.rank() {
                return Err(Error::Contract(format!("concat axis {axis} on {:?}", first.shape)));
            }
            let mut shape = first.shape.clone();
            shape[axis] = 0;
            for p in parts {
                let s = &nodes[p.0].value.shape;
                let compatible = s.len() == first.rank()
                    && s.iter().zip(&first.shape).enumerate().all(|(d, (x, y))| d == axis || x == y);
                if !compatible {
                    return Err(Error::dim("concat", &first.shape, s));
                }
                shape[axis] += s[axis];
            }
            let (outer, _, inner) = kernels::axis_split(&shape, axis);
            let mut data = Vec::with_capacity(shape.iter().product());
            for o in 0..outer {
                for p in parts {
                    let t = &nodes[p.0].value;
                    let chunk = t.shape[axis] * inner;
                    data.extend_from_slice(&t.data[o * chunk..(o + 1) * chunk]);
                }
            }
            Tensor::new(&shape, data)?
        };
        Ok(self.push(value, Op::Concat(parts.to_vec(), axis), self.rg(parts)))
    }

    /// Stacks equally shaped tensors along a new axis.
    pub fn stack(&self, parts: &[Var], axis: usize) -> Result<Var> {
        let unsqueezed = parts
            .iter()
            .map(|&p| {
                let mut s = self.shape(p);
                if axis > s.len() {
                    return Err(Error::Contract(format!("stack axis {axis} on {s:?}")));
                }
                s.insert(axis, 1);
                self.reshape(p, &s)
            })
            .collect::<Result<Vec<_>>>()?;
        self.concat(&unsqueezed, axis)
    }

    /// Multiplies each leading row by a weight; `a` is viewed as
    /// `[weights.len() × rest]`.
    pub fn row_scale(&self, a: Var, weights: &[f64]) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            if weights.is_empty() || t.len() % weights.len() != 0 {
                return Err(Error::dim("row_scale", &t.shape, &[weights.len()]));
            }
            let inner = t.len() / weights.len();
            let data = t.data.iter().enumerate().map(|(i, &v)| v * weights[i / inner]).collect();
            Tensor::new(&t.shape, data)?
        };
        Ok(self.push(value, Op::RowScale(a, weights.into()), self.rg(&[a])))
    }

    // ── reductions ──────────────────────────────────────────────────

    pub fn sum(&self, a: Var) -> Var {
        let s = self.nodes.borrow()[a.0].value.sum();
        self.push(Tensor::scalar(s), Op::Sum(a), self.rg(&[a]))
    }

    pub fn mean(&self, a: Var) -> Var {
        let n = self.nodes.borrow()[a.0].value.len().max(1);
        let s = self.sum(a);
        self.scale(s, 1.0 / n as f64)
    }

    // ── reverse pass ────────────────────────────────────────────────

    /// Gradients of the scalar `loss` with respect to every node that
    /// requires grad. Fan-out contributions accumulate additively.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.0];
        if root.value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let node = &nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            propagate(&nodes, &mut grads, &node.op, &node.value, &g);
        }

        let grads = nodes
            .iter()
            .zip(grads)
            .map(|(node, g)| {
                if !node.requires_grad {
                    return None;
                }
                match (g, &node.op) {
                    (Some(g), _) => Some(Tensor::new(&node.value.shape, g).expect("grad shape")),
                    (None, Op::Leaf) => Some(Tensor::zeros(&node.value.shape)),
                    (None, _) => None,
                }
            })
            .collect();
        Ok(Gradients { grads })
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Accumulator for `v`'s gradient, or `None` when `v` needs none.
fn slot<'a>(nodes: &[Node], grads: &'a mut [Option<Vec<f64>>], v: Var) -> Option<&'a mut Vec<f64>> {
    let node = &nodes[v.0];
    if !node.requires_grad {
        return None;
    }
    Some(grads[v.0].get_or_insert_with(|| vec![0.0; node.value.len()]))
}

fn propagate(nodes: &[Node], grads: &mut [Option<Vec<f64>>], op: &Op, out: &Tensor, g: &[f64]) {
    let val = |v: Var| &nodes[v.0].value;
    match op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (m, k, n) = (val(*a).shape[0], val(*a).shape[1], val(*b).shape[1]);
            if let Some(ga) = slot(nodes, grads, *a) {
                kernels::matmul_nt(g, &val(*b).data, m, n, k, ga);
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                kernels::matmul_tn(&val(*a).data, g, k, m, n, gb);
            }
        }
        Op::MatMulNt(a, b) => {
            let (m, k, n) = (val(*a).shape[0], val(*a).shape[1], val(*b).shape[0]);
            if let Some(ga) = slot(nodes, grads, *a) {
                kernels::matmul_nn(g, &val(*b).data, m, n, k, ga);
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                kernels::matmul_tn(g, &val(*a).data, n, m, k, gb);
            }
        }
        Op::Bmm(a, b) => {
            let (bs, m, k) = (val(*a).shape[0], val(*a).shape[1], val(*a).shape[2]);
            let n = val(*b).shape[2];
            if let Some(ga) = slot(nodes, grads, *a) {
                for i in 0..bs {
                    kernels::matmul_nt(
                        &g[i * m * n..(i + 1) * m * n],
                        &val(*b).data[i * k * n..(i + 1) * k * n],
                        m,
                        n,
                        k,
                        &mut ga[i * m * k..(i + 1) * m * k],
                    );
                }
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                for i in 0..bs {
                    kernels::matmul_tn(
                        &val(*a).data[i * m * k..(i + 1) * m * k],
                        &g[i * m * n..(i + 1) * m * n],
                        k,
                        m,
                        n,
                        &mut gb[i * k * n..(i + 1) * k * n],
                    );
                }
            }
        }
        Op::BmmNt(a, b) => {
            let (bs, m, k) = (val(*a).shape[0], val(*a).shape[1], val(*a).shape[2]);
            let n = val(*b).shape[1];
            if let Some(ga) = slot(nodes, grads, *a) {
                for i in 0..bs {
                    kernels::matmul_nn(
                        &g[i * m * n..(i + 1) * m * n],
                        &val(*b).data[i * n * k..(i + 1) * n * k],
                        m,
                        n,
                        k,
                        &mut ga[i * m * k..(i + 1) * m * k],
                    );
                }
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                for i in 0..bs {
                    kernels::matmul_tn(
                        &g[i * m * n..(i + 1) * m * n],
                        &val(*a).data[i * m * k..(i + 1) * m * k],
                        n,
                        m,
                        k,
                        &mut gb[i * n * k..(i + 1) * n * k],
                    );
                }
            }
        }
        Op::Add(a, b) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                ga.iter_mut().zip(g).for_each(|(x, y)| *x += y);
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                gb.iter_mut().zip(g).for_each(|(x, y)| *x += y);
            }
        }
        Op::Sub(a, b) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                ga.iter_mut().zip(g).for_each(|(x, y)| *x += y);
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                gb.iter_mut().zip(g).for_each(|(x, y)| *x -= y);
            }
        }
        Op::Mul(a, b) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                let bv = &val(*b).data;
                for j in 0..g.len() {
                    ga[j] += g[j] * bv[j];
                }
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                let av = &val(*a).data;
                for j in 0..g.len() {
                    gb[j] += g[j] * av[j];
                }
            }
        }
        Op::Scale(a, s) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                ga.iter_mut().zip(g).for_each(|(x, y)| *x += y * s);
            }
        }
        Op::AddScalar(a) | Op::Reshape(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                ga.iter_mut().zip(g).for_each(|(x, y)| *x += y);
            }
        }
        Op::AddBias(a, b) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                ga.iter_mut().zip(g).for_each(|(x, y)| *x += y);
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                let c = gb.len();
                for (j, y) in g.iter().enumerate() {
                    gb[j % c] += y;
                }
            }
        }
        Op::Relu(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                let x = &val(*a).data;
                for j in 0..g.len() {
                    if x[j] > 0.0 {
                        ga[j] += g[j];
                    }
                }
            }
        }
        Op::Sigmoid(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for j in 0..g.len() {
                    let y = out.data[j];
                    ga[j] += g[j] * y * (1.0 - y);
                }
            }
        }
        Op::Tanh(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for j in 0..g.len() {
                    let y = out.data[j];
                    ga[j] += g[j] * (1.0 - y * y);
                }
            }
        }
        Op::Softplus(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                let x = &val(*a).data;
                for j in 0..g.len() {
                    ga[j] += g[j] * sigmoid(x[j]);
                }
            }
        }
        Op::Prelu(x, alpha) => {
            let xv = &val(*x).data;
            let s = val(*alpha).data[0];
            if let Some(gx) = slot(nodes, grads, *x) {
                for j in 0..g.len() {
                    gx[j] += if xv[j] > 0.0 { g[j] } else { s * g[j] };
                }
            }
            if let Some(ga) = slot(nodes, grads, *alpha) {
                ga[0] += xv
                    .iter()
                    .zip(g)
                    .filter(|(v, _)| **v <= 0.0)
                    .map(|(v, y)| v * y)
                    .sum::<f64>();
            }
        }
        Op::Conv1d { x, w, b, geom } => {
            let (xv, wv) = (&val(*x).data, &val(*w).data);
            // Accumulate into scratch buffers so each slot is borrowed alone.
            let mut gx = nodes[x.0].requires_grad.then(|| vec![0.0; xv.len()]);
            let mut gw = nodes[w.0].requires_grad.then(|| vec![0.0; wv.len()]);
            let mut gb = nodes[b.0].requires_grad.then(|| vec![0.0; geom.c_out]);
            kernels::conv1d_causal_backward(
                xv,
                wv,
                g,
                *geom,
                gx.as_deref_mut(),
                gw.as_deref_mut(),
                gb.as_deref_mut(),
            );
            for (v, part) in [(*x, gx), (*w, gw), (*b, gb)] {
                if let (Some(dst), Some(src)) = (slot(nodes, grads, v), part) {
                    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
                }
            }
        }
        Op::LayerNorm { x, gain, bias, xhat, inv_std, clamped } => {
            let gv = &val(*gain).data;
            let c = gv.len();
            let rows = inv_std.len();
            if let Some(gg) = slot(nodes, grads, *gain) {
                for j in 0..g.len() {
                    gg[j % c] += g[j] * xhat[j];
                }
            }
            if let Some(gb) = slot(nodes, grads, *bias) {
                for j in 0..g.len() {
                    gb[j % c] += g[j];
                }
            }
            if let Some(gx) = slot(nodes, grads, *x) {
                let cf = c as f64;
                for r in 0..rows {
                    let span = r * c..(r + 1) * c;
                    let gh: Vec<f64> = g[span.clone()].iter().zip(gv).map(|(a, b)| a * b).collect();
                    let xh = &xhat[span.clone()];
                    let mean_gh = gh.iter().sum::<f64>() / cf;
                    let mean_ghx = if clamped[r] {
                        0.0
                    } else {
                        gh.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / cf
                    };
                    for j in 0..c {
                        gx[r * c + j] += inv_std[r] * (gh[j] - mean_gh - xh[j] * mean_ghx);
                    }
                }
            }
        }
        Op::Permute(a, perm) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                let mut inverse = vec![0; perm.len()];
                for (d, &p) in perm.iter().enumerate() {
                    inverse[p] = d;
                }
                let (_, back) = kernels::permute(g, &out.shape, &inverse);
                ga.iter_mut().zip(back).for_each(|(x, y)| *x += y);
            }
        }
        Op::Narrow { a, axis, start } => {
            if let Some(ga) = slot(nodes, grads, *a) {
                let (outer, n, inner) = kernels::axis_split(&val(*a).shape, *axis);
                let len = out.shape[*axis];
                for o in 0..outer {
                    let dst = o * n * inner + start * inner;
                    let src = o * len * inner;
                    for j in 0..len * inner {
                        ga[dst + j] += g[src + j];
                    }
                }
            }
        }
        Op::Concat(parts, axis) => {
            let (outer, _, inner) = kernels::axis_split(&out.shape, *axis);
            let total = out.shape[*axis] * inner;
            let mut offset = 0;
            for p in parts {
                let chunk = val(*p).shape[*axis] * inner;
                if let Some(gp) = slot(nodes, grads, *p) {
                    for o in 0..outer {
                        let src = o * total + offset;
                        for j in 0..chunk {
                            gp[o * chunk + j] += g[src + j];
                        }
                    }
                }
                offset += chunk;
            }
        }
        Op::RowScale(a, w) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                let inner = g.len() / w.len();
                for j in 0..g.len() {
                    ga[j] += g[j] * w[j / inner];
                }
            }
        }
        Op::Sum(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                ga.iter_mut().for_each(|x| *x += g[0]);
            }
        }
    }
}

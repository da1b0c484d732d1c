//! Slice-level numeric kernels shared by the tape's forward and backward
//! passes. Everything here accumulates into `out` (`+=`).

use crate::error::{Error, Result};

pub(crate) fn matmul_dims(
    op: &'static str,
    a: &[usize],
    b: &[usize],
) -> Result<(usize, usize, usize)> {
    match (a, b) {
        ([m, k], [k2, n]) if k == k2 => Ok((*m, *k, *n)),
        _ => Err(Error::dim(op, a, b)),
    }
}

/// out[m×n] += a[m×k] · b[k×n]
pub(crate) fn matmul_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// out[m×n] += a[m×k] · b[n×k]ᵀ
pub(crate) fn matmul_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            out[i * n + j] += dot(arow, brow);
        }
    }
}

/// Dot product with four independent accumulators; fixed summation order.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// out[m×n] += a[k×m]ᵀ · b[k×n]
pub(crate) fn matmul_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for p in 0..k {
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let av = a[p * m + i];
            if av == 0.0 {
                continue;
            }
            let row = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// Geometry of a causal 1-D convolution over `[batch × c_in × t]` input.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub t: usize,
}

/// y[n,o,t] = bias[o] + Σ_{i,j} w[o,i,j] · x[n,i,t-(k-1)+j], zero for negative times.
pub(crate) fn conv1d_causal_forward(
    x: &[f64],
    w: &[f64],
    bias: &[f64],
    g: ConvGeom,
    out: &mut [f64],
) {
    let ConvGeom { batch, c_in, c_out, k, t } = g;
    for n in 0..batch {
        for o in 0..c_out {
            let yrow = &mut out[(n * c_out + o) * t..(n * c_out + o + 1) * t];
            yrow.iter_mut().for_each(|v| *v += bias[o]);
            for i in 0..c_in {
                let xrow = &x[(n * c_in + i) * t..(n * c_in + i + 1) * t];
                for j in 0..k {
                    let wv = w[(o * c_in + i) * k + j];
                    let lag = k - 1 - j;
                    if lag >= t {
                        continue;
                    }
                    for (y, xv) in yrow[lag..].iter_mut().zip(xrow) {
                        *y += wv * xv;
                    }
                }
            }
        }
    }
}

pub(crate) fn conv1d_causal_backward(
    x: &[f64],
    w: &[f64],
    gy: &[f64],
    g: ConvGeom,
    gx: Option<&mut [f64]>,
    gw: Option<&mut [f64]>,
    gb: Option<&mut [f64]>,
) {
    let ConvGeom { batch, c_in, c_out, k, t } = g;
    if let Some(gb) = gb {
        for n in 0..batch {
            for o in 0..c_out {
                gb[o] += gy[(n * c_out + o) * t..(n * c_out + o + 1) * t].iter().sum::<f64>();
            }
        }
    }
    if let Some(gw) = gw {
        for n in 0..batch {
            for o in 0..c_out {
                let grow = &gy[(n * c_out + o) * t..(n * c_out + o + 1) * t];
                for i in 0..c_in {
                    let xrow = &x[(n * c_in + i) * t..(n * c_in + i + 1) * t];
                    for j in 0..k {
                        let lag = k - 1 - j;
                        if lag >= t {
                            continue;
                        }
                        let acc: f64 = grow[lag..].iter().zip(xrow).map(|(g, x)| g * x).sum();
                        gw[(o * c_in + i) * k + j] += acc;
                    }
                }
            }
        }
    }
    if let Some(gx) = gx {
        for n in 0..batch {
            for o in 0..c_out {
                let grow = &gy[(n * c_out + o) * t..(n * c_out + o + 1) * t];
                for i in 0..c_in {
                    let xrow = &mut gx[(n * c_in + i) * t..(n * c_in + i + 1) * t];
                    for j in 0..k {
                        let wv = w[(o * c_in + i) * k + j];
                        let lag = k - 1 - j;
                        if lag >= t {
                            continue;
                        }
                        for (xv, g) in xrow.iter_mut().zip(&grow[lag..]) {
                            *xv += wv * g;
                        }
                    }
                }
            }
        }
    }
}

/// Row-major strides for a shape.
pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Output shape and data of axis permutation: out axis `d` is input axis `perm[d]`.
pub(crate) fn permute(data: &[f64], shape: &[usize], perm: &[usize]) -> (Vec<usize>, Vec<f64>) {
    let in_strides = strides(shape);
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let mut out = Vec::with_capacity(data.len());
    let rank = shape.len();
    if data.is_empty() {
        return (out_shape, out);
    }
    let mut idx = vec![0usize; rank];
    let mut offset = 0usize;
    loop {
        out.push(data[offset]);
        // odometer increment over the output index
        let mut d = rank;
        loop {
            if d == 0 {
                return (out_shape, out);
            }
            d -= 1;
            idx[d] += 1;
            offset += src_strides[d];
            if idx[d] < out_shape[d] {
                break;
            }
            offset -= src_strides[d] * idx[d];
            idx[d] = 0;
        }
    }
}

/// Splits a shape around `axis` into (outer, axis_len, inner).
pub(crate) fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stlstm::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_tensor(rng: &mut impl Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len(), "length mismatch");
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!((x - y).abs() <= tol, "index {i}: {x} vs {y} (tol {tol})");
    }
}

/// Naive triple loop, row-major.
pub fn matmul_oracle(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut s = 0.0;
            for p in 0..k {
                s += a[i * k + p] * b[p * n + j];
            }
            out[i * n + j] = s;
        }
    }
    out
}

/// Direct causal convolution: explicit zero padding, then a sliding dot product.
pub fn conv_oracle(x: &[f64], w: &[f64], b: &[f64], c_in: usize, c_out: usize, k: usize, t: usize) -> Vec<f64> {
    let padded_len = t + k - 1;
    let mut padded = vec![0.0; c_in * padded_len];
    for i in 0..c_in {
        for s in 0..t {
            padded[i * padded_len + k - 1 + s] = x[i * t + s];
        }
    }
    let mut out = vec![0.0; c_out * t];
    for o in 0..c_out {
        for s in 0..t {
            let mut acc = b[o];
            for i in 0..c_in {
                for j in 0..k {
                    acc += w[(o * c_in + i) * k + j] * padded[i * padded_len + s + j];
                }
            }
            out[o * t + s] = acc;
        }
    }
    out
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `a_norm = D^-1/2 (A + I) D^-1/2` for a full graph on `n` nodes, by
/// explicit loops.
pub fn full_graph_norm(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n * n]
}

/// Dense normalization oracle for an arbitrary symmetric 0/1 adjacency.
pub fn norm_oracle(a: &[f64], n: usize) -> Vec<f64> {
    let mut at = a.to_vec();
    for i in 0..n {
        at[i * n + i] += 1.0;
    }
    let d: Vec<f64> = (0..n).map(|i| (0..n).map(|j| at[i * n + j]).sum()).collect();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = at[i * n + j] / (d[i] * d[j]).sqrt();
        }
    }
    out
}

/// Random symmetric 0/1 adjacency without self-loops.
pub fn rand_adjacency(rng: &mut impl Rng, n: usize, p: f64) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                a[i * n + j] = 1.0;
                a[j * n + i] = 1.0;
            }
        }
    }
    a
}

/// Narrow model for fast tests; same topology as the default.
pub fn tiny_config(t_obs: usize, t_pred: usize) -> stlstm::ModelConfig {
    stlstm::ModelConfig {
        t_obs,
        t_pred,
        kernel_size: 3,
        tcn_hidden: 4,
        gcn_hidden: 6,
        gcn_out: 4,
        st_out: 4,
        enc_hidden: 5,
        dec_hidden: 6,
        pos_embed: 3,
        head_hidden: 4,
        ..stlstm::ModelConfig::default()
    }
}

/// A window with random positions for `n` live pedestrians.
pub fn rand_window(rng: &mut impl Rng, n: usize, t_obs: usize, t_pred: usize, spread: f64) -> stlstm::dataio::SequenceBatch {
    let mut track = |t: usize| {
        let data = (0..n * t * 2).map(|_| rng.random_range(-spread..spread)).collect();
        Tensor::new(&[n, t, 2], data).unwrap()
    };
    stlstm::dataio::SequenceBatch {
        scene_name: "random".into(),
        start_frame: 0,
        ped_ids: (1..=n as i64).collect(),
        positions_obs: track(t_obs),
        positions_gt: track(t_pred),
        node_mask: vec![true; n],
        origin: [0.0, 0.0],
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

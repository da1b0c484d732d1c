//! Per-timestep pedestrian graphs and the symmetric normalized adjacency
//! `D̃^{-1/2} (A + I) D̃^{-1/2}` used by the spatial convolution.
//!
//! Stored adjacency never carries self-loops; they exist only inside the
//! normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub n: usize,
    pub node_ids: Vec<i64>,
    /// `[n × 2]` positions in meters.
    pub features: Tensor,
    /// `[n × n]` binary, symmetric, zero diagonal.
    pub adjacency: Tensor,
    /// `[n × n]` normalized operator.
    pub a_norm: Tensor,
}

/// Links every pair of distinct pedestrians, or only pairs at most
/// `radius` meters apart when a radius is given.
pub fn build_snapshot(
    positions: &[[f64; 2]],
    ids: &[i64],
    radius: Option<f64>,
) -> Result<GraphSnapshot> {
    let n = positions.len();
    if n == 0 {
        return Err(Error::Contract("cannot build a graph with zero nodes".into()));
    }
    if ids.len() != n {
        return Err(Error::dim("build_snapshot ids", &[n], &[ids.len()]));
    }
    let adjacency = adjacency_matrix(positions, radius);
    let a_norm = normalize_adjacency(&adjacency)?;
    let features = Tensor::new(&[n, 2], positions.iter().flatten().copied().collect())?;
    Ok(GraphSnapshot {
        n,
        node_ids: ids.to_vec(),
        features,
        adjacency,
        a_norm,
    })
}

pub fn adjacency_matrix(positions: &[[f64; 2]], radius: Option<f64>) -> Tensor {
    let n = positions.len();
    let mut a = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let linked = match radius {
                None => true,
                Some(r) => {
                    let dx = positions[i][0] - positions[j][0];
                    let dy = positions[i][1] - positions[j][1];
                    dx.hypot(dy) <= r
                }
            };
            if linked {
                a.data_mut()[i * n + j] = 1.0;
            }
        }
    }
    a
}

/// Entry `(i, j)` of the result is `Ã_ij / sqrt(D̃_ii · D̃_jj)` with
/// `Ã = A + I` and `D̃_ii = Σ_j Ã_ij`.
pub fn normalize_adjacency(a: &Tensor) -> Result<Tensor> {
    let n = match a.shape() {
        [r, c] if r == c => *r,
        s => return Err(Error::dim("normalize_adjacency", s, s)),
    };
    let d = a.data();
    for i in 0..n {
        if d[i * n + i] != 0.0 {
            return Err(Error::Contract(format!(
                "adjacency diagonal must be zero; entry ({i},{i}) = {}",
                d[i * n + i]
            )));
        }
        for j in i + 1..n {
            if d[i * n + j] != d[j * n + i] {
                return Err(Error::Contract(format!(
                    "adjacency is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    let degree: Vec<f64> = (0..n)
        .map(|i| 1.0 + d[i * n..(i + 1) * n].iter().sum::<f64>())
        .collect();
    let mut out = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            let tilde = d[i * n + j] + if i == j { 1.0 } else { 0.0 };
            if tilde != 0.0 {
                out.data_mut()[i * n + j] = tilde / (degree[i] * degree[j]).sqrt();
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node_graph() {
        let g = build_snapshot(&[[1.0, 2.0]], &[7], None).unwrap();
        assert_eq!(g.adjacency.data(), &[0.0]);
        assert_eq!(g.a_norm.data(), &[1.0]);
    }

    #[test]
    fn two_nodes_fully_connected() {
        let g = build_snapshot(&[[0.0, 0.0], [5.0, 0.0]], &[1, 2], None).unwrap();
        assert_eq!(g.adjacency.data(), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(g.a_norm.data(), &[0.5; 4]);
    }

    #[test]
    fn radius_cutoff_isolates_distant_nodes() {
        let g = build_snapshot(&[[0.0, 0.0], [3.0, 0.0]], &[1, 2], Some(2.0)).unwrap();
        assert_eq!(g.adjacency.data(), &[0.0; 4]);
        assert_eq!(g.a_norm, Tensor::eye(2));
    }

    #[test]
    fn radius_is_inclusive() {
        let g = build_snapshot(&[[0.0, 0.0], [2.0, 0.0]], &[1, 2], Some(2.0)).unwrap();
        assert_eq!(g.adjacency.at(&[0, 1]), 1.0);
    }

    #[test]
    fn empty_graph_is_an_error() {
        assert!(matches!(
            build_snapshot(&[], &[], None),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn asymmetric_adjacency_rejected() {
        let a = Tensor::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(normalize_adjacency(&a), Err(Error::Contract(_))));
    }

    #[test]
    fn self_loop_in_stored_adjacency_rejected() {
        let a = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(normalize_adjacency(&a).is_err());
    }

    #[test]
    fn isolated_node_keeps_unit_self_loop() {
        // node 2 has no edges
        let a = Tensor::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let an = normalize_adjacency(&a).unwrap();
        assert_eq!(&an.data()[6..9], &[0.0, 0.0, 1.0]);
    }
}

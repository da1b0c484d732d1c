mod common;

use common::*;
use rand::seq::SliceRandom;
use rand::Rng;
use stlstm::graph::{build_snapshot, normalize_adjacency};
use stlstm::tensor::Tensor;

fn norm(a: &[f64], n: usize) -> Vec<f64> {
    normalize_adjacency(&Tensor::new(&[n, n], a.to_vec()).unwrap())
        .unwrap()
        .into_data()
}

#[test]
fn two_connected_nodes_are_one_half() {
    assert_eq!(norm(&[0.0, 1.0, 1.0, 0.0], 2), vec![0.5; 4]);
}

#[test]
fn path_graph_closed_form() {
    // degrees with self-loops are 2, 3, 2
    let a = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
    let r6 = 1.0 / 6f64.sqrt();
    let expect = [0.5, r6, 0.0, r6, 1.0 / 3.0, r6, 0.0, r6, 0.5];
    assert_close(&norm(&a, 3), &expect, 1e-12);
}

#[test]
fn jacobi_oracle_on_known_spectra() {
    assert_close(&jacobi_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2), &[1.0, 3.0], 1e-12);
    // full graph: the operator is the averaging projector
    assert_close(&jacobi_eigenvalues(&full_graph_norm(4), 4), &[0.0, 0.0, 0.0, 1.0], 1e-12);
}

#[test]
fn random_graphs_match_oracle_and_spectrum_is_bounded() {
    let mut r = rng(20);
    for _ in 0..100 {
        let n = r.random_range(1..=8);
        let p = r.random_range(0.0..1.0);
        let a = rand_adjacency(&mut r, n, p);
        let out = norm(&a, n);
        assert_close(&out, &norm_oracle(&a, n), 1e-12);
        for i in 0..n {
            for j in 0..n {
                assert_eq!(out[i * n + j], out[j * n + i]);
            }
        }
        for ev in jacobi_eigenvalues(&out, n) {
            assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&ev), "eigenvalue {ev}");
        }
    }
}

#[test]
fn normalization_commutes_with_permutation() {
    let mut r = rng(21);
    for _ in 0..50 {
        let n = r.random_range(2..=8);
        let a = rand_adjacency(&mut r, n, 0.5);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let pa: Vec<f64> = (0..n * n).map(|k| a[perm[k / n] * n + perm[k % n]]).collect();
        let base = norm(&a, n);
        let moved = norm(&pa, n);
        for k in 0..n * n {
            assert!((moved[k] - base[perm[k / n] * n + perm[k % n]]).abs() < 1e-12);
        }
    }
}

#[test]
fn snapshot_from_positions() {
    let g = build_snapshot(&[[0.0, 0.0], [3.0, 4.0], [0.0, 1.0]], &[7, 8, 9], Some(1.0)).unwrap();
    assert_eq!(g.adjacency.data(), &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    assert_eq!(g.a_norm.at(&[1, 1]), 1.0);
    assert_eq!(g.features.shape(), &[3, 2]);
    let full = build_snapshot(&[[0.0, 0.0], [30.0, 40.0]], &[1, 2], None).unwrap();
    assert_eq!(full.a_norm.data(), &[0.5; 4]);
}

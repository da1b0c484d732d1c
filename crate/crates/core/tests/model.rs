mod common;

use common::*;
use rand::seq::SliceRandom;
use rand::Rng;
use stlstm::dataio::SequenceBatch;
use stlstm::model::checkpoint::{self, from_bytes, to_bytes, MAGIC};
use stlstm::model::gradcheck::GradSuiteConfig;
use stlstm::model::PaddedBatch;
use stlstm::tensor::{Tape, Tensor};
use stlstm::{Error, ModelConfig, StLstm};

#[test]
fn padded_batch_layout() {
    let mut r = rng(80);
    let a = rand_window(&mut r, 2, 4, 3, 1.0);
    let mut b = rand_window(&mut r, 3, 4, 3, 1.0);
    b.node_mask[1] = false;
    let batch = PaddedBatch::new(&[&a, &b], None).unwrap();
    assert_eq!((batch.batch, batch.n_max), (2, 3));
    assert_eq!(batch.mask, vec![1.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    assert_eq!(batch.counts, vec![2, 2]);
    assert_eq!(batch.obs.shape(), &[6, 4, 2]);
    assert_eq!(batch.a_norm.shape(), &[8, 3, 3]);
    // masked-out pedestrians carry no positions
    assert!(batch.obs.data()[4 * 8..5 * 8].iter().all(|&v| v == 0.0));
    // reconstruction weights sum to one over all graphs
    let total: f64 = batch.recon_weight.data().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    // padded nodes only keep a self-loop in the operator
    let g0 = &batch.a_norm.data()[..9];
    assert_eq!(g0, &[0.5, 0.5, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 1.0]);
}

#[test]
fn padded_batch_rejects_mixed_horizons() {
    let mut r = rng(81);
    let a = rand_window(&mut r, 2, 4, 3, 1.0);
    let b = rand_window(&mut r, 2, 5, 3, 1.0);
    assert!(PaddedBatch::new(&[&a, &b], None).is_err());
    assert!(PaddedBatch::new(&[], None).is_err());
}

#[test]
fn forward_shapes() {
    let mut r = rng(82);
    let cfg = ModelConfig { t_obs: 8, t_pred: 12, ..ModelConfig::default() };
    let model = StLstm::new(cfg.clone(), 1).unwrap();
    let w = rand_window(&mut r, 3, 8, 12, 2.0);
    let batch = PaddedBatch::new(&[&w], None).unwrap();
    let tape = Tape::new();
    let p = model.params.bind(&tape);
    let out = model.forward(&tape, &p, &batch, false).unwrap();
    assert_eq!(tape.shape(out.pred), vec![3, 12, 2]);
    assert_eq!(tape.shape(out.features), vec![3, 8, cfg.feature_channels()]);
    assert_eq!(tape.shape(out.spatial), vec![8, 3, cfg.gcn_out]);

    let short = StLstm::new(ModelConfig { t_obs: 6, ..cfg }, 1).unwrap();
    let tape = Tape::new();
    let p = short.params.bind(&tape);
    assert!(matches!(short.forward(&tape, &p, &batch, false), Err(Error::Contract(_))));
}

#[test]
fn stacked_blocks_run() {
    let mut r = rng(83);
    let cfg = ModelConfig { blocks: 2, norm_each_sublayer: true, ..tiny_config(5, 4) };
    let model = StLstm::new(cfg, 2).unwrap();
    let w = rand_window(&mut r, 2, 5, 4, 1.0);
    let pred = model.predict_many(&[w]).unwrap();
    assert_eq!(pred[0].shape(), &[2, 4, 2]);
    assert!(pred[0].is_finite());
}

#[test]
fn initialization_is_seeded() {
    let a = StLstm::new(ModelConfig::default(), 4).unwrap();
    let b = StLstm::new(ModelConfig::default(), 4).unwrap();
    let c = StLstm::new(ModelConfig::default(), 5).unwrap();
    assert_eq!(a.params.tensors(), b.params.tensors());
    assert_ne!(a.params.tensors(), c.params.tensors());
    let f = a.params.by_name("decoder.bias").unwrap();
    let h = a.config.dec_hidden;
    assert!(f.data()[h..2 * h].iter().all(|&v| v == 1.0));
    assert_eq!(a.params.by_name("st0.prelu1").unwrap().data(), &[0.25]);
}

fn permute_window(w: &SequenceBatch, perm: &[usize]) -> SequenceBatch {
    let pick = |t: &Tensor| {
        let row = t.len() / w.n();
        let data = perm.iter().flat_map(|&p| t.data()[p * row..(p + 1) * row].to_vec()).collect();
        Tensor::new(t.shape(), data).unwrap()
    };
    SequenceBatch {
        ped_ids: perm.iter().map(|&p| w.ped_ids[p]).collect(),
        positions_obs: pick(&w.positions_obs),
        positions_gt: pick(&w.positions_gt),
        node_mask: perm.iter().map(|&p| w.node_mask[p]).collect(),
        ..w.clone()
    }
}

#[test]
fn full_forward_is_permutation_equivariant() {
    let mut r = rng(84);
    let model = StLstm::new(ModelConfig { t_obs: 8, t_pred: 12, ..ModelConfig::default() }, 9).unwrap();
    for _ in 0..10 {
        let n = r.random_range(2..=5);
        let w = rand_window(&mut r, n, 8, 12, 3.0);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let base = model.predict_many(std::slice::from_ref(&w)).unwrap().remove(0);
        let moved = model.predict_many(&[permute_window(&w, &perm)]).unwrap().remove(0);
        let row = 12 * 2;
        for i in 0..n {
            assert_close(&moved.data()[i * row..(i + 1) * row], &base.data()[perm[i] * row..(perm[i] + 1) * row], 1e-12);
        }
    }
}

#[test]
fn batching_does_not_change_predictions() {
    let mut r = rng(85);
    let model = StLstm::new(tiny_config(4, 3), 3).unwrap();
    let ws: Vec<SequenceBatch> = (0..4).map(|k| rand_window(&mut r, 1 + k, 4, 3, 2.0)).collect();
    let together = model.predict_many(&ws).unwrap();
    for (w, t) in ws.iter().zip(&together) {
        let alone = model.predict_many(std::slice::from_ref(w)).unwrap().remove(0);
        assert_close(t.data(), alone.data(), 1e-12);
    }
}

#[test]
fn checkpoint_round_trip() {
    let model = StLstm::new(tiny_config(4, 3), 6).unwrap();
    let meta = serde_json::json!({"epochs": 3});
    let bytes = to_bytes(&model, meta.clone()).unwrap();
    assert_eq!(&bytes[..8], MAGIC);
    let (back, m) = from_bytes(&bytes).unwrap();
    assert_eq!(back.config, model.config);
    assert_eq!(back.params.tensors(), model.params.tensors());
    assert_eq!(back.params.names(), model.params.names());
    assert_eq!(m, meta);
    assert_eq!(to_bytes(&back, meta).unwrap(), bytes);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    checkpoint::save(&model, serde_json::Value::Null, &path).unwrap();
    assert_eq!(checkpoint::load(&path).unwrap().0.params.tensors(), model.params.tensors());
}

fn rewrite_header(bytes: &[u8], edit: impl Fn(&mut serde_json::Value)) -> Vec<u8> {
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let mut header: serde_json::Value = serde_json::from_slice(&bytes[16..16 + len]).unwrap();
    edit(&mut header);
    let json = serde_json::to_vec(&header).unwrap();
    let mut out = MAGIC.to_vec();
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&bytes[16 + len..]);
    out
}

#[test]
fn checkpoint_rejects_bad_input() {
    let model = StLstm::new(tiny_config(4, 3), 6).unwrap();
    let bytes = to_bytes(&model, serde_json::Value::Null).unwrap();

    let v2 = rewrite_header(&bytes, |h| h["version"] = 2.into());
    assert!(matches!(from_bytes(&v2), Err(Error::Checkpoint(m)) if m.contains("version")));
    let nover = rewrite_header(&bytes, |h| {
        h.as_object_mut().unwrap().remove("version");
    });
    assert!(matches!(from_bytes(&nover), Err(Error::Checkpoint(_))));

    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(matches!(from_bytes(&magic), Err(Error::Checkpoint(_))));
    assert!(from_bytes(&bytes[..bytes.len() - 8]).is_err());
    assert!(from_bytes(&bytes[..20]).is_err());

    let renamed = rewrite_header(&bytes, |h| h["params"][0]["name"] = "nope".into());
    assert!(matches!(from_bytes(&renamed), Err(Error::Checkpoint(_))));
    let reshaped = rewrite_header(&bytes, |h| h["params"][0]["shape"] = serde_json::json!([1]));
    assert!(matches!(from_bytes(&reshaped), Err(Error::Checkpoint(_))));
}

#[test]
fn narrow_model_gradients_match_finite_differences() {
    // same loss as the default-width suite, on a model small enough to run with the unit tests
    let model = StLstm::new(tiny_config(3, 2), 0).unwrap();
    let mut r = rng(86);
    let w = rand_window(&mut r, 2, 3, 2, 2.0);
    let batch = PaddedBatch::new(&[&w], None).unwrap();
    let report = stlstm::tensor::grad_check(
        |tape: &Tape, v: &[stlstm::Var]| {
            let p = stlstm::model::Bound::from_vars(v.to_vec());
            Ok(stlstm::train_eval::batch_loss(&model, tape, &p, &batch, 0.1, false)?.0)
        },
        model.params.tensors(),
        1e-5,
    )
    .unwrap();
    assert!(report.passed(1e-4), "{report:?}");
}

#[test]
fn suite_defaults() {
    let cfg = GradSuiteConfig::default();
    assert_eq!((cfg.h, cfg.tolerance, cfg.pedestrians, cfg.t_obs, cfg.t_pred), (1e-5, 1e-4, 2, 4, 3));
    assert!(!cfg.corrupt);
}

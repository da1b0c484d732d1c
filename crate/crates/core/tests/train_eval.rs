mod common;

use common::*;
use rand::seq::SliceRandom;
use rand::Rng;
use stlstm::dataio::{make_sequences, synth_mixture, synth_scenario, Observation, ScenarioKind, ScenarioParams, Scene};
use stlstm::model::ParamStore;
use stlstm::tensor::{Tape, Tensor};
use stlstm::train_eval::loo::{fold_name, leave_one_out};
use stlstm::train_eval::metrics::{per_node_errors, COLLISION_THRESHOLD};
use stlstm::train_eval::{
    ade, collision_rate, evaluate, fde, l2_loss, linear_baseline, sampled_collision_rate, sgd_step, total_loss, train,
    train_on_sequences, CollisionProtocol, EvalOptions, LinearBaseline, Predictor, TrainConfig,
};
use stlstm::{Error, StLstm};

fn l2(pred: &Tensor, gt: &Tensor, mask: &[f64]) -> stlstm::Result<f64> {
    let tape = Tape::new();
    let l = l2_loss(&tape, tape.constant(pred.clone()), tape.constant(gt.clone()), mask)?;
    let v = tape.value(l).item()?;
    Ok(v)
}

fn l2_oracle(pred: &[f64], gt: &[f64], mask: &[f64], n: usize, t: usize) -> f64 {
    let mut s = 0.0;
    let mut count = 0.0;
    for i in 0..n {
        if mask[i] == 0.0 {
            continue;
        }
        for k in 0..t {
            let at = (i * t + k) * 2;
            s += (pred[at] - gt[at]).powi(2) + (pred[at + 1] - gt[at + 1]).powi(2);
            count += 1.0;
        }
    }
    s / count
}

fn offset(t: &Tensor, dx: f64, dy: f64) -> Tensor {
    let mut out = t.clone();
    for (j, v) in out.data_mut().iter_mut().enumerate() {
        *v += if j % 2 == 0 { dx } else { dy };
    }
    out
}

#[test]
fn l2_loss_examples_and_oracle() {
    let mut r = rng(70);
    let gt = rand_tensor(&mut r, &[3, 5, 2]);
    assert_eq!(l2(&gt, &gt, &[1.0; 3]).unwrap(), 0.0);
    assert!((l2(&offset(&gt, 0.3, 0.4), &gt, &[1.0; 3]).unwrap() - 0.25).abs() < 1e-12);
    assert!(matches!(l2(&gt, &gt, &[0.0; 3]), Err(Error::Contract(_))));
    for _ in 0..100 {
        let n = r.random_range(1..=4);
        let t = r.random_range(1..=8);
        let p = rand_tensor(&mut r, &[n, t, 2]);
        let g = rand_tensor(&mut r, &[n, t, 2]);
        let mut mask: Vec<f64> = (0..n).map(|_| if r.random_bool(0.7) { 1.0 } else { 0.0 }).collect();
        mask[0] = 1.0;
        assert!((l2(&p, &g, &mask).unwrap() - l2_oracle(p.data(), g.data(), &mask, n, t)).abs() < 1e-10);
    }
}

fn total(pred: &Tensor, gt: &Tensor, mask: &[f64], h: &Tensor, target: &Tensor, weight: &Tensor, lambda: f64) -> f64 {
    let tape = Tape::new();
    let k = |t: &Tensor| tape.constant(t.clone());
    let l = total_loss(&tape, k(pred), k(gt), mask, k(h), target, weight, lambda).unwrap();
    let v = tape.value(l).item().unwrap();
    v
}

#[test]
fn total_loss_composition() {
    let mut r = rng(71);
    let (n, t, d) = (3, 4, 2);
    let pred = rand_tensor(&mut r, &[n, t, 2]);
    let gt = rand_tensor(&mut r, &[n, t, 2]);
    let mask = [1.0; 3];
    let h = rand_tensor(&mut r, &[2, n, d]);
    let adj = rand_adjacency(&mut r, n, 0.5);
    let mut target = Tensor::zeros(&[2, n, n]);
    for g in 0..2 {
        for i in 0..n {
            for j in 0..n {
                target.data_mut()[(g * n + i) * n + j] = if i == j { 1.0 } else { adj[i * n + j] };
            }
        }
    }
    let weight = Tensor::full(&[2, n, n], 1.0 / (2.0 * (n * n) as f64));

    assert_eq!(total(&pred, &gt, &mask, &h, &target, &weight, 0.0), l2(&pred, &gt, &mask).unwrap());

    // mean over graphs of the per-graph enumeration oracle
    let rec: f64 = (0..2)
        .map(|g| {
            let hd = &h.data()[g * n * d..(g + 1) * n * d];
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let z: f64 = (0..d).map(|k| hd[i * d + k] * hd[j * d + k]).sum();
                    let y = target.data()[(g * n + i) * n + j];
                    s -= y * sigmoid(z).ln() + (1.0 - y) * (1.0 - sigmoid(z)).ln();
                }
            }
            s / (n * n) as f64
        })
        .sum::<f64>()
        / 2.0;
    let expect = l2_oracle(pred.data(), gt.data(), &mask, n, t) + 0.3 * rec;
    assert!((total(&pred, &gt, &mask, &h, &target, &weight, 0.3) - expect).abs() < 1e-10);

    // perfect prediction and saturated reconstruction
    let mut hs = Tensor::zeros(&[1, 2, 2]);
    hs.data_mut().copy_from_slice(&[6.0, 0.0, 6.0, 0.0]);
    let full = Tensor::ones(&[1, 2, 2]);
    let w = Tensor::full(&[1, 2, 2], 0.25);
    let p2 = rand_tensor(&mut r, &[2, 3, 2]);
    assert!(total(&p2, &p2, &[1.0, 1.0], &hs, &full, &w, 0.1) < 1e-6);
}

fn store(values: &[f64]) -> ParamStore {
    let mut s = ParamStore::new();
    s.add("p", Tensor::new(&[values.len()], values.to_vec()).unwrap());
    s
}

#[test]
fn sgd_examples() {
    let mut s = store(&[1.0, -2.0]);
    sgd_step(&mut s, &[Tensor::zeros(&[2])], 0.5, 10.0).unwrap();
    assert_eq!(s.tensors()[0].data(), &[1.0, -2.0]);

    let mut s = store(&[1.0]);
    sgd_step(&mut s, &[Tensor::full(&[1], 2.0)], 0.1, f64::INFINITY).unwrap();
    assert!((s.tensors()[0].data()[0] - 0.8).abs() < 1e-15);

    let mut s = store(&[0.0, 0.0]);
    let norm = sgd_step(&mut s, &[Tensor::new(&[2], vec![12.0, 16.0]).unwrap()], 1.0, 10.0).unwrap();
    assert_eq!(norm, 20.0);
    assert_eq!(s.tensors()[0].data(), &[-6.0, -8.0]);

    let mut s = store(&[0.0]);
    let res = sgd_step(&mut s, &[Tensor::full(&[1], f64::NAN)], 0.1, 10.0);
    assert!(matches!(res, Err(Error::Numerical(msg)) if msg.contains('p')));
}

#[test]
fn sgd_decreases_convex_quadratic() {
    // f(p) = ½ pᵀ diag(c) p, curvature bound 2 / max(c)
    let c = [1.0, 3.0, 0.5];
    let f = |p: &[f64]| 0.5 * p.iter().zip(&c).map(|(x, k)| k * x * x).sum::<f64>();
    let mut s = store(&[1.0, -1.0, 2.0]);
    for _ in 0..20 {
        let before = f(s.tensors()[0].data());
        let g: Vec<f64> = s.tensors()[0].data().iter().zip(&c).map(|(x, k)| k * x).collect();
        sgd_step(&mut s, &[Tensor::new(&[3], g).unwrap()], 0.5, f64::INFINITY).unwrap();
        assert!(f(s.tensors()[0].data()) < before);
    }
}

fn quick_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 4,
        lr: 0.01,
        t_obs: 4,
        t_pred: 3,
        seed: 3,
        ..TrainConfig::default()
    }
}

fn small_scenes() -> Vec<Scene> {
    vec![
        synth_mixture(&[ScenarioKind::Meeting, ScenarioKind::Following], 24, 0.0, 1).unwrap(),
        synth_scenario(ScenarioKind::Merge, &ScenarioParams::for_kind(ScenarioKind::Merge), 0).unwrap(),
    ]
}

#[test]
fn training_is_deterministic() {
    let mc = tiny_config(4, 3);
    let a = train(&mc, &quick_config(3), &small_scenes()).unwrap();
    let b = train(&mc, &quick_config(3), &small_scenes()).unwrap();
    assert_eq!(a.loss_curve.len(), 3);
    assert_eq!(
        a.loss_curve.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.loss_curve.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    assert_eq!(a.model.params.tensors(), b.model.params.tensors());
}

#[test]
fn zero_learning_rate_keeps_loss_constant() {
    let scenes = vec![synth_scenario(ScenarioKind::Meeting, &ScenarioParams { frames: 30, ..ScenarioParams::default() }, 0).unwrap()];
    let out = train(&tiny_config(4, 3), &TrainConfig { lr: 0.0, ..quick_config(4) }, &scenes).unwrap();
    for v in &out.loss_curve {
        assert!((v - out.loss_curve[0]).abs() <= 1e-12 * out.loss_curve[0].abs());
    }
}

#[test]
fn training_without_windows_is_usage_error() {
    let short = synth_scenario(ScenarioKind::Meeting, &ScenarioParams::default(), 0).unwrap();
    let cfg = TrainConfig { t_obs: 8, t_pred: 20, ..quick_config(1) };
    assert!(matches!(train(&tiny_config(8, 20), &cfg, &[short]), Err(Error::Usage(_))));
    let mut model = StLstm::new(tiny_config(4, 3), 0).unwrap();
    assert!(matches!(train_on_sequences(&mut model, &quick_config(1), &[]), Err(Error::Usage(_))));
}

#[test]
fn training_reduces_loss_on_meeting_scene() {
    let scene = synth_scenario(ScenarioKind::Meeting, &ScenarioParams { frames: 40, ..ScenarioParams::default() }, 0).unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 8,
        lr: 0.01,
        seed: 1,
        ..TrainConfig::default()
    };
    let out = train(&stlstm::ModelConfig::default(), &cfg, &[scene]).unwrap();
    let (first, last) = (out.loss_curve[0], *out.loss_curve.last().unwrap());
    assert!(last < 0.05 * first, "epoch 1 {first}, final {last}");
}

// ---- metrics ----

fn ade_oracle(p: &[f64], g: &[f64], n: usize, t: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for k in 0..t {
            let at = (i * t + k) * 2;
            s += ((p[at] - g[at]).powi(2) + (p[at + 1] - g[at + 1]).powi(2)).sqrt();
        }
    }
    s / (n * t) as f64
}

fn fde_oracle(p: &[f64], g: &[f64], n: usize, t: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        let at = (i * t + t - 1) * 2;
        s += ((p[at] - g[at]).powi(2) + (p[at + 1] - g[at + 1]).powi(2)).sqrt();
    }
    s / n as f64
}

#[test]
fn ade_fde_examples() {
    let mut r = rng(72);
    let gt = rand_tensor(&mut r, &[2, 12, 2]);
    assert_eq!(ade(&gt, &gt).unwrap(), 0.0);
    assert_eq!(fde(&gt, &gt).unwrap(), 0.0);
    let off = offset(&gt, 0.3, 0.4);
    assert!((ade(&off, &gt).unwrap() - 0.5).abs() < 1e-12);
    assert!((fde(&off, &gt).unwrap() - 0.5).abs() < 1e-12);

    let mut last = gt.clone();
    for i in 0..2 {
        last.data_mut()[(i * 12 + 11) * 2] += 1.0;
    }
    assert!((fde(&last, &gt).unwrap() - 1.0).abs() < 1e-12);
    assert!((ade(&last, &gt).unwrap() - 1.0 / 12.0).abs() < 1e-12);
    assert!(matches!(ade(&gt, &Tensor::zeros(&[2, 11, 2])), Err(Error::Dimension { .. })));
}

#[test]
fn ade_fde_oracles_and_invariants() {
    let mut r = rng(73);
    for _ in 0..100 {
        let n = r.random_range(1..=4);
        let t = r.random_range(1..=8);
        let p = rand_tensor(&mut r, &[n, t, 2]);
        let g = rand_tensor(&mut r, &[n, t, 2]);
        let a = ade(&p, &g).unwrap();
        let f = fde(&p, &g).unwrap();
        assert!((a - ade_oracle(p.data(), g.data(), n, t)).abs() < 1e-10);
        assert!((f - fde_oracle(p.data(), g.data(), n, t)).abs() < 1e-10);
        assert_eq!(a, ade(&g, &p).unwrap());
        let (dx, dy) = (r.random_range(-50.0..50.0), r.random_range(-50.0..50.0));
        assert!((ade(&offset(&p, dx, dy), &offset(&g, dx, dy)).unwrap() - a).abs() < 1e-12);
        assert!((fde(&offset(&p, dx, dy), &offset(&g, dx, dy)).unwrap() - f).abs() < 1e-12);
        let worst = per_node_errors(&p, &g)
            .unwrap()
            .iter()
            .map(|_| ())
            .count();
        assert_eq!(worst, n);
        let max_step = (0..n * t)
            .map(|k| ((p.data()[2 * k] - g.data()[2 * k]).powi(2) + (p.data()[2 * k + 1] - g.data()[2 * k + 1]).powi(2)).sqrt())
            .fold(0.0, f64::max);
        assert!(a <= max_step + 1e-12 && f <= max_step + 1e-12);
    }
}

fn collision_oracle(frames: &[Vec<[f64; 2]>], thr: f64) -> f64 {
    let mut total = 0.0;
    for f in frames {
        if f.len() < 2 {
            continue;
        }
        let mut hit = vec![false; f.len()];
        for i in 0..f.len() {
            for j in i + 1..f.len() {
                let d = ((f[i][0] - f[j][0]).powi(2) + (f[i][1] - f[j][1]).powi(2)).sqrt();
                if d < thr {
                    hit[i] = true;
                    hit[j] = true;
                }
            }
        }
        total += hit.iter().filter(|&&h| h).count() as f64 / f.len() as f64;
    }
    100.0 * total / frames.len() as f64
}

#[test]
fn collision_examples() {
    assert_eq!(collision_rate(&[vec![[0.0, 0.0], [0.05, 0.0]]], 0.10), 100.0);
    assert_eq!(collision_rate(&[vec![[0.0, 0.0], [0.10, 0.0]]], 0.10), 0.0);
    let three = collision_rate(&[vec![[0.0, 0.0], [0.05, 0.0], [10.0, 0.0]]], 0.10);
    assert!((three - 200.0 / 3.0).abs() < 1e-10);
    assert_eq!(collision_rate(&[vec![[0.0, 0.0]]], 0.10), 0.0);
    assert_eq!(collision_rate(&[vec![[0.0, 0.0], [0.0, 0.0]]], 0.0), 0.0);
}

#[test]
fn collision_oracle_and_invariants() {
    let mut r = rng(74);
    for _ in 0..100 {
        let frames: Vec<Vec<[f64; 2]>> = (0..r.random_range(1..=8))
            .map(|_| {
                (0..r.random_range(0..=4))
                    .map(|_| [r.random_range(0.0..0.3), r.random_range(0.0..0.3)])
                    .collect()
            })
            .collect();
        let c = collision_rate(&frames, COLLISION_THRESHOLD);
        assert!((c - collision_oracle(&frames, COLLISION_THRESHOLD)).abs() < 1e-10);
        assert!((0.0..=100.0).contains(&c));
        let mut shuffled = frames.clone();
        for f in &mut shuffled {
            f.shuffle(&mut r);
        }
        assert_eq!(collision_rate(&shuffled, COLLISION_THRESHOLD), c);
        assert!(collision_rate(&frames, 0.2) >= c);
        assert!(collision_rate(&frames, 0.05) <= c);
    }
}

fn scene_from(tracks: &[(i64, Vec<[f64; 2]>)]) -> Scene {
    let mut obs = Vec::new();
    for (ped, track) in tracks {
        for (k, p) in track.iter().enumerate() {
            obs.push(Observation { frame: 10 * k as i64, ped: *ped, x: p[0], y: p[1] });
        }
    }
    Scene::new("tracks", obs).unwrap()
}

#[test]
fn sampled_collision_protocol() {
    let far: Vec<_> = (0..40).map(|i| (i as i64, (0..30).map(|k| [i as f64 * 5.0, k as f64]).collect())).collect();
    let scene = scene_from(&far);
    let p = CollisionProtocol { seed: 9, ..CollisionProtocol::default() };
    assert_eq!(sampled_collision_rate(&scene, &p).unwrap(), 0.0);
    assert_eq!(sampled_collision_rate(&scene, &p).unwrap(), sampled_collision_rate(&scene, &p).unwrap());

    // two walkers side by side for the whole window collide in every frame
    let pair = scene_from(&[(1, (0..20).map(|k| [0.0, k as f64]).collect()), (2, (0..20).map(|k| [0.05, k as f64]).collect())]);
    assert_eq!(sampled_collision_rate(&pair, &p).unwrap(), 100.0);
    assert!(sampled_collision_rate(&pair, &CollisionProtocol { samples: 0, ..p }).is_err());
}

// ---- linear baseline ----

#[test]
fn linear_baseline_examples() {
    let obs = Tensor::new(&[1, 8, 2], (0..8).flat_map(|k| [1.0 + 0.5 * k as f64, -2.0 + 0.25 * k as f64]).collect()).unwrap();
    let pred = linear_baseline(&obs, 12).unwrap();
    let gt = Tensor::new(&[1, 12, 2], (8..20).flat_map(|k| [1.0 + 0.5 * k as f64, -2.0 + 0.25 * k as f64]).collect()).unwrap();
    assert!(ade(&pred, &gt).unwrap() < 1e-12);

    let still = Tensor::new(&[1, 8, 2], [3.0, 4.0].repeat(8)).unwrap();
    let pred = linear_baseline(&still, 5).unwrap();
    assert!(pred.data().chunks(2).all(|p| (p[0] - 3.0).abs() < 1e-12 && (p[1] - 4.0).abs() < 1e-12));

    assert!(matches!(linear_baseline(&Tensor::zeros(&[1, 1, 2]), 3), Err(Error::Contract(_))));
}

#[test]
fn linear_baseline_matches_normal_equations() {
    let mut r = rng(75);
    for _ in 0..50 {
        let t_obs = r.random_range(2..=8);
        let obs = rand_tensor(&mut r, &[2, t_obs, 2]);
        let pred = linear_baseline(&obs, 4).unwrap();
        for i in 0..2 {
            for c in 0..2 {
                // [Σ1 Σt; Σt Σt²] [a; b] = [Σy; Σty] solved by Cramer's rule
                let (mut s1, mut st, mut stt, mut sy, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for k in 0..t_obs {
                    let (t, y) = (k as f64, obs.data()[(i * t_obs + k) * 2 + c]);
                    s1 += 1.0;
                    st += t;
                    stt += t * t;
                    sy += y;
                    sty += t * y;
                }
                let det = s1 * stt - st * st;
                let a = (sy * stt - st * sty) / det;
                let b = (s1 * sty - st * sy) / det;
                for s in 0..4 {
                    let want = a + b * (t_obs + s) as f64;
                    assert!((pred.data()[(i * 4 + s) * 2 + c] - want).abs() < 1e-10);
                }
            }
        }
    }
}

// ---- evaluation ----

#[test]
fn evaluation_is_in_world_meters() {
    let mut r = rng(76);
    let model = StLstm::new(tiny_config(4, 3), 5).unwrap();
    let mut w = rand_window(&mut r, 3, 4, 3, 2.0);
    for v in w.positions_obs.data_mut().iter_mut().chain(w.positions_gt.data_mut()) {
        *v += 100.0;
    }
    let world = model.predict(std::slice::from_ref(&w)).unwrap().remove(0);

    // explicit round trip: predict in model coordinates, then shift back
    let normed = w.normalize();
    let zeroed = stlstm::dataio::SequenceBatch { origin: [0.0, 0.0], ..normed.clone() };
    let local = model.predict(&[zeroed]).unwrap().remove(0);
    let shifted = offset(&local, normed.origin[0], normed.origin[1]);
    assert_close(world.data(), shifted.data(), 1e-9);
    let a = ade(&world, &w.positions_gt).unwrap();
    assert!((a - ade(&shifted, &w.positions_gt).unwrap()).abs() < 1e-9);
    assert!(a < 50.0, "metrics must not mix coordinate frames: {a}");
}

#[test]
fn eval_report_rows_and_formats() {
    let scenes = small_scenes();
    let linear = LinearBaseline { t_obs: 4, t_pred: 3 };
    let report = evaluate(&linear, &scenes, &EvalOptions::default()).unwrap();
    let names: Vec<&str> = report.scenes.iter().map(|s| s.scene.as_str()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    let ades: Vec<f64> = report.scenes.iter().filter_map(|s| s.ade_m).collect();
    assert!((report.avg.ade_m.unwrap() - ades.iter().sum::<f64>() / ades.len() as f64).abs() < 1e-12);

    let csv = report.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "scene,n_sequences,ade_m,fde_m,collision_pct");
    assert_eq!(lines.len(), scenes.len() + 2);
    assert!(lines.last().unwrap().starts_with("AVG,"));
    let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    assert_eq!(json["scenes"].as_array().unwrap().len(), scenes.len());

    let zero = evaluate(&linear, &scenes, &EvalOptions { collision_threshold: 0.0, ..EvalOptions::default() }).unwrap();
    assert!(zero.scenes.iter().all(|s| s.collision_pct == Some(0.0)));
}

#[test]
fn parallel_evaluation_matches_sequential() {
    let scenes = small_scenes();
    let model = StLstm::new(tiny_config(4, 3), 8).unwrap();
    let a = evaluate(&model, &scenes, &EvalOptions { chunk_size: 1, ..EvalOptions::default() }).unwrap();
    let b = evaluate(&model, &scenes, &EvalOptions { chunk_size: 1000, ..EvalOptions::default() }).unwrap();
    for (x, y) in a.scenes.iter().zip(&b.scenes) {
        assert!((x.ade_m.unwrap() - y.ade_m.unwrap()).abs() < 1e-12);
        assert!((x.fde_m.unwrap() - y.fde_m.unwrap()).abs() < 1e-12);
    }
    let seqs = make_sequences(&scenes[0], 4, 3, 1).unwrap();
    assert_eq!(model.predict(&seqs).unwrap().len(), seqs.len());
}

// ---- leave-one-out ----

fn named(name: &str, seed: u64) -> Scene {
    let mut s = synth_mixture(&[ScenarioKind::Meeting, ScenarioKind::Following], 22, 0.0, seed).unwrap();
    s.name = name.into();
    s
}

#[test]
fn leave_one_out_folds_and_average() {
    let names = ["eth", "hotel", "univ", "zara1", "zara2"];
    let scenes: Vec<Scene> = names.iter().enumerate().map(|(i, n)| named(n, i as u64)).collect();
    let folds: Vec<Vec<String>> = names.iter().map(|n| vec![n.to_string()]).collect();
    let (report, models) = leave_one_out(&scenes, &folds, &tiny_config(4, 3), &quick_config(1), &EvalOptions::default()).unwrap();
    assert_eq!(report.folds.len(), 5);
    assert_eq!(models.len(), 5);
    for (f, n) in report.folds.iter().zip(names) {
        assert_eq!(f.fold, n);
        assert!(!f.train_scenes.contains(&n.to_string()));
        assert_eq!(f.train_scenes.len(), 4);
    }
    let ades: Vec<f64> = report.folds.iter().map(|f| f.report.avg.ade_m.unwrap()).collect();
    assert!((report.avg.ade_m.unwrap() - ades.iter().sum::<f64>() / 5.0).abs() < 1e-12);
    let csv = report.to_csv();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.lines().last().unwrap().starts_with("AVG,"));
}

#[test]
fn leave_one_out_identical_folds_agree() {
    let scenes = vec![named("a", 4), named("b", 4)];
    let folds = vec![vec!["a".to_string()], vec!["b".to_string()]];
    let (report, _) = leave_one_out(&scenes, &folds, &tiny_config(4, 3), &quick_config(2), &EvalOptions::default()).unwrap();
    let (x, y) = (report.folds[0].report.avg.ade_m.unwrap(), report.folds[1].report.avg.ade_m.unwrap());
    assert!((x - y).abs() < 1e-9, "{x} vs {y}");
    assert_eq!(fold_name(&["a".into(), "b".into()]), "a+b");
}

#[test]
fn leave_one_out_needs_two_folds() {
    let scenes = vec![named("a", 1)];
    let res = leave_one_out(&scenes, &[vec!["a".into()]], &tiny_config(4, 3), &quick_config(1), &EvalOptions::default());
    assert!(matches!(res, Err(Error::Usage(_))));
    let res = leave_one_out(&scenes, &[vec!["a".into()], vec!["zz".into()]], &tiny_config(4, 3), &quick_config(1), &EvalOptions::default());
    assert!(matches!(res, Err(Error::Data(_))));
}

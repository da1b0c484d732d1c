//! Trains on noise-free synthetic `meeting` + `following` mixtures and
//! compares held-out errors with the Linear baseline, including on
//! curved (`arc`) walkers.
//!
//!     cargo run --release --example train_synthetic -- [epochs] [batch] [lr] [teacher_forcing 0|1]

use std::time::Instant;

use stlstm::dataio::{make_sequences, synth_mixture, synth_scenario, ScenarioKind, ScenarioParams, Scene};
use stlstm::train_eval::{evaluate, train_on_sequences, EvalOptions, LinearBaseline, TrainConfig};
use stlstm::{ModelConfig, StLstm};

const KINDS: [ScenarioKind; 2] = [ScenarioKind::Meeting, ScenarioKind::Following];

fn arcs(count: u64) -> stlstm::Result<Vec<Scene>> {
    (0..count)
        .map(|i| {
            let params = ScenarioParams {
                heading: i as f64 * 0.7,
                ..ScenarioParams::for_kind(ScenarioKind::Arc)
            };
            synth_scenario(ScenarioKind::Arc, &params, i)
        })
        .collect()
}

fn main() -> stlstm::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let config = TrainConfig {
        epochs: arg(0, 200.0) as usize,
        batch_size: arg(1, 4.0) as usize,
        lr: arg(2, 0.005),
        teacher_forcing: arg(3, 0.0) != 0.0,
        seed: 7,
        ..TrainConfig::default()
    };

    // one 20-frame window per mixture
    let train_scenes: Vec<Scene> = (0..200).map(|s| synth_mixture(&KINDS, 20, 0.0, s)).collect::<Result<_, _>>()?;
    let mut seqs = Vec::new();
    for scene in &train_scenes {
        seqs.extend(make_sequences(scene, config.t_obs, config.t_pred, 1)?);
    }
    println!("{} training windows", seqs.len());

    let mut model = StLstm::new(ModelConfig::default(), config.seed)?;
    let start = Instant::now();
    let curve = train_on_sequences(&mut model, &config, &seqs)?;
    for (i, v) in curve.iter().enumerate() {
        if i % 20 == 0 || i + 1 == curve.len() {
            println!("epoch {:>4}  loss {v:.5}", i + 1);
        }
    }
    println!("trained in {:.1?}", start.elapsed());

    let held_out: Vec<Scene> = (1000..1020).map(|s| synth_mixture(&KINDS, 20, 0.0, s)).collect::<Result<_, _>>()?;
    let curved = arcs(20)?;
    let opts = EvalOptions::default();
    let linear = LinearBaseline { t_obs: config.t_obs, t_pred: config.t_pred };
    let show = |label: &str, scenes: &[Scene]| -> stlstm::Result<()> {
        let ours = evaluate(&model, scenes, &opts)?.avg;
        let lin = evaluate(&linear, scenes, &opts)?.avg;
        println!(
            "{label:<10} ADE model {:.4}  linear {:.4}   FDE model {:.4}  linear {:.4}",
            ours.ade_m.unwrap_or(f64::NAN),
            lin.ade_m.unwrap_or(f64::NAN),
            ours.fde_m.unwrap_or(f64::NAN),
            lin.fde_m.unwrap_or(f64::NAN)
        );
        Ok(())
    };
    show("train", &train_scenes[..20])?;
    show("held-out", &held_out)?;
    show("arcs", &curved)?;
    Ok(())
}

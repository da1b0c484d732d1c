//! Trains a small model on one `meeting` scene, predicts its first window
//! and writes the plot to `prediction.svg` (or the given path).
//!
//!     cargo run --release --example predict_and_plot -- [out.svg]

use stlstm::cli::svg;
use stlstm::dataio::{make_sequences, synth_scenario, ScenarioKind, ScenarioParams};
use stlstm::train_eval::{ade, fde, train, TrainConfig};
use stlstm::ModelConfig;

fn main() -> stlstm::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "prediction.svg".into());
    let params = ScenarioParams { frames: 40, ..ScenarioParams::for_kind(ScenarioKind::Meeting) };
    let scene = synth_scenario(ScenarioKind::Meeting, &params, 0)?;
    let config = TrainConfig { epochs: 100, batch_size: 4, lr: 0.01, teacher_forcing: false, ..TrainConfig::default() };
    let out = train(&ModelConfig::default(), &config, std::slice::from_ref(&scene))?;
    println!("loss {:.4} -> {:.4}", out.loss_curve[0], out.loss_curve[out.loss_curve.len() - 1]);

    let window = make_sequences(&scene, 8, 12, 20)?.remove(0);
    let pred = out.model.predict_many(std::slice::from_ref(&window))?.remove(0);
    println!("ADE {:.3} m, FDE {:.3} m", ade(&pred, &window.positions_gt)?, fde(&pred, &window.positions_gt)?);
    std::fs::write(&path, svg::render(&window, &pred)).map_err(|e| stlstm::Error::Io { path: path.clone().into(), source: e })?;
    println!("wrote {path}");
    Ok(())
}

//! Leave-one-out over four synthetic scenes: each fold trains on three
//! and is scored on the fourth.
//!
//!     cargo run --release --example leave_one_out

use stlstm::dataio::{synth_scenario, ScenarioKind, ScenarioParams};
use stlstm::train_eval::{leave_one_out, EvalOptions, TrainConfig};
use stlstm::ModelConfig;

fn main() -> stlstm::Result<()> {
    let kinds = [ScenarioKind::Meeting, ScenarioKind::Following, ScenarioKind::Merge, ScenarioKind::AngleCross];
    let scenes = kinds
        .iter()
        .map(|&kind| synth_scenario(kind, &ScenarioParams { frames: 30, ..ScenarioParams::for_kind(kind) }, 0))
        .collect::<stlstm::Result<Vec<_>>>()?;
    let folds: Vec<Vec<String>> = kinds.iter().map(|k| vec![k.name().to_string()]).collect();
    let config = TrainConfig { epochs: 20, batch_size: 8, lr: 0.01, ..TrainConfig::default() };
    let (report, _models) = leave_one_out(&scenes, &folds, &ModelConfig::default(), &config, &EvalOptions::default())?;
    print!("{}", report.to_csv());
    Ok(())
}

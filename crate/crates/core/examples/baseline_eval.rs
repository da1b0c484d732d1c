//! Scores the constant-velocity least-squares baseline on synthetic
//! scenes and prints the report as CSV, then JSON for one scene.
//!
//!     cargo run --release --example baseline_eval

use stlstm::dataio::{synth_scenario, ScenarioKind, ScenarioParams};
use stlstm::train_eval::{evaluate, EvalOptions, LinearBaseline};

fn main() -> stlstm::Result<()> {
    let scenes = ScenarioKind::ALL
        .into_iter()
        .map(|kind| {
            let params = ScenarioParams { frames: 40, noise_std: 0.02, ..ScenarioParams::for_kind(kind) };
            synth_scenario(kind, &params, 1)
        })
        .collect::<stlstm::Result<Vec<_>>>()?;
    let linear = LinearBaseline { t_obs: 8, t_pred: 12 };

    let report = evaluate(&linear, &scenes, &EvalOptions::default())?;
    print!("{}", report.to_csv());

    // collisions counted on ground truth instead of predictions
    let gt = evaluate(&linear, &scenes[1..2], &EvalOptions { gt_collision: true, ..EvalOptions::default() })?;
    println!("\n{}", gt.to_json()?);
    Ok(())
}

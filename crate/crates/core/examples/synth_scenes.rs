//! Generates one scene of every synthetic kind and prints a short
//! summary, plus the first lines of the text format.
//!
//!     cargo run --example synth_scenes -- [out_dir]

use stlstm::dataio::{make_sequences, synth_scenario, ScenarioKind, ScenarioParams};
use stlstm::train_eval::scene_collision_rate;

fn main() -> stlstm::Result<()> {
    let out_dir = std::env::args().nth(1);
    for kind in ScenarioKind::ALL {
        let params = ScenarioParams { frames: 40, ..ScenarioParams::for_kind(kind) };
        let scene = synth_scenario(kind, &params, 0)?;
        let windows = make_sequences(&scene, 8, 12, 1)?;
        println!(
            "{:<12} {} pedestrians, {} observations, {} windows, ground-truth collisions {:.2}%",
            kind.name(),
            scene.pedestrians().len(),
            scene.observations().len(),
            windows.len(),
            scene_collision_rate(&scene, 0.10)
        );
        if let Some(dir) = &out_dir {
            let path = std::path::Path::new(dir).join(format!("{}.txt", kind.name()));
            std::fs::create_dir_all(dir).map_err(|e| stlstm::Error::Io { path: dir.into(), source: e })?;
            std::fs::write(&path, scene.to_text()).map_err(|e| stlstm::Error::Io { path: path.clone(), source: e })?;
        }
    }
    let meeting = synth_scenario(ScenarioKind::Meeting, &ScenarioParams::default(), 0)?;
    println!("\nmeeting.txt (frame ped x y):");
    for line in meeting.to_text().lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}

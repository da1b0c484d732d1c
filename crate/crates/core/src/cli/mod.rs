//! The `stlstm` command-line tool. [`main_with_args`] parses arguments,
//! runs one subcommand and maps failures to exit codes: 1 usage, 2 data or
//! I/O, 3 numerical.

mod manifest;
pub mod svg;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::Serialize;

pub use manifest::{sha256_file, InputHash, RunManifest};

use crate::dataio::{load_dir, make_sequences, parse_dataset, synth_mixture, synth_scenario, ScenarioKind, ScenarioParams, MIN_SYNTH_FRAMES};
use crate::error::{Error, Result};
use crate::model::checkpoint;
use crate::model::gradcheck::{full_model_grad_check, GradSuiteConfig};
use crate::train_eval::loo::{fold_name, select_scenes, FoldReport};
use crate::train_eval::metrics::COLLISION_THRESHOLD;
use crate::train_eval::train::loss_csv;
use crate::train_eval::{evaluate, leave_one_out, read_fold_file, train, EvalOptions, LinearBaseline, LooReport, Predictor, SceneReport, TrainConfig};
use crate::{ModelConfig, StLstm};

/// Default for `--data` when the flag is absent.
pub const DATA_ENV: &str = "STLSTM_DATA";

#[derive(Debug, Parser)]
#[command(name = "stlstm", version, about = "Graph-convolutional LSTM pedestrian trajectory forecaster")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on every `.txt` trajectory file in a directory.
    Train(TrainArgs),
    /// Score a checkpoint (or the linear baseline) per scene.
    Eval(EvalArgs),
    /// Predict one window of a trajectory file; writes CSV and optionally SVG.
    Predict(PredictArgs),
    /// Generate a synthetic interaction scene.
    Synth(SynthArgs),
    /// Finite-difference check of every model gradient.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// Directory of trajectory files.
    #[arg(long, env = DATA_ENV)]
    pub data: PathBuf,
    /// Checkpoint path; a directory when `--folds` is given.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 250)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 8)]
    pub obs: usize,
    #[arg(long, default_value_t = 12)]
    pub pred: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub lambda_recon: f64,
    /// `--teacher-forcing false` trains free-running.
    #[arg(long, default_value_t = true, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    pub teacher_forcing: bool,
    /// Global gradient-norm clip; 0 disables.
    #[arg(long, default_value_t = 10.0)]
    pub grad_clip: f64,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long)]
    pub lr_decay_every: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub lr_decay_factor: f64,
    #[arg(long, default_value_t = 1)]
    pub blocks: usize,
    #[arg(long, default_value_t = 3)]
    pub kernel: usize,
    /// Only link pedestrians closer than this many meters.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Layer-norm after every ST-Block sublayer.
    #[arg(long)]
    pub norm_each_sublayer: bool,
    /// Loss curve CSV; defaults to `<out>.loss.csv`.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    /// JSON list of scene-name groups; trains one model per held-out group.
    #[arg(long)]
    pub folds: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    /// Checkpoint file; with `--folds`, the directory `train --folds` wrote.
    #[arg(long, required_unless_present = "linear", conflicts_with = "linear")]
    pub ckpt: Option<PathBuf>,
    /// Evaluate the constant-velocity least-squares baseline instead.
    #[arg(long)]
    pub linear: bool,
    #[arg(long, env = DATA_ENV)]
    pub data: PathBuf,
    /// Report prefix: writes `<out>.csv`, `<out>.json` and `<out>.manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Observed steps; must match the checkpoint.
    #[arg(long)]
    pub obs: Option<usize>,
    /// Predicted steps; must match the checkpoint.
    #[arg(long)]
    pub pred: Option<usize>,
    #[arg(long, default_value_t = COLLISION_THRESHOLD)]
    pub collision_threshold: f64,
    /// Count collisions among this many random agents per window.
    #[arg(long)]
    pub sample_agents: Option<usize>,
    /// Collision column from ground truth rather than predictions.
    #[arg(long)]
    pub gt_collision: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long)]
    pub folds: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// One trajectory file.
    #[arg(long)]
    pub data: PathBuf,
    /// CSV with columns `scene,ped_id,step,x_pred,y_pred`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Index of the window to predict, counting non-overlapping windows.
    #[arg(long, default_value_t = 0)]
    pub window: usize,
    #[arg(long)]
    pub obs: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    /// Scenario kind, or a comma-separated list for a mixed scene.
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = MIN_SYNTH_FRAMES)]
    pub frames: usize,
    /// Gaussian position noise, meters.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report path; the manifest is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Perturb one analytic gradient so the check must fail.
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors go to standard error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn load_scenes(dir: &Path) -> Result<Vec<crate::dataio::Scene>> {
    let scenes = load_dir(dir)?;
    if scenes.is_empty() {
        return Err(Error::Data(format!("no .txt trajectory files in {}", dir.display())));
    }
    Ok(scenes)
}

fn configs(a: &TrainArgs) -> (ModelConfig, TrainConfig) {
    let mc = ModelConfig {
        t_obs: a.obs,
        t_pred: a.pred,
        kernel_size: a.kernel,
        blocks: a.blocks,
        radius: a.radius,
        norm_each_sublayer: a.norm_each_sublayer,
        ..ModelConfig::default()
    };
    let tc = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        lr: a.lr,
        lambda_recon: a.lambda_recon,
        grad_clip_norm: a.grad_clip,
        seed: a.seed,
        t_obs: a.obs,
        t_pred: a.pred,
        teacher_forcing: a.teacher_forcing,
        stride: a.stride,
        lr_decay_every: a.lr_decay_every,
        lr_decay_factor: a.lr_decay_factor,
    };
    (mc, tc)
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let mut manifest = RunManifest::new("train", serde_json::to_value(a)?, a.seed);
    manifest.inputs = manifest::hash_inputs(&a.data)?;
    let scenes = load_scenes(&a.data)?;
    let (mc, tc) = configs(a);

    if let Some(folds_path) = &a.folds {
        manifest.inputs.extend(manifest::hash_inputs(folds_path)?);
        let folds = read_fold_file(folds_path)?;
        let eval = EvalOptions { stride: a.stride, seed: a.seed, ..EvalOptions::default() };
        let (report, models) = leave_one_out(&scenes, &folds, &mc, &tc, &eval)?;
        for (fold, model) in report.folds.iter().zip(&models) {
            let ckpt = a.out.join(format!("{}.ckpt", fold.fold));
            let meta = serde_json::json!({
                "train": tc,
                "fold": fold.fold,
                "train_scenes": fold.train_scenes,
                "loss_curve": fold.loss_curve,
            });
            write(&ckpt, checkpoint::to_bytes(model, meta)?)?;
            let csv = a.out.join(format!("{}.loss.csv", fold.fold));
            write(&csv, loss_csv(&fold.loss_curve))?;
            manifest.outputs.extend([ckpt.display().to_string(), csv.display().to_string()]);
        }
        let (csv, json) = (a.out.join("loo.csv"), a.out.join("loo.json"));
        write(&csv, report.to_csv())?;
        write(&json, serde_json::to_string_pretty(&report)? + "\n")?;
        print!("{}", report.to_csv());
        manifest.outputs.extend([csv.display().to_string(), json.display().to_string()]);
        return manifest.finish(&a.out.join("manifest.json"));
    }

    let out = train(&mc, &tc, &scenes)?;
    let meta = serde_json::json!({
        "train": tc,
        "n_sequences": out.n_sequences,
        "loss_curve": out.loss_curve,
    });
    write(&a.out, checkpoint::to_bytes(&out.model, meta)?)?;
    let csv = a.loss_csv.clone().unwrap_or_else(|| sibling(&a.out, "loss.csv"));
    write(&csv, loss_csv(&out.loss_curve))?;
    if let (Some(first), Some(last)) = (out.loss_curve.first(), out.loss_curve.last()) {
        println!(
            "{} windows, {} epochs, loss {first:.6} -> {last:.6}",
            out.n_sequences,
            out.loss_curve.len()
        );
    }
    manifest.outputs = vec![a.out.display().to_string(), csv.display().to_string()];
    manifest.finish(&sibling(&a.out, "manifest.json"))
}

/// Rejects a checkpoint whose horizons differ from the requested ones.
fn check_horizons(model: &StLstm, obs: Option<usize>, pred: Option<usize>, ckpt: &Path) -> Result<()> {
    let c = &model.config;
    if let Some(o) = obs.filter(|&o| o != c.t_obs) {
        return Err(Error::Usage(format!(
            "{} was trained with {} observed steps but --obs {o} was requested; \
             retrain with --obs {o} or drop the flag",
            ckpt.display(),
            c.t_obs
        )));
    }
    if let Some(p) = pred.filter(|&p| p != c.t_pred) {
        return Err(Error::Usage(format!(
            "{} predicts {} steps but --pred {p} was requested; retrain with --pred {p} or drop the flag",
            ckpt.display(),
            c.t_pred
        )));
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let mut manifest = RunManifest::new("eval", serde_json::to_value(a)?, a.seed);
    manifest.inputs = manifest::hash_inputs(&a.data)?;
    if !(a.collision_threshold >= 0.0) {
        return Err(Error::Usage("--collision-threshold must be non-negative".into()));
    }
    let scenes = load_scenes(&a.data)?;
    let opts = EvalOptions {
        stride: a.stride,
        collision_threshold: a.collision_threshold,
        gt_collision: a.gt_collision,
        sample_agents: a.sample_agents,
        seed: a.seed,
        ..EvalOptions::default()
    };

    let (csv, json) = if let Some(folds_path) = &a.folds {
        manifest.inputs.extend(manifest::hash_inputs(folds_path)?);
        let folds = read_fold_file(folds_path)?;
        let mut reports = Vec::new();
        for group in &folds {
            let name = fold_name(group);
            let test = select_scenes(&scenes, group)?;
            let (predictor, meta): (Box<dyn Predictor>, serde_json::Value) = match &a.ckpt {
                Some(dir) => {
                    let path = dir.join(format!("{name}.ckpt"));
                    manifest.inputs.extend(manifest::hash_inputs(&path)?);
                    let (model, meta) = checkpoint::load(&path)?;
                    check_horizons(&model, a.obs, a.pred, &path)?;
                    (Box::new(model), meta)
                }
                None => (Box::new(linear(a)), serde_json::Value::Null),
            };
            reports.push(FoldReport {
                fold: name,
                train_scenes: serde_json::from_value(meta["train_scenes"].clone()).unwrap_or_default(),
                loss_curve: serde_json::from_value(meta["loss_curve"].clone()).unwrap_or_default(),
                report: evaluate(predictor.as_ref(), &test, &opts)?,
            });
        }
        let rows: Vec<SceneReport> = reports.iter().map(|f| f.report.avg.clone()).collect();
        let report = LooReport { avg: SceneReport::average("AVG", &rows), folds: reports };
        (report.to_csv(), serde_json::to_string_pretty(&report)?)
    } else {
        let report = match &a.ckpt {
            Some(path) => {
                manifest.inputs.extend(manifest::hash_inputs(path)?);
                let (model, _) = checkpoint::load(path)?;
                check_horizons(&model, a.obs, a.pred, path)?;
                evaluate(&model, &scenes, &opts)?
            }
            None => evaluate(&linear(a), &scenes, &opts)?,
        };
        (report.to_csv(), report.to_json()?)
    };
    let (csv_path, json_path) = (sibling(&a.out, "csv"), sibling(&a.out, "json"));
    write(&csv_path, &csv)?;
    write(&json_path, json + "\n")?;
    print!("{csv}");
    manifest.outputs = vec![csv_path.display().to_string(), json_path.display().to_string()];
    manifest.finish(&sibling(&a.out, "manifest.json"))
}

fn linear(a: &EvalArgs) -> LinearBaseline {
    LinearBaseline {
        t_obs: a.obs.unwrap_or(8),
        t_pred: a.pred.unwrap_or(12),
    }
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let mut manifest = RunManifest::new("predict", serde_json::to_value(a)?, 0);
    manifest.inputs = manifest::hash_inputs(&a.ckpt)?;
    manifest.inputs.extend(manifest::hash_inputs(&a.data)?);
    let (model, _) = checkpoint::load(&a.ckpt)?;
    check_horizons(&model, a.obs, None, &a.ckpt)?;
    let (t_obs, t_pred) = (model.config.t_obs, model.config.t_pred);
    let scene = parse_dataset(&a.data)?;
    let mut windows = make_sequences(&scene, t_obs, t_pred, t_obs + t_pred)?;
    if a.window >= windows.len() {
        return Err(Error::Data(format!(
            "{} has {} window(s) of {} frames; --window {} is out of range",
            a.data.display(),
            windows.len(),
            t_obs + t_pred,
            a.window
        )));
    }
    let seq = windows.swap_remove(a.window);
    let pred = model.predict_many(std::slice::from_ref(&seq))?.remove(0);
    pred.check_finite("prediction")?;

    let mut csv = String::from("scene,ped_id,step,x_pred,y_pred\n");
    for i in (0..seq.n()).filter(|&i| seq.node_mask[i]) {
        for s in 0..t_pred {
            let base = (i * t_pred + s) * 2;
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                seq.scene_name,
                seq.ped_ids[i],
                s + 1,
                pred.data()[base],
                pred.data()[base + 1]
            );
        }
    }
    write(&a.out, &csv)?;
    manifest.outputs.push(a.out.display().to_string());
    if let Some(svg_path) = &a.svg {
        write(svg_path, svg::render(&seq, &pred))?;
        manifest.outputs.push(svg_path.display().to_string());
    }
    manifest.finish(&sibling(&a.out, "manifest.json"))
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let manifest = RunManifest {
        outputs: vec![a.out.display().to_string()],
        ..RunManifest::new("synth", serde_json::to_value(a)?, a.seed)
    };
    let kinds = a
        .kind
        .split(',')
        .map(|k| k.trim().parse())
        .collect::<Result<Vec<ScenarioKind>>>()?;
    let scene = match kinds.as_slice() {
        [kind] => {
            let params = ScenarioParams {
                frames: a.frames,
                noise_std: a.noise,
                ..ScenarioParams::for_kind(*kind)
            };
            synth_scenario(*kind, &params, a.seed)?
        }
        _ => synth_mixture(&kinds, a.frames, a.noise, a.seed)?,
    };
    write(&a.out, scene.to_text())?;
    manifest.finish(&sibling(&a.out, "manifest.json"))
}

fn cmd_gradcheck(a: &GradcheckArgs) -> Result<()> {
    let cfg = GradSuiteConfig { seed: a.seed, corrupt: a.corrupt, ..GradSuiteConfig::default() };
    let mut manifest = RunManifest::new("gradcheck", serde_json::to_value(&cfg)?, a.seed);
    let out = full_model_grad_check(&cfg)?;
    println!(
        "{} scalars in {} tensors, loss {:.6}, {:.1?}",
        out.n_scalars,
        out.names.len(),
        out.loss,
        out.elapsed
    );
    println!(
        "worst parameter {} (element {}): relative error {:.3e}, analytic {:.6e}, numeric {:.6e}",
        out.worst_name(),
        out.report.worst_element,
        out.report.max_rel_error,
        out.report.worst_analytic,
        out.report.worst_numeric
    );
    println!("{}", if out.passed { "PASS" } else { "FAIL" });
    if let Some(path) = &a.out {
        let per_param: serde_json::Map<String, serde_json::Value> = out
            .names
            .iter()
            .zip(&out.report.per_param)
            .map(|(n, e)| (n.clone(), (*e).into()))
            .collect();
        let report = serde_json::json!({
            "passed": out.passed,
            "tolerance": cfg.tolerance,
            "max_rel_error": out.report.max_rel_error,
            "worst_param": out.worst_name(),
            "per_param": per_param,
        });
        write(path, serde_json::to_string_pretty(&report)? + "\n")?;
        manifest.outputs.push(path.display().to_string());
        manifest.finish(&sibling(path, "manifest.json"))?;
    }
    if out.passed {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "gradient check failed: {} has relative error {:.3e} >= {:.0e}",
            out.worst_name(),
            out.report.max_rel_error,
            cfg.tolerance
        )))
    }
}

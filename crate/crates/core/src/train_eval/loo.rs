use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::{evaluate, EvalOptions, EvalReport, SceneReport, CSV_HEADER};
use super::train::{train, TrainConfig};
use crate::dataio::Scene;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, StLstm};

/// Reads a fold file: a JSON list of scene-name groups, one per fold.
pub fn read_fold_file(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let folds: Vec<Vec<String>> = serde_json::from_str(&text)?;
    Ok(folds)
}

pub fn fold_name(group: &[String]) -> String {
    group.join("+")
}

/// Picks the scenes named in `group`, in group order.
pub fn select_scenes(scenes: &[Scene], group: &[String]) -> Result<Vec<Scene>> {
    group
        .iter()
        .map(|name| {
            scenes
                .iter()
                .find(|s| &s.name == name)
                .cloned()
                .ok_or_else(|| Error::Data(format!("fold names unknown scene {name:?}")))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: String,
    pub train_scenes: Vec<String>,
    pub loss_curve: Vec<f64>,
    pub report: EvalReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LooReport {
    pub folds: Vec<FoldReport>,
    /// Unweighted mean over folds of each fold's AVG row.
    pub avg: SceneReport,
}

impl LooReport {
    /// One row per fold, then AVG.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        let rows: Vec<SceneReport> = self
            .folds
            .iter()
            .map(|f| SceneReport { scene: f.fold.clone(), ..f.report.avg.clone() })
            .chain(std::iter::once(self.avg.clone()))
            .collect();
        let fmt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        for r in rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.scene,
                r.n_sequences,
                fmt(r.ade_m),
                fmt(r.fde_m),
                fmt(r.collision_pct)
            );
        }
        out
    }
}

/// For each fold, trains on the union of the other folds and evaluates on
/// the fold itself. Folds run in parallel; each training run is the same
/// deterministic single-threaded loop as [`train`].
pub fn leave_one_out(
    scenes: &[Scene],
    folds: &[Vec<String>],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    eval_options: &EvalOptions,
) -> Result<(LooReport, Vec<StLstm>)> {
    if folds.len() < 2 {
        return Err(Error::Usage(format!("leave-one-out needs at least 2 folds, got {}", folds.len())));
    }
    let results = (0..folds.len())
        .into_par_iter()
        .map(|k| {
            let test = select_scenes(scenes, &folds[k])?;
            let train_names: Vec<String> = folds
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .flat_map(|(_, g)| g.iter().cloned())
                .collect();
            let train_scenes = select_scenes(scenes, &train_names)?;
            let out = train(model_config, train_config, &train_scenes)?;
            let report = evaluate(&out.model, &test, eval_options)?;
            Ok((
                FoldReport {
                    fold: fold_name(&folds[k]),
                    train_scenes: train_names,
                    loss_curve: out.loss_curve,
                    report,
                },
                out.model,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (reports, models): (Vec<FoldReport>, Vec<StLstm>) = results.into_iter().unzip();
    let rows: Vec<SceneReport> = reports.iter().map(|f| f.report.avg.clone()).collect();
    Ok((
        LooReport {
            avg: SceneReport::average("AVG", &rows),
            folds: reports,
        },
        models,
    ))
}

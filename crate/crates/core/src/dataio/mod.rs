//! Trajectory files, scenes and windowed sequences.
//!
//! The on-disk format is the community ETH/UCY text layout: one
//! observation per line, whitespace separated `frame_id ped_id x y`,
//! coordinates in meters.

mod sequences;
mod synth;

pub use sequences::{make_sequences, SequenceBatch};
pub use synth::{synth_mixture, synth_scenario, ScenarioKind, ScenarioParams, MIN_SYNTH_FRAMES};

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds between consecutive annotated frames in ETH/UCY.
pub const DEFAULT_FRAME_INTERVAL: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub frame: i64,
    pub ped: i64,
    pub x: f64,
    pub y: f64,
}

/// All observations of one recording, sorted by `(frame, ped)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub name: String,
    observations: Vec<Observation>,
    pub frame_interval: f64,
}

impl Scene {
    /// Sorts the observations and rejects duplicate `(frame, ped)` pairs.
    pub fn new(name: impl Into<String>, mut observations: Vec<Observation>) -> Result<Self> {
        observations.sort_by_key(|o| (o.frame, o.ped));
        if let Some(w) = observations
            .windows(2)
            .find(|w| (w[0].frame, w[0].ped) == (w[1].frame, w[1].ped))
        {
            return Err(Error::Data(format!(
                "duplicate observation for frame {} pedestrian {}",
                w[0].frame, w[0].ped
            )));
        }
        if let Some(o) = observations.iter().find(|o| !(o.x.is_finite() && o.y.is_finite())) {
            return Err(Error::Data(format!(
                "non-finite position at frame {} pedestrian {}",
                o.frame, o.ped
            )));
        }
        Ok(Scene {
            name: name.into(),
            observations,
            frame_interval: DEFAULT_FRAME_INTERVAL,
        })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn pedestrians(&self) -> Vec<i64> {
        let mut ids: Vec<i64> = self.observations.iter().map(|o| o.ped).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Constant spacing between frame ids: the gcd of all gaps between
    /// distinct frames (raw ETH/UCY steps by 10). `1` for fewer than two frames.
    pub fn frame_step(&self) -> i64 {
        let mut frames: Vec<i64> = self.observations.iter().map(|o| o.frame).collect();
        frames.dedup();
        let step = frames.windows(2).fold(0, |g, w| gcd(g, w[1] - w[0]));
        step.max(1)
    }

    /// Observations re-indexed to consecutive time steps starting at zero:
    /// `step → (ped → position)`.
    pub fn timeline(&self) -> Vec<BTreeMap<i64, [f64; 2]>> {
        let Some(first) = self.observations.first() else {
            return Vec::new();
        };
        let step = self.frame_step();
        let last = self.observations.last().map_or(first.frame, |o| o.frame);
        let mut out = vec![BTreeMap::new(); ((last - first.frame) / step + 1) as usize];
        for o in &self.observations {
            out[((o.frame - first.frame) / step) as usize].insert(o.ped, [o.x, o.y]);
        }
        out
    }

    pub fn first_frame(&self) -> Option<i64> {
        self.observations.first().map(|o| o.frame)
    }

    /// Serializes back to the text layout; `parse_str` inverts it exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for o in &self.observations {
            s.push_str(&format!("{}\t{}\t{:?}\t{:?}\n", o.frame, o.ped, o.x, o.y));
        }
        s
    }

    /// Combines scenes recorded on the same clock. Pedestrian ids are
    /// offset per input so they stay distinct.
    pub fn merged(name: impl Into<String>, scenes: &[Scene]) -> Result<Scene> {
        let mut obs = Vec::new();
        let mut offset = 0;
        for s in scenes {
            let max_id = s.observations.iter().map(|o| o.ped).max().unwrap_or(0);
            obs.extend(s.observations.iter().map(|o| Observation { ped: o.ped + offset, ..*o }));
            offset += max_id + 1;
        }
        let mut out = Scene::new(name, obs)?;
        out.frame_interval = scenes.first().map_or(DEFAULT_FRAME_INTERVAL, |s| s.frame_interval);
        Ok(out)
    }

    /// The observations of a subset of pedestrians.
    pub fn restricted_to(&self, peds: &[i64]) -> Scene {
        let keep: HashSet<i64> = peds.iter().copied().collect();
        Scene {
            name: self.name.clone(),
            observations: self
                .observations
                .iter()
                .filter(|o| keep.contains(&o.ped))
                .copied()
                .collect(),
            frame_interval: self.frame_interval,
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Reads one trajectory file. The scene is named after the file stem.
pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map_or_else(|| "scene".to_string(), |s| s.to_string_lossy().into_owned());
    parse_str(&name, &path.display().to_string(), &text)
}

/// Parses trajectory text. `origin` only labels error messages.
pub fn parse_str(name: &str, origin: &str, text: &str) -> Result<Scene> {
    let mut obs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: origin.to_string(),
            line: i + 1,
            msg,
        };
        if fields.len() != 4 {
            return Err(err(format!(
                "expected 4 fields `frame_id ped_id x y`, found {}",
                fields.len()
            )));
        }
        let mut vals = [0.0; 4];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f
                .parse::<f64>()
                .map_err(|_| err(format!("not a number: {f:?}")))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite value {f:?}")));
            }
        }
        obs.push(Observation {
            frame: vals[0].trunc() as i64,
            ped: vals[1].trunc() as i64,
            x: vals[2],
            y: vals[3],
        });
    }
    Scene::new(name, obs)
}

/// Every regular file with a `.txt` extension directly inside `dir`,
/// parsed and sorted by scene name.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<Vec<Scene>> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "txt"))
        .collect();
    paths.sort();
    paths.iter().map(parse_dataset).collect()
}

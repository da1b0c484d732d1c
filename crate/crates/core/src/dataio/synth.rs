//! Synthetic social-interaction scenes with known kinematics.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Observation, Scene, DEFAULT_FRAME_INTERVAL};
use crate::error::{Error, Result};

/// Fewest frames generated per pedestrian: one 8 + 12 window.
pub const MIN_SYNTH_FRAMES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Two collinear walkers heading the same way at a constant gap.
    Following,
    /// Two walkers approaching head-on.
    Meeting,
    /// One walker against a three-person group, sidestepping it.
    GroupAvoid,
    /// A second walker converging onto the first walker's path.
    Merge,
    /// Two walkers whose straight paths cross at `angle`.
    AngleCross,
    /// Two walkers on concentric circular arcs.
    Arc,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::Following,
        ScenarioKind::Meeting,
        ScenarioKind::GroupAvoid,
        ScenarioKind::Merge,
        ScenarioKind::AngleCross,
        ScenarioKind::Arc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Following => "following",
            ScenarioKind::Meeting => "meeting",
            ScenarioKind::GroupAvoid => "group_avoid",
            ScenarioKind::Merge => "merge",
            ScenarioKind::AngleCross => "angle_cross",
            ScenarioKind::Arc => "arc",
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let known: Vec<_> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
                Error::Usage(format!("unknown scenario kind {s:?}; expected one of {known:?}"))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    /// Walking speed, m/s.
    pub speed: f64,
    /// Start distance between the walkers (gap for `following`), meters.
    pub separation: f64,
    /// Kind-specific lateral distance, meters: passing offset for
    /// `meeting`, sidestep for `group_avoid`, start offset for `merge`,
    /// crossing delay for `angle_cross`, radius spacing for `arc`.
    pub lateral: f64,
    /// Crossing angle for `angle_cross`, radians.
    pub angle: f64,
    /// Inner arc radius for `arc`, meters.
    pub radius: f64,
    /// Rotation of the whole scene, radians.
    pub heading: f64,
    /// Translation of the whole scene, meters.
    pub offset: [f64; 2],
    /// Standard deviation of i.i.d. Gaussian position noise, meters.
    pub noise_std: f64,
    pub frames: usize,
    /// Spacing of emitted frame ids.
    pub frame_step: i64,
    pub frame_interval: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            speed: 1.0,
            separation: 8.0,
            lateral: 0.0,
            angle: PI / 2.0,
            radius: 4.0,
            heading: 0.0,
            offset: [0.0, 0.0],
            noise_std: 0.0,
            frames: MIN_SYNTH_FRAMES,
            frame_step: 10,
            frame_interval: DEFAULT_FRAME_INTERVAL,
        }
    }
}

impl ScenarioParams {
    /// Defaults tuned so each kind shows its interaction inside 20 frames.
    pub fn for_kind(kind: ScenarioKind) -> Self {
        let base = ScenarioParams::default();
        match kind {
            ScenarioKind::Following => ScenarioParams { separation: 2.0, ..base },
            ScenarioKind::Meeting => base,
            ScenarioKind::GroupAvoid => ScenarioParams { lateral: 1.5, ..base },
            ScenarioKind::Merge => ScenarioParams { separation: 2.0, lateral: 3.0, ..base },
            ScenarioKind::AngleCross => ScenarioParams { lateral: 1.0, ..base },
            ScenarioKind::Arc => ScenarioParams { lateral: 1.5, ..base },
        }
    }
}

/// Half-cosine ramp from 0 to 1 over `u ∈ [0, 1]`, clamped outside.
fn ramp(u: f64) -> f64 {
    0.5 * (1.0 - (PI * u.clamp(0.0, 1.0)).cos())
}

/// Builds a scene of the requested kind. Deterministic in `seed`; the seed
/// only drives the position noise.
pub fn synth_scenario(kind: ScenarioKind, params: &ScenarioParams, seed: u64) -> Result<Scene> {
    let p = params;
    if p.frames < MIN_SYNTH_FRAMES {
        return Err(Error::Usage(format!(
            "synthetic scenes need at least {MIN_SYNTH_FRAMES} frames, got {}",
            p.frames
        )));
    }
    if !(p.speed.is_finite() && p.frame_interval > 0.0 && p.noise_std >= 0.0 && p.frame_step > 0) {
        return Err(Error::Usage(format!("invalid scenario parameters {p:?}")));
    }
    let dt = p.frame_interval;
    let v = p.speed;
    let half = p.separation / 2.0;
    // frames until the head-on pair meets
    let meet = if v > 0.0 { half / (v * dt) } else { f64::INFINITY };

    let walkers: Vec<Box<dyn Fn(f64) -> [f64; 2]>> = match kind {
        ScenarioKind::Following => vec![
            Box::new(move |k| [v * k * dt, 0.0]),
            Box::new(move |k| [-p.separation + v * k * dt, 0.0]),
        ],
        ScenarioKind::Meeting => {
            let lat = p.lateral / 2.0;
            vec![
                Box::new(move |k| [-half + v * k * dt, -lat]),
                Box::new(move |k| [half - v * k * dt, lat]),
            ]
        }
        ScenarioKind::GroupAvoid => {
            let side = p.lateral;
            let mut w: Vec<Box<dyn Fn(f64) -> [f64; 2]>> =
                vec![Box::new(move |k| [-half + v * k * dt, -side * ramp(k / meet)])];
            for m in 0..3 {
                let y = (m as f64 - 1.0) * 0.7;
                w.push(Box::new(move |k| [half - v * k * dt, y]));
            }
            w
        }
        ScenarioKind::Merge => {
            let lat = p.lateral;
            let merge_at = p.frames as f64 / 2.0;
            vec![
                Box::new(move |k| [v * k * dt, 0.0]),
                Box::new(move |k| [-p.separation + v * k * dt, lat * (1.0 - ramp(k / merge_at))]),
            ]
        }
        ScenarioKind::AngleCross => {
            let (c, s) = (p.angle.cos(), p.angle.sin());
            let delay = p.lateral;
            vec![
                Box::new(move |k| [-half + v * k * dt, 0.0]),
                Box::new(move |k| {
                    let d = -(half + delay) + v * k * dt;
                    [d * c, d * s]
                }),
            ]
        }
        ScenarioKind::Arc => {
            let (r0, r1) = (p.radius, p.radius + p.lateral);
            vec![
                Box::new(move |k| {
                    let a = -PI / 2.0 + v * k * dt / r0;
                    [r0 * a.cos(), r0 * (a.sin() + 1.0)]
                }),
                Box::new(move |k| {
                    let a = -PI / 2.0 + v * k * dt / r1;
                    [r1 * a.cos() + p.lateral, r1 * (a.sin() + 1.0) - p.lateral]
                }),
            ]
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, p.noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Usage(format!("noise: {e}")))?;
    let (ch, sh) = (p.heading.cos(), p.heading.sin());
    let mut obs = Vec::with_capacity(walkers.len() * p.frames);
    for k in 0..p.frames {
        for (w, path) in walkers.iter().enumerate() {
            let [x, y] = path(k as f64);
            let mut pos = [ch * x - sh * y + p.offset[0], sh * x + ch * y + p.offset[1]];
            if p.noise_std > 0.0 {
                pos[0] += noise.sample(&mut rng);
                pos[1] += noise.sample(&mut rng);
            }
            obs.push(Observation {
                frame: k as i64 * p.frame_step,
                ped: w as i64 + 1,
                x: pos[0],
                y: pos[1],
            });
        }
    }
    let mut scene = Scene::new(kind.name(), obs)?;
    scene.frame_interval = dt;
    Ok(scene)
}

/// A scene combining one instance of each kind in `kinds`, each with a
/// random heading, speed in `[0.8, 1.4]` m/s and a spatial offset so the
/// groups do not overlap. Deterministic in `seed`.
pub fn synth_mixture(kinds: &[ScenarioKind], frames: usize, noise_std: f64, seed: u64) -> Result<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts = kinds
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            let params = ScenarioParams {
                speed: rng.random_range(0.8..1.4),
                heading: rng.random_range(-PI..PI),
                offset: [rng.random_range(-2.0..2.0), 30.0 * i as f64 + rng.random_range(-2.0..2.0)],
                noise_std,
                frames,
                ..ScenarioParams::for_kind(kind)
            };
            synth_scenario(kind, &params, rng.random())
        })
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<&str> = kinds.iter().map(|k| k.name()).collect();
    Scene::merged(names.join("+"), &parts)
}

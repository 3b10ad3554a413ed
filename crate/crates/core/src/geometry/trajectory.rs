//! Parametric camera trajectories. Every trajectory starts at the source camera.

use serde::{Deserialize, Serialize};

use super::camera::{rot_x, rot_y, Pose, IDENTITY};
use crate::error::{param_err, Result};

/// Motion family. Translations are in scene units, rotations in radians.
///
/// Camera axes: +x right, +y down, +z forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Identity,
    TranslateX,
    TranslateY,
    TranslateZ,
    /// Yaw about the camera y axis; positive turns toward +x.
    Pan,
    /// Pitch about the camera x axis; positive looks up.
    Tilt,
    /// Orbit about a point on the optical axis at `pivot_depth`, keeping it centered.
    Arc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Easing {
    #[default]
    Linear,
    /// 3s² − 2s³
    Smoothstep,
}

impl Easing {
    pub fn apply(&self, s: f64) -> f64 {
        match self {
            Easing::Linear => s,
            Easing::Smoothstep => s * s * (3.0 - 2.0 * s),
        }
    }
}

fn default_pivot() -> f64 {
    4.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    /// Signed displacement or angle reached at the last frame.
    #[serde(default)]
    pub magnitude: f64,
    #[serde(default)]
    pub easing: Easing,
    #[serde(default = "default_pivot")]
    pub pivot_depth: f64,
}

impl TrajectorySpec {
    pub fn new(kind: TrajectoryKind, magnitude: f64) -> Self {
        Self {
            kind,
            magnitude,
            easing: Easing::Linear,
            pivot_depth: default_pivot(),
        }
    }

    pub fn identity() -> Self {
        Self::new(TrajectoryKind::Identity, 0.0)
    }

    pub fn with_easing(mut self, easing: Easing) -> Self {
        self.easing = easing;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.magnitude.is_finite() {
            return param_err("trajectory magnitude must be finite");
        }
        if self.kind == TrajectoryKind::Arc && !(self.pivot_depth > 0.0 && self.pivot_depth.is_finite()) {
            return param_err(format!("arc pivot depth must be positive, got {}", self.pivot_depth));
        }
        Ok(())
    }

    /// Pose at normalized progress `s` ∈ [0, 1] (before easing).
    pub fn pose_at(&self, s: f64) -> Pose {
        let a = self.magnitude * self.easing.apply(s);
        if a == 0.0 {
            return Pose::identity();
        }
        match self.kind {
            TrajectoryKind::Identity => Pose::identity(),
            TrajectoryKind::TranslateX => Pose::from_camera_motion(IDENTITY, [a, 0.0, 0.0]),
            TrajectoryKind::TranslateY => Pose::from_camera_motion(IDENTITY, [0.0, a, 0.0]),
            TrajectoryKind::TranslateZ => Pose::from_camera_motion(IDENTITY, [0.0, 0.0, a]),
            TrajectoryKind::Pan => Pose::from_camera_motion(rot_y(a), [0.0; 3]),
            TrajectoryKind::Tilt => Pose::from_camera_motion(rot_x(a), [0.0; 3]),
            TrajectoryKind::Arc => {
                let p = self.pivot_depth;
                let (s, c) = a.sin_cos();
                Pose::from_camera_motion(rot_y(a), [-p * s, 0.0, p * (1.0 - c)])
            }
        }
    }

    /// Exactly `n_frames` poses; frame 0 is the identity.
    pub fn poses(&self, n_frames: usize) -> Vec<Pose> {
        (0..n_frames)
            .map(|i| {
                let s = if n_frames > 1 {
                    i as f64 / (n_frames - 1) as f64
                } else {
                    0.0
                };
                self.pose_at(s)
            })
            .collect()
    }
}

/// Magnitudes for the canonical set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryMagnitudes {
    pub translation: f64,
    pub dolly: f64,
    pub pan: f64,
    pub tilt: f64,
    pub arc: f64,
    pub pivot_depth: f64,
}

impl Default for TrajectoryMagnitudes {
    fn default() -> Self {
        Self {
            translation: 0.5,
            dolly: 1.0,
            pan: 0.2,
            tilt: 0.15,
            arc: 0.3,
            pivot_depth: 4.0,
        }
    }
}

pub const CANONICAL_NAMES: [&str; 10] = [
    "translate_left",
    "translate_right",
    "translate_up",
    "translate_down",
    "dolly_in",
    "dolly_out",
    "pan_left",
    "pan_right",
    "tilt_up",
    "arc",
];

/// Looks up a canonical trajectory (or `identity`) by name.
pub fn canonical(name: &str, m: &TrajectoryMagnitudes) -> Result<TrajectorySpec> {
    use TrajectoryKind::*;
    let spec = match name {
        "identity" => TrajectorySpec::identity(),
        "translate_left" => TrajectorySpec::new(TranslateX, -m.translation),
        "translate_right" => TrajectorySpec::new(TranslateX, m.translation),
        "translate_up" => TrajectorySpec::new(TranslateY, -m.translation),
        "translate_down" => TrajectorySpec::new(TranslateY, m.translation),
        "dolly_in" => TrajectorySpec::new(TranslateZ, m.dolly),
        "dolly_out" => TrajectorySpec::new(TranslateZ, -m.dolly),
        "pan_left" => TrajectorySpec::new(Pan, -m.pan),
        "pan_right" => TrajectorySpec::new(Pan, m.pan),
        "tilt_up" => TrajectorySpec::new(Tilt, m.tilt),
        "arc" => TrajectorySpec {
            pivot_depth: m.pivot_depth,
            ..TrajectorySpec::new(Arc, m.arc)
        },
        other => return param_err(format!("unknown trajectory `{other}`")),
    };
    spec.validate()?;
    Ok(spec)
}

pub fn canonical_trajectories(m: &TrajectoryMagnitudes) -> Vec<(&'static str, TrajectorySpec)> {
    CANONICAL_NAMES
        .iter()
        .map(|&name| (name, canonical(name, m).expect("canonical names resolve")))
        .collect()
}

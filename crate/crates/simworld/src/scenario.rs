//! Scenario description and validation.

use dogm_core::{ObjectClass, Pose2, Vec2};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{field} {reason}")]
    Invalid { field: String, reason: String },
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> SimError {
    SimError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t: f64,
    pub position: Vec2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    ConstantVelocity {
        start: Vec2,
        #[serde(default = "Vec2::zeros")]
        velocity: Vec2,
        /// Heading; defaults to the direction of travel.
        #[serde(default)]
        yaw: Option<f64>,
    },
    /// Piecewise-linear path; the object rests at the first and last point
    /// outside the waypoint time span.
    Waypoints { points: Vec<Waypoint> },
}

impl Default for Trajectory {
    fn default() -> Self {
        Trajectory::ConstantVelocity {
            start: Vec2::zeros(),
            velocity: Vec2::zeros(),
            yaw: None,
        }
    }
}

/// Kinematic state of a trajectory at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kinematics {
    pub pose: Pose2,
    pub velocity: Vec2,
}

fn heading(v: Vec2, fallback: f64) -> f64 {
    if v.norm() > 1e-12 {
        v.y.atan2(v.x)
    } else {
        fallback
    }
}

impl Trajectory {
    pub fn at(&self, t: f64) -> Kinematics {
        match self {
            Trajectory::ConstantVelocity { start, velocity, yaw } => {
                let p = start + velocity * t;
                Kinematics {
                    pose: Pose2::new(p.x, p.y, yaw.unwrap_or_else(|| heading(*velocity, 0.0))),
                    velocity: *velocity,
                }
            }
            Trajectory::Waypoints { points } => {
                let first = points[0];
                let seg_heading = |k: usize| heading(points[k + 1].position - points[k].position, 0.0);
                if points.len() == 1 || t <= first.t {
                    let yaw = if points.len() > 1 { seg_heading(0) } else { 0.0 };
                    return Kinematics {
                        pose: Pose2::new(first.position.x, first.position.y, yaw),
                        velocity: Vec2::zeros(),
                    };
                }
                for k in 0..points.len() - 1 {
                    let (a, b) = (points[k], points[k + 1]);
                    if t <= b.t {
                        let v = (b.position - a.position) / (b.t - a.t);
                        let p = a.position + v * (t - a.t);
                        return Kinematics {
                            pose: Pose2::new(p.x, p.y, seg_heading(k)),
                            velocity: v,
                        };
                    }
                }
                let last = points[points.len() - 1];
                Kinematics {
                    pose: Pose2::new(last.position.x, last.position.y, seg_heading(points.len() - 2)),
                    velocity: Vec2::zeros(),
                }
            }
        }
    }

    fn validate(&self, field: &str) -> Result<(), SimError> {
        match self {
            Trajectory::ConstantVelocity { start, velocity, yaw } => {
                let finite = start.iter().chain(velocity.iter()).all(|v| v.is_finite()) && yaw.is_none_or(f64::is_finite);
                if !finite {
                    return Err(invalid(field, "must be finite"));
                }
            }
            Trajectory::Waypoints { points } => {
                if points.is_empty() {
                    return Err(invalid(format!("{field}.points"), "must not be empty"));
                }
                for (k, w) in points.iter().enumerate() {
                    if !(w.t.is_finite() && w.position.iter().all(|v| v.is_finite())) {
                        return Err(invalid(format!("{field}.points[{k}]"), "must be finite"));
                    }
                    if k > 0 && w.t <= points[k - 1].t {
                        return Err(invalid(format!("{field}.points[{k}].t"), "must be strictly increasing"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorConfig {
    pub class: ObjectClass,
    /// Length along the heading and width, meters.
    pub extent: Vec2,
    pub trajectory: Trajectory,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wall {
    pub start: Vec2,
    pub end: Vec2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    /// Mounting pose in the ego frame.
    pub mount: Pose2,
    /// Full field of view, radians.
    pub fov: f64,
    pub max_range: f64,
    pub sigma_range: f64,
    /// Radians.
    pub sigma_azimuth: f64,
    pub sigma_range_rate: f64,
    pub detections_per_actor_face: usize,
    pub wall_points_per_meter: f64,
    /// Mean clutter detections per frame.
    pub clutter_rate: f64,
    pub detection_prob: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            mount: Pose2::default(),
            fov: 120f64.to_radians(),
            max_range: 50.0,
            sigma_range: 0.1,
            sigma_azimuth: 0.5f64.to_radians(),
            sigma_range_rate: 0.1,
            detections_per_actor_face: 4,
            wall_points_per_meter: 2.0,
            clutter_rate: 0.0,
            detection_prob: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub duration: f64,
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ego: Trajectory,
    #[serde(default)]
    pub actors: Vec<ActorConfig>,
    #[serde(default)]
    pub walls: Vec<Wall>,
    #[serde(default)]
    pub sensor: SensorConfig,
}

impl ScenarioConfig {
    pub fn frame_count(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return Err(invalid("duration", "must be at least dt"));
        }
        self.ego.validate("ego")?;
        for (k, a) in self.actors.iter().enumerate() {
            if !(a.extent.x > 0.0 && a.extent.y > 0.0) {
                return Err(invalid(format!("actors[{k}].extent"), "must be positive"));
            }
            a.trajectory.validate(&format!("actors[{k}].trajectory"))?;
        }
        for (k, w) in self.walls.iter().enumerate() {
            if (w.end - w.start).norm() <= 0.0 || !w.start.iter().chain(w.end.iter()).all(|v| v.is_finite()) {
                return Err(invalid(format!("walls[{k}]"), "must have distinct finite endpoints"));
            }
        }
        let s = &self.sensor;
        if !(s.fov > 0.0 && s.fov <= 2.0 * std::f64::consts::PI) {
            return Err(invalid("sensor.fov", "must lie in (0, 2π]"));
        }
        if !(s.max_range > 0.0 && s.max_range.is_finite()) {
            return Err(invalid("sensor.max_range", "must be positive"));
        }
        for (name, v) in [
            ("sensor.sigma_range", s.sigma_range),
            ("sensor.sigma_azimuth", s.sigma_azimuth),
            ("sensor.sigma_range_rate", s.sigma_range_rate),
            ("sensor.wall_points_per_meter", s.wall_points_per_meter),
            ("sensor.clutter_rate", s.clutter_rate),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&s.detection_prob) {
            return Err(invalid("sensor.detection_prob", "must lie in [0, 1]"));
        }
        if !s.mount.is_finite() {
            return Err(invalid("sensor.mount", "must be finite"));
        }
        Ok(())
    }
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, SimError> {
    let cfg: ScenarioConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, SimError> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

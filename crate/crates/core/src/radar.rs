//! Radar detections and scans.

use crate::error::{DogmError, Result};
use crate::geometry::{Pose2, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadarDetection {
    /// Meters from the sensor.
    pub range: f64,
    /// Radians in the sensor frame, counter-clockwise from boresight.
    pub azimuth: f64,
    /// Radial velocity in m/s, positive when the target recedes.
    pub range_rate: f64,
    /// Detection quality in (0, 1].
    #[serde(default = "default_snr")]
    pub snr_weight: f64,
}

fn default_snr() -> f64 {
    1.0
}

impl RadarDetection {
    pub fn new(range: f64, azimuth: f64, range_rate: f64) -> Self {
        Self {
            range,
            azimuth,
            range_rate,
            snr_weight: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadarScan {
    pub timestamp: f64,
    /// Sensor mounting pose in the ego frame.
    pub sensor_pose: Pose2,
    /// Ego velocity in the world frame.
    pub ego_velocity: Vec2,
    /// Ego pose in the world frame.
    pub ego_pose: Pose2,
    pub detections: Vec<RadarDetection>,
}

impl RadarScan {
    /// Sensor pose in the world frame.
    pub fn sensor_world(&self) -> Pose2 {
        self.ego_pose.compose(&self.sensor_pose)
    }

    /// World position of a detection.
    pub fn detection_world(&self, d: &RadarDetection) -> Vec2 {
        let local = Vec2::new(d.range * d.azimuth.cos(), d.range * d.azimuth.sin());
        self.sensor_world().transform_point(local)
    }

    /// Unit line-of-sight vector from the sensor towards a detection, world frame.
    pub fn los_unit(&self, d: &RadarDetection) -> Vec2 {
        let s = self.sensor_world();
        let a = s.yaw + d.azimuth;
        Vec2::new(a.cos(), a.sin())
    }

    /// Ego-motion-compensated range rate: the radial velocity the target would
    /// show to a stationary sensor.
    pub fn compensated_range_rate(&self, d: &RadarDetection) -> f64 {
        d.range_rate + self.ego_velocity.dot(&self.los_unit(d))
    }

    /// Checks every detection against the sensor envelope.
    pub fn validate(&self, max_range: f64, fov: Option<f64>) -> Result<()> {
        for (index, d) in self.detections.iter().enumerate() {
            let bad = |reason: String| DogmError::DetectionOutOfLimits { index, reason };
            if !(d.range.is_finite() && d.azimuth.is_finite() && d.range_rate.is_finite()) {
                return Err(bad("non-finite value".into()));
            }
            if d.range < 0.0 || d.range > max_range {
                return Err(bad(format!("range {} outside [0, {}]", d.range, max_range)));
            }
            if let Some(fov) = fov {
                if d.azimuth.abs() > fov / 2.0 + 1e-9 {
                    return Err(bad(format!("azimuth {} outside field of view {}", d.azimuth, fov)));
                }
            }
            if !(d.snr_weight > 0.0 && d.snr_weight <= 1.0) {
                return Err(bad(format!("snr_weight {} outside (0, 1]", d.snr_weight)));
            }
        }
        Ok(())
    }
}

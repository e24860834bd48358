//! Planar poses and small vector helpers.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type Vec2 = nalgebra::Vector2<f64>;

/// Rigid 2D pose: position plus heading (rad, counter-clockwise from +x).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub yaw: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { x, y, yaw }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::new(self.yaw.cos(), self.yaw.sin())
    }

    /// Maps a point expressed in this pose's local frame into the parent frame.
    pub fn transform_point(&self, local: Vec2) -> Vec2 {
        let (s, c) = self.yaw.sin_cos();
        Vec2::new(
            self.x + c * local.x - s * local.y,
            self.y + s * local.x + c * local.y,
        )
    }

    /// Inverse of [`Pose2::transform_point`].
    pub fn inverse_transform_point(&self, world: Vec2) -> Vec2 {
        let (s, c) = self.yaw.sin_cos();
        let d = world - self.position();
        Vec2::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }

    /// `self ∘ local`: the pose `local` (given in this frame) expressed in the parent frame.
    pub fn compose(&self, local: &Pose2) -> Pose2 {
        let p = self.transform_point(local.position());
        Pose2::new(p.x, p.y, wrap_angle(self.yaw + local.yaw))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.yaw.is_finite()
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wrap_stays_in_half_open_interval() {
        assert_relative_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(-PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(0.5), 0.5);
        assert_relative_eq!(wrap_angle(-7.0), -7.0 + 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn transform_round_trip() {
        let pose = Pose2::new(3.0, -1.0, 0.7);
        let p = Vec2::new(2.5, 4.0);
        let back = pose.inverse_transform_point(pose.transform_point(p));
        assert_relative_eq!(back, p, epsilon = 1e-12);
    }

    #[test]
    fn compose_mounts_sensor() {
        let ego = Pose2::new(10.0, 0.0, std::f64::consts::FRAC_PI_2);
        let mount = Pose2::new(2.0, 0.0, 0.0);
        let s = ego.compose(&mount);
        assert_relative_eq!(s.x, 10.0, epsilon = 1e-12);
        assert_relative_eq!(s.y, 2.0, epsilon = 1e-12);
        assert_relative_eq!(s.yaw, std::f64::consts::FRAC_PI_2);
    }
}

//! Scan and ground-truth generation.

use crate::scenario::{ScenarioConfig, SimError};
use dogm_core::geometry::wrap_angle;
use dogm_core::rng::keyed_rng;
use dogm_core::{GtBox, GtFrame, Pose2, RadarDetection, RadarScan, Vec2};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

#[derive(Clone, Debug, PartialEq)]
pub struct SimFrame {
    pub scan: RadarScan,
    pub gt: GtFrame,
}

/// A reflecting line segment.
#[derive(Clone, Copy, Debug)]
struct Surface {
    a: Vec2,
    b: Vec2,
}

/// A candidate reflection point before visibility and noise.
#[derive(Clone, Copy, Debug)]
struct SurfacePoint {
    surface: usize,
    pos: Vec2,
    velocity: Vec2,
}

fn box_corners(pose: &Pose2, extent: Vec2) -> [Vec2; 4] {
    let (hx, hy) = (extent.x / 2.0, extent.y / 2.0);
    [
        pose.transform_point(Vec2::new(hx, hy)),
        pose.transform_point(Vec2::new(-hx, hy)),
        pose.transform_point(Vec2::new(-hx, -hy)),
        pose.transform_point(Vec2::new(hx, -hy)),
    ]
}

/// Angular z-buffer over the field of view. Each bin remembers the distance
/// to the nearest surface portion that falls inside it.
struct ZBuffer {
    origin: Vec2,
    boresight: f64,
    fov: f64,
    width: f64,
    /// Per bin, per surface: nearest distance of the surface inside the bin.
    nearest: Vec<Vec<f64>>,
}

impl ZBuffer {
    fn new(origin: Vec2, boresight: f64, fov: f64, width: f64, surfaces: &[Surface]) -> Self {
        let n_bins = (fov / width).ceil().max(1.0) as usize;
        let mut z = Self {
            origin,
            boresight,
            fov,
            width,
            nearest: vec![vec![f64::INFINITY; surfaces.len()]; n_bins],
        };
        for (k, s) in surfaces.iter().enumerate() {
            z.rasterize(k, s);
        }
        z
    }

    fn rel_angle(&self, p: Vec2) -> f64 {
        let d = p - self.origin;
        wrap_angle(d.y.atan2(d.x) - self.boresight)
    }

    fn bin(&self, angle: f64) -> Option<usize> {
        if angle.abs() > self.fov / 2.0 {
            return None;
        }
        Some((((angle + self.fov / 2.0) / self.width) as usize).min(self.nearest.len() - 1))
    }

    /// Segment parameter where the ray at relative `angle` meets the segment's line.
    fn param_at(&self, s: &Surface, angle: f64) -> f64 {
        let a = self.boresight + angle;
        let dir = Vec2::new(a.cos(), a.sin());
        let ab = s.b - s.a;
        let den = ab.x * dir.y - ab.y * dir.x;
        if den.abs() < 1e-15 {
            return 0.0;
        }
        let oa = s.a - self.origin;
        (-(oa.x * dir.y - oa.y * dir.x) / den).clamp(0.0, 1.0)
    }

    fn rasterize(&mut self, k: usize, s: &Surface) {
        let mut row_values = Vec::new();
        let ta = self.rel_angle(s.a);
        let tb = ta + wrap_angle(self.rel_angle(s.b) - ta);
        let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
        let half = self.fov / 2.0;
        if hi < -half || lo > half {
            return;
        }
        let ab = s.b - s.a;
        let len2 = ab.norm_squared();
        let foot = ((self.origin - s.a).dot(&ab) / len2).clamp(0.0, 1.0);
        for bin in 0..self.nearest.len() {
            let b0 = -half + bin as f64 * self.width;
            let b1 = (b0 + self.width).min(half);
            let (c0, c1) = (b0.max(lo), b1.min(hi));
            if c0 > c1 {
                continue;
            }
            let (p0, p1) = (self.param_at(s, c0), self.param_at(s, c1));
            let u = foot.clamp(p0.min(p1), p0.max(p1));
            row_values.push((bin, (s.a + ab * u - self.origin).norm()));
        }
        for (bin, d) in row_values {
            self.nearest[bin][k] = d;
        }
    }

    /// A point is visible when its own surface is (one of) the nearest in its bin.
    fn visible(&self, p: &SurfacePoint) -> bool {
        let Some(bin) = self.bin(self.rel_angle(p.pos)) else {
            return false;
        };
        let row = &self.nearest[bin];
        let best = row.iter().copied().fold(f64::INFINITY, f64::min);
        row[p.surface] <= best + 1e-6
    }
}

/// Runs the scenario and returns one scan and ground-truth frame per step.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Vec<SimFrame>, SimError> {
    cfg.validate()?;
    let sensor_cfg = &cfg.sensor;
    let noise = |sigma: f64| Normal::new(0.0, sigma).expect("validated std");
    let n_range = noise(sensor_cfg.sigma_range);
    let n_az = noise(sensor_cfg.sigma_azimuth);
    let n_rr = noise(sensor_cfg.sigma_range_rate);
    let bin_width = if sensor_cfg.sigma_azimuth > 0.0 {
        sensor_cfg.sigma_azimuth
    } else {
        0.5f64.to_radians()
    };
    let mut frames = Vec::with_capacity(cfg.frame_count());
    for k in 0..cfg.frame_count() {
        let t = k as f64 * cfg.dt;
        let mut rng = keyed_rng(cfg.seed, &[k as u64]);
        let ego = cfg.ego.at(t);
        let sensor = ego.pose.compose(&sensor_cfg.mount);
        let origin = sensor.position();

        let mut boxes = Vec::with_capacity(cfg.actors.len());
        let mut surfaces = Vec::new();
        let mut points = Vec::new();
        for actor in &cfg.actors {
            let kin = actor.trajectory.at(t);
            boxes.push(GtBox {
                center: kin.pose.position(),
                extent: actor.extent,
                yaw: kin.pose.yaw,
                speed: kin.velocity.norm(),
                class_id: actor.class,
            });
            let c = box_corners(&kin.pose, actor.extent);
            for f in 0..4 {
                let (a, b) = (c[f], c[(f + 1) % 4]);
                let mid = (a + b) / 2.0;
                // corners run counter-clockwise, so the outward normal is the edge turned clockwise
                let edge = b - a;
                let normal = Vec2::new(edge.y, -edge.x);
                if normal.dot(&(origin - mid)) <= 0.0 {
                    continue;
                }
                let id = surfaces.len();
                surfaces.push(Surface { a, b });
                let n = sensor_cfg.detections_per_actor_face;
                for m in 0..n {
                    let u = (m as f64 + 0.5) / n as f64;
                    points.push(SurfacePoint {
                        surface: id,
                        pos: a + edge * u,
                        velocity: kin.velocity,
                    });
                }
            }
        }
        for w in &cfg.walls {
            let id = surfaces.len();
            surfaces.push(Surface { a: w.start, b: w.end });
            let len = (w.end - w.start).norm();
            let n = ((len * sensor_cfg.wall_points_per_meter).round() as usize).max(1);
            for m in 0..n {
                let u = (m as f64 + 0.5) / n as f64;
                points.push(SurfacePoint {
                    surface: id,
                    pos: w.start + (w.end - w.start) * u,
                    velocity: Vec2::zeros(),
                });
            }
        }

        let zbuf = ZBuffer::new(origin, sensor.yaw, sensor_cfg.fov, bin_width, &surfaces);
        let half_fov = sensor_cfg.fov / 2.0;
        let mut detections = Vec::new();
        for p in &points {
            let rel = p.pos - origin;
            let range = rel.norm();
            if range > sensor_cfg.max_range || range <= 0.0 || !zbuf.visible(p) {
                continue;
            }
            if rng.random::<f64>() >= sensor_cfg.detection_prob {
                continue;
            }
            let u = rel / range;
            let rr = (p.velocity - ego.velocity).dot(&u);
            let azimuth = wrap_angle(rel.y.atan2(rel.x) - sensor.yaw);
            detections.push(RadarDetection::new(
                (range + n_range.sample(&mut rng)).clamp(0.0, sensor_cfg.max_range),
                (azimuth + n_az.sample(&mut rng)).clamp(-half_fov, half_fov),
                rr + n_rr.sample(&mut rng),
            ));
        }
        if sensor_cfg.clutter_rate > 0.0 {
            let count = Poisson::new(sensor_cfg.clutter_rate)
                .expect("validated rate")
                .sample(&mut rng) as usize;
            for _ in 0..count {
                let range = sensor_cfg.max_range * rng.random::<f64>().sqrt();
                let azimuth = rng.random_range(-half_fov..=half_fov);
                let rr = rng.random_range(-2.0..=2.0);
                detections.push(RadarDetection::new(range, azimuth, rr));
            }
        }
        frames.push(SimFrame {
            scan: RadarScan {
                timestamp: t,
                sensor_pose: sensor_cfg.mount,
                ego_velocity: ego.velocity,
                ego_pose: ego.pose,
                detections,
            },
            gt: GtFrame {
                timestamp: t,
                boxes,
                ego_pose: ego.pose,
                ego_velocity: ego.velocity,
            },
        });
    }
    Ok(frames)
}

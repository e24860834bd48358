//! Particle filter for cell dynamics.
//!
//! Particles are born in dynamic cells with a velocity whose line-of-sight
//! component reproduces the associated detection's range rate, weighted by
//! range-rate agreement and measured occupancy, resampled systematically and
//! propagated with a constant-velocity model.

use crate::belief::{State, PROB_FLOOR};
use crate::error::{DogmError, Result};
use crate::geometry::Vec2;
use crate::grid::{Grid, GridSpec};
use crate::ism::MeasurementGrid;
use crate::radar::RadarScan;
use crate::rng::{keyed_rng, STREAM_PREDICT, STREAM_RESAMPLE, STREAM_SPAWN};
use crate::update::DogmFrame;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle {
    /// World frame, meters.
    pub pos: Vec2,
    /// World frame, m/s.
    pub vel: Vec2,
    pub weight: f64,
    /// Frames survived.
    pub age: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    /// Maximum particle count after resampling.
    pub budget: usize,
    pub births_per_cell: usize,
    /// Bound of the uniform prior on the velocity component across the line of sight, m/s.
    pub v_max: f64,
    /// Range-rate likelihood std, m/s.
    pub sigma_rr: f64,
    /// Weight factor for particles with no associated detection.
    pub persistence: f64,
    /// Particle-to-detection association radius, meters.
    pub r_assoc: f64,
    /// Cell-to-detection association radius for births, meters.
    pub birth_radius: f64,
    pub sigma_pos: f64,
    pub sigma_vel: f64,
    /// Particles a cell needs before it reports a velocity.
    pub min_particles: usize,
    pub rng_seed: u64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            budget: 20_000,
            births_per_cell: 8,
            v_max: 15.0,
            sigma_rr: 0.5,
            persistence: 0.3,
            r_assoc: 1.0,
            birth_radius: 1.0,
            sigma_pos: 0.05,
            sigma_vel: 0.3,
            min_particles: 3,
            rng_seed: 0,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if self.budget < self.births_per_cell {
            return Err(DogmError::param("filter.budget", "must be at least births_per_cell"));
        }
        let positive = [
            ("filter.v_max", self.v_max),
            ("filter.sigma_rr", self.sigma_rr),
            ("filter.r_assoc", self.r_assoc),
            ("filter.birth_radius", self.birth_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DogmError::param(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [("filter.sigma_pos", self.sigma_pos), ("filter.sigma_vel", self.sigma_vel)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(DogmError::param(name, format!("must be non-negative, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.persistence) {
            return Err(DogmError::param("filter.persistence", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// World-frame view of a detection used for association.
#[derive(Clone, Copy, Debug)]
struct DetPoint {
    pos: Vec2,
    rr_meas: f64,
    rr_comp: f64,
    los: Vec2,
}

/// Uniform hash of detection positions for radius queries.
struct DetIndex {
    cell: f64,
    points: Vec<DetPoint>,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl DetIndex {
    fn new(scan: &RadarScan, cell: f64) -> Self {
        let points: Vec<DetPoint> = scan
            .detections
            .iter()
            .map(|d| DetPoint {
                pos: scan.detection_world(d),
                rr_meas: d.range_rate,
                rr_comp: scan.compensated_range_rate(d),
                los: scan.los_unit(d),
            })
            .collect();
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (k, p) in points.iter().enumerate() {
            buckets.entry(Self::key(cell, p.pos)).or_default().push(k);
        }
        Self { cell, points, buckets }
    }

    fn key(cell: f64, p: Vec2) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    /// Nearest detection within `radius` (≤ bucket size); ties go to the lower index.
    fn nearest(&self, p: Vec2, radius: f64) -> Option<&DetPoint> {
        let (bx, by) = Self::key(self.cell, p);
        let mut best: Option<(f64, usize)> = None;
        for dy in -1..=1 {
            for dx in -1..=1 {
                if let Some(ids) = self.buckets.get(&(bx + dx, by + dy)) {
                    for &k in ids {
                        let d2 = (self.points[k].pos - p).norm_squared();
                        if d2 <= radius * radius && best.is_none_or(|(bd, bk)| d2 < bd || (d2 == bd && k < bk)) {
                            best = Some((d2, k));
                        }
                    }
                }
            }
        }
        best.map(|(_, k)| &self.points[k])
    }
}

/// Births for the current frame. A cell spawns when its argmax in the fused
/// frame (or in the raw measurement, when given) is dynamic and a detection
/// lies within the birth radius of its centre.
pub fn spawn(
    frame: &DogmFrame,
    scan: &RadarScan,
    mg: Option<&MeasurementGrid>,
    params: &FilterParams,
    population: usize,
    frame_index: u64,
) -> Vec<Particle> {
    if params.births_per_cell == 0 {
        return Vec::new();
    }
    let spec = &frame.spec;
    let ego = frame.ego();
    let dets = DetIndex::new(scan, params.birth_radius);
    let cells: Vec<usize> = (0..spec.cell_count())
        .filter(|&k| {
            frame.cells.as_slice()[k].argmax() == State::Dynamic
                || mg.is_some_and(|m| m.cells.as_slice()[k].argmax() == State::Dynamic)
        })
        .collect();
    let mut births: Vec<Particle> = cells
        .par_iter()
        .flat_map_iter(|&k| {
            let (i, j) = (k % spec.width_cells, k / spec.width_cells);
            let centre = spec.cell_center(ego, i, j);
            let det = dets.nearest(centre, params.birth_radius).copied();
            let mut rng = keyed_rng(params.rng_seed, &[frame_index, STREAM_SPAWN, k as u64]);
            let corner = centre - Vec2::repeat(spec.resolution / 2.0);
            let n = if det.is_some() { params.births_per_cell } else { 0 };
            (0..n).map(move |_| {
                let d = det.expect("births only with a detection");
                let pos = corner + Vec2::new(rng.random::<f64>(), rng.random::<f64>()) * spec.resolution;
                let across = Vec2::new(-d.los.y, d.los.x);
                let t = rng.random_range(-params.v_max..=params.v_max);
                Particle {
                    pos,
                    vel: d.los * d.rr_comp + across * t,
                    weight: 0.0,
                    age: 0,
                }
            })
        })
        .collect();
    if births.len() > params.budget {
        let mut rng = keyed_rng(params.rng_seed, &[frame_index, STREAM_SPAWN, u64::MAX]);
        let mut keep = index::sample(&mut rng, births.len(), params.budget).into_vec();
        keep.sort_unstable();
        births = keep.into_iter().map(|k| births[k]).collect();
    }
    let w = 1.0 / (population + births.len()) as f64;
    for b in &mut births {
        b.weight = w;
    }
    births
}

/// Multiplies weights by the range-rate likelihood and measured occupancy,
/// then normalizes. Returns `true` when every weight underflowed and the set
/// was reset to uniform weights.
pub fn reweight(particles: &mut [Particle], scan: &RadarScan, mg: &MeasurementGrid, params: &FilterParams) -> bool {
    if particles.is_empty() {
        return false;
    }
    let dets = DetIndex::new(scan, params.r_assoc);
    let sensor = scan.sensor_world().position();
    let ego = mg.ego_pose.position();
    let two_var = 2.0 * params.sigma_rr * params.sigma_rr;
    particles.par_iter_mut().for_each(|p| {
        let occ = mg
            .spec
            .world_to_cell(ego, p.pos)
            .map_or(2.0 * PROB_FLOOR, |(i, j)| mg.cells.get(i, j).occupancy());
        let factor = match dets.nearest(p.pos, params.r_assoc) {
            Some(d) => {
                let los = p.pos - sensor;
                let n = los.norm();
                let u = if n > 0.0 { los / n } else { d.los };
                let r = d.rr_meas - (p.vel - scan.ego_velocity).dot(&u);
                (-r * r / two_var).exp()
            }
            None => params.persistence,
        };
        p.weight *= factor * occ;
    });
    let sum: f64 = particles.iter().map(|p| p.weight).sum();
    if sum > 0.0 && sum.is_finite() {
        for p in particles.iter_mut() {
            p.weight /= sum;
        }
        false
    } else {
        let w = 1.0 / particles.len() as f64;
        for p in particles.iter_mut() {
            p.weight = w;
        }
        true
    }
}

/// Systematic resampling to `min(len, budget)` particles with a keyed offset.
pub fn resample(particles: &[Particle], params: &FilterParams, frame_index: u64) -> Vec<Particle> {
    let n = particles.len().min(params.budget);
    if n == 0 {
        return Vec::new();
    }
    let u0: f64 = keyed_rng(params.rng_seed, &[frame_index, STREAM_RESAMPLE]).random();
    resample_systematic(particles, n, u0)
}

/// Systematic resampling with pointer offsets `(u0 + k) / n`, `u0 ∈ [0, 1)`.
/// Weights are renormalized internally.
pub fn resample_systematic(particles: &[Particle], n: usize, u0: f64) -> Vec<Particle> {
    if particles.is_empty() || n == 0 {
        return Vec::new();
    }
    let total: f64 = particles.iter().map(|p| p.weight).sum();
    let mut out = Vec::with_capacity(n);
    let mut src = 0;
    let mut cum = particles[0].weight / total;
    let last = particles.len() - 1;
    for k in 0..n {
        let u = (u0 + k as f64) / n as f64;
        while u >= cum && src < last {
            src += 1;
            cum += particles[src].weight / total;
        }
        let p = particles[src];
        out.push(Particle {
            weight: 1.0 / n as f64,
            age: p.age + 1,
            ..p
        });
    }
    out
}

/// Constant-velocity propagation with Gaussian process noise. Particles that
/// leave the grid are dropped.
pub fn predict(
    particles: &[Particle],
    dt: f64,
    params: &FilterParams,
    spec: &GridSpec,
    ego: Vec2,
    frame_index: u64,
) -> Vec<Particle> {
    let pos_noise = (params.sigma_pos > 0.0).then(|| Normal::new(0.0, params.sigma_pos).expect("valid std"));
    let vel_noise = (params.sigma_vel > 0.0).then(|| Normal::new(0.0, params.sigma_vel).expect("valid std"));
    particles
        .par_iter()
        .enumerate()
        .filter_map(|(k, p)| {
            let mut pos = p.pos + p.vel * dt;
            let mut vel = p.vel;
            if pos_noise.is_some() || vel_noise.is_some() {
                let mut rng = keyed_rng(params.rng_seed, &[frame_index, STREAM_PREDICT, k as u64]);
                if let Some(n) = &pos_noise {
                    pos += Vec2::new(n.sample(&mut rng), n.sample(&mut rng));
                }
                if let Some(n) = &vel_noise {
                    vel += Vec2::new(n.sample(&mut rng), n.sample(&mut rng));
                }
            }
            spec.world_to_cell(ego, pos).map(|_| Particle { pos, vel, ..*p })
        })
        .collect()
}

/// Weighted mean particle velocity of every cell holding at least `min_particles`.
pub fn cell_velocities(particles: &[Particle], spec: &GridSpec, ego: Vec2, min_particles: usize) -> Grid<Option<Vec2>> {
    let mut count = vec![0usize; spec.cell_count()];
    let mut wsum = vec![0.0f64; spec.cell_count()];
    let mut vsum = vec![Vec2::zeros(); spec.cell_count()];
    for p in particles {
        if let Some((i, j)) = spec.world_to_cell(ego, p.pos) {
            let k = spec.index(i, j);
            count[k] += 1;
            wsum[k] += p.weight;
            vsum[k] += p.vel * p.weight;
        }
    }
    let cells = (0..spec.cell_count())
        .map(|k| (count[k] >= min_particles.max(1) && wsum[k] > 0.0).then(|| vsum[k] / wsum[k]))
        .collect();
    Grid::from_vec(spec.width_cells, spec.height_cells, cells).expect("dimensions match spec")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn particle(x: f64, w: f64) -> Particle {
        Particle {
            pos: Vec2::new(x, 0.0),
            vel: Vec2::zeros(),
            weight: w,
            age: 0,
        }
    }

    #[test]
    fn half_half_weights_copy_fifty_each_for_every_offset() {
        let mut ps: Vec<Particle> = (0..100).map(|k| particle(k as f64, 0.0)).collect();
        ps[0].weight = 0.5;
        ps[1].weight = 0.5;
        for step in 0..100 {
            let u0 = step as f64 / 100.0;
            let out = resample_systematic(&ps, 100, u0);
            let a = out.iter().filter(|p| p.pos.x == 0.0).count();
            let b = out.iter().filter(|p| p.pos.x == 1.0).count();
            assert_eq!((a, b), (50, 50), "offset {u0}");
        }
    }

    #[test]
    fn resample_ages_and_flattens_weights() {
        let ps = vec![particle(0.0, 0.2), particle(1.0, 0.8)];
        let out = resample_systematic(&ps, 2, 0.3);
        assert!(out.iter().all(|p| p.age == 1 && p.weight == 0.5));
    }

    #[test]
    fn empty_population_resamples_to_empty() {
        assert!(resample(&[], &FilterParams::default(), 0).is_empty());
    }

    #[test]
    fn linear_prediction_without_noise() {
        let params = FilterParams {
            sigma_pos: 0.0,
            sigma_vel: 0.0,
            ..FilterParams::default()
        };
        let mut p = particle(0.0, 1.0);
        p.vel = Vec2::new(10.0, 0.0);
        let spec = GridSpec::default();
        let out = predict(&[p], 0.1, &params, &spec, Vec2::zeros(), 0);
        assert!((out[0].pos.x - 1.0).abs() < 1e-12);
        let same = predict(&[p], 0.0, &params, &spec, Vec2::zeros(), 0);
        assert_eq!(same[0], p);
    }

    #[test]
    fn prediction_drops_particles_leaving_grid() {
        let params = FilterParams::default();
        let mut p = particle(49.9, 1.0);
        p.vel = Vec2::new(10.0, 0.0);
        assert!(predict(&[p], 0.1, &params, &GridSpec::default(), Vec2::zeros(), 0).is_empty());
    }

    #[test]
    fn weighted_cell_velocity() {
        let spec = GridSpec::centered(10, 10, 1.0);
        let mut a = particle(0.5, 0.75);
        a.vel = Vec2::new(4.0, 0.0);
        let mut b = particle(0.5, 0.25);
        b.vel = Vec2::new(0.0, 4.0);
        let v = cell_velocities(&[a, b], &spec, Vec2::zeros(), 2);
        let (i, j) = spec.world_to_cell(Vec2::zeros(), a.pos).unwrap();
        let got = v.get(i, j).unwrap();
        assert!((got - Vec2::new(3.0, 1.0)).norm() < 1e-12);
        let sparse = cell_velocities(&[a, b], &spec, Vec2::zeros(), 3);
        assert!(sparse.get(i, j).is_none());
    }

    #[test]
    fn invalid_params_are_rejected() {
        let p = FilterParams {
            births_per_cell: 50,
            budget: 10,
            ..FilterParams::default()
        };
        assert!(p.validate().is_err());
        let p = FilterParams {
            sigma_rr: 0.0,
            ..FilterParams::default()
        };
        assert!(p.validate().is_err());
    }
}

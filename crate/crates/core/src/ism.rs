//! Radar inverse sensor model: scan to measurement grid.
//!
//! Each detection contributes free evidence along the sensor ray and
//! occupied evidence through a Gaussian polar footprint. The occupied mass is
//! split into static and dynamic by a logistic score of the ego-compensated
//! range rate. Free and occupied evidence pool as independent opinions, except
//! in the 3×3 neighbourhood of a detection cell where occupied evidence wins.

use crate::belief::CellBelief;
use crate::error::{DogmError, Result};
use crate::fusion::distance_field;
use crate::geometry::{logistic, wrap_angle, Pose2, Vec2};
use crate::grid::{Grid, GridSpec};
use crate::radar::{RadarDetection, RadarScan};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsmParams {
    /// Footprint std along range, meters.
    pub sigma_range: f64,
    /// Footprint std across range, radians.
    pub sigma_azimuth: f64,
    pub m_free: f64,
    pub m_occ: f64,
    /// Compensated range-rate magnitude at which static and dynamic are equally likely.
    pub v_sep: f64,
    /// Logistic width of the static/dynamic split, m/s.
    pub w_sep: f64,
    pub max_range: f64,
    /// When set, every cell inside the field of view and in front of the
    /// nearest detection of its azimuth bin also receives free evidence.
    pub fov: Option<f64>,
}

impl Default for IsmParams {
    fn default() -> Self {
        Self {
            sigma_range: 0.4,
            sigma_azimuth: 1f64.to_radians(),
            m_free: 0.3,
            m_occ: 0.7,
            v_sep: 0.5,
            w_sep: 0.2,
            max_range: 50.0,
            fov: None,
        }
    }
}

impl IsmParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(DogmError::param(name, format!("must be positive, got {v}")))
            }
        };
        positive("ism.sigma_range", self.sigma_range)?;
        positive("ism.sigma_azimuth", self.sigma_azimuth)?;
        positive("ism.v_sep", self.v_sep)?;
        positive("ism.w_sep", self.w_sep)?;
        positive("ism.max_range", self.max_range)?;
        for (name, m) in [("ism.m_free", self.m_free), ("ism.m_occ", self.m_occ)] {
            if !(m > 0.0 && m < 1.0) {
                return Err(DogmError::param(name, format!("must lie in (0, 1), got {m}")));
            }
        }
        if let Some(fov) = self.fov {
            if !(fov > 0.0 && fov <= 2.0 * std::f64::consts::PI) {
                return Err(DogmError::param("ism.fov", format!("must lie in (0, 2π], got {fov}")));
            }
        }
        Ok(())
    }

    /// Probability that a target with the given compensated range rate is dynamic.
    pub fn dynamic_score(&self, rr_comp: f64) -> f64 {
        logistic((rr_comp.abs() - self.v_sep) / self.w_sep)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementGrid {
    pub spec: GridSpec,
    pub ego_pose: Pose2,
    pub timestamp: f64,
    pub cells: Grid<CellBelief>,
    /// Meters from each cell centre to the nearest detection cell centre.
    pub nearest_detection_distance: Grid<f64>,
    /// Cells containing at least one detection.
    pub detection_mask: Grid<bool>,
    /// Detections that fell outside the grid.
    pub skipped: usize,
}

impl MeasurementGrid {
    /// A measurement that carries no evidence anywhere.
    pub fn uniform(spec: GridSpec, ego_pose: Pose2, timestamp: f64) -> Self {
        let (w, h) = (spec.width_cells, spec.height_cells);
        Self {
            spec,
            ego_pose,
            timestamp,
            cells: Grid::filled(w, h, CellBelief::UNIFORM),
            nearest_detection_distance: Grid::filled(w, h, f64::MAX),
            detection_mask: Grid::filled(w, h, false),
            skipped: 0,
        }
    }
}

/// Per-cell evidence accumulated over all detections.
#[derive(Clone, Copy, Debug)]
struct Evidence {
    free_keep: f64,
    occ_keep: f64,
    occ_sum: f64,
    dyn_sum: f64,
    blocked: bool,
}

impl Default for Evidence {
    fn default() -> Self {
        Self {
            free_keep: 1.0,
            occ_keep: 1.0,
            occ_sum: 0.0,
            dyn_sum: 0.0,
            blocked: false,
        }
    }
}

impl Evidence {
    fn belief(&self) -> CellBelief {
        let f = if self.blocked { 0.0 } else { 1.0 - self.free_keep };
        let o = 1.0 - self.occ_keep;
        if f <= 0.0 && o <= 0.0 {
            return CellBelief::UNIFORM;
        }
        let s = if self.occ_sum > 0.0 {
            self.dyn_sum / self.occ_sum
        } else {
            0.0
        };
        let norm = 1.0 - f * o;
        let m_f = f * (1.0 - o) / norm;
        let m_o = o * (1.0 - f) / norm;
        let m_t = (1.0 - f) * (1.0 - o) / norm;
        let third = m_t / 3.0;
        CellBelief::from_weights([0.0, m_f + third, m_o * (1.0 - s) + third, m_o * s + third])
            .unwrap_or(CellBelief::UNIFORM)
    }
}

/// Cells on the integer line from `a` to `b`, both ends included.
pub fn line_cells(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy + 1) as usize);
    loop {
        out.push((x, y));
        if (x, y) == b {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

/// Builds the per-frame evidence grid for `scan` on the lattice `spec`.
pub fn build_measurement_grid(
    scan: &RadarScan,
    spec: &GridSpec,
    params: &IsmParams,
) -> Result<MeasurementGrid> {
    spec.validate()?;
    params.validate()?;
    if !scan.ego_pose.is_finite() || !scan.sensor_pose.is_finite() {
        return Err(DogmError::param("scan.ego_pose", "must be finite"));
    }
    scan.validate(params.max_range, params.fov)?;

    let ego = scan.ego_pose.position();
    let sensor = scan.sensor_world();
    let (w, h) = (spec.width_cells, spec.height_cells);
    let mut ev = vec![Evidence::default(); spec.cell_count()];
    let mut on_ray = vec![false; spec.cell_count()];
    let mut mask = Grid::filled(w, h, false);
    let mut skipped = 0;

    // Canonical order makes floating-point accumulation independent of the
    // order detections arrive in.
    let mut dets: Vec<&RadarDetection> = scan.detections.iter().collect();
    dets.sort_by(|a, b| {
        a.range
            .total_cmp(&b.range)
            .then(a.azimuth.total_cmp(&b.azimuth))
            .then(a.range_rate.total_cmp(&b.range_rate))
            .then(a.snr_weight.total_cmp(&b.snr_weight))
    });

    let sensor_cell = spec.world_to_cell_signed(ego, sensor.position());
    let mut in_grid = Vec::with_capacity(dets.len());
    for d in dets {
        let p = scan.detection_world(d);
        match spec.world_to_cell(ego, p) {
            Some(c) => in_grid.push((d, p, c)),
            None => skipped += 1,
        }
    }

    for &(d, _, (ci, cj)) in &in_grid {
        *mask.get_mut(ci, cj) = true;
        for j in cj.saturating_sub(1)..=(cj + 1).min(h - 1) {
            for i in ci.saturating_sub(1)..=(ci + 1).min(w - 1) {
                ev[spec.index(i, j)].blocked = true;
            }
        }
        let keep = 1.0 - params.m_free * d.snr_weight;
        let ray = line_cells(sensor_cell, (ci as i64, cj as i64));
        for &(i, j) in &ray[..ray.len() - 1] {
            if spec.contains_cell(i, j) {
                let k = spec.index(i as usize, j as usize);
                ev[k].free_keep *= keep;
                on_ray[k] = true;
            }
        }
    }

    for &(d, p, (ci, cj)) in &in_grid {
        let s_dyn = params.dynamic_score(scan.compensated_range_rate(d));
        let bearing = sensor.yaw + d.azimuth;
        let sigma_cross = (params.sigma_azimuth * d.range).max(1e-9);
        let reach = 3.0 * params.sigma_range.max(sigma_cross);
        let (lo_i, lo_j) = spec.world_to_cell_signed(ego, p - Vec2::new(reach, reach));
        let (hi_i, hi_j) = spec.world_to_cell_signed(ego, p + Vec2::new(reach, reach));
        for j in lo_j.max(0)..=hi_j.min(h as i64 - 1) {
            for i in lo_i.max(0)..=hi_i.min(w as i64 - 1) {
                let (i, j) = (i as usize, j as usize);
                let k = if (i, j) == (ci, cj) {
                    // the footprint peak always lands in the detection's own cell
                    1.0
                } else {
                    let rel = spec.cell_center(ego, i, j) - sensor.position();
                    let dr = rel.norm() - d.range;
                    let cross = wrap_angle(rel.y.atan2(rel.x) - bearing) * d.range;
                    if dr.abs() > 3.0 * params.sigma_range || cross.abs() > 3.0 * sigma_cross {
                        continue;
                    }
                    let zr = dr / params.sigma_range;
                    let zc = cross / sigma_cross;
                    (-0.5 * (zr * zr + zc * zc)).exp()
                };
                let mass = params.m_occ * d.snr_weight * k;
                let e = &mut ev[spec.index(i, j)];
                e.occ_keep *= 1.0 - mass;
                e.occ_sum += mass;
                e.dyn_sum += mass * s_dyn;
            }
        }
    }

    if let Some(fov) = params.fov {
        sweep_free(&mut ev, &on_ray, spec, ego, &sensor, &in_grid, fov, params);
    }

    let cells: Vec<CellBelief> = ev.par_iter().map(Evidence::belief).collect();
    let cells = Grid::from_vec(w, h, cells)?;
    let nearest_detection_distance = distance_field(&mask, spec.resolution);
    Ok(MeasurementGrid {
        spec: *spec,
        ego_pose: scan.ego_pose,
        timestamp: scan.timestamp,
        cells,
        nearest_detection_distance,
        detection_mask: mask,
        skipped,
    })
}

/// Free evidence for the visible part of the field of view that no detection
/// ray crossed. Each azimuth bin is free up to just before its nearest
/// detection (or the sensor's maximum range when it has none).
#[allow(clippy::too_many_arguments)]
fn sweep_free(
    ev: &mut [Evidence],
    on_ray: &[bool],
    spec: &GridSpec,
    ego: Vec2,
    sensor: &Pose2,
    in_grid: &[(&RadarDetection, Vec2, (usize, usize))],
    fov: f64,
    params: &IsmParams,
) {
    let bin_width = params.sigma_azimuth;
    let n_bins = (fov / bin_width).ceil() as usize;
    let bin_of = |az: f64| -> Option<usize> {
        if az.abs() > fov / 2.0 {
            return None;
        }
        Some((((az + fov / 2.0) / bin_width) as usize).min(n_bins - 1))
    };
    let mut limit = vec![params.max_range; n_bins];
    for &(d, _, _) in in_grid {
        if let Some(b) = bin_of(d.azimuth) {
            let r = d.range - 3.0 * params.sigma_range;
            for l in &mut limit[b.saturating_sub(1)..=(b + 1).min(n_bins - 1)] {
                *l = l.min(r);
            }
        }
    }
    let keep = 1.0 - params.m_free;
    let w = spec.width_cells;
    ev.par_iter_mut().enumerate().for_each(|(k, e)| {
        if on_ray[k] || e.blocked {
            return;
        }
        let c = spec.cell_center(ego, k % w, k / w);
        let local = sensor.inverse_transform_point(c);
        let r = local.norm();
        if let Some(b) = bin_of(local.y.atan2(local.x)) {
            if r < limit[b] {
                e.free_keep *= keep;
            }
        }
    });
}

//! Sources of per-cell state corrections: ground-truth labelling, a noisy
//! oracle standing in for a learned model, and correction files on disk.

use crate::belief::State;
use crate::codec;
use crate::error::{DogmError, Result};
use crate::fusion::CorrectionCell;
use crate::geometry::{Pose2, Vec2};
use crate::grid::{Grid, GridSpec};
use crate::rng::{keyed_rng, STREAM_ORACLE};
use crate::update::DogmFrame;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectClass {
    Car,
    Truck,
    Bicycle,
    Motorcycle,
    Adult,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 5] = [
        ObjectClass::Car,
        ObjectClass::Truck,
        ObjectClass::Bicycle,
        ObjectClass::Motorcycle,
        ObjectClass::Adult,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectClass::Car => "car",
            ObjectClass::Truck => "truck",
            ObjectClass::Bicycle => "bicycle",
            ObjectClass::Motorcycle => "motorcycle",
            ObjectClass::Adult => "adult",
        }
    }
}

/// Ground-truth object footprint in world coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub center: Vec2,
    /// Full length and width, meters.
    pub extent: Vec2,
    pub yaw: f64,
    pub speed: f64,
    pub class_id: ObjectClass,
}

impl GtBox {
    pub fn contains(&self, p: Vec2) -> bool {
        let local = Pose2::new(self.center.x, self.center.y, self.yaw).inverse_transform_point(p);
        local.x.abs() <= self.extent.x / 2.0 && local.y.abs() <= self.extent.y / 2.0
    }

    /// Point of the box closest to `p` (p itself when inside).
    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        let pose = Pose2::new(self.center.x, self.center.y, self.yaw);
        let local = pose.inverse_transform_point(p);
        let hx = self.extent.x / 2.0;
        let hy = self.extent.y / 2.0;
        pose.transform_point(Vec2::new(local.x.clamp(-hx, hx), local.y.clamp(-hy, hy)))
    }

    /// Axis-aligned world bounds (min, max).
    pub fn bounds(&self) -> (Vec2, Vec2) {
        let (s, c) = self.yaw.sin_cos();
        let hx = (c.abs() * self.extent.x + s.abs() * self.extent.y) / 2.0;
        let hy = (s.abs() * self.extent.x + c.abs() * self.extent.y) / 2.0;
        let half = Vec2::new(hx, hy);
        (self.center - half, self.center + half)
    }
}

/// Ground truth for one simulated frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtFrame {
    pub timestamp: f64,
    pub boxes: Vec<GtBox>,
    pub ego_pose: Pose2,
    pub ego_velocity: Vec2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionGrid {
    pub spec: GridSpec,
    pub cells: Grid<CorrectionCell>,
}

impl CorrectionGrid {
    pub fn states(&self) -> Grid<State> {
        self.cells.map(|c| c.state)
    }
}

/// Labels observed cells inside ground-truth boxes as static or dynamic by
/// box speed. Unknown cells and cells outside every box keep the frame's
/// argmax state. Where boxes overlap, the fastest box decides.
pub fn label_grid(frame: &DogmFrame, boxes: &[GtBox], v_thresh: f64) -> CorrectionGrid {
    let argmax = frame.argmax_grid();
    let mut cells = argmax.map(|&s| CorrectionCell::certain(s));
    let mut best_speed = Grid::filled(argmax.width(), argmax.height(), f64::NEG_INFINITY);
    let spec = &frame.spec;
    let ego = frame.ego();
    for b in boxes {
        let (lo, hi) = b.bounds();
        let (i0, j0) = spec.world_to_cell_signed(ego, lo);
        let (i1, j1) = spec.world_to_cell_signed(ego, hi);
        for j in j0.max(0)..=j1.min(spec.height_cells as i64 - 1) {
            for i in i0.max(0)..=i1.min(spec.width_cells as i64 - 1) {
                let (i, j) = (i as usize, j as usize);
                if *argmax.get(i, j) == State::Unknown || !b.contains(spec.cell_center(ego, i, j)) {
                    continue;
                }
                if b.speed > *best_speed.get(i, j) {
                    *best_speed.get_mut(i, j) = b.speed;
                    let state = if b.speed < v_thresh {
                        State::Static
                    } else {
                        State::Dynamic
                    };
                    *cells.get_mut(i, j) = CorrectionCell::certain(state);
                }
            }
        }
    }
    CorrectionGrid { spec: frame.spec, cells }
}

/// Degradation applied by the oracle corrector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleNoise {
    /// Probability that a corrected cell falls back to the frame's own state.
    pub miss_rate: f64,
    /// Probability that a surviving static/dynamic correction is swapped.
    pub flip_rate: f64,
    /// Beta(α, β) for the confidence of surviving corrections; `None` gives 1.0.
    pub confidence_beta: Option<(f64, f64)>,
}

impl Default for OracleNoise {
    fn default() -> Self {
        Self {
            miss_rate: 0.0,
            flip_rate: 0.0,
            confidence_beta: None,
        }
    }
}

impl OracleNoise {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.miss_rate) {
            return Err(DogmError::param("oracle.miss_rate", "must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.flip_rate) {
            return Err(DogmError::param("oracle.flip_rate", "must lie in [0, 1)"));
        }
        if let Some((a, b)) = self.confidence_beta {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(DogmError::param("oracle.confidence_beta", "parameters must be positive"));
            }
        }
        Ok(())
    }
}

/// Ground-truth labels degraded by seeded noise. Cells the labelling did not
/// change keep the frame's state with confidence 1.
pub fn oracle_corrector(
    frame: &DogmFrame,
    boxes: &[GtBox],
    v_thresh: f64,
    noise: &OracleNoise,
    seed: u64,
    frame_index: u64,
) -> Result<CorrectionGrid> {
    noise.validate()?;
    let mut out = label_grid(frame, boxes, v_thresh);
    let beta = noise
        .confidence_beta
        .map(|(a, b)| Beta::new(a, b).map_err(|e| DogmError::param("oracle.confidence_beta", e.to_string())))
        .transpose()?;
    let mut rng = keyed_rng(seed, &[frame_index, STREAM_ORACLE]);
    for (cell, prior) in out.cells.as_mut_slice().iter_mut().zip(frame.cells.iter()) {
        let own = prior.argmax();
        if cell.state == own {
            continue;
        }
        if rng.random::<f64>() < noise.miss_rate {
            *cell = CorrectionCell::certain(own);
            continue;
        }
        if rng.random::<f64>() < noise.flip_rate {
            cell.state = match cell.state {
                State::Static => State::Dynamic,
                State::Dynamic => State::Static,
                s => s,
            };
        }
        cell.confidence = match &beta {
            Some(d) => d.sample(&mut rng) as f32,
            None => 1.0,
        };
    }
    Ok(out)
}

/// Resolves the correction file for a frame. A pattern containing `{frame}`
/// gets the zero-padded frame number; otherwise it names a directory holding
/// `frame_NNNNNN.dogc` files.
pub fn correction_path(pattern: &str, frame_index: u64) -> PathBuf {
    if pattern.contains("{frame}") {
        PathBuf::from(pattern.replace("{frame}", &format!("{frame_index:06}")))
    } else {
        Path::new(pattern).join(format!("frame_{frame_index:06}.dogc"))
    }
}

/// Reads the externally produced correction for a frame. `Ok(None)` means no
/// file exists and the frame should not be fused.
pub fn file_corrector(pattern: &str, frame_index: u64, spec: &GridSpec) -> Result<Option<CorrectionGrid>> {
    let path = correction_path(pattern, frame_index);
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let cells = codec::decode_correction(&bytes)?;
    if cells.width() != spec.width_cells || cells.height() != spec.height_cells {
        return Err(DogmError::SpecMismatch(format!(
            "{} holds {}x{} cells, grid is {}x{}",
            path.display(),
            cells.width(),
            cells.height(),
            spec.width_cells,
            spec.height_cells
        )));
    }
    Ok(Some(CorrectionGrid { spec: *spec, cells }))
}

//! The running grid: Bayesian measurement update, state-transition decay and
//! ego-motion realignment.

use crate::belief::{CellBelief, State};
use crate::error::{DogmError, Result};
use crate::geometry::{Pose2, Vec2};
use crate::grid::{Grid, GridSpec};
use crate::ism::MeasurementGrid;
use rayon::prelude::*;

#[derive(Clone, Debug, PartialEq)]
pub struct DogmFrame {
    pub spec: GridSpec,
    pub cells: Grid<CellBelief>,
    /// Cell velocity estimate, present only where the argmax state is dynamic.
    pub velocity: Grid<Option<Vec2>>,
    pub ego_pose: Pose2,
    pub timestamp: f64,
}

impl DogmFrame {
    /// All-unknown grid centred on `ego_pose`, lattice anchored at the world origin.
    pub fn new(spec: GridSpec, ego_pose: Pose2, timestamp: f64) -> Self {
        let spec = spec.anchored_at(ego_pose.position());
        let (w, h) = (spec.width_cells, spec.height_cells);
        Self {
            spec,
            cells: Grid::filled(w, h, CellBelief::unknown()),
            velocity: Grid::filled(w, h, None),
            ego_pose,
            timestamp,
        }
    }

    pub fn ego(&self) -> Vec2 {
        self.ego_pose.position()
    }

    pub fn argmax_grid(&self) -> Grid<State> {
        self.cells.par_map(CellBelief::argmax)
    }

    /// Drops velocities of cells whose argmax is no longer dynamic.
    pub fn mask_velocity(&mut self) {
        let cells = self.cells.as_slice();
        self.velocity
            .as_mut_slice()
            .par_iter_mut()
            .zip(cells)
            .for_each(|(v, b)| {
                if b.argmax() != State::Dynamic {
                    *v = None;
                }
            });
    }
}

/// Per-cell Bayesian product of the prior with the measurement likelihood.
pub fn bayes_update(prior: &DogmFrame, mg: &MeasurementGrid) -> Result<DogmFrame> {
    if prior.spec != mg.spec {
        return Err(DogmError::SpecMismatch(format!(
            "prior {:?} vs measurement {:?}",
            prior.spec, mg.spec
        )));
    }
    if prior.ego_pose.position() != mg.ego_pose.position() {
        return Err(DogmError::SpecMismatch(format!(
            "prior ego {:?} vs measurement ego {:?}",
            prior.ego_pose, mg.ego_pose
        )));
    }
    let w = prior.spec.width_cells;
    let cells: Vec<std::result::Result<CellBelief, (usize, f64)>> = prior
        .cells
        .as_slice()
        .par_iter()
        .zip(mg.cells.as_slice())
        .enumerate()
        .map(|(k, (p, m))| {
            let (p, m) = (p.probs(), m.probs());
            let prod = [p[0] * m[0], p[1] * m[1], p[2] * m[2], p[3] * m[3]];
            let norm: f64 = prod.iter().sum();
            if !(norm >= 1e-12) {
                return Err((k, norm));
            }
            CellBelief::from_weights(prod).ok_or((k, norm))
        })
        .collect();
    let mut out = Vec::with_capacity(cells.len());
    for c in cells {
        match c {
            Ok(b) => out.push(b),
            Err((k, value)) => {
                return Err(DogmError::DegenerateUpdate {
                    i: k % w,
                    j: k / w,
                    value,
                })
            }
        }
    }
    let mut frame = DogmFrame {
        spec: prior.spec,
        cells: Grid::from_vec(w, prior.spec.height_cells, out)?,
        velocity: prior.velocity.clone(),
        ego_pose: mg.ego_pose,
        timestamp: mg.timestamp,
    };
    frame.mask_velocity();
    Ok(frame)
}

/// Row-stochastic 4×4 matrix over (U, F, S, D); row = from, column = to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionMatrix([[f64; 4]; 4]);

impl TransitionMatrix {
    pub fn new(rows: [[f64; 4]; 4]) -> Result<Self> {
        for (row, r) in rows.iter().enumerate() {
            let sum: f64 = r.iter().sum();
            let min = r.iter().copied().fold(f64::INFINITY, f64::min);
            if !((sum - 1.0).abs() <= 1e-9 && min >= 0.0) {
                return Err(DogmError::NonStochastic { row, sum, min });
            }
        }
        Ok(Self(rows))
    }

    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        for (k, row) in m.iter_mut().enumerate() {
            row[k] = 1.0;
        }
        Self(m)
    }

    /// Every known state leaks `lambda` of its mass to unknown per frame;
    /// unknown is absorbing.
    pub fn with_decay(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(DogmError::param("transition_decay", "must lie in [0, 1]"));
        }
        let mut m = [[0.0; 4]; 4];
        m[0][0] = 1.0;
        for (k, row) in m.iter_mut().enumerate().skip(1) {
            row[0] = lambda;
            row[k] = 1.0 - lambda;
        }
        Self::new(m)
    }

    pub fn rows(&self) -> &[[f64; 4]; 4] {
        &self.0
    }

    pub fn apply(&self, b: &CellBelief) -> CellBelief {
        let p = b.probs();
        let mut out = [0.0; 4];
        for (from, row) in self.0.iter().enumerate() {
            for (to, t) in row.iter().enumerate() {
                out[to] += p[from] * t;
            }
        }
        CellBelief::from_weights(out).unwrap_or(*b)
    }
}

impl Default for TransitionMatrix {
    fn default() -> Self {
        Self::with_decay(0.02).expect("valid default decay")
    }
}

pub fn apply_transition(frame: &DogmFrame, t: &TransitionMatrix) -> DogmFrame {
    let mut out = DogmFrame {
        spec: frame.spec,
        cells: frame.cells.par_map(|b| t.apply(b)),
        velocity: frame.velocity.clone(),
        ego_pose: frame.ego_pose,
        timestamp: frame.timestamp,
    };
    out.mask_velocity();
    out
}

/// Rounds to the nearest integer, breaking exact ties away from zero even when
/// the tie is off by floating-point noise.
fn round_cells(x: f64) -> i64 {
    (x + 1e-9 * x.signum()).round() as i64
}

/// Integer cell shift that keeps the grid centred on `new_ego`.
pub fn realign_shift(spec: &GridSpec, old_ego: Vec2, new_ego: Vec2) -> (i64, i64) {
    let corner = spec.corner(old_ego);
    let desired = new_ego + spec.nominal_offset();
    let d = (desired - corner) / spec.resolution;
    (round_cells(d.x), round_cells(d.y))
}

/// Re-centres the grid on `new_pose` by an integer cell shift. Cells scrolling
/// in from outside are unknown. The sub-cell residual stays in
/// `origin_offset`, so cell boundaries never drift from the world lattice.
pub fn realign(frame: &DogmFrame, new_pose: Pose2) -> DogmFrame {
    let old_ego = frame.ego();
    let new_ego = new_pose.position();
    let (kx, ky) = realign_shift(&frame.spec, old_ego, new_ego);
    let res = frame.spec.resolution;
    let corner_cells = frame.spec.corner(old_ego) / res;
    let new_corner = Vec2::new(
        (corner_cells.x.round() + kx as f64) * res,
        (corner_cells.y.round() + ky as f64) * res,
    );
    let spec = GridSpec {
        origin_offset: new_corner - new_ego,
        ..frame.spec
    };
    if (kx, ky) == (0, 0) {
        return DogmFrame {
            spec,
            ego_pose: new_pose,
            ..frame.clone()
        };
    }
    let (w, h) = (spec.width_cells, spec.height_cells);
    let src = |k: usize| -> Option<usize> {
        let i = (k % w) as i64 + kx;
        let j = (k / w) as i64 + ky;
        spec.contains_cell(i, j).then(|| spec.index(i as usize, j as usize))
    };
    let cells: Vec<CellBelief> = (0..w * h)
        .into_par_iter()
        .map(|k| src(k).map_or(CellBelief::unknown(), |s| frame.cells.as_slice()[s]))
        .collect();
    let velocity: Vec<Option<Vec2>> = (0..w * h)
        .into_par_iter()
        .map(|k| src(k).and_then(|s| frame.velocity.as_slice()[s]))
        .collect();
    DogmFrame {
        spec,
        cells: Grid::from_vec(w, h, cells).expect("dimensions preserved"),
        velocity: Grid::from_vec(w, h, velocity).expect("dimensions preserved"),
        ego_pose: new_pose,
        timestamp: frame.timestamp,
    }
}

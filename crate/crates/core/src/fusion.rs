//! Rule-based fusion of corrector output into the grid, and the exact
//! Euclidean distance transform used for the nearest-measurement field.

use crate::belief::{CellBelief, State};
use crate::corrector::CorrectionGrid;
use crate::error::{DogmError, Result};
use crate::grid::Grid;
use crate::update::DogmFrame;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionParams {
    /// Occupancy may be added over free cells only within this distance of a
    /// detection, meters.
    pub d_min: f64,
    /// Existing occupancy is reclassified only when the corrector confidence
    /// strictly exceeds this value.
    pub c_min: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            d_min: 0.5,
            c_min: 0.5,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_min >= 0.0) {
            return Err(DogmError::param("fusion.d_min", "must be non-negative"));
        }
        if !(self.c_min > 0.0 && self.c_min < 1.0) {
            return Err(DogmError::param("fusion.c_min", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionCell {
    pub state: State,
    pub confidence: f32,
}

impl CorrectionCell {
    pub fn certain(state: State) -> Self {
        Self {
            state,
            confidence: 1.0,
        }
    }
}

/// Fused state for one cell given the grid's own state, the corrector's
/// opinion and the distance to the nearest current detection.
pub fn fuse_cell(dogm: State, corr: CorrectionCell, d_meas: f64, params: &FusionParams) -> State {
    use State::*;
    let near = d_meas <= params.d_min;
    let confident = f64::from(corr.confidence) > params.c_min;
    match (dogm, corr.state) {
        (Unknown, _) => Unknown,
        (Free, Static) if near => Static,
        (Free, Dynamic) if near => Dynamic,
        (Free, _) => Free,
        (Static, Dynamic) if confident => Dynamic,
        (Static, _) => Static,
        (Dynamic, Static | Free) if confident => Static,
        (Dynamic, _) => Dynamic,
    }
}

/// Applies [`fuse_cell`] to every cell. Cells whose state changes are reset to
/// a floored one-hot belief; all other cells are copied untouched.
pub fn fuse_grid(
    frame: &DogmFrame,
    corr: &CorrectionGrid,
    d_field: &Grid<f64>,
    params: &FusionParams,
) -> Result<DogmFrame> {
    if !frame.cells.same_dims(&corr.cells) || !frame.cells.same_dims(d_field) {
        return Err(DogmError::SpecMismatch(format!(
            "fusion inputs {}x{}, correction {}x{}, distance field {}x{}",
            frame.cells.width(),
            frame.cells.height(),
            corr.cells.width(),
            corr.cells.height(),
            d_field.width(),
            d_field.height()
        )));
    }
    let fused: Vec<(CellBelief, bool)> = frame
        .cells
        .as_slice()
        .par_iter()
        .zip(corr.cells.as_slice())
        .zip(d_field.as_slice())
        .map(|((b, c), &d)| {
            let before = b.argmax();
            let after = fuse_cell(before, *c, d, params);
            if after == before {
                (*b, false)
            } else {
                (CellBelief::one_hot(after), true)
            }
        })
        .collect();
    let mut out = frame.clone();
    for (k, (b, changed)) in fused.into_iter().enumerate() {
        if changed {
            out.cells.as_mut_slice()[k] = b;
            if b.argmax() != State::Dynamic {
                out.velocity.as_mut_slice()[k] = None;
            }
        }
    }
    Ok(out)
}

/// Exact Euclidean distance, in meters, from every cell centre to the nearest
/// `true` cell centre. An all-false mask yields `f64::MAX` everywhere.
pub fn distance_field(mask: &Grid<bool>, resolution: f64) -> Grid<f64> {
    let (w, h) = (mask.width(), mask.height());
    if !mask.iter().any(|&m| m) {
        return Grid::filled(w, h, f64::MAX);
    }
    // squared distances in cell units, columns first
    let columns: Vec<Vec<f64>> = (0..w)
        .into_par_iter()
        .map(|i| {
            let f: Vec<f64> = (0..h)
                .map(|j| if *mask.get(i, j) { 0.0 } else { f64::INFINITY })
                .collect();
            let mut out = vec![0.0; h];
            squared_edt_1d(&f, &mut out);
            out
        })
        .collect();
    let mut sq = vec![0.0; w * h];
    sq.par_chunks_mut(w).enumerate().for_each(|(j, row)| {
        let f: Vec<f64> = (0..w).map(|i| columns[i][j]).collect();
        squared_edt_1d(&f, row);
    });
    let dist = sq
        .into_par_iter()
        .map(|d| if d.is_finite() { d.sqrt() * resolution } else { f64::MAX })
        .collect();
    Grid::from_vec(w, h, dist).expect("dimensions preserved")
}

/// One-dimensional squared distance transform by the lower envelope of
/// parabolas rooted at the finite samples of `f`.
fn squared_edt_1d(f: &[f64], out: &mut [f64]) {
    let sites: Vec<usize> = (0..f.len()).filter(|&q| f[q].is_finite()).collect();
    if sites.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    let mut v = Vec::with_capacity(sites.len());
    let mut z = Vec::with_capacity(sites.len() + 1);
    v.push(sites[0]);
    z.push(f64::NEG_INFINITY);
    z.push(f64::INFINITY);
    let key = |q: usize| f[q] + (q * q) as f64;
    for &q in &sites[1..] {
        let mut s;
        loop {
            let p = *v.last().unwrap();
            s = (key(q) - key(p)) / (2.0 * (q as f64 - p as f64));
            if s <= z[v.len() - 1] {
                v.pop();
                z.pop();
            } else {
                break;
            }
        }
        *z.last_mut().unwrap() = s;
        v.push(q);
        z.push(f64::INFINITY);
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_site_distances() {
        let mut mask = Grid::filled(5, 5, false);
        *mask.get_mut(2, 2) = true;
        let d = distance_field(&mask, 0.2);
        assert_eq!(*d.get(2, 2), 0.0);
        assert!((d.get(3, 2) - 0.2).abs() < 1e-12);
        assert!((d.get(2, 1) - 0.2).abs() < 1e-12);
        assert!((d.get(3, 3) - 0.2 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_mask_is_sentinel() {
        let d = distance_field(&Grid::filled(4, 3, false), 0.2);
        assert!(d.iter().all(|&x| x == f64::MAX));
    }

    #[test]
    fn one_dimensional_envelope() {
        let inf = f64::INFINITY;
        let f = [inf, 0.0, inf, inf, inf, 0.0, inf];
        let mut out = [0.0; 7];
        squared_edt_1d(&f, &mut out);
        assert_eq!(out, [1.0, 0.0, 1.0, 4.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn listed_examples() {
        let p = FusionParams::default();
        let c = |state, confidence| CorrectionCell { state, confidence };
        assert_eq!(fuse_cell(State::Static, c(State::Dynamic, 0.9), 10.0, &p), State::Dynamic);
        assert_eq!(fuse_cell(State::Free, c(State::Dynamic, 1.0), 2.0, &p), State::Free);
        assert_eq!(fuse_cell(State::Unknown, c(State::Dynamic, 1.0), 0.0, &p), State::Unknown);
        assert_eq!(fuse_cell(State::Dynamic, c(State::Free, 0.3), 0.0, &p), State::Dynamic);
        // confidence exactly at the threshold does not reclassify
        assert_eq!(fuse_cell(State::Static, c(State::Dynamic, 0.5), 0.0, &p), State::Static);
        // distance exactly at the threshold still counts as near
        assert_eq!(fuse_cell(State::Free, c(State::Static, 0.1), 0.5, &p), State::Static);
    }
}

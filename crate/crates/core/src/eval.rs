//! Grid-level and object-level evaluation.

use crate::belief::State;
use crate::cluster::DetectedObject;
use crate::corrector::{GtFrame, ObjectClass};
use crate::error::{DogmError, Result};
use crate::geometry::Vec2;
use crate::grid::Grid;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Scored classes; unknown truth cells are excluded from scoring.
pub const SCORED: [State; 3] = [State::Free, State::Static, State::Dynamic];

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
}

impl ClassCounts {
    pub fn metrics(&self) -> ClassMetrics {
        ClassMetrics {
            iou: ratio(self.tp, self.tp + self.fp + self.fn_),
            precision: ratio(self.tp, self.tp + self.fp),
            recall: ratio(self.tp, self.tp + self.fn_),
        }
    }
}

/// Confusion counts for free, static and dynamic, accumulable over frames.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridCounts {
    pub free: ClassCounts,
    pub static_: ClassCounts,
    pub dynamic: ClassCounts,
}

impl GridCounts {
    pub fn class(&self, s: State) -> &ClassCounts {
        match s {
            State::Free => &self.free,
            State::Static => &self.static_,
            State::Dynamic => &self.dynamic,
            State::Unknown => panic!("unknown is not a scored class"),
        }
    }

    fn class_mut(&mut self, s: State) -> &mut ClassCounts {
        match s {
            State::Free => &mut self.free,
            State::Static => &mut self.static_,
            State::Dynamic => &mut self.dynamic,
            State::Unknown => panic!("unknown is not a scored class"),
        }
    }

    pub fn add_frame(&mut self, pred: &Grid<State>, truth: &Grid<State>) -> Result<()> {
        if !pred.same_dims(truth) {
            return Err(DogmError::SpecMismatch(format!(
                "prediction {}x{} vs truth {}x{}",
                pred.width(),
                pred.height(),
                truth.width(),
                truth.height()
            )));
        }
        for (&p, &t) in pred.iter().zip(truth.iter()) {
            if t == State::Unknown {
                continue;
            }
            for k in SCORED {
                let c = self.class_mut(k);
                match (p == k, t == k) {
                    (true, true) => c.tp += 1,
                    (true, false) => c.fp += 1,
                    (false, true) => c.fn_ += 1,
                    (false, false) => {}
                }
            }
        }
        Ok(())
    }

    pub fn add(&mut self, other: &GridCounts) {
        for k in SCORED {
            let o = *other.class(k);
            let c = self.class_mut(k);
            c.tp += o.tp;
            c.fp += o.fp;
            c.fn_ += o.fn_;
        }
    }

    pub fn metrics(&self) -> GridMetrics {
        let free = self.free.metrics();
        let static_ = self.static_.metrics();
        let dynamic = self.dynamic.metrics();
        GridMetrics {
            free,
            static_,
            dynamic,
            mean_iou: (free.iou + static_.iou + dynamic.iou) / 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMetrics {
    pub free: ClassMetrics,
    #[serde(rename = "static")]
    pub static_: ClassMetrics,
    pub dynamic: ClassMetrics,
    pub mean_iou: f64,
}

impl GridMetrics {
    pub fn class(&self, s: State) -> &ClassMetrics {
        match s {
            State::Free => &self.free,
            State::Static => &self.static_,
            State::Dynamic => &self.dynamic,
            State::Unknown => panic!("unknown is not a scored class"),
        }
    }
}

/// Per-class IoU, precision and recall over cells whose truth is not unknown.
pub fn grid_metrics(pred: &Grid<State>, truth: &Grid<State>) -> Result<GridMetrics> {
    let mut c = GridCounts::default();
    c.add_frame(pred, truth)?;
    Ok(c.metrics())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApParams {
    /// Centre-distance match thresholds, meters.
    pub thresholds: Vec<f64>,
    /// Ground truth at or below this speed is not evaluated, m/s.
    pub speed_filter: f64,
    /// Ground truth farther than this from the ego on either axis is not evaluated, meters.
    pub half_extent: Vec2,
}

impl Default for ApParams {
    fn default() -> Self {
        Self {
            thresholds: vec![0.5, 1.0, 2.0, 4.0],
            speed_filter: 0.5,
            half_extent: Vec2::new(50.0, 50.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub threshold: f64,
    pub ap: f64,
    pub precision: f64,
    pub recall: f64,
    /// (recall, precision) after each scored detection in rank order.
    pub curve: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub n_gt: usize,
    /// Mean over thresholds.
    pub ap: f64,
    pub precision: f64,
    pub recall: f64,
    pub thresholds: Vec<ThresholdResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub per_class: BTreeMap<String, ClassAp>,
    /// Means over the classes that have ground truth.
    pub mean_ap: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    /// Matching against all evaluated ground truth regardless of class.
    pub all: ClassAp,
}

struct Gt {
    frame: usize,
    pos: Vec2,
    class: ObjectClass,
}

struct Ranked {
    frame: usize,
    pos: Vec2,
}

fn evaluated_gt(gt: &[GtFrame], params: &ApParams) -> Vec<Gt> {
    let mut out = Vec::new();
    for (f, g) in gt.iter().enumerate() {
        let ego = g.ego_pose.position();
        for b in &g.boxes {
            let d = b.center - ego;
            if b.speed > params.speed_filter && d.x.abs() <= params.half_extent.x && d.y.abs() <= params.half_extent.y {
                out.push(Gt {
                    frame: f,
                    pos: b.center,
                    class: b.class_id,
                });
            }
        }
    }
    out
}

/// Area under the (recall, precision) polyline starting at (0, first precision).
fn trapezoid_area(curve: &[(f64, f64)]) -> f64 {
    let Some(&(_, p0)) = curve.first() else {
        return 0.0;
    };
    let mut prev = (0.0, p0);
    let mut area = 0.0;
    for &(r, p) in curve {
        area += (r - prev.0) * (p + prev.1) / 2.0;
        prev = (r, p);
    }
    area
}

/// Greedy matching of ranked detections for one threshold. `target` selects
/// the ground truth that can be matched; other ground truth within reach
/// makes an unmatched detection neutral instead of a false positive.
fn match_threshold(ranked: &[Ranked], gt: &[Gt], target: &dyn Fn(&Gt) -> bool, d: f64) -> ThresholdResult {
    let n_gt = gt.iter().filter(|g| target(g)).count();
    let mut matched = vec![false; gt.len()];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut curve = Vec::new();
    for det in ranked {
        let mut best: Option<(f64, usize)> = None;
        let mut near_other = false;
        for (k, g) in gt.iter().enumerate() {
            if g.frame != det.frame {
                continue;
            }
            let dist = (g.pos - det.pos).norm();
            if dist > d {
                continue;
            }
            if target(g) {
                if !matched[k] && best.is_none_or(|(bd, _)| dist < bd) {
                    best = Some((dist, k));
                }
            } else {
                near_other = true;
            }
        }
        match best {
            Some((_, k)) => {
                matched[k] = true;
                tp += 1;
            }
            None if near_other => continue,
            None => fp += 1,
        }
        let recall = if n_gt == 0 { 0.0 } else { tp as f64 / n_gt as f64 };
        curve.push((recall, tp as f64 / (tp + fp) as f64));
    }
    let (recall, precision) = curve.last().copied().unwrap_or((0.0, 0.0));
    ThresholdResult {
        threshold: d,
        ap: trapezoid_area(&curve),
        precision,
        recall,
        curve,
    }
}

fn class_ap(ranked: &[Ranked], gt: &[Gt], target: &dyn Fn(&Gt) -> bool, params: &ApParams) -> ClassAp {
    let thresholds: Vec<ThresholdResult> = params
        .thresholds
        .iter()
        .map(|&d| match_threshold(ranked, gt, target, d))
        .collect();
    let n = thresholds.len().max(1) as f64;
    ClassAp {
        n_gt: gt.iter().filter(|g| target(g)).count(),
        ap: thresholds.iter().map(|t| t.ap).sum::<f64>() / n,
        precision: thresholds.iter().map(|t| t.precision).sum::<f64>() / n,
        recall: thresholds.iter().map(|t| t.recall).sum::<f64>() / n,
        thresholds,
    }
}

/// Distance-threshold average precision over a sequence. `detections[k]`
/// belongs to `gt[k]`.
pub fn average_precision(detections: &[Vec<DetectedObject>], gt: &[GtFrame], params: &ApParams) -> Result<ApReport> {
    if detections.len() != gt.len() {
        return Err(DogmError::SpecMismatch(format!(
            "{} detection frames vs {} ground-truth frames",
            detections.len(),
            gt.len()
        )));
    }
    let gts = evaluated_gt(gt, params);
    let mut order: Vec<(f64, usize, usize)> = detections
        .iter()
        .enumerate()
        .flat_map(|(f, objs)| objs.iter().enumerate().map(move |(k, o)| (o.confidence, f, k)))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let ranked: Vec<Ranked> = order
        .iter()
        .map(|&(_, f, k)| Ranked {
            frame: f,
            pos: detections[f][k].centroid,
        })
        .collect();
    let mut per_class = BTreeMap::new();
    for class in ObjectClass::ALL {
        if gts.iter().any(|g| g.class == class) {
            let target = move |g: &Gt| g.class == class;
            per_class.insert(class.name().to_string(), class_ap(&ranked, &gts, &target, params));
        }
    }
    let n = per_class.len();
    let mean = |f: fn(&ClassAp) -> f64| {
        if n == 0 {
            0.0
        } else {
            per_class.values().map(f).sum::<f64>() / n as f64
        }
    };
    let (mean_ap, mean_precision, mean_recall) = (mean(|c| c.ap), mean(|c| c.precision), mean(|c| c.recall));
    let all = class_ap(&ranked, &gts, &|_: &Gt| true, params);
    Ok(ApReport {
        per_class,
        mean_ap,
        mean_precision,
        mean_recall,
        all,
    })
}

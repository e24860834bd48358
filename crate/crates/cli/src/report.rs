//! Metric accumulation and report files.

use dogm_core::cluster::DetectedObject;
use dogm_core::eval::{average_precision, ApParams, ApReport, ClassAp, GridCounts, GridMetrics};
use dogm_core::{DogmError, Grid, GtFrame, State};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Everything needed to score one pipeline over one or more sequences.
#[derive(Clone, Debug, Default)]
pub struct Tally {
    pub grid: GridCounts,
    pub detections: Vec<Vec<DetectedObject>>,
    pub gt: Vec<GtFrame>,
}

impl Tally {
    pub fn add_frame(
        &mut self,
        pred: &Grid<State>,
        truth: &Grid<State>,
        objects: Vec<DetectedObject>,
        gt: GtFrame,
    ) -> Result<(), DogmError> {
        self.grid.add_frame(pred, truth)?;
        self.detections.push(objects);
        self.gt.push(gt);
        Ok(())
    }

    pub fn extend(&mut self, other: Tally) {
        self.grid.add(&other.grid);
        self.detections.extend(other.detections);
        self.gt.extend(other.gt);
    }

    pub fn score(&self, params: &ApParams) -> Result<(RowReport, ApReport), DogmError> {
        let ap = average_precision(&self.detections, &self.gt, params)?;
        Ok((RowReport::new(self.grid, &ap), ap))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub n_gt: usize,
    pub ap: f64,
    pub precision: f64,
    pub recall: f64,
}

impl From<&ClassAp> for ClassSummary {
    fn from(c: &ClassAp) -> Self {
        Self {
            n_gt: c.n_gt,
            ap: c.ap,
            precision: c.precision,
            recall: c.recall,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub mean_ap: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    /// Class-agnostic matching against every evaluated object.
    pub dynamic: ClassSummary,
    pub per_class: BTreeMap<String, ClassSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowReport {
    pub grid: GridMetrics,
    pub grid_counts: GridCounts,
    pub objects: ObjectSummary,
}

impl RowReport {
    pub fn new(grid: GridCounts, ap: &ApReport) -> Self {
        Self {
            grid: grid.metrics(),
            grid_counts: grid,
            objects: ObjectSummary {
                mean_ap: ap.mean_ap,
                mean_precision: ap.mean_precision,
                mean_recall: ap.mean_recall,
                dynamic: (&ap.all).into(),
                per_class: ap.per_class.iter().map(|(k, v)| (k.clone(), v.into())).collect(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenarios: Vec<String>,
    /// Rows keyed by pipeline name (`baseline`, `hybrid`, or the single run's corrector).
    pub rows: BTreeMap<String, RowReport>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// PR curves of every pipeline, class and threshold as CSV.
pub fn pr_curves_csv(curves: &[(&str, &ApReport)]) -> String {
    let mut s = String::from("pipeline,class,threshold,rank,recall,precision\n");
    for (name, ap) in curves {
        let classes = ap.per_class.iter().map(|(k, v)| (k.as_str(), v)).chain([("dynamic", &ap.all)]);
        for (class, c) in classes {
            for t in &c.thresholds {
                for (rank, (r, p)) in t.curve.iter().enumerate() {
                    let _ = writeln!(s, "{name},{class},{},{},{r},{p}", t.threshold, rank + 1);
                }
            }
        }
    }
    s
}

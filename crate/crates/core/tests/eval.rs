use dogm_core::belief::State;
use dogm_core::cluster::DetectedObject;
use dogm_core::corrector::ObjectClass;
use dogm_core::eval::{average_precision, grid_metrics, ApParams};
use dogm_core::{GtBox, GtFrame, Grid, Pose2, Vec2};
use proptest::prelude::*;
use serde::Deserialize;

#[derive(Deserialize)]
struct Expected {
    ap_per_threshold: Vec<[u32; 2]>,
    precision_per_threshold: Vec<[u32; 2]>,
    recall_per_threshold: Vec<[u32; 2]>,
    ap: [u32; 2],
    precision: [u32; 2],
    recall: [u32; 2],
}

#[derive(Deserialize)]
struct Fixture {
    gt: Vec<GtFrame>,
    detections: Vec<Vec<DetectedObject>>,
    thresholds: Vec<f64>,
    expected: Expected,
}

fn frac(f: [u32; 2]) -> f64 {
    f64::from(f[0]) / f64::from(f[1])
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

#[test]
fn hand_worked_fixture() {
    let fx: Fixture = serde_json::from_str(include_str!("fixtures/ap_fixture.json")).unwrap();
    let params = ApParams {
        thresholds: fx.thresholds.clone(),
        ..ApParams::default()
    };
    let rep = average_precision(&fx.detections, &fx.gt, &params).unwrap();
    let adult = &rep.per_class["adult"];
    assert_eq!(adult.n_gt, 3);
    for (k, t) in adult.thresholds.iter().enumerate() {
        assert!(close(t.ap, frac(fx.expected.ap_per_threshold[k])), "AP at {}: {}", t.threshold, t.ap);
        assert!(close(t.precision, frac(fx.expected.precision_per_threshold[k])));
        assert!(close(t.recall, frac(fx.expected.recall_per_threshold[k])));
    }
    assert!(close(adult.ap, frac(fx.expected.ap)));
    assert!(close(rep.mean_ap, frac(fx.expected.ap)));
    assert!(close(rep.mean_precision, frac(fx.expected.precision)));
    assert!(close(rep.mean_recall, frac(fx.expected.recall)));
    assert!(close(rep.all.ap, frac(fx.expected.ap)));
}

fn gt_frame(centers: &[(f64, f64, ObjectClass, f64)]) -> GtFrame {
    GtFrame {
        timestamp: 0.0,
        ego_pose: Pose2::default(),
        ego_velocity: Vec2::zeros(),
        boxes: centers
            .iter()
            .map(|&(x, y, class_id, speed)| GtBox {
                center: Vec2::new(x, y),
                extent: Vec2::new(1.0, 1.0),
                yaw: 0.0,
                speed,
                class_id,
            })
            .collect(),
    }
}

fn det(x: f64, y: f64, confidence: f64) -> DetectedObject {
    DetectedObject {
        centroid: Vec2::new(x, y),
        velocity: Vec2::zeros(),
        confidence,
        particle_count: 10,
    }
}

#[test]
fn perfect_detections_score_one() {
    let gt = vec![gt_frame(&[(1.0, 2.0, ObjectClass::Car, 5.0), (-3.0, 4.0, ObjectClass::Adult, 1.0)])];
    let dets = vec![vec![det(1.0, 2.0, 0.9), det(-3.0, 4.0, 0.8)]];
    let rep = average_precision(&dets, &gt, &ApParams::default()).unwrap();
    assert!(close(rep.mean_ap, 1.0));
    assert!(close(rep.all.ap, 1.0));
}

#[test]
fn no_detections_score_zero() {
    let gt = vec![gt_frame(&[(1.0, 2.0, ObjectClass::Car, 5.0)])];
    let rep = average_precision(&[vec![]], &gt, &ApParams::default()).unwrap();
    assert_eq!((rep.mean_ap, rep.mean_precision, rep.mean_recall), (0.0, 0.0, 0.0));
}

#[test]
fn slow_and_distant_ground_truth_is_not_evaluated() {
    let gt = vec![gt_frame(&[(1.0, 2.0, ObjectClass::Car, 0.5), (60.0, 0.0, ObjectClass::Truck, 5.0)])];
    let rep = average_precision(&[vec![]], &gt, &ApParams::default()).unwrap();
    assert!(rep.per_class.is_empty());
    assert_eq!(rep.all.n_gt, 0);
}

#[test]
fn other_class_match_is_neutral() {
    let gt = vec![gt_frame(&[(0.0, 0.0, ObjectClass::Car, 5.0), (10.0, 0.0, ObjectClass::Adult, 1.0)])];
    let dets = vec![vec![det(10.0, 0.0, 0.9), det(0.0, 0.0, 0.8)]];
    let rep = average_precision(&dets, &gt, &ApParams::default()).unwrap();
    assert!(close(rep.per_class["car"].ap, 1.0));
    assert!(close(rep.per_class["adult"].ap, 1.0));
}

#[test]
fn frame_count_mismatch_is_an_error() {
    assert!(average_precision(&[vec![], vec![]], &[gt_frame(&[])], &ApParams::default()).is_err());
}

/// Confusion counts straight from the definition over non-unknown truth.
fn oracle_metrics(pred: &[State], truth: &[State]) -> Vec<(f64, f64, f64)> {
    [State::Free, State::Static, State::Dynamic]
        .iter()
        .map(|&k| {
            let mut tp = 0.0;
            let mut fp = 0.0;
            let mut fn_ = 0.0;
            for (p, t) in pred.iter().zip(truth) {
                if *t == State::Unknown {
                    continue;
                }
                match (*p == k, *t == k) {
                    (true, true) => tp += 1.0,
                    (true, false) => fp += 1.0,
                    (false, true) => fn_ += 1.0,
                    _ => {}
                }
            }
            let ratio = |n: f64, d: f64| if d == 0.0 { 1.0 } else { n / d };
            (ratio(tp, tp + fp + fn_), ratio(tp, tp + fp), ratio(tp, tp + fn_))
        })
        .collect()
}

fn state() -> impl Strategy<Value = State> {
    (0u8..4).prop_map(|s| State::from_u8(s).unwrap())
}

fn grids() -> impl Strategy<Value = (Vec<State>, Vec<State>)> {
    (proptest::collection::vec(state(), 256), proptest::collection::vec(state(), 256))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_metrics_match_counting_oracle((p, t) in grids()) {
        let m = grid_metrics(&Grid::from_vec(16, 16, p.clone()).unwrap(), &Grid::from_vec(16, 16, t.clone()).unwrap()).unwrap();
        for (s, (iou, prec, rec)) in [State::Free, State::Static, State::Dynamic].into_iter().zip(oracle_metrics(&p, &t)) {
            let c = m.class(s);
            prop_assert_eq!((c.iou, c.precision, c.recall), (iou, prec, rec));
        }
    }

    #[test]
    fn swapping_pred_and_truth_swaps_precision_and_recall((p, t) in grids()) {
        // with no unknown truth both directions score the same cells
        let known = |v: Vec<State>| v.into_iter().map(|s| if s == State::Unknown { State::Free } else { s }).collect::<Vec<_>>();
        let (p, t) = (Grid::from_vec(16, 16, known(p)).unwrap(), Grid::from_vec(16, 16, known(t)).unwrap());
        let a = grid_metrics(&p, &t).unwrap();
        let b = grid_metrics(&t, &p).unwrap();
        for s in [State::Free, State::Static, State::Dynamic] {
            prop_assert_eq!(a.class(s).iou, b.class(s).iou);
            prop_assert_eq!(a.class(s).precision, b.class(s).recall);
            prop_assert_eq!(a.class(s).recall, b.class(s).precision);
        }
    }

    #[test]
    fn ap_grows_with_threshold(
        gts in proptest::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 1..6),
        dets in proptest::collection::vec((-20.0f64..20.0, -20.0f64..20.0, 0.01f64..1.0), 0..10),
    ) {
        let gt = vec![gt_frame(&gts.iter().map(|&(x, y)| (x, y, ObjectClass::Adult, 1.0)).collect::<Vec<_>>())];
        let d = vec![dets.iter().map(|&(x, y, c)| det(x, y, c)).collect::<Vec<_>>()];
        let rep = average_precision(&d, &gt, &ApParams::default()).unwrap();
        let ts = &rep.per_class["adult"].thresholds;
        prop_assert!(ts[3].ap >= ts[0].ap - 1e-12);
    }

    #[test]
    fn lowest_confidence_false_positive_never_helps(
        gts in proptest::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 1..6),
        dets in proptest::collection::vec((-20.0f64..20.0, -20.0f64..20.0, 0.1f64..1.0), 0..10),
    ) {
        let gt = vec![gt_frame(&gts.iter().map(|&(x, y)| (x, y, ObjectClass::Adult, 1.0)).collect::<Vec<_>>())];
        let mut d = vec![dets.iter().map(|&(x, y, c)| det(x, y, c)).collect::<Vec<_>>()];
        let before = average_precision(&d, &gt, &ApParams::default()).unwrap();
        d[0].push(det(1000.0, 1000.0, 0.01));
        let after = average_precision(&d, &gt, &ApParams::default()).unwrap();
        prop_assert!(after.mean_ap <= before.mean_ap + 1e-12);
    }
}

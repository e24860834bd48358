use dogm_core::belief::{CellBelief, State};
use dogm_core::ism::MeasurementGrid;
use dogm_core::particles::{cell_velocities, predict, resample, resample_systematic, reweight, spawn};
use dogm_core::{DogmFrame, FilterParams, GridSpec, Particle, Pose2, RadarDetection, RadarScan, Vec2};
use proptest::prelude::*;

fn spec() -> GridSpec {
    GridSpec::centered(100, 100, 0.2)
}

fn scan(dets: Vec<RadarDetection>) -> RadarScan {
    RadarScan {
        timestamp: 0.0,
        sensor_pose: Pose2::default(),
        ego_velocity: Vec2::zeros(),
        ego_pose: Pose2::default(),
        detections: dets,
    }
}

fn frame_with(cells: &[(Vec2, State)]) -> DogmFrame {
    let s = spec();
    let mut f = DogmFrame::new(s, Pose2::default(), 0.0);
    for &(p, st) in cells {
        let (i, j) = f.spec.world_to_cell(Vec2::zeros(), p).unwrap();
        *f.cells.get_mut(i, j) = CellBelief::one_hot(st);
    }
    f
}

fn particle(pos: Vec2, vel: Vec2, weight: f64) -> Particle {
    Particle { pos, vel, weight, age: 0 }
}

#[test]
fn no_dynamic_cells_no_births() {
    let f = frame_with(&[(Vec2::new(-5.0, 0.0), State::Static)]);
    let births = spawn(&f, &scan(vec![RadarDetection::new(5.0, std::f64::consts::PI, 0.0)]), None, &FilterParams::default(), 0, 0);
    assert!(births.is_empty());
}

#[test]
fn births_follow_measured_range_rate() {
    // target at -x moving away from the sensor along -x
    let f = frame_with(&[(Vec2::new(-4.9, 0.1), State::Dynamic), (Vec2::new(-4.9, 0.3), State::Dynamic)]);
    let params = FilterParams {
        births_per_cell: 100,
        v_max: 0.0,
        ..FilterParams::default()
    };
    let births = spawn(&f, &scan(vec![RadarDetection::new(5.0, std::f64::consts::PI, 8.0)]), None, &params, 0, 0);
    assert_eq!(births.len(), 200);
    for b in &births {
        assert!((b.vel - Vec2::new(-8.0, 0.0)).norm() < 1e-9, "{:?}", b.vel);
        assert!((b.weight - 1.0 / 200.0).abs() < 1e-15);
        assert_eq!(b.age, 0);
    }
}

#[test]
fn births_need_a_nearby_detection() {
    let f = frame_with(&[(Vec2::new(-5.0, 0.0), State::Dynamic)]);
    let births = spawn(&f, &scan(vec![RadarDetection::new(5.0, 0.0, 8.0)]), None, &FilterParams::default(), 0, 0);
    assert!(births.is_empty());
}

#[test]
fn births_respect_budget() {
    let cells: Vec<(Vec2, State)> = (0..10).map(|k| (Vec2::new(4.0, -1.0 + 0.2 * k as f64), State::Dynamic)).collect();
    let f = frame_with(&cells);
    let dets = (0..10).map(|k| RadarDetection::new(4.1, (-0.9 + 0.2 * k as f64).atan2(4.1), 2.0)).collect();
    let params = FilterParams {
        budget: 50,
        births_per_cell: 20,
        ..FilterParams::default()
    };
    let births = spawn(&f, &scan(dets), None, &params, 10, 3);
    assert_eq!(births.len(), 50);
    assert!((births[0].weight - 1.0 / 60.0).abs() < 1e-15);
}

#[test]
fn tangential_velocity_stays_within_limit() {
    let f = frame_with(&[(Vec2::new(6.0, 0.0), State::Dynamic)]);
    let params = FilterParams {
        births_per_cell: 500,
        ..FilterParams::default()
    };
    let births = spawn(&f, &scan(vec![RadarDetection::new(6.1, 0.0, 3.0)]), None, &params, 0, 1);
    for b in &births {
        assert!((b.vel.x - 3.0).abs() < 1e-9);
        assert!(b.vel.y.abs() <= params.v_max);
    }
    let spread = births.iter().map(|b| b.vel.y).fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(spread > 0.8 * params.v_max);
}

#[test]
fn reweight_uses_range_rate_residual() {
    let s = spec();
    let mut mg = MeasurementGrid::uniform(s, Pose2::default(), 0.0);
    let (i, j) = s.world_to_cell(Vec2::zeros(), Vec2::new(5.1, 0.1)).unwrap();
    *mg.cells.get_mut(i, j) = CellBelief::one_hot(State::Dynamic);
    let sc = scan(vec![RadarDetection::new(5.1, 0.0, 4.0)]);
    let params = FilterParams::default();
    let pos = Vec2::new(5.1, 0.1);
    let u = pos / pos.norm();
    let mut ps = vec![
        particle(pos, u * 4.0, 0.5),
        particle(pos, u * (4.0 + params.sigma_rr), 0.5),
    ];
    assert!(!reweight(&mut ps, &sc, &mg, &params));
    let ratio = ps[1].weight / ps[0].weight;
    assert!((ratio - (-0.5f64).exp()).abs() < 1e-12, "{ratio}");
    assert!((ps[0].weight + ps[1].weight - 1.0).abs() < 1e-12);
}

#[test]
fn reweight_suppresses_free_cells() {
    let s = spec();
    let mut mg = MeasurementGrid::uniform(s, Pose2::default(), 0.0);
    let occupied = Vec2::new(3.1, 0.1);
    let free = Vec2::new(-3.1, 0.1);
    let (i, j) = s.world_to_cell(Vec2::zeros(), occupied).unwrap();
    *mg.cells.get_mut(i, j) = CellBelief::one_hot(State::Dynamic);
    let (i, j) = s.world_to_cell(Vec2::zeros(), free).unwrap();
    *mg.cells.get_mut(i, j) = CellBelief::one_hot(State::Free);
    let mut ps = vec![particle(occupied, Vec2::zeros(), 0.5), particle(free, Vec2::zeros(), 0.5)];
    reweight(&mut ps, &scan(vec![]), &mg, &FilterParams::default());
    assert!(ps[1].weight < 1e-3 * ps[0].weight);
}

#[test]
fn reweight_underflow_resets_to_uniform() {
    let s = spec();
    let mg = MeasurementGrid::uniform(s, Pose2::default(), 0.0);
    let mut ps = vec![particle(Vec2::new(1.0, 0.0), Vec2::zeros(), 0.0); 4];
    assert!(reweight(&mut ps, &scan(vec![]), &mg, &FilterParams::default()));
    assert!(ps.iter().all(|p| p.weight == 0.25));
}

#[test]
fn resample_keeps_support_and_budget() {
    let ps: Vec<Particle> = (0..100)
        .map(|k| particle(Vec2::new(k as f64, 0.0), Vec2::zeros(), if k % 2 == 0 { 0.02 } else { 0.0 }))
        .collect();
    let params = FilterParams {
        budget: 80,
        ..FilterParams::default()
    };
    let out = resample(&ps, &params, 7);
    assert_eq!(out.len(), 80);
    for p in &out {
        assert_eq!(p.pos.x as usize % 2, 0);
        assert_eq!(p.age, 1);
        assert!((p.weight - 1.0 / 80.0).abs() < 1e-15);
    }
}

#[test]
fn predict_noise_matches_configured_variance() {
    let s = GridSpec::centered(400, 400, 0.2);
    let params = FilterParams {
        sigma_pos: 0.05,
        sigma_vel: 0.3,
        ..FilterParams::default()
    };
    let ps = vec![particle(Vec2::zeros(), Vec2::new(1.0, 0.0), 1.0); 10_000];
    let out = predict(&ps, 0.1, &params, &s, Vec2::zeros(), 0);
    assert_eq!(out.len(), ps.len());
    let n = out.len() as f64;
    let var = |xs: Vec<f64>| {
        let m = xs.iter().sum::<f64>() / n;
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    };
    let vx = var(out.iter().map(|p| p.vel.x).collect());
    let px = var(out.iter().map(|p| p.pos.x).collect());
    assert!((vx / 0.09 - 1.0).abs() < 0.05, "{vx}");
    assert!((px / 0.0025 - 1.0).abs() < 0.05, "{px}");
    let mean_x = out.iter().map(|p| p.pos.x).sum::<f64>() / n;
    assert!((mean_x - 0.1).abs() < 0.005);
}

#[test]
fn predict_drops_particles_leaving_the_grid() {
    let s = GridSpec::centered(10, 10, 0.2);
    let params = FilterParams {
        sigma_pos: 0.0,
        sigma_vel: 0.0,
        ..FilterParams::default()
    };
    let ps = vec![particle(Vec2::new(0.9, 0.0), Vec2::new(5.0, 0.0), 1.0), particle(Vec2::zeros(), Vec2::zeros(), 1.0)];
    let out = predict(&ps, 0.1, &params, &s, Vec2::zeros(), 0);
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].pos, Vec2::zeros());
}

#[test]
fn cell_velocity_is_weighted_mean() {
    let s = spec();
    let p = Vec2::new(2.05, 2.05);
    let ps = vec![
        particle(p, Vec2::new(1.0, 0.0), 0.25),
        particle(p, Vec2::new(3.0, 0.0), 0.75),
        particle(p, Vec2::new(3.0, 2.0), 0.0),
        particle(Vec2::new(-2.05, 0.0), Vec2::new(9.0, 0.0), 1.0),
    ];
    let v = cell_velocities(&ps, &s, Vec2::zeros(), 3);
    let (i, j) = s.world_to_cell(Vec2::zeros(), p).unwrap();
    assert!((v.get(i, j).unwrap() - Vec2::new(2.5, 0.0)).norm() < 1e-12);
    let (i, j) = s.world_to_cell(Vec2::zeros(), Vec2::new(-2.05, 0.0)).unwrap();
    assert!(v.get(i, j).is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn systematic_resampling_is_unbiased(weights in proptest::collection::vec(0.0f64..1.0, 1..30), u0 in 0.0f64..1.0) {
        prop_assume!(weights.iter().sum::<f64>() > 1e-6);
        let total: f64 = weights.iter().sum();
        let ps: Vec<Particle> = weights.iter().enumerate().map(|(k, &w)| particle(Vec2::new(k as f64, 0.0), Vec2::zeros(), w)).collect();
        let n = 200;
        let out = resample_systematic(&ps, n, u0);
        prop_assert_eq!(out.len(), n);
        for (k, &w) in weights.iter().enumerate() {
            let copies = out.iter().filter(|p| p.pos.x as usize == k).count() as f64;
            let expected = n as f64 * w / total;
            // systematic resampling keeps every count within one of its expectation
            prop_assert!((copies - expected).abs() < 1.0 + 1e-9, "{} vs {}", copies, expected);
        }
    }

    #[test]
    fn reweight_normalizes(xs in proptest::collection::vec((-9.0f64..9.0, -9.0f64..9.0, -5.0f64..5.0), 1..40)) {
        let s = spec();
        let mg = MeasurementGrid::uniform(s, Pose2::default(), 0.0);
        let mut ps: Vec<Particle> = xs.iter().map(|&(x, y, v)| particle(Vec2::new(x, y), Vec2::new(v, 0.0), 1.0)).collect();
        reweight(&mut ps, &scan(vec![RadarDetection::new(4.0, 0.3, 1.0)]), &mg, &FilterParams::default());
        prop_assert!((ps.iter().map(|p| p.weight).sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(ps.iter().all(|p| p.weight >= 0.0));
    }
}

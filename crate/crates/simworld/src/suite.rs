//! Fixed ten-scenario benchmark used for baseline versus hybrid comparisons.

use crate::scenario::{ActorConfig, ScenarioConfig, SensorConfig, Trajectory, Wall};
use dogm_core::{ObjectClass, Vec2};

fn cv(start: [f64; 2], velocity: [f64; 2]) -> Trajectory {
    Trajectory::ConstantVelocity {
        start: Vec2::new(start[0], start[1]),
        velocity: Vec2::new(velocity[0], velocity[1]),
        yaw: None,
    }
}

fn actor(class: ObjectClass, start: [f64; 2], velocity: [f64; 2]) -> ActorConfig {
    let extent = match class {
        ObjectClass::Car => Vec2::new(4.5, 1.8),
        ObjectClass::Truck => Vec2::new(8.0, 2.5),
        ObjectClass::Bicycle => Vec2::new(1.8, 0.6),
        ObjectClass::Motorcycle => Vec2::new(2.2, 0.8),
        ObjectClass::Adult => Vec2::new(0.6, 0.6),
    };
    ActorConfig {
        class,
        extent,
        trajectory: cv(start, velocity),
    }
}

fn wall(a: [f64; 2], b: [f64; 2]) -> Wall {
    Wall {
        start: Vec2::new(a[0], a[1]),
        end: Vec2::new(b[0], b[1]),
    }
}

/// Ten named scenarios mixing crossing pedestrians and cyclists, oncoming
/// and crossing vehicles, static walls, clutter and a moving ego. Scenario
/// `k` uses seed `seed + k`.
pub fn benchmark_suite(seed: u64) -> Vec<(String, ScenarioConfig)> {
    use ObjectClass::*;
    let base = |k: u64, ego: Trajectory, actors: Vec<ActorConfig>, walls: Vec<Wall>, clutter: f64| ScenarioConfig {
        duration: 4.0,
        dt: 0.1,
        seed: seed.wrapping_add(k),
        ego,
        actors,
        walls,
        sensor: SensorConfig {
            clutter_rate: clutter,
            ..SensorConfig::default()
        },
    };
    let still = || cv([0.0, 0.0], [0.0, 0.0]);
    vec![
        (
            "pedestrian_crossing".into(),
            base(0, still(), vec![actor(Adult, [15.0, -4.0], [0.0, 1.4])], vec![], 0.0),
        ),
        (
            "two_pedestrians".into(),
            base(
                1,
                still(),
                vec![actor(Adult, [12.0, 3.0], [0.0, -1.2]), actor(Adult, [20.0, -3.0], [0.0, 1.5])],
                vec![wall([30.0, -15.0], [30.0, 15.0])],
                0.0,
            ),
        ),
        (
            "cyclist_crossing".into(),
            base(2, still(), vec![actor(Bicycle, [18.0, -8.0], [0.0, 4.0])], vec![], 2.0),
        ),
        (
            "car_head_on".into(),
            base(3, still(), vec![actor(Car, [40.0, 0.5], [-8.0, 0.0])], vec![], 0.0),
        ),
        (
            "car_crossing".into(),
            base(4, still(), vec![actor(Car, [20.0, -12.0], [0.0, 6.0])], vec![wall([35.0, -20.0], [35.0, 20.0])], 0.0),
        ),
        (
            "street_with_walls".into(),
            base(
                5,
                still(),
                vec![actor(Car, [30.0, 0.0], [-5.0, 0.0]), actor(Adult, [10.0, 4.0], [0.0, -1.0])],
                vec![wall([5.0, 6.0], [45.0, 6.0]), wall([5.0, -6.0], [45.0, -6.0])],
                1.0,
            ),
        ),
        (
            "moving_ego_pedestrian".into(),
            base(
                6,
                cv([0.0, 0.0], [3.0, 0.0]),
                vec![actor(Adult, [22.0, -3.0], [0.0, 1.3])],
                vec![wall([10.0, 8.0], [40.0, 8.0])],
                0.0,
            ),
        ),
        (
            "truck_and_cyclist".into(),
            base(
                7,
                still(),
                vec![actor(Truck, [35.0, -4.0], [-4.0, 0.0]), actor(Bicycle, [14.0, 6.0], [0.0, -3.0])],
                vec![],
                1.0,
            ),
        ),
        (
            "motorcycle_diagonal".into(),
            base(8, still(), vec![actor(Motorcycle, [30.0, -15.0], [-3.0, 6.0])], vec![], 2.0),
        ),
        (
            "busy_crossing".into(),
            base(
                9,
                cv([0.0, 0.0], [2.0, 0.0]),
                vec![
                    actor(Adult, [16.0, -3.0], [0.0, 1.2]),
                    actor(Bicycle, [25.0, 7.0], [0.0, -3.5]),
                    actor(Car, [45.0, 2.0], [-6.0, 0.0]),
                ],
                vec![wall([20.0, 12.0], [50.0, 12.0])],
                1.0,
            ),
        ),
    ]
}

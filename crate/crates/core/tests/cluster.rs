use dogm_core::cluster::{dbscan, extract_objects, ExtractParams};
use dogm_core::{Particle, Vec2};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Quadratic DBSCAN by breadth-first expansion from each unvisited core point.
/// Border points join their nearest core (lower index on ties).
fn brute_force(points: &[Vec2], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let near = |a: usize, b: usize| (points[a] - points[b]).norm_squared() <= eps * eps;
    let core: Vec<bool> = (0..n).map(|a| (0..n).filter(|&b| near(a, b)).count() >= min_pts).collect();
    let mut label = vec![None; n];
    let mut next = 0;
    for s in 0..n {
        if !core[s] || label[s].is_some() {
            continue;
        }
        let mut queue = vec![s];
        label[s] = Some(next);
        while let Some(a) = queue.pop() {
            for b in 0..n {
                if core[b] && label[b].is_none() && near(a, b) {
                    label[b] = Some(next);
                    queue.push(b);
                }
            }
        }
        next += 1;
    }
    for a in 0..n {
        if core[a] {
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for b in 0..n {
            if core[b] && near(a, b) {
                let d = (points[a] - points[b]).norm_squared();
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, b));
                }
            }
        }
        label[a] = best.and_then(|(_, b)| label[b]);
    }
    label
}

/// Two labelings describe the same partition when ids map one-to-one.
fn same_partition(a: &[Option<usize>], b: &[Option<usize>]) -> bool {
    let mut fwd = std::collections::HashMap::new();
    let mut back = std::collections::HashMap::new();
    a.iter().zip(b).all(|(x, y)| match (x, y) {
        (None, None) => true,
        (Some(x), Some(y)) => *fwd.entry(*x).or_insert(*y) == *y && *back.entry(*y).or_insert(*x) == *x,
        _ => false,
    })
}

#[test]
fn matches_brute_force_on_random_clouds() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let mut pts = Vec::new();
        for _ in 0..rng.random_range(1..5) {
            let c = Vec2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
            let spread = rng.random_range(0.05..1.5);
            for _ in 0..rng.random_range(2..120) {
                pts.push(c + Vec2::new(rng.random_range(-spread..spread), rng.random_range(-spread..spread)));
            }
            // exact duplicates and lattice-aligned points
            pts.push(c);
            pts.push(c);
            pts.push((c * 2.0).map(f64::round) / 2.0);
        }
        for _ in 0..rng.random_range(0..20) {
            pts.push(Vec2::new(rng.random_range(-12.0..12.0), rng.random_range(-12.0..12.0)));
        }
        let eps = rng.random_range(0.2..0.9);
        let min_pts = rng.random_range(2..8);
        let got = dbscan(&pts, eps, min_pts);
        let want = brute_force(&pts, eps, min_pts);
        assert!(same_partition(&got, &want), "eps {eps} min_pts {min_pts}");
    }
}

fn cloud(seed: u64) -> Vec<Particle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ps = Vec::new();
    for c in [Vec2::new(0.0, 0.0), Vec2::new(5.0, 1.0), Vec2::new(-4.0, 3.0)] {
        for _ in 0..30 {
            ps.push(Particle {
                pos: c + Vec2::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
                vel: Vec2::new(rng.random_range(-2.0..2.0), 1.0),
                weight: rng.random_range(0.0..1.0),
                age: rng.random_range(0..20),
            });
        }
    }
    ps
}

#[test]
fn weighted_centroid_and_velocity() {
    let ps: Vec<Particle> = (0..6)
        .map(|k| Particle {
            pos: Vec2::new(0.1 * k as f64, 0.0),
            vel: Vec2::new(k as f64, 0.0),
            weight: if k < 3 { 1.0 } else { 3.0 },
            age: 5,
        })
        .collect();
    let objs = extract_objects(&ps, &ExtractParams::default());
    assert_eq!(objs.len(), 1);
    let w = 3.0 + 9.0;
    let cx = (0.0 + 0.1 + 0.2 + 3.0 * (0.3 + 0.4 + 0.5)) / w;
    let vx = (0.0 + 1.0 + 2.0 + 3.0 * (3.0 + 4.0 + 5.0)) / w;
    assert!((objs[0].centroid.x - cx).abs() < 1e-12);
    assert!((objs[0].velocity.x - vx).abs() < 1e-12);
    assert!((objs[0].confidence - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    assert_eq!(objs[0].particle_count, 6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn extraction_ignores_particle_order(seed in 0u64..1000, shuffle in 0u64..1000) {
        let ps = cloud(seed);
        let mut shuffled = ps.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        let p = ExtractParams::default();
        prop_assert_eq!(extract_objects(&ps, &p), extract_objects(&shuffled, &p));
    }

    #[test]
    fn confidence_is_bounded(seed in 0u64..1000) {
        for o in extract_objects(&cloud(seed), &ExtractParams::default()) {
            prop_assert!((0.0..=1.0).contains(&o.confidence));
        }
    }
}

//! Density clustering of particles into object hypotheses.

use crate::geometry::Vec2;
use crate::particles::Particle;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractParams {
    /// Neighbourhood radius, meters.
    pub eps: f64,
    /// Neighbours (including the point itself) that make a core point.
    pub min_pts: usize,
    /// Age constant of the confidence ramp, frames.
    pub tau_age: f64,
}

impl Default for ExtractParams {
    fn default() -> Self {
        Self {
            eps: 0.6,
            min_pts: 5,
            tau_age: 5.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectedObject {
    pub centroid: Vec2,
    pub velocity: Vec2,
    pub confidence: f64,
    pub particle_count: usize,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller index as root so labels follow input order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// DBSCAN labels for `points`. Core points within `eps` of each other share a
/// cluster; a border point joins the cluster of its nearest core point (lower
/// index on ties); everything else is noise (`None`). Cluster ids are dense
/// and numbered by their lowest member index.
///
/// Points are bucketed on a lattice of pitch `eps / sqrt(2)` so every pair in
/// one bucket is within `eps`. Dense buckets are then core without counting
/// and merge as a whole, which keeps tightly packed particle clouds linear.
pub fn dbscan(points: &[Vec2], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let pitch = eps / std::f64::consts::SQRT_2 * (1.0 - 1e-12);
    let key = |p: Vec2| ((p.x / pitch).floor() as i64, (p.y / pitch).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (k, &p) in points.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(k);
    }
    let eps2 = eps * eps;
    let near = |a: usize, b: usize| (points[a] - points[b]).norm_squared() <= eps2;
    // neighbour offsets that can hold points within eps, nearest first
    let mut offsets: Vec<(i64, i64)> = (-2..=2).flat_map(|dy| (-2..=2).map(move |dx| (dx, dy))).collect();
    offsets.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dy, dx));
    let (bucket_ref, offset_ref) = (&buckets, &offsets);
    let neighbours = move |k: usize| {
        let (bx, by) = key(points[k]);
        offset_ref
            .iter()
            .filter_map(move |&(dx, dy)| bucket_ref.get(&(bx + dx, by + dy)))
            .flat_map(|ids| ids.iter().copied())
            .filter(move |&m| near(k, m))
    };

    let core: Vec<bool> = (0..n)
        .map(|k| buckets[&key(points[k])].len() >= min_pts || neighbours(k).take(min_pts).count() >= min_pts)
        .collect();

    let mut keys: Vec<(i64, i64)> = buckets.keys().copied().collect();
    keys.sort_unstable();
    let core_ids: HashMap<(i64, i64), Vec<usize>> = keys
        .iter()
        .map(|k| (*k, buckets[k].iter().copied().filter(|&m| core[m]).collect::<Vec<_>>()))
        .filter(|(_, v)| !v.is_empty())
        .collect();
    let mut uf = UnionFind((0..n).collect());
    for ids in core_ids.values() {
        for &m in &ids[1..] {
            uf.union(ids[0], m);
        }
    }
    for k in &keys {
        let Some(a) = core_ids.get(k) else { continue };
        for &(dx, dy) in &offsets {
            if (dy, dx) <= (0, 0) {
                continue;
            }
            let Some(b) = core_ids.get(&(k.0 + dx, k.1 + dy)) else { continue };
            if uf.find(a[0]) == uf.find(b[0]) {
                continue;
            }
            if let Some((x, y)) = a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).find(|&(x, y)| near(x, y)) {
                uf.union(x, y);
            }
        }
    }

    let mut root_label: HashMap<usize, usize> = HashMap::new();
    let mut labels = vec![None; n];
    for k in 0..n {
        if core[k] {
            let r = uf.find(k);
            let next = root_label.len();
            labels[k] = Some(*root_label.entry(r).or_insert(next));
        }
    }
    for k in 0..n {
        if core[k] {
            continue;
        }
        let nearest_core = neighbours(k).filter(|&m| core[m]).min_by(|&a, &b| {
            let da = (points[a] - points[k]).norm_squared();
            let db = (points[b] - points[k]).norm_squared();
            da.total_cmp(&db).then(a.cmp(&b))
        });
        labels[k] = nearest_core.and_then(|m| labels[m]);
    }
    // renumber so ids follow the lowest member index, borders included
    let mut remap: HashMap<usize, usize> = HashMap::new();
    for l in labels.iter_mut().flatten() {
        let next = remap.len();
        *l = *remap.entry(*l).or_insert(next);
    }
    labels
}

fn canonical_order(particles: &[Particle]) -> Vec<Particle> {
    let mut sorted = particles.to_vec();
    sorted.sort_by(|a, b| {
        a.pos
            .x
            .total_cmp(&b.pos.x)
            .then(a.pos.y.total_cmp(&b.pos.y))
            .then(a.vel.x.total_cmp(&b.vel.x))
            .then(a.vel.y.total_cmp(&b.vel.y))
            .then(a.weight.total_cmp(&b.weight))
            .then(a.age.cmp(&b.age))
    });
    sorted
}

/// Clusters particles and summarizes each cluster as an object. The result
/// does not depend on the order of `particles`.
pub fn extract_objects(particles: &[Particle], params: &ExtractParams) -> Vec<DetectedObject> {
    let sorted = canonical_order(particles);
    let points: Vec<Vec2> = sorted.iter().map(|p| p.pos).collect();
    let labels = dbscan(&points, params.eps, params.min_pts);
    let n_clusters = labels.iter().flatten().max().map_or(0, |&m| m + 1);
    let mut members: Vec<Vec<&Particle>> = vec![Vec::new(); n_clusters];
    for (p, l) in sorted.iter().zip(&labels) {
        if let Some(l) = l {
            members[*l].push(p);
        }
    }
    members.retain(|m| m.len() >= params.min_pts);
    let weights: Vec<f64> = members.iter().map(|m| m.iter().map(|p| p.weight).sum()).collect();
    let max_w = weights.iter().copied().fold(0.0, f64::max);
    let mut objects: Vec<DetectedObject> = members
        .iter()
        .zip(&weights)
        .map(|(m, &w)| {
            let count = m.len();
            let (centroid, velocity) = if w > 0.0 {
                (
                    m.iter().map(|p| p.pos * p.weight).sum::<Vec2>() / w,
                    m.iter().map(|p| p.vel * p.weight).sum::<Vec2>() / w,
                )
            } else {
                (
                    m.iter().map(|p| p.pos).sum::<Vec2>() / count as f64,
                    m.iter().map(|p| p.vel).sum::<Vec2>() / count as f64,
                )
            };
            let age_mean = m.iter().map(|p| f64::from(p.age)).sum::<f64>() / count as f64;
            let share = if max_w > 0.0 { w / max_w } else { 1.0 };
            DetectedObject {
                centroid,
                velocity,
                confidence: share * (1.0 - (-age_mean / params.tau_age).exp()),
                particle_count: count,
            }
        })
        .collect();
    objects.sort_by(|a, b| {
        a.centroid
            .x
            .total_cmp(&b.centroid.x)
            .then(a.centroid.y.total_cmp(&b.centroid.y))
    });
    objects
}

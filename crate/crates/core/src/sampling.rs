//! Robot surface sampling: a dense δ-cover of every link's primitives, then a
//! greedy ε-net of it per link.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::kinematics::{BodyPoint, Primitive, RobotModel};
use crate::math::{ceil, cos, floor, sin, sqrt, PI};
use crate::{Error, Result, Vec3};

/// Local-frame surface points per link and the covering radius they achieve.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSurfaceCloud {
    pub per_link: Vec<Vec<Vec3>>,
    /// Requested resolution.
    pub target_delta: f64,
    /// Measured covering radius over all primitive surfaces.
    pub delta: f64,
}

impl DenseSurfaceCloud {
    pub fn len(&self) -> usize {
        self.per_link.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub per_link: Vec<Vec<BodyPoint>>,
    pub epsilon: f64,
}

impl SampleSet {
    pub fn count(&self) -> usize {
        self.per_link.iter().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BodyPoint> {
        self.per_link.iter().flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageReport {
    pub max_min_distance: f64,
    pub holds: bool,
}

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

/// `count` points of a Fibonacci lattice on the unit sphere; `phase` rotates
/// the spiral about z.
fn fibonacci_sphere(count: usize, phase: f64) -> impl Iterator<Item = Vec3> {
    (0..count).map(move |i| {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
        let rho = sqrt((1.0 - z * z).max(0.0));
        let theta = GOLDEN_ANGLE * i as f64 + phase;
        Vec3::new(rho * cos(theta), rho * sin(theta), z)
    })
}

fn orthonormal_basis(u: &Vec3) -> (Vec3, Vec3) {
    let helper = if u.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let e1 = u.cross(&helper).normalize();
    let e2 = u.cross(&e1);
    (e1, e2)
}

fn sphere_count(radius: f64, delta: f64) -> usize {
    let step = delta / radius;
    (ceil(4.0 * PI / (step * step)) as usize).max(1)
}

/// Surface points of one primitive at spacing `delta`. `phase` is only used
/// to offset probe lattices from the sampling lattice.
fn primitive_points(prim: &Primitive, delta: f64, phase: f64, out: &mut Vec<Vec3>) {
    match *prim {
        Primitive::Sphere { center, radius } => {
            let c = Vec3::from(center);
            out.extend(
                fibonacci_sphere(sphere_count(radius, delta), phase).map(|d| c + d * radius),
            );
        }
        Primitive::Capsule { a, b, radius } => {
            let a = Vec3::from(a);
            let b = Vec3::from(b);
            let axis = b - a;
            let len = axis.norm();
            let u = axis / len;
            let (e1, e2) = orthonormal_basis(&u);
            let rings = (ceil(len / delta) as usize).max(1);
            let around = (ceil(2.0 * PI * radius / delta) as usize).max(3);
            for r in 0..=rings {
                let base = a + axis * (r as f64 / rings as f64);
                for c in 0..around {
                    let phi = 2.0 * PI * c as f64 / around as f64 + phase;
                    out.push(base + (e1 * cos(phi) + e2 * sin(phi)) * radius);
                }
            }
            for d in fibonacci_sphere(sphere_count(radius, delta), phase) {
                // lattice z runs along the capsule axis, so caps split cleanly
                let dir = u * d.z + e1 * d.x + e2 * d.y;
                if d.z < 0.0 {
                    out.push(a + dir * radius);
                } else if d.z > 0.0 {
                    out.push(b + dir * radius);
                }
            }
        }
    }
}

/// Maps `(s, t)` in `[0, 1)²` to a point on the primitive surface, uniform in
/// area. Used for probing coverage.
pub fn surface_point(prim: &Primitive, s: f64, t: f64) -> Vec3 {
    let on_sphere = |s: f64, t: f64| {
        let z = 1.0 - 2.0 * s;
        let rho = sqrt((1.0 - z * z).max(0.0));
        let phi = 2.0 * PI * t;
        Vec3::new(rho * cos(phi), rho * sin(phi), z)
    };
    match *prim {
        Primitive::Sphere { center, radius } => Vec3::from(center) + on_sphere(s, t) * radius,
        Primitive::Capsule { a, b, radius } => {
            let a = Vec3::from(a);
            let b = Vec3::from(b);
            let axis = b - a;
            let len = axis.norm();
            let u = axis / len;
            let (e1, e2) = orthonormal_basis(&u);
            let cyl = 2.0 * PI * radius * len;
            let caps = 4.0 * PI * radius * radius;
            let split = cyl / (cyl + caps);
            if s < split {
                let along = s / split;
                let phi = 2.0 * PI * t;
                a + axis * along + (e1 * cos(phi) + e2 * sin(phi)) * radius
            } else {
                let d = on_sphere((s - split) / (1.0 - split), t);
                let dir = u * d.z + e1 * d.x + e2 * d.y;
                if d.z < 0.0 {
                    a + dir * radius
                } else {
                    b + dir * radius
                }
            }
        }
    }
}

/// Sorted-cell spatial index for nearest-point queries in `no_std`.
struct PointIndex<'a> {
    points: &'a [Vec3],
    cell: f64,
    keys: Vec<([i64; 3], u32)>,
}

impl<'a> PointIndex<'a> {
    fn new(points: &'a [Vec3], cell: f64) -> Self {
        let mut keys: Vec<([i64; 3], u32)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (cell_key(p, cell), i as u32))
            .collect();
        keys.sort_unstable();
        Self { points, cell, keys }
    }

    /// Best distance over points in cells `c ± r` (a cube of cells). Keys are
    /// sorted lexicographically, so each (x, y) column is one contiguous run.
    fn scan_block(&self, p: &Vec3, c: [i64; 3], r: i64, mut best: f64) -> f64 {
        for di in -r..=r {
            for dj in -r..=r {
                let lo_key = [c[0] + di, c[1] + dj, c[2] - r];
                let hi_key = [c[0] + di, c[1] + dj, c[2] + r];
                let lo = self.keys.partition_point(|(k, _)| *k < lo_key);
                for (k, idx) in &self.keys[lo..] {
                    if *k > hi_key {
                        break;
                    }
                    best = best.min((self.points[*idx as usize] - p).norm());
                }
            }
        }
        best
    }

    /// Distance to the nearest indexed point; exact, growing the search block
    /// until no closer point can exist outside it.
    fn nearest(&self, p: &Vec3) -> f64 {
        if self.points.is_empty() {
            return f64::INFINITY;
        }
        let c = cell_key(p, self.cell);
        let mut r: i64 = 1;
        loop {
            let best = self.scan_block(p, c, r, f64::INFINITY);
            // anything outside the block is at least `r * cell` away
            if best <= r as f64 * self.cell {
                return best;
            }
            r *= 2;
        }
    }
}

fn cell_key(p: &Vec3, cell: f64) -> [i64; 3] {
    [
        floor(p.x / cell) as i64,
        floor(p.y / cell) as i64,
        floor(p.z / cell) as i64,
    ]
}

/// Dense local-frame surface cloud of every link. The recorded `delta` is the
/// covering radius measured against a denser, offset probe lattice.
pub fn generate_dense_cloud(model: &RobotModel, delta: f64) -> Result<DenseSurfaceCloud> {
    if !(delta > 0.0) {
        return Err(Error::param("delta", "must be positive"));
    }
    let mut per_link = Vec::with_capacity(model.links.len());
    let mut achieved: f64 = 0.0;
    for link in &model.links {
        let mut pts = Vec::new();
        for prim in &link.primitives {
            primitive_points(prim, delta, 0.0, &mut pts);
        }
        if !pts.is_empty() {
            let index = PointIndex::new(&pts, delta);
            let mut probes = Vec::new();
            for prim in &link.primitives {
                // half spacing hits ring/point midpoints; the floor keeps very
                // coarse clouds honest
                let probe_delta = (delta * 0.5).min(prim.radius() * 0.25);
                primitive_points(prim, probe_delta, 0.5 * GOLDEN_ANGLE, &mut probes);
            }
            for q in &probes {
                achieved = achieved.max(index.nearest(q));
            }
        }
        per_link.push(pts);
    }
    Ok(DenseSurfaceCloud {
        per_link,
        target_delta: delta,
        delta: achieved,
    })
}

fn lexicographic(a: &Vec3, b: &Vec3) -> Ordering {
    a.x.total_cmp(&b.x)
        .then(a.y.total_cmp(&b.y))
        .then(a.z.total_cmp(&b.z))
}

/// Greedy Poisson-disk selection per link: visit points in lexicographic
/// order and keep one iff no kept point of that link is closer than
/// `epsilon`.
pub fn poisson_disk_downsample(cloud: &DenseSurfaceCloud, epsilon: f64) -> Result<SampleSet> {
    if !(epsilon > cloud.target_delta) {
        return Err(Error::param("epsilon", "must exceed the cloud resolution"));
    }
    let mut per_link = Vec::with_capacity(cloud.per_link.len());
    for (link, pts) in cloud.per_link.iter().enumerate() {
        let mut order: Vec<usize> = (0..pts.len()).collect();
        order.sort_by(|&i, &j| lexicographic(&pts[i], &pts[j]).then(i.cmp(&j)));
        let mut grid: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
        let mut kept: Vec<Vec3> = Vec::new();
        for i in order {
            let p = pts[i];
            let c = cell_key(&p, epsilon);
            let mut blocked = false;
            'search: for dk in -1..=1 {
                for dj in -1..=1 {
                    for di in -1..=1 {
                        if let Some(bucket) = grid.get(&[c[0] + di, c[1] + dj, c[2] + dk]) {
                            if bucket.iter().any(|&k| (kept[k] - p).norm() < epsilon) {
                                blocked = true;
                                break 'search;
                            }
                        }
                    }
                }
            }
            if !blocked {
                grid.entry(c).or_default().push(kept.len());
                kept.push(p);
            }
        }
        per_link.push(kept.into_iter().map(|p| BodyPoint::new(link, p)).collect());
    }
    Ok(SampleSet { per_link, epsilon })
}

/// Brute-force check that every cloud point is within `epsilon` of a sample
/// on the same link.
pub fn verify_coverage(cloud: &DenseSurfaceCloud, samples: &SampleSet) -> CoverageReport {
    let mut worst: f64 = 0.0;
    for (link, pts) in cloud.per_link.iter().enumerate() {
        let empty = Vec::new();
        let ys = samples.per_link.get(link).unwrap_or(&empty);
        for p in pts {
            let d = ys
                .iter()
                .map(|y| (y.local - p).norm())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    CoverageReport {
        max_min_distance: worst,
        holds: worst < samples.epsilon,
    }
}

/// World positions of every cloud point for configuration `link_poses`,
/// optionally skipping the base link.
pub fn world_cloud(
    cloud: &DenseSurfaceCloud,
    link_poses: &[crate::Pose],
    skip_base: bool,
) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(cloud.len());
    for (link, pts) in cloud.per_link.iter().enumerate() {
        if skip_base && link == 0 {
            continue;
        }
        let pose = &link_poses[link];
        out.extend(
            pts.iter()
                .map(|p| pose.transform_point(&(*p).into()).coords),
        );
    }
    out
}

/// Number of samples per link, for reporting.
pub fn counts_per_link(samples: &SampleSet) -> Vec<usize> {
    samples.per_link.iter().map(Vec::len).collect()
}

//! Planar/prismatic geometry and the world model.
//!
//! The environment is a flat floor made of convex walkable tiles plus a set of
//! convex prism obstacles. Robot bodies are sets of axis-aligned boxes in the
//! root frame; a [`Pose4`] places them in the world with a yaw rotation about
//! `z` followed by a translation.

use std::f64::consts::PI;

use nalgebra::{Point2, Rotation2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meter;

const EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon has zero or negative area")]
    Degenerate,
    #[error("polygon is not convex")]
    NotConvex,
    #[error("obstacle z interval [{0}, {1}] is empty")]
    EmptyInterval(f64, f64),
    #[error("box half-extents must be strictly positive")]
    NonPositiveExtent,
    #[error("box set is empty")]
    EmptyBoxSet,
    #[error("world needs at least one floor polygon")]
    NoFloor,
    #[error("root height {0} is negative")]
    NegativeHeight(f64),
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

/// Signed shortest-arc difference `to - from`, in `(-pi, pi]`.
pub fn angle_diff(from: f64, to: f64) -> f64 {
    normalize_angle(to - from)
}

/// Root pose in the exploration space: planar position, height, yaw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose4 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

impl Pose4 {
    /// Builds a pose with `yaw` normalized. Panics on negative `z`.
    pub fn new(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        assert!(z >= 0.0, "root height must be non-negative, got {z}");
        Self {
            x,
            y,
            z,
            yaw: normalize_angle(yaw),
        }
    }

    pub fn try_new(x: f64, y: f64, z: f64, yaw: f64) -> Result<Self, GeometryError> {
        if !(z >= 0.0) {
            return Err(GeometryError::NegativeHeight(z));
        }
        Ok(Self::new(x, y, z, yaw))
    }

    pub fn with_z(self, z: f64) -> Self {
        Self { z, ..self }
    }

    pub fn xy(&self) -> Point2<f64> {
        Point2::new(self.x, self.y)
    }

    pub fn planar_distance(&self, other: &Pose4) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn position_distance(&self, other: &Pose4) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }

    /// Linear in position, shortest arc in yaw.
    pub fn interpolate(&self, other: &Pose4, t: f64) -> Pose4 {
        let dyaw = angle_diff(self.yaw, other.yaw);
        Pose4 {
            x: self.x + (other.x - self.x) * t,
            y: self.y + (other.y - self.y) * t,
            z: (self.z + (other.z - self.z) * t).max(0.0),
            yaw: normalize_angle(self.yaw + dyaw * t),
        }
    }

    /// Maps a point given in the root's horizontal frame into the world.
    pub fn transform_point(&self, local: &Point2<f64>) -> Point2<f64> {
        let r = Rotation2::new(self.yaw);
        let v = r * local.coords;
        Point2::new(self.x + v.x, self.y + v.y)
    }

    pub(crate) fn bits(&self) -> [u64; 4] {
        [
            self.x.to_bits(),
            self.y.to_bits(),
            self.z.to_bits(),
            self.yaw.to_bits(),
        ]
    }
}

/// Axis-aligned planar bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds2 {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Bounds2 {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] - EPS
            && x <= self.max[0] + EPS
            && y >= self.min[1] - EPS
            && y <= self.max[1] + EPS
    }

    pub fn overlaps(&self, other: &Bounds2) -> bool {
        self.min[0] < other.max[0]
            && other.min[0] < self.max[0]
            && self.min[1] < other.max[1]
            && other.min[1] < self.max[1]
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    fn of_points<'a>(pts: impl IntoIterator<Item = &'a Point2<f64>>) -> Self {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in pts {
            min[0] = min[0].min(p.x);
            min[1] = min[1].min(p.y);
            max[0] = max[0].max(p.x);
            max[1] = max[1].max(p.y);
        }
        Self { min, max }
    }

    fn union(&self, other: &Bounds2) -> Bounds2 {
        Bounds2 {
            min: [self.min[0].min(other.min[0]), self.min[1].min(other.min[1])],
            max: [self.max[0].max(other.max[0]), self.max[1].max(other.max[1])],
        }
    }
}

/// Convex polygon with counter-clockwise winding.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon2 {
    vertices: Vec<Point2<f64>>,
}

impl ConvexPolygon2 {
    /// Accepts either winding; clockwise input is reversed.
    pub fn new(points: Vec<Point2<f64>>) -> Result<Self, GeometryError> {
        if points.len() < 3 {
            return Err(GeometryError::TooFewVertices(points.len()));
        }
        let mut vertices = points;
        let area = signed_area(&vertices);
        if area.abs() <= EPS {
            return Err(GeometryError::Degenerate);
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if cross(&(b - a), &(c - b)) < -EPS {
                return Err(GeometryError::NotConvex);
            }
        }
        Ok(Self { vertices })
    }

    pub fn from_xy(points: &[[f64; 2]]) -> Result<Self, GeometryError> {
        Self::new(points.iter().map(|p| Point2::new(p[0], p[1])).collect())
    }

    /// Axis-aligned rectangle centered at the origin.
    pub fn rectangle(length: f64, width: f64) -> Self {
        let (hl, hw) = (length / 2.0, width / 2.0);
        Self::from_xy(&[[-hl, -hw], [hl, -hw], [hl, hw], [-hl, hw]])
            .expect("rectangle with positive extents")
    }

    pub fn vertices(&self) -> &[Point2<f64>] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn bounds(&self) -> Bounds2 {
        Bounds2::of_points(&self.vertices)
    }

    /// Boundary points count as inside.
    pub fn contains(&self, p: &Point2<f64>) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let edge = b - a;
            let len = edge.norm();
            cross(&edge, &(p - a)) >= -EPS * len.max(1.0)
        })
    }

    /// Planar distance from `p` to the polygon; zero inside.
    pub fn distance(&self, p: &Point2<f64>) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let ab = self.vertices[(i + 1) % n] - a;
                let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
                (a + ab * t - p).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Vertices placed in the world by the planar part of `pose`.
    pub fn placed(&self, pose: &Pose4) -> Vec<Point2<f64>> {
        self.vertices.iter().map(|v| pose.transform_point(v)).collect()
    }

    /// Largest distance from the local origin to a vertex.
    pub fn radius(&self) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.coords.norm())
            .fold(0.0, f64::max)
    }
}

fn cross(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

fn signed_area(pts: &[Point2<f64>]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        / 2.0
}

/// Strict separating-axis overlap test for two convex point sets. Touching
/// boundaries do not count as overlap.
pub(crate) fn convex_overlap(a: &[Point2<f64>], b: &[Point2<f64>]) -> bool {
    !has_separating_axis(a, b) && !has_separating_axis(b, a)
}

fn has_separating_axis(a: &[Point2<f64>], b: &[Point2<f64>]) -> bool {
    let n = a.len();
    for i in 0..n {
        let e = a[(i + 1) % n] - a[i];
        let axis = Vector2::new(-e.y, e.x);
        let (amin, amax) = project(a, &axis);
        let (bmin, bmax) = project(b, &axis);
        let slack = EPS * axis.norm().max(1.0);
        if amax <= bmin + slack || bmax <= amin + slack {
            return true;
        }
    }
    false
}

fn project(pts: &[Point2<f64>], axis: &Vector2<f64>) -> (f64, f64) {
    pts.iter()
        .map(|p| p.coords.dot(axis))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        })
}

/// A convex footprint extruded over `[z_lo, z_hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstaclePrism {
    footprint: ConvexPolygon2,
    z_lo: f64,
    z_hi: f64,
    bounds: Bounds2,
}

impl ObstaclePrism {
    pub fn new(footprint: ConvexPolygon2, z_lo: f64, z_hi: f64) -> Result<Self, GeometryError> {
        if !(z_lo < z_hi) {
            return Err(GeometryError::EmptyInterval(z_lo, z_hi));
        }
        let bounds = footprint.bounds();
        Ok(Self {
            footprint,
            z_lo,
            z_hi,
            bounds,
        })
    }

    /// Axis-aligned box obstacle.
    pub fn aabb(min: [f64; 3], max: [f64; 3]) -> Result<Self, GeometryError> {
        let fp = ConvexPolygon2::from_xy(&[
            [min[0], min[1]],
            [max[0], min[1]],
            [max[0], max[1]],
            [min[0], max[1]],
        ])?;
        Self::new(fp, min[2], max[2])
    }

    pub fn footprint(&self) -> &ConvexPolygon2 {
        &self.footprint
    }

    pub fn z_interval(&self) -> (f64, f64) {
        (self.z_lo, self.z_hi)
    }

    pub fn bounds(&self) -> &Bounds2 {
        &self.bounds
    }

    /// Open-interval overlap with a vertical extent and a convex footprint.
    pub(crate) fn intersects(&self, z_lo: f64, z_hi: f64, footprint: &[Point2<f64>], fb: &Bounds2) -> bool {
        z_lo < self.z_hi
            && self.z_lo < z_hi
            && fb.overlaps(&self.bounds)
            && convex_overlap(footprint, self.footprint.vertices())
    }
}

/// Axis-aligned box in the root frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootBox {
    pub center: [f64; 3],
    pub half: [f64; 3],
}

impl RootBox {
    pub fn new(center: [f64; 3], half: [f64; 3]) -> Result<Self, GeometryError> {
        if half.iter().any(|h| !(*h > 0.0)) {
            return Err(GeometryError::NonPositiveExtent);
        }
        Ok(Self { center, half })
    }

    fn local_corners(&self) -> [Point2<f64>; 4] {
        let [cx, cy, _] = self.center;
        let [hx, hy, _] = self.half;
        [
            Point2::new(cx - hx, cy - hy),
            Point2::new(cx + hx, cy - hy),
            Point2::new(cx + hx, cy + hy),
            Point2::new(cx - hx, cy + hy),
        ]
    }

    /// True if `self` lies inside `other` (closed).
    pub fn contained_in(&self, other: &RootBox) -> bool {
        (0..3).all(|i| {
            self.center[i] - self.half[i] >= other.center[i] - other.half[i] - EPS
                && self.center[i] + self.half[i] <= other.center[i] + other.half[i] + EPS
        })
    }

    pub fn planar_radius(&self) -> f64 {
        self.local_corners()
            .iter()
            .map(|c| c.coords.norm())
            .fold(0.0, f64::max)
    }
}

/// Non-empty set of root-frame boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<RootBox>", into = "Vec<RootBox>")]
pub struct BoxSet {
    boxes: Vec<RootBox>,
}

impl TryFrom<Vec<RootBox>> for BoxSet {
    type Error = GeometryError;

    fn try_from(boxes: Vec<RootBox>) -> Result<Self, Self::Error> {
        BoxSet::new(boxes)
    }
}

impl From<BoxSet> for Vec<RootBox> {
    fn from(b: BoxSet) -> Self {
        b.boxes
    }
}

impl BoxSet {
    pub fn new(boxes: Vec<RootBox>) -> Result<Self, GeometryError> {
        if boxes.is_empty() {
            return Err(GeometryError::EmptyBoxSet);
        }
        for b in &boxes {
            RootBox::new(b.center, b.half)?;
        }
        Ok(Self { boxes })
    }

    pub fn single(center: [f64; 3], half: [f64; 3]) -> Result<Self, GeometryError> {
        Self::new(vec![RootBox::new(center, half)?])
    }

    pub fn boxes(&self) -> &[RootBox] {
        &self.boxes
    }

    /// Max horizontal distance from the root axis to any box corner.
    pub fn radius(&self) -> f64 {
        self.boxes
            .iter()
            .map(RootBox::planar_radius)
            .fold(0.0, f64::max)
    }

    /// Every box of `self` fits inside some box of `other`.
    pub fn nested_in(&self, other: &BoxSet) -> bool {
        self.boxes
            .iter()
            .all(|b| other.boxes.iter().any(|o| b.contained_in(o)))
    }
}

/// Flat floor (union of convex walkable tiles) plus prism obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    floor: Vec<ConvexPolygon2>,
    obstacles: Vec<ObstaclePrism>,
}

impl World {
    pub fn new(floor: Vec<ConvexPolygon2>, obstacles: Vec<ObstaclePrism>) -> Result<Self, GeometryError> {
        if floor.is_empty() {
            return Err(GeometryError::NoFloor);
        }
        Ok(Self { floor, obstacles })
    }

    pub fn floor(&self) -> &[ConvexPolygon2] {
        &self.floor
    }

    pub fn obstacles(&self) -> &[ObstaclePrism] {
        &self.obstacles
    }

    pub fn floor_bounds(&self) -> Bounds2 {
        self.floor
            .iter()
            .map(ConvexPolygon2::bounds)
            .reduce(|a, b| a.union(&b))
            .expect("non-empty floor")
    }

    /// Point membership in the union of floor tiles, boundary inclusive.
    pub fn on_floor(&self, p: &Point2<f64>) -> bool {
        self.floor.iter().any(|f| {
            let b = f.bounds();
            b.contains(p.x, p.y) && f.contains(p)
        })
    }

    pub fn floor_distance(&self, p: &Point2<f64>) -> f64 {
        self.floor
            .iter()
            .map(|f| f.distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Does a vertical extruded footprint hit any obstacle?
    pub fn footprint_hits(&self, footprint: &[Point2<f64>], z_lo: f64, z_hi: f64) -> bool {
        let fb = Bounds2::of_points(footprint);
        self.obstacles
            .iter()
            .any(|o| o.intersects(z_lo, z_hi, footprint, &fb))
    }
}

pub(crate) fn collide_unmetered(geom: &BoxSet, pose: &Pose4, world: &World) -> bool {
    if world.obstacles.is_empty() {
        return false;
    }
    geom.boxes.iter().any(|b| {
        let corners = b.local_corners().map(|c| pose.transform_point(&c));
        let zc = pose.z + b.center[2];
        world.footprint_hits(&corners, zc - b.half[2], zc + b.half[2])
    })
}

/// True iff some box of `geom`, placed at `pose`, intersects an obstacle.
pub fn collide_at(geom: &BoxSet, pose: &Pose4, world: &World) -> bool {
    meter::charge_pose_checks(1);
    collide_unmetered(geom, pose, world)
}

/// Dense samples from `a` to `b` such that consecutive samples differ by at
/// most `step` in position and `step / radius` in yaw. The sequence is
/// canonically ordered so that swapping `a` and `b` yields the same set.
pub fn sweep_samples(a: &Pose4, b: &Pose4, step: f64, radius: f64) -> Vec<Pose4> {
    assert!(step > 0.0, "sweep step must be positive");
    let (a, b) = if a.bits() <= b.bits() { (a, b) } else { (b, a) };
    let dpos = a.position_distance(b);
    let dyaw = angle_diff(a.yaw, b.yaw).abs();
    let n_pos = (dpos / step).ceil();
    let n_yaw = if radius > 0.0 {
        (dyaw * radius / step).ceil()
    } else {
        0.0
    };
    let n = n_pos.max(n_yaw) as usize;
    if n == 0 {
        return vec![*a];
    }
    (0..=n)
        .map(|i| match i {
            0 => *a,
            i if i == n => *b,
            i => a.interpolate(b, i as f64 / n as f64),
        })
        .collect()
}

/// Dense-sampled swept collision check of `geom` from `a` to `b`.
pub fn sweep_collides(geom: &BoxSet, a: &Pose4, b: &Pose4, step: f64, world: &World) -> bool {
    sweep_samples(a, b, step, geom.radius())
        .iter()
        .any(|p| collide_at(geom, p, world))
}

/// Outline spacing at which support is tested.
const SUPPORT_STEP: f64 = 0.02;

/// `polygon`, placed at `pose`, lies on the floor. The outline is tested every
/// 2 cm, so a foot cannot bridge a gap between two floor pieces.
pub fn supported(polygon: &ConvexPolygon2, pose: &Pose4, world: &World) -> bool {
    let vs = polygon.vertices();
    (0..vs.len()).all(|i| {
        let (a, b) = (vs[i], vs[(i + 1) % vs.len()]);
        let n = ((b - a).norm() / SUPPORT_STEP).ceil().max(1.0) as usize;
        (0..n).all(|k| {
            let p = a + (b - a) * (k as f64 / n as f64);
            world.on_floor(&pose.transform_point(&p))
        })
    })
}

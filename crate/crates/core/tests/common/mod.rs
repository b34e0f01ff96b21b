#![allow(dead_code)]

use proptest::prelude::*;
use rpg_core::geometry::{sweep_samples, BoxSet, Bounds2, ConvexPolygon2, ObstaclePrism, Pose4, World};
use rpg_core::robot::RobotSpec;

pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> ConvexPolygon2 {
    ConvexPolygon2::from_xy(&[[x0, y0], [x1, y0], [x1, y1], [x0, y1]]).unwrap()
}

pub fn rotated_rect(cx: f64, cy: f64, len: f64, width: f64, yaw: f64) -> ConvexPolygon2 {
    let (c, s) = (yaw.cos(), yaw.sin());
    let pts: Vec<[f64; 2]> = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
        .iter()
        .map(|(u, v)| {
            let (dx, dy) = (u * len / 2.0, v * width / 2.0);
            [cx + c * dx - s * dy, cy + s * dx + c * dy]
        })
        .collect();
    ConvexPolygon2::from_xy(&pts).unwrap()
}

pub fn open_world(half: f64) -> World {
    World::new(vec![rect(-half, -half, half, half)], vec![]).unwrap()
}

/// Floor `[-5, 5]^2` with an overhead bar across x in `[-0.3, 0.3]`.
pub fn limbo_world(underside: f64) -> World {
    World::new(
        vec![rect(-5.0, -2.0, 5.0, 2.0)],
        vec![ObstaclePrism::new(rect(-0.3, -2.5, 0.3, 2.5), underside, underside + 0.3).unwrap()],
    )
    .unwrap()
}

pub fn bounds(half: f64) -> Bounds2 {
    Bounds2::new([-half, -half], [half, half])
}

fn prism() -> impl Strategy<Value = ObstaclePrism> {
    (
        -3.0..3.0f64,
        -3.0..3.0f64,
        0.05..1.5f64,
        0.05..1.5f64,
        -3.2..3.2f64,
        0.0..1.6f64,
        0.05..1.2f64,
    )
        .prop_map(|(cx, cy, l, w, yaw, lo, h)| ObstaclePrism::new(rotated_rect(cx, cy, l, w, yaw), lo, lo + h).unwrap())
}

fn tile() -> impl Strategy<Value = ConvexPolygon2> {
    (-3.5..1.5f64, -3.5..1.5f64, 0.4..5.0f64, 0.4..5.0f64).prop_map(|(x, y, w, h)| rect(x, y, x + w, y + h))
}

/// Floors of one to four rectangles (gaps appear between them) and up to six
/// rotated prisms at random heights.
pub fn any_world() -> impl Strategy<Value = World> {
    (prop::collection::vec(tile(), 1..5), prop::collection::vec(prism(), 0..7))
        .prop_map(|(floor, obstacles)| World::new(floor, obstacles).unwrap())
}

/// Like [`any_world`] but with a large base floor and a few obstacles, so
/// that many edges come out `Possible`.
pub fn sparse_world() -> impl Strategy<Value = World> {
    (prop::collection::vec(tile(), 0..3), prop::collection::vec(prism(), 0..3)).prop_map(|(mut floor, obstacles)| {
        floor.push(rect(-3.0, -3.0, 3.0, 3.0));
        World::new(floor, obstacles).unwrap()
    })
}

pub fn pose_in(half: f64) -> impl Strategy<Value = Pose4> {
    let spec = RobotSpec::default();
    let (zmin, zmax) = spec.root_z_range;
    (-half..half, -half..half, zmin..=zmax, -3.14..3.14f64).prop_map(|(x, y, z, yaw)| Pose4::new(x, y, z, yaw))
}

/// An edge whose second endpoint is within `reach` of the first.
pub fn edge(half: f64, reach: f64) -> impl Strategy<Value = (Pose4, Pose4)> {
    let spec = RobotSpec::default();
    let (zmin, zmax) = spec.root_z_range;
    (pose_in(half), -reach..reach, -reach..reach, zmin..=zmax, -3.14..3.14f64)
        .prop_map(|(a, dx, dy, z, yaw)| (a, Pose4::new(a.x + dx, a.y + dy, z, yaw)))
}

/// Brute-force sweep: the planner's own sweep samples, each gap subdivided in
/// four, which puts consecutive samples at most 5 mm apart for a 2 cm step.
pub fn fine_sweep_collides(geom: &BoxSet, a: &Pose4, b: &Pose4, spec: &RobotSpec, world: &World) -> bool {
    assert!(spec.sweep_step <= 0.02 + 1e-12, "oracle assumes a 2 cm planner step");
    let coarse = sweep_samples(a, b, spec.sweep_step, geom.radius());
    let mut fine = vec![coarse[0]];
    for w in coarse.windows(2) {
        for k in 1..=4 {
            fine.push(if k == 4 { w[1] } else { w[0].interpolate(&w[1], k as f64 / 4.0) });
        }
    }
    fine.iter().any(|p| rpg_core::geometry::collide_at(geom, p, world))
}

/// Brute-force foothold test: a 5 mm grid over the leg-reach disc, looking
/// for any floor point a foot center could stand on.
pub fn fine_foothold_exists(root: &Pose4, spec: &RobotSpec, world: &World) -> bool {
    let r = spec.leg_reach;
    let n = (r / 0.005).ceil() as i64;
    for i in -n..=n {
        for j in -n..=n {
            let (dx, dy) = (i as f64 * 0.005, j as f64 * 0.005);
            if dx * dx + dy * dy <= r * r && world.on_floor(&nalgebra::Point2::new(root.x + dx, root.y + dy)) {
                return true;
            }
        }
    }
    false
}

//! The simplified biped.
//!
//! The body is not articulated. It is described by two rigid box sets (a
//! bounding volume that contains every motion of the basic gait, and a minimal
//! volume that no joint motion can move), a torso box whose vertical extent
//! follows the root height, and two feet. Whole-body feasibility is a
//! closed-form check standing in for an inverse-kinematics query.
//!
//! All dimensions here are stand-ins chosen to produce ducking and stepping
//! behavior at desk scale; they do not describe a particular robot.

use nalgebra::Point2;
use thiserror::Error;

use crate::geometry::{self, BoxSet, ConvexPolygon2, Pose4, World};
use crate::meter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// +1 for the left foot, -1 for the right (lateral offset sign).
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RobotError {
    #[error("invalid robot spec: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),
    #[error("a stance needs one or two feet on distinct sides")]
    BadStance,
    #[error("foot placement is not supported by the floor")]
    Unsupported,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotSpec {
    /// Volume covering every motion of the basic gait (sufficient conditions).
    pub bounding_geom: BoxSet,
    /// Volume unaffected by joint motion (necessary conditions).
    pub minimal_geom: BoxSet,
    pub foot_polygon: ConvexPolygon2,
    pub nominal_stance_half_width: f64,
    pub nominal_root_z: f64,
    pub root_z_range: (f64, f64),
    /// Max horizontal distance from the root to a planted foot center.
    pub leg_reach: f64,
    pub max_step_length: f64,
    pub stride: f64,
    /// Torso extends this far above and below the root.
    pub torso_half_height: f64,
    /// Height of the foot volume tested against obstacles.
    pub foot_height: f64,
    /// Largest yaw change per in-place turning step of the gait.
    pub max_turn: f64,
    /// Sampling resolution for swept checks, meters.
    pub sweep_step: f64,
}

impl Default for RobotSpec {
    fn default() -> Self {
        let nominal_root_z = 0.9;
        Self {
            // 0.8 x 0.8 x 1.6 m standing on the floor
            bounding_geom: BoxSet::single([0.0, 0.0, 0.8 - nominal_root_z], [0.4, 0.4, 0.8])
                .expect("valid box"),
            // 0.3 x 0.3 x 0.4 m around the root
            minimal_geom: BoxSet::single([0.0, 0.0, 0.0], [0.15, 0.15, 0.2]).expect("valid box"),
            foot_polygon: ConvexPolygon2::rectangle(0.24, 0.12),
            nominal_stance_half_width: 0.15,
            nominal_root_z,
            root_z_range: (0.6, 1.0),
            leg_reach: 0.5,
            max_step_length: 0.45,
            stride: 0.3,
            torso_half_height: 0.3,
            foot_height: 0.05,
            max_turn: 0.5,
            sweep_step: 0.02,
        }
    }
}

impl RobotSpec {
    /// Checks the invariants, listing every failed check.
    pub fn validate(&self) -> Result<(), RobotError> {
        let mut failed = Vec::new();
        if !self.minimal_geom.nested_in(&self.bounding_geom) {
            failed.push("minimal_geom must fit inside bounding_geom".to_string());
        }
        let (zmin, zmax) = self.root_z_range;
        if !(zmin <= self.nominal_root_z && self.nominal_root_z <= zmax) {
            failed.push(format!(
                "nominal_root_z {} outside root_z_range [{zmin}, {zmax}]",
                self.nominal_root_z
            ));
        }
        if zmin < 0.0 {
            failed.push("root_z_range must be non-negative".to_string());
        }
        if !(0.0 < self.stride && self.stride <= self.max_step_length && self.max_step_length <= self.leg_reach) {
            failed.push("require 0 < stride <= max_step_length <= leg_reach".to_string());
        }
        if !(self.nominal_stance_half_width > 0.0 && self.nominal_stance_half_width < self.leg_reach) {
            failed.push("nominal_stance_half_width must be in (0, leg_reach)".to_string());
        }
        if !(self.torso_half_height > 0.0) {
            failed.push("torso_half_height must be positive".to_string());
        }
        if !(self.foot_height > 0.0) {
            failed.push("foot_height must be positive".to_string());
        }
        if !(self.max_turn > 0.0) {
            failed.push("max_turn must be positive".to_string());
        }
        if !(self.sweep_step > 0.0) {
            failed.push("sweep_step must be positive".to_string());
        }
        if failed.is_empty() {
            Ok(())
        } else {
            Err(RobotError::InvalidSpec(failed))
        }
    }

    /// Box spanning the minimal footprint over `root.z ± torso_half_height`.
    pub fn torso_geom(&self) -> BoxSet {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for b in self.minimal_geom.boxes() {
            for i in 0..2 {
                lo[i] = lo[i].min(b.center[i] - b.half[i]);
                hi[i] = hi[i].max(b.center[i] + b.half[i]);
            }
        }
        BoxSet::single(
            [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, 0.0],
            [(hi[0] - lo[0]) / 2.0, (hi[1] - lo[1]) / 2.0, self.torso_half_height],
        )
        .expect("torso box derived from a valid minimal box")
    }

    /// Planar radius enclosing everything the body geometry can sweep.
    pub fn body_radius(&self) -> f64 {
        self.minimal_geom.radius().max(self.torso_geom().radius())
    }
}

/// A planted (or candidate) foot: side plus planar pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootPlacement {
    pub side: Side,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl FootPlacement {
    pub fn new(side: Side, x: f64, y: f64, yaw: f64) -> Self {
        Self {
            side,
            x,
            y,
            yaw: geometry::normalize_angle(yaw),
        }
    }

    pub fn pose(&self) -> Pose4 {
        Pose4 {
            x: self.x,
            y: self.y,
            z: 0.0,
            yaw: self.yaw,
        }
    }

    pub fn xy(&self) -> Point2<f64> {
        Point2::new(self.x, self.y)
    }

    pub fn distance(&self, other: &FootPlacement) -> f64 {
        (self.xy() - other.xy()).norm()
    }

    /// Nominal placement of `side` for a root at `root`.
    pub fn nominal(side: Side, root: &Pose4, half_width: f64) -> Self {
        let p = root.transform_point(&Point2::new(0.0, side.sign() * half_width));
        Self {
            side,
            x: p.x,
            y: p.y,
            yaw: root.yaw,
        }
    }
}

/// One or two planted feet, at most one per side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stance {
    left: Option<FootPlacement>,
    right: Option<FootPlacement>,
}

impl Stance {
    pub fn double(left: FootPlacement, right: FootPlacement) -> Result<Self, RobotError> {
        Self::from_placements([left, right])
    }

    pub fn single(foot: FootPlacement) -> Self {
        let mut s = Stance {
            left: None,
            right: None,
        };
        *s.slot_mut(foot.side) = Some(foot);
        s
    }

    pub fn from_placements(feet: impl IntoIterator<Item = FootPlacement>) -> Result<Self, RobotError> {
        let mut s = Stance {
            left: None,
            right: None,
        };
        for f in feet {
            let slot = s.slot_mut(f.side);
            if slot.is_some() {
                return Err(RobotError::BadStance);
            }
            *slot = Some(f);
        }
        if s.is_empty() {
            return Err(RobotError::BadStance);
        }
        Ok(s)
    }

    fn slot_mut(&mut self, side: Side) -> &mut Option<FootPlacement> {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    fn is_empty(&self) -> bool {
        self.left.is_none() && self.right.is_none()
    }

    pub fn get(&self, side: Side) -> Option<&FootPlacement> {
        match side {
            Side::Left => self.left.as_ref(),
            Side::Right => self.right.as_ref(),
        }
    }

    /// Feet in Left, Right order.
    pub fn iter(&self) -> impl Iterator<Item = &FootPlacement> {
        self.left.iter().chain(self.right.iter())
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_double(&self) -> bool {
        self.len() == 2
    }

    /// Stance with `side` lifted. `None` if that would leave no foot.
    pub fn without(&self, side: Side) -> Option<Stance> {
        let mut s = *self;
        *s.slot_mut(side) = None;
        (!s.is_empty()).then_some(s)
    }

    /// Stance with `foot` planted (replacing any foot on that side).
    pub fn with(&self, foot: FootPlacement) -> Stance {
        let mut s = *self;
        *s.slot_mut(foot.side) = Some(foot);
        s
    }

    pub fn centroid(&self) -> Point2<f64> {
        let n = self.len() as f64;
        let sum = self.iter().fold(nalgebra::Vector2::zeros(), |acc, f| acc + f.xy().coords);
        Point2::from(sum / n)
    }
}

/// Full planning state: root pose plus stance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub root: Pose4,
    pub stance: Stance,
}

impl RobotState {
    pub fn new(root: Pose4, stance: Stance) -> Self {
        Self { root, stance }
    }

    /// Bit-exact identity key.
    pub fn key(&self) -> Vec<u64> {
        let mut k = self.root.bits().to_vec();
        for side in [Side::Left, Side::Right] {
            match self.stance.get(side) {
                Some(f) => k.extend([1, f.x.to_bits(), f.y.to_bits(), f.yaw.to_bits()]),
                None => k.push(0),
            }
        }
        k
    }
}

/// A contact set: which feet are planted and where.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub contacts: Stance,
}

impl Mode {
    /// Validates that every contact is supported by the floor.
    pub fn new(contacts: Stance, world: &World, spec: &RobotSpec) -> Result<Self, RobotError> {
        if contacts.iter().all(|f| foot_supported(f, world, spec)) {
            Ok(Self { contacts })
        } else {
            Err(RobotError::Unsupported)
        }
    }

    pub fn centroid(&self) -> Point2<f64> {
        self.contacts.centroid()
    }
}

pub fn foot_supported(f: &FootPlacement, world: &World, spec: &RobotSpec) -> bool {
    geometry::supported(&spec.foot_polygon, &f.pose(), world)
}

/// Does the foot volume (footprint over `[0, foot_height]`) touch an obstacle?
pub fn foot_blocked(f: &FootPlacement, world: &World, spec: &RobotSpec) -> bool {
    world.footprint_hits(&spec.foot_polygon.placed(&f.pose()), 0.0, spec.foot_height)
}

/// Supported and free of obstacles.
pub fn foothold_ok(f: &FootPlacement, world: &World, spec: &RobotSpec) -> bool {
    foot_supported(f, world, spec) && !foot_blocked(f, world, spec)
}

/// Standing still at `at`: root height forced to nominal, feet side by side
/// under the root, aligned with its yaw.
pub fn nominal_stance(at: &Pose4, spec: &RobotSpec) -> RobotState {
    let root = Pose4 {
        z: spec.nominal_root_z,
        ..*at
    };
    let hw = spec.nominal_stance_half_width;
    let stance = Stance {
        left: Some(FootPlacement::nominal(Side::Left, &root, hw)),
        right: Some(FootPlacement::nominal(Side::Right, &root, hw)),
    };
    RobotState { root, stance }
}

pub fn project_state(s: &RobotState) -> Pose4 {
    s.root
}

/// Stance invariants only: root height range and leg reach.
pub fn stance_valid(s: &RobotState, spec: &RobotSpec) -> bool {
    let (zmin, zmax) = spec.root_z_range;
    let root_xy = s.root.xy();
    s.root.z >= zmin
        && s.root.z <= zmax
        && s.stance
            .iter()
            .all(|f| (f.xy() - root_xy).norm() <= spec.leg_reach + 1e-12)
}

/// Closed-form whole-body feasibility: stance invariants, every planted foot
/// supported and clear of obstacles, and the minimal and torso volumes
/// collision-free. Counted as one whole-body query by the work meter.
pub fn state_feasible(s: &RobotState, world: &World, spec: &RobotSpec) -> bool {
    meter::charge_state_checks(1);
    stance_valid(s, spec)
        && s.stance.iter().all(|f| foothold_ok(f, world, spec))
        && !geometry::collide_unmetered(&spec.minimal_geom, &s.root, world)
        && !geometry::collide_unmetered(&spec.torso_geom(), &s.root, world)
}

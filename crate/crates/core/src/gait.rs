//! Deterministic turn-walk-turn gait generator.
//!
//! Given an edge whose sufficient conditions hold, the generator turns in
//! place at the first vertex, walks the straight segment with alternating
//! single-foot steps of at most one stride, and turns in place at the second
//! vertex. The root stays at the nominal height throughout.
//!
//! Why it cannot fail on a `Possible` edge: every body part and foot stays
//! within `sqrt((stride/2)^2 + half_width^2) + foot radius` of the root, which
//! for the default dimensions (0.34 m) is inside the circle inscribed in the
//! 0.8 m bounding footprint at any yaw, and every root position lies on the
//! swept segment. The sufficient-condition check tests exactly the footholds
//! returned by [`gait_footholds`].

use thiserror::Error;

use crate::geometry::{angle_diff, sweep_samples, Pose4, World};
use crate::possibility::{EdgeSpan, PossibilityLabel};
use crate::robot::{nominal_stance, state_feasible, FootPlacement, RobotSpec, RobotState, Side};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaitError {
    #[error("gait generator requires a possible edge")]
    NotPossible,
    #[error("trajectory endpoint is not the nominal stance at the edge vertex")]
    BadEndpoint,
}

/// Discretized state trajectory. An empty trajectory encodes failure.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateTrajectory {
    states: Vec<RobotState>,
}

impl StateTrajectory {
    pub fn new(states: Vec<RobotState>) -> Self {
        Self { states }
    }

    pub fn failure() -> Self {
        Self::default()
    }

    pub fn states(&self) -> &[RobotState] {
        &self.states
    }

    pub fn into_states(self) -> Vec<RobotState> {
        self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_failure(&self) -> bool {
        self.states.is_empty()
    }

    pub fn first(&self) -> Option<&RobotState> {
        self.states.first()
    }

    pub fn last(&self) -> Option<&RobotState> {
        self.states.last()
    }

    /// Horizontal distance travelled by the root.
    pub fn path_length(&self) -> f64 {
        self.states
            .windows(2)
            .map(|w| w[0].root.planar_distance(&w[1].root))
            .sum()
    }

    /// Same motion played backwards. Quasi-static motions are reversible.
    pub fn reversed(&self) -> Self {
        Self {
            states: self.states.iter().rev().copied().collect(),
        }
    }
}

/// First defect found by [`audit_trajectory`]. Indices point into the
/// trajectory's states.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryFault {
    #[error("trajectory is empty")]
    Empty,
    #[error("state {0} is infeasible")]
    Infeasible(usize),
    #[error("states {0} and {} change root and stance together", .0 + 1)]
    MixedChange(usize),
    #[error("states {0} and {} change more than one contact", .0 + 1)]
    MultiContactChange(usize),
    #[error("root motion after state {0} passes an infeasible state")]
    RootMotion(usize),
}

/// Checks every state with [`state_feasible`], every root motion at the
/// robot's sweep step, and that each step either moves the root with the
/// stance fixed or adds or removes exactly one contact while every persisting
/// contact stays bitwise identical.
pub fn audit_trajectory(t: &StateTrajectory, world: &World, spec: &RobotSpec) -> Result<(), TrajectoryFault> {
    let states = t.states();
    if states.is_empty() {
        return Err(TrajectoryFault::Empty);
    }
    for (i, s) in states.iter().enumerate() {
        if !state_feasible(s, world, spec) {
            return Err(TrajectoryFault::Infeasible(i));
        }
    }
    for (i, w) in states.windows(2).enumerate() {
        let (a, b) = (&w[0], &w[1]);
        let root_moved = a.root != b.root;
        if a.stance == b.stance {
            if root_moved
                && !sweep_samples(&a.root, &b.root, spec.sweep_step, spec.body_radius())
                    .iter()
                    .all(|p| state_feasible(&RobotState::new(*p, a.stance), world, spec))
            {
                return Err(TrajectoryFault::RootMotion(i));
            }
            continue;
        }
        if root_moved {
            return Err(TrajectoryFault::MixedChange(i));
        }
        // exactly one side differs, and on that side a foot lifts or lands
        let changed: Vec<Side> = [Side::Left, Side::Right]
            .into_iter()
            .filter(|side| a.stance.get(*side) != b.stance.get(*side))
            .collect();
        let lift_or_land = changed.len() == 1
            && (a.stance.get(changed[0]).is_none() || b.stance.get(changed[0]).is_none());
        if !lift_or_land {
            return Err(TrajectoryFault::MultiContactChange(i));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaitEnd {
    Start,
    Goal,
}

/// Admissible sub-start (`Start`) or sub-goal (`Goal`) states for the gait on
/// an edge: the nominal stance at the relevant vertex.
pub fn gait_endpoints(span: &EdgeSpan, end: GaitEnd, spec: &RobotSpec) -> Vec<RobotState> {
    let vertex = match end {
        GaitEnd::Start => &span.from,
        GaitEnd::Goal => &span.to,
    };
    vec![nominal_stance(vertex, spec)]
}

struct GaitBuilder<'a> {
    spec: &'a RobotSpec,
    states: Vec<RobotState>,
    next_foot: Side,
}

impl GaitBuilder<'_> {
    fn current(&self) -> RobotState {
        *self.states.last().expect("builder starts with a state")
    }

    /// Lift `foot`, move the root (if needed) on the other foot, land.
    fn step(&mut self, foot: Side, root_to: Pose4, land: FootPlacement) {
        let cur = self.current();
        let lifted = cur.stance.without(foot).expect("double support before a step");
        self.states.push(RobotState::new(cur.root, lifted));
        if root_to != cur.root {
            self.states.push(RobotState::new(root_to, lifted));
        }
        self.states.push(RobotState::new(root_to, lifted.with(land)));
        self.next_foot = foot.other();
    }

    fn step_both(&mut self, first_root: Pose4, final_root: Pose4) {
        let hw = self.spec.nominal_stance_half_width;
        let f1 = self.next_foot;
        self.step(f1, first_root, FootPlacement::nominal(f1, &final_root, hw));
        let f2 = f1.other();
        self.step(f2, final_root, FootPlacement::nominal(f2, &final_root, hw));
    }

    /// In-place turn at the current root position ending exactly at `yaw`.
    fn turn_to(&mut self, yaw: f64) {
        let start = self.current().root;
        let diff = angle_diff(start.yaw, yaw);
        if diff == 0.0 && start.yaw == yaw {
            return;
        }
        let n = ((diff.abs() / self.spec.max_turn).ceil() as usize).max(1);
        for j in 1..=n {
            let yaw_j = if j == n {
                yaw
            } else {
                crate::geometry::normalize_angle(start.yaw + diff * j as f64 / n as f64)
            };
            let root = Pose4 { yaw: yaw_j, ..start };
            self.step_both(root, root);
        }
    }

    fn walk_to(&mut self, x: f64, y: f64) {
        let start = self.current().root;
        let (dx, dy) = (x - start.x, y - start.y);
        let len = (dx * dx + dy * dy).sqrt();
        let n = (len / self.spec.stride).ceil() as usize;
        let mut prev = start;
        for k in 1..=n {
            let station = if k == n {
                Pose4 { x, y, ..start }
            } else {
                let t = k as f64 / n as f64;
                Pose4 {
                    x: start.x + dx * t,
                    y: start.y + dy * t,
                    ..start
                }
            };
            let mid = Pose4 {
                x: (prev.x + station.x) / 2.0,
                y: (prev.y + station.y) / 2.0,
                ..start
            };
            self.step_both(mid, station);
            prev = station;
        }
    }
}

fn generate(from: &Pose4, to: &Pose4, spec: &RobotSpec) -> Vec<RobotState> {
    let x0 = nominal_stance(from, spec);
    let mut b = GaitBuilder {
        spec,
        states: vec![x0],
        next_foot: Side::Left,
    };
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    if dx != 0.0 || dy != 0.0 {
        let heading = dy.atan2(dx);
        b.turn_to(crate::geometry::normalize_angle(heading));
        b.walk_to(to.x, to.y);
    }
    b.turn_to(to.yaw);
    b.states
}

/// Every foot placement used by the gait between `from` and `to`.
pub fn gait_footholds(from: &Pose4, to: &Pose4, spec: &RobotSpec) -> Vec<FootPlacement> {
    let mut out: Vec<FootPlacement> = Vec::new();
    for s in generate(from, to, spec) {
        for f in s.stance.iter() {
            if !out.contains(f) {
                out.push(*f);
            }
        }
    }
    out
}

/// The guaranteed sub-planner for `Possible` edges.
pub fn plan_gait(
    x0: &RobotState,
    span: &EdgeSpan,
    xf: &RobotState,
    spec: &RobotSpec,
) -> Result<StateTrajectory, GaitError> {
    if span.label != PossibilityLabel::Possible {
        return Err(GaitError::NotPossible);
    }
    if *x0 != nominal_stance(&span.from, spec) || *xf != nominal_stance(&span.to, spec) {
        return Err(GaitError::BadEndpoint);
    }
    Ok(StateTrajectory::new(generate(&span.from, &span.to, spec)))
}

//! Multi-modal footstep and whole-body planner.
//!
//! A single tree rooted at the start state grows one footstep at a time. Each
//! iteration samples a foot placement (a one-contact mode), picks the nearest
//! tree node and tries the transition: lift the foot it would replace, shift
//! the root on the remaining foot, land. Placements farther than one step from
//! the replaced foot are rejected. The uninformed flavor samples placements and
//! roots uniformly; the guided flavor draws them from Normals around a guide
//! polyline, half of them near the farthest point the tree has reached.

use nalgebra::Point2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;
use thiserror::Error;

use crate::gait::StateTrajectory;
use crate::meter;
use crate::geometry::{convex_overlap, sweep_samples, Bounds2, Pose4, World};
use crate::possibility::EdgeSpan;
use crate::robot::{
    foothold_ok, state_feasible, FootPlacement, Mode, RobotSpec, RobotState, Side, Stance,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MmpError {
    #[error("invalid planner config: {0}")]
    Config(String),
    #[error("guided flavor needs a guide")]
    MissingGuide,
    #[error("a guide needs at least one pose")]
    EmptyGuide,
    #[error("start state is not feasible")]
    InfeasibleStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    Uninformed,
    Guided,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmpConfig {
    pub flavor: Flavor,
    pub sigma_xy: f64,
    pub sigma_z: f64,
    pub sigma_yaw: f64,
    pub max_iterations: usize,
    pub seed: u64,
    /// Chance of sampling one of the goal feet instead of a random placement.
    pub goal_bias: f64,
    /// Pull far samples to within one step of the foot they replace instead
    /// of rejecting them.
    pub steer: bool,
}

impl Default for MmpConfig {
    fn default() -> Self {
        Self {
            flavor: Flavor::Guided,
            sigma_xy: 0.3,
            sigma_z: 0.15,
            sigma_yaw: 0.3,
            max_iterations: 4000,
            seed: 0,
            goal_bias: 0.0,
            steer: false,
        }
    }
}

impl MmpConfig {
    pub fn validate(&self) -> Result<(), MmpError> {
        let sig = [self.sigma_xy, self.sigma_z, self.sigma_yaw];
        if !sig.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return Err(MmpError::Config("sigmas must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(MmpError::Config("max_iterations must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err(MmpError::Config("goal_bias must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Polyline through exploration-space poses that focuses guided sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct Guide {
    poses: Vec<Pose4>,
    /// Cumulative planar arc length at each pose.
    arc: Vec<f64>,
}

impl Guide {
    pub fn new(poses: Vec<Pose4>) -> Result<Self, MmpError> {
        if poses.is_empty() {
            return Err(MmpError::EmptyGuide);
        }
        let mut arc = vec![0.0];
        for w in poses.windows(2) {
            let last = *arc.last().unwrap();
            arc.push(last + w[0].planar_distance(&w[1]));
        }
        Ok(Self { poses, arc })
    }

    pub fn from_span(span: &EdgeSpan) -> Self {
        Self::new(vec![span.from, span.to]).expect("two poses")
    }

    pub fn poses(&self) -> &[Pose4] {
        &self.poses
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    /// Pose at arc length `s`, clamped to the ends.
    pub fn point_at(&self, s: f64) -> Pose4 {
        let s = s.clamp(0.0, self.length());
        for i in 1..self.poses.len() {
            if s <= self.arc[i] {
                let seg = self.arc[i] - self.arc[i - 1];
                let t = if seg > 0.0 { (s - self.arc[i - 1]) / seg } else { 0.0 };
                return self.poses[i - 1].interpolate(&self.poses[i], t);
            }
        }
        *self.poses.last().unwrap()
    }

    /// Closest guide pose to `p` in the plane.
    pub fn nearest(&self, p: &Point2<f64>) -> Pose4 {
        if self.poses.len() == 1 {
            return self.poses[0];
        }
        let mut best = (f64::INFINITY, self.poses[0]);
        for w in self.poses.windows(2) {
            let (a, b) = (w[0].xy(), w[1].xy());
            let ab = b - a;
            let len2 = ab.norm_squared();
            let t = if len2 > 0.0 {
                ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let q = w[0].interpolate(&w[1], t);
            let d = (q.xy() - p).norm();
            if d < best.0 {
                best = (d, q);
            }
        }
        best.1
    }

    pub fn distance(&self, p: &Point2<f64>) -> f64 {
        (self.nearest(p).xy() - p).norm()
    }

    /// Arc length of the guide point closest to `p`.
    pub fn project(&self, p: &Point2<f64>) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for (i, w) in self.poses.windows(2).enumerate() {
            let (a, b) = (w[0].xy(), w[1].xy());
            let ab = b - a;
            let len2 = ab.norm_squared();
            let t = if len2 > 0.0 {
                ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let d = (a + ab * t - p).norm();
            if d < best.0 {
                best = (d, self.arc[i] + t * (self.arc[i + 1] - self.arc[i]));
            }
        }
        best.1
    }
}

fn random_side<R: Rng>(rng: &mut R) -> Side {
    if rng.gen::<bool>() {
        Side::Left
    } else {
        Side::Right
    }
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("positive sigma")
}

/// Draws a one-contact mode. `None` marks a rejected sample: the placement is
/// off the floor or inside an obstacle.
pub fn sample_mode<R: Rng>(
    cfg: &MmpConfig,
    guide: Option<&Guide>,
    bounds: &Bounds2,
    world: &World,
    spec: &RobotSpec,
    rng: &mut R,
) -> Result<Option<Mode>, MmpError> {
    let f = draw_placement(cfg, guide, bounds, None, rng)?;
    Ok(accept_placement(f, world, spec))
}

fn draw_placement<R: Rng>(
    cfg: &MmpConfig,
    guide: Option<&Guide>,
    bounds: &Bounds2,
    window: Option<(f64, f64)>,
    rng: &mut R,
) -> Result<FootPlacement, MmpError> {
    let side = random_side(rng);
    Ok(match cfg.flavor {
        Flavor::Uninformed => {
            let x = rng.gen_range(bounds.min[0]..=bounds.max[0]);
            let y = rng.gen_range(bounds.min[1]..=bounds.max[1]);
            let yaw = rng.gen_range(-PI..=PI);
            FootPlacement::new(side, x, y, yaw)
        }
        Flavor::Guided => {
            let guide = guide.ok_or(MmpError::MissingGuide)?;
            let (lo, hi) = window.unwrap_or((0.0, guide.length()));
            let s = rng.gen_range(lo..=hi);
            let p = guide.point_at(s);
            let nxy = normal(cfg.sigma_xy);
            let x = p.x + nxy.sample(rng);
            let y = p.y + nxy.sample(rng);
            let yaw = p.yaw + normal(cfg.sigma_yaw).sample(rng);
            FootPlacement::new(side, x, y, yaw)
        }
    })
}

fn accept_placement(f: FootPlacement, world: &World, spec: &RobotSpec) -> Option<Mode> {
    // evaluating a sampled mode counts as one whole-body query
    meter::charge_state_checks(1);
    if !foothold_ok(&f, world, spec) {
        return None;
    }
    Mode::new(Stance::single(f), world, spec).ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeTreeNode {
    pub mode: Mode,
    /// State at which this mode was entered.
    pub transition_state: RobotState,
    pub parent: Option<usize>,
    /// States after the parent's transition state, ending with this node's.
    pub path: Vec<RobotState>,
    /// For single-support nodes, where the lifted foot was planted.
    pub lifted_from: Option<FootPlacement>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeTree {
    nodes: Vec<ModeTreeNode>,
}

impl ModeTree {
    pub fn new(x0: RobotState) -> Self {
        Self {
            nodes: vec![ModeTreeNode {
                mode: Mode {
                    contacts: x0.stance,
                },
                transition_state: x0,
                parent: None,
                path: vec![x0],
                lifted_from: None,
            }],
        }
    }

    pub fn nodes(&self) -> &[ModeTreeNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, node: ModeTreeNode) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    /// Nearest node to a sampled mode: centroid distance plus 0.5 m per
    /// contact-count difference from `target_contacts`. Ties go to the oldest
    /// node.
    pub fn nearest(&self, mode: &Mode, target_contacts: usize) -> usize {
        let c = mode.centroid();
        let n = target_contacts as f64;
        let mut best = (f64::INFINITY, 0);
        for (i, node) in self.nodes.iter().enumerate() {
            let m = &node.mode.contacts;
            let d = (m.centroid() - c).norm() + 0.5 * (m.len() as f64 - n).abs();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// Concatenated states from the root to node `id`.
    pub fn trajectory_to(&self, id: usize) -> Vec<RobotState> {
        let mut chain = Vec::new();
        let mut cur = Some(id);
        while let Some(i) = cur {
            chain.push(i);
            cur = self.nodes[i].parent;
        }
        chain
            .iter()
            .rev()
            .flat_map(|&i| self.nodes[i].path.iter().copied())
            .collect()
    }
}

/// One sampled placement and whether it produced new tree nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub foot: FootPlacement,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MmpStatus {
    Running,
    Solved(StateTrajectory),
    Exhausted,
}

/// Every state along the straight root motion `from -> to` with `stance`
/// planted is feasible.
fn root_motion_feasible(from: &Pose4, to: &Pose4, stance: &Stance, world: &World, spec: &RobotSpec) -> bool {
    sweep_samples(from, to, spec.sweep_step, spec.body_radius())
        .iter()
        .all(|p| state_feasible(&RobotState::new(*p, *stance), world, spec))
}

fn feet_overlap(a: &FootPlacement, b: &FootPlacement, spec: &RobotSpec) -> bool {
    convex_overlap(&spec.foot_polygon.placed(&a.pose()), &spec.foot_polygon.placed(&b.pose()))
}

/// Moves `target` toward `toward`'s position so it lies within `max` of `from`.
fn steer_foot(from: &FootPlacement, toward: &FootPlacement, max: f64) -> FootPlacement {
    let d = from.distance(toward);
    if d <= max {
        return *toward;
    }
    let t = max / d;
    FootPlacement::new(
        toward.side,
        from.x + (toward.x - from.x) * t,
        from.y + (toward.y - from.y) * t,
        toward.yaw,
    )
}

/// Resumable planner run. Holds no borrowed data, so it can be moved to a
/// worker thread and stepped in slices.
#[derive(Debug, Clone)]
pub struct MmpJob {
    cfg: MmpConfig,
    xf: RobotState,
    guide: Option<Guide>,
    bounds: Bounds2,
    tree: ModeTree,
    rng: ChaCha8Rng,
    iterations: usize,
    status: MmpStatus,
    trace: Vec<TraceSample>,
    /// Farthest guide arc length reached by a double-support node.
    progress: f64,
}

impl MmpJob {
    pub fn new(
        x0: RobotState,
        xf: RobotState,
        guide: Option<Guide>,
        bounds: Bounds2,
        cfg: MmpConfig,
    ) -> Result<Self, MmpError> {
        cfg.validate()?;
        if cfg.flavor == Flavor::Guided && guide.is_none() {
            return Err(MmpError::MissingGuide);
        }
        let status = if x0.key() == xf.key() {
            MmpStatus::Solved(StateTrajectory::new(vec![x0]))
        } else {
            MmpStatus::Running
        };
        Ok(Self {
            cfg,
            xf,
            bounds,
            tree: ModeTree::new(x0),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            iterations: 0,
            status,
            trace: Vec::new(),
            progress: guide.as_ref().map_or(0.0, |g| g.project(&x0.stance.centroid())),
            guide,
        })
    }

    pub fn status(&self) -> &MmpStatus {
        &self.status
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn tree(&self) -> &ModeTree {
        &self.tree
    }

    pub fn trace(&self) -> &[TraceSample] {
        &self.trace
    }

    pub fn goal(&self) -> &RobotState {
        &self.xf
    }

    /// Runs up to `n` more iterations.
    pub fn step(&mut self, n: usize, world: &World, spec: &RobotSpec) -> &MmpStatus {
        for _ in 0..n {
            if self.status != MmpStatus::Running {
                break;
            }
            if self.iterations >= self.cfg.max_iterations {
                self.status = MmpStatus::Exhausted;
                break;
            }
            self.iterations += 1;
            if let Some(goal_node) = self.expand(world, spec) {
                let states = self.tree.trajectory_to(goal_node);
                self.status = MmpStatus::Solved(StateTrajectory::new(states));
            } else if self.iterations >= self.cfg.max_iterations {
                self.status = MmpStatus::Exhausted;
            }
        }
        &self.status
    }

    pub fn run(&mut self, world: &World, spec: &RobotSpec) -> StateTrajectory {
        self.step(usize::MAX, world, spec);
        match &self.status {
            MmpStatus::Solved(t) => t.clone(),
            _ => StateTrajectory::failure(),
        }
    }

    /// One iteration. Returns the id of a node whose transition state is the
    /// goal state, if one was reached.
    pub fn expand(&mut self, world: &World, spec: &RobotSpec) -> Option<usize> {
        let sample = if self.rng.gen::<f64>() < self.cfg.goal_bias {
            let side = random_side(&mut self.rng);
            *self.xf.stance.get(side).expect("goal is double support")
        } else {
            let window = self.frontier_window(spec);
            draw_placement(&self.cfg, self.guide.as_ref(), &self.bounds, window, &mut self.rng)
                .expect("guide presence checked at construction")
        };
        let Some(mode) = accept_placement(sample, world, spec) else {
            self.trace.push(TraceSample {
                foot: sample,
                accepted: false,
            });
            return None;
        };
        // a landing always enters a two-contact mode
        let near = self.tree.nearest(&mode, 2);
        let added = self.transition(near, sample, world, spec);
        self.trace.push(TraceSample {
            foot: sample,
            accepted: added.is_some(),
        });
        let landed = added?;
        if let Some(g) = &self.guide {
            let c = self.tree.nodes[landed].mode.contacts.centroid();
            self.progress = self.progress.max(g.project(&c));
        }
        self.try_goal(landed, world, spec)
    }

    /// Half the guided samples land within one step of the farthest guide
    /// progress the tree has made.
    fn frontier_window(&mut self, spec: &RobotSpec) -> Option<(f64, f64)> {
        let g = self.guide.as_ref()?;
        if self.rng.gen::<f64>() >= 0.5 {
            return None;
        }
        let d = spec.max_step_length;
        Some(((self.progress - d).max(0.0), (self.progress + d).min(g.length())))
    }

    fn sample_root(&mut self, a: &FootPlacement, f: &FootPlacement, spec: &RobotSpec) -> Option<Pose4> {
        let mid = Point2::new((a.x + f.x) / 2.0, (a.y + f.y) / 2.0);
        let (zmin, zmax) = spec.root_z_range;
        let reach = spec.leg_reach;
        for _ in 0..8 {
            let (x, y, z, yaw) = match self.cfg.flavor {
                Flavor::Uninformed => {
                    let r = reach * self.rng.gen::<f64>().sqrt();
                    let th = self.rng.gen_range(-PI..=PI);
                    (
                        mid.x + r * th.cos(),
                        mid.y + r * th.sin(),
                        self.rng.gen_range(zmin..=zmax),
                        self.rng.gen_range(-PI..=PI),
                    )
                }
                Flavor::Guided => {
                    let p = self.guide.as_ref().expect("guided has a guide").nearest(&mid);
                    let nxy = normal(self.cfg.sigma_xy);
                    (
                        mid.x + nxy.sample(&mut self.rng),
                        mid.y + nxy.sample(&mut self.rng),
                        p.z + normal(self.cfg.sigma_z).sample(&mut self.rng),
                        p.yaw + normal(self.cfg.sigma_yaw).sample(&mut self.rng),
                    )
                }
            };
            let xy = Point2::new(x, y);
            if z < zmin || z > zmax || (a.xy() - xy).norm() > reach || (f.xy() - xy).norm() > reach {
                continue;
            }
            return Some(Pose4::new(x, y, z, yaw));
        }
        None
    }

    /// Tries to reach the mode containing `sample` from node `near`. Returns
    /// the new double-support node on success.
    fn transition(&mut self, near: usize, sample: FootPlacement, world: &World, spec: &RobotSpec) -> Option<usize> {
        let node = self.tree.nodes[near].clone();
        let x = node.transition_state;
        let side = sample.side;
        let (parent, lifted, old_foot) = if x.stance.is_double() {
            let old = *x.stance.get(side)?;
            let lifted = x.stance.without(side)?;
            (None, lifted, old)
        } else {
            // a single-support node can only land its free foot
            if x.stance.get(side).is_some() {
                return None;
            }
            (Some(near), x.stance, node.lifted_from?)
        };
        let f = if self.cfg.steer {
            steer_foot(&old_foot, &sample, spec.max_step_length)
        } else if old_foot.distance(&sample) <= spec.max_step_length {
            sample
        } else {
            return None;
        };
        if !foothold_ok(&f, world, spec) {
            return None;
        }
        let anchor = *lifted.get(side.other())?;
        if feet_overlap(&anchor, &f, spec) {
            return None;
        }
        let r = self.sample_root(&anchor, &f, spec)?;

        let lift_state = RobotState::new(x.root, lifted);
        let single = match parent {
            Some(p) => p,
            None => {
                if !state_feasible(&lift_state, world, spec) {
                    return None;
                }
                // the single-support node is kept even if the move fails
                self.tree.push(ModeTreeNode {
                    mode: Mode { contacts: lifted },
                    transition_state: lift_state,
                    parent: Some(near),
                    path: vec![lift_state],
                    lifted_from: Some(old_foot),
                })
            }
        };
        // endpoints first, the dense root sweep last
        let landed = RobotState::new(r, lifted.with(f));
        if !state_feasible(&landed, world, spec) {
            return None;
        }
        if !root_motion_feasible(&x.root, &r, &lifted, world, spec) {
            return None;
        }
        Some(self.tree.push(ModeTreeNode {
            mode: Mode {
                contacts: landed.stance,
            },
            transition_state: landed,
            parent: Some(single),
            path: vec![RobotState::new(r, lifted), landed],
            lifted_from: None,
        }))
    }

    /// From a double-support node near the goal, tries the two-step sequence
    /// that ends exactly in the goal state.
    fn try_goal(&mut self, id: usize, world: &World, spec: &RobotSpec) -> Option<usize> {
        let x = self.tree.nodes[id].transition_state;
        let g = self.xf;
        if x.key() == g.key() {
            return Some(id);
        }
        if (x.stance.centroid() - g.stance.centroid()).norm() > 2.0 * spec.max_step_length {
            return None;
        }
        for first in [Side::Left, Side::Right] {
            if let Some(path) = goal_sequence(&x, &g, first, world, spec) {
                return Some(self.tree.push(ModeTreeNode {
                    mode: Mode {
                        contacts: g.stance,
                    },
                    transition_state: g,
                    parent: Some(id),
                    path,
                    lifted_from: None,
                }));
            }
        }
        None
    }
}

/// Steps `first` then the other foot onto the goal placements, moving the
/// root to the goal root at the end. Returns the states after `x`.
fn goal_sequence(x: &RobotState, g: &RobotState, first: Side, world: &World, spec: &RobotSpec) -> Option<Vec<RobotState>> {
    let second = first.other();
    let (f1, f2) = (*g.stance.get(first)?, *g.stance.get(second)?);
    let (o1, o2) = (*x.stance.get(first)?, *x.stance.get(second)?);
    if o1.distance(&f1) > spec.max_step_length || o2.distance(&f2) > spec.max_step_length {
        return None;
    }
    if feet_overlap(&o2, &f1, spec) {
        return None;
    }
    let mid = Pose4::new((o2.x + f1.x) / 2.0, (o2.y + f1.y) / 2.0, g.root.z, g.root.yaw);
    let mut out = Vec::new();
    let push = |s: RobotState, out: &mut Vec<RobotState>| {
        let ok = state_feasible(&s, world, spec);
        out.push(s);
        ok
    };
    let s1 = x.stance.without(first)?;
    if !push(RobotState::new(x.root, s1), &mut out) {
        return None;
    }
    if !root_motion_feasible(&x.root, &mid, &s1, world, spec) {
        return None;
    }
    out.push(RobotState::new(mid, s1));
    let s2 = s1.with(f1);
    if !push(RobotState::new(mid, s2), &mut out) {
        return None;
    }
    let s3 = s2.without(second)?;
    out.push(RobotState::new(mid, s3));
    if !root_motion_feasible(&mid, &g.root, &s3, world, spec) {
        return None;
    }
    out.push(RobotState::new(g.root, s3));
    out.push(*g);
    // the goal state itself is assumed feasible; the last stance change is
    // re-checked anyway
    if !state_feasible(g, world, spec) {
        return None;
    }
    Some(out)
}

/// Runs a planner instance to completion. An empty trajectory signals that
/// the iteration budget ran out.
pub fn plan_mmp(
    x0: &RobotState,
    guide: Option<Guide>,
    xf: &RobotState,
    bounds: &Bounds2,
    cfg: &MmpConfig,
    world: &World,
    spec: &RobotSpec,
) -> Result<StateTrajectory, MmpError> {
    if !state_feasible(x0, world, spec) {
        return Err(MmpError::InfeasibleStart);
    }
    let mut job = MmpJob::new(*x0, *xf, guide, *bounds, *cfg)?;
    Ok(job.run(world, spec))
}

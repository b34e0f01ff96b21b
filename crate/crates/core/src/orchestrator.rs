//! The planning loop tying the layers together.
//!
//! The coordinator grows the possibility graph, asks it for a guide route,
//! splits the route into segments and hands each segment to a sub-planner.
//! Possible edges are walked with the gait generator on the spot. Runs of
//! indeterminate edges become guided multi-modal jobs: their edges are
//! deleted from the possibility graph and growth continues while the jobs
//! run. Solved segments enter the motion graph and are promoted back into the
//! possibility graph. Planning ends when the motion graph links start to goal.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::cmp::Ordering;
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::sync::mpsc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gait::{plan_gait, StateTrajectory};
use crate::geometry::{Bounds2, Pose4, World};
use crate::meter::{Clock, ClockKind, CostModel};
use crate::mmp::{Flavor, Guide, MmpConfig, MmpJob, MmpStatus, TraceSample};
use crate::possibility::{
    label_edge, EdgeOrigin, EdgeSpan, GrowParams, GuideRoute, PossibilityEdge, PossibilityGraph,
    PossibilityLabel, Verdict, VertexId,
};
use crate::robot::{nominal_stance, state_feasible, FootPlacement, RobotSpec, RobotState, Side, Stance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no solution within {0:.3} s")]
    Timeout(f64),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("sub-planner contract violated: {0}")]
    Contract(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SubPlanner {
    Gait,
    Mmp,
}

/// Which top-level planner to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlannerKind {
    /// Possibility graph guiding gait and guided multi-modal planning.
    Rpg,
    /// A single uninformed multi-modal search from start to goal.
    Uninformed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecMode {
    /// Jobs are time-sliced on the calling thread; fully reproducible.
    Sequential,
    /// Jobs run on worker threads.
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    pub kind: PlannerKind,
    pub timeout_s: f64,
    pub seed: u64,
    pub grow: GrowParams,
    /// Template for every multi-modal job; flavor and seed are set per job.
    pub mmp: MmpConfig,
    /// Cost multiplier for indeterminate edges in route search.
    pub lambda: f64,
    pub max_concurrent: usize,
    /// Junction states returned for junctions touching indeterminate edges.
    pub junction_states: usize,
    pub exec: ExecMode,
    pub clock: ClockKind,
    pub cost_model: CostModel,
    /// Possibility-graph growth iterations per coordinator round.
    pub grow_batch: usize,
    /// Multi-modal iterations per job per round (or per worker slice).
    pub mmp_slice: usize,
    /// Minimum spacing of vertices inserted by promotion, meters.
    pub promote_spacing: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            kind: PlannerKind::Rpg,
            timeout_s: 120.0,
            seed: 0,
            grow: GrowParams::default(),
            mmp: MmpConfig::default(),
            lambda: 5.0,
            max_concurrent: 2,
            junction_states: 5,
            exec: ExecMode::Sequential,
            clock: ClockKind::Work,
            cost_model: CostModel::default(),
            grow_batch: 10,
            mmp_slice: 10,
            promote_spacing: 0.3,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: &str| Err(PlanError::InvalidScenario(m.to_string()));
        if !(self.timeout_s > 0.0) {
            return bad("timeout must be positive");
        }
        if self.lambda < 1.0 {
            return bad("lambda must be at least 1");
        }
        if self.max_concurrent == 0 || self.junction_states == 0 {
            return bad("max_concurrent and junction_states must be positive");
        }
        if self.grow_batch == 0 || self.mmp_slice == 0 {
            return bad("grow_batch and mmp_slice must be positive");
        }
        self.mmp
            .validate()
            .map_err(|e| PlanError::InvalidScenario(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanningProblem {
    pub world: World,
    pub spec: RobotSpec,
    pub start: Pose4,
    pub goal: Pose4,
    /// Sampling box for the exploration space.
    pub bounds: Bounds2,
}

impl PlanningProblem {
    pub fn start_state(&self) -> RobotState {
        nominal_stance(&self.start, &self.spec)
    }

    pub fn goal_state(&self) -> RobotState {
        nominal_stance(&self.goal, &self.spec)
    }

    /// Lists every failed precondition.
    pub fn check(&self) -> Result<(), PlanError> {
        let mut failed = Vec::new();
        if let Err(e) = self.spec.validate() {
            failed.push(e.to_string());
        }
        for (name, p) in [("start", &self.start), ("goal", &self.goal)] {
            if !self.bounds.contains(p.x, p.y) {
                failed.push(format!("{name} outside sampling bounds"));
            }
        }
        if failed.is_empty() {
            if !state_feasible(&self.start_state(), &self.world, &self.spec) {
                failed.push("nominal stance at start is not feasible".into());
            }
            if !state_feasible(&self.goal_state(), &self.world, &self.spec) {
                failed.push("nominal stance at goal is not feasible".into());
            }
        }
        if failed.is_empty() {
            Ok(())
        } else {
            Err(PlanError::InvalidScenario(failed.join("; ")))
        }
    }
}

/// One verified motion stored in the motion graph.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionEdge {
    pub from: usize,
    pub to: usize,
    pub trajectory: StateTrajectory,
    pub planner: SubPlanner,
}

/// Verified motions between robot states, stored in both directions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MotionGraph {
    ids: BTreeMap<Vec<u64>, usize>,
    vertices: Vec<RobotState>,
    edges: Vec<MotionEdge>,
    out: Vec<Vec<usize>>,
    starts: BTreeSet<usize>,
    goals: BTreeSet<usize>,
}

impl MotionGraph {
    pub fn new(starts: &[RobotState], goals: &[RobotState]) -> Self {
        let mut g = Self::default();
        for s in starts {
            let id = g.vertex_id(s);
            g.starts.insert(id);
        }
        for s in goals {
            let id = g.vertex_id(s);
            g.goals.insert(id);
        }
        g
    }

    fn vertex_id(&mut self, s: &RobotState) -> usize {
        if let Some(&id) = self.ids.get(&s.key()) {
            return id;
        }
        let id = self.vertices.len();
        self.ids.insert(s.key(), id);
        self.vertices.push(*s);
        self.out.push(Vec::new());
        id
    }

    /// Stores `traj` and its reverse. Returns `false` for a failed (empty)
    /// trajectory.
    pub fn insert(&mut self, traj: &StateTrajectory, planner: SubPlanner) -> bool {
        let (Some(first), Some(last)) = (traj.first(), traj.last()) else {
            return false;
        };
        let a = self.vertex_id(first);
        let b = self.vertex_id(last);
        for (from, to, t) in [(a, b, traj.clone()), (b, a, traj.reversed())] {
            let id = self.edges.len();
            self.edges.push(MotionEdge {
                from,
                to,
                trajectory: t,
                planner,
            });
            self.out[from].push(id);
        }
        true
    }

    pub fn vertices(&self) -> &[RobotState] {
        &self.vertices
    }

    pub fn edges(&self) -> &[MotionEdge] {
        &self.edges
    }

    pub fn starts(&self) -> &BTreeSet<usize> {
        &self.starts
    }

    pub fn goals(&self) -> &BTreeSet<usize> {
        &self.goals
    }
}

/// A start-to-goal path through the motion graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath {
    pub trajectory: StateTrajectory,
    /// Motion-graph edge ids in traversal order.
    pub edges: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest (by root path length) start-to-goal path in `g`, with the edge
/// trajectories concatenated. Junction states appear once.
pub fn extract_solution(g: &MotionGraph) -> Option<SolutionPath> {
    if let Some(&v) = g.starts.intersection(&g.goals).next() {
        return Some(SolutionPath {
            trajectory: StateTrajectory::new(vec![g.vertices[v]]),
            edges: Vec::new(),
        });
    }
    let n = g.vertices.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev: Vec<Option<usize>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    for &s in &g.starts {
        dist[s] = 0.0;
        heap.push(Entry(0.0, s));
    }
    let mut reached = None;
    while let Some(Entry(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        if g.goals.contains(&v) {
            reached = Some(v);
            break;
        }
        for &eid in &g.out[v] {
            let e = &g.edges[eid];
            let nd = d + e.trajectory.path_length() + 1e-9;
            if nd < dist[e.to] {
                dist[e.to] = nd;
                prev[e.to] = Some(eid);
                heap.push(Entry(nd, e.to));
            }
        }
    }
    let mut v = reached?;
    let mut path = Vec::new();
    while let Some(eid) = prev[v] {
        path.push(eid);
        v = g.edges[eid].from;
    }
    path.reverse();
    let mut states: Vec<RobotState> = Vec::new();
    for &eid in &path {
        let t = g.edges[eid].trajectory.states();
        match states.last() {
            None => states.extend_from_slice(t),
            Some(last) => {
                if last.key() != t[0].key() {
                    return None;
                }
                states.extend_from_slice(&t[1..]);
            }
        }
    }
    Some(SolutionPath {
        trajectory: StateTrajectory::new(states),
        edges: path,
    })
}

/// Ends of a junction between consecutive guide-route pieces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Junction<'a> {
    /// Before the first edge: the admissible start states.
    Start(&'a [RobotState], &'a EdgeSpan),
    Between(&'a EdgeSpan, &'a EdgeSpan),
    /// After the last edge: the admissible goal states.
    Goal(&'a EdgeSpan, &'a [RobotState]),
}

/// Does `x` belong to the admissible end set of `span` at `at`? Possible
/// edges admit only the nominal stance; indeterminate ones admit any
/// feasible state whose root sits at the vertex (any height).
fn admissible(x: &RobotState, span: &EdgeSpan, at: &Pose4, world: &World, spec: &RobotSpec) -> bool {
    match span.label {
        PossibilityLabel::Possible => *x == nominal_stance(at, spec),
        PossibilityLabel::Indeterminate => {
            x.root.x == at.x && x.root.y == at.y && x.root.yaw == at.yaw && state_feasible(x, world, spec)
        }
    }
}

/// Shared junction states between consecutive guide-route pieces. The
/// nominal stance comes first; junctions touching an indeterminate edge add
/// up to `k - 1` sampled feasible stances. An empty result marks an unusable
/// junction.
pub fn phi_m<R: Rng>(
    junction: Junction<'_>,
    k: usize,
    world: &World,
    spec: &RobotSpec,
    rng: &mut R,
) -> Vec<RobotState> {
    match junction {
        Junction::Start(starts, first) => starts
            .iter()
            .filter(|x| admissible(x, first, &first.from, world, spec))
            .copied()
            .collect(),
        Junction::Goal(last, goals) => goals
            .iter()
            .filter(|x| admissible(x, last, &last.to, world, spec))
            .copied()
            .collect(),
        Junction::Between(a, b) => {
            if a.to != b.from {
                return Vec::new();
            }
            let p = a.to;
            let mut out = Vec::new();
            let nominal = nominal_stance(&p, spec);
            if state_feasible(&nominal, world, spec) {
                out.push(nominal);
            }
            let both_possible =
                a.label == PossibilityLabel::Possible && b.label == PossibilityLabel::Possible;
            if both_possible {
                return out;
            }
            if a.label == PossibilityLabel::Possible || b.label == PossibilityLabel::Possible {
                // the possible side only admits the nominal stance
                return out;
            }
            let (zmin, zmax) = spec.root_z_range;
            let hw = spec.nominal_stance_half_width;
            let mut attempts = 0;
            while out.len() < k && attempts < 8 * k {
                attempts += 1;
                let root = Pose4 {
                    z: rng.gen_range(zmin..=zmax),
                    ..p
                };
                let jitter = |f: FootPlacement, rng: &mut R| {
                    FootPlacement::new(
                        f.side,
                        f.x + rng.gen_range(-0.05..=0.05),
                        f.y + rng.gen_range(-0.05..=0.05),
                        f.yaw,
                    )
                };
                let l = jitter(FootPlacement::nominal(Side::Left, &root, hw), rng);
                let r = jitter(FootPlacement::nominal(Side::Right, &root, hw), rng);
                let x = RobotState::new(root, Stance::double(l, r).expect("one foot per side"));
                if state_feasible(&x, world, spec) && !out.iter().any(|o| o.key() == x.key()) {
                    out.push(x);
                }
            }
            out
        }
    }
}

/// Dispatches one guide edge to the sub-planner its label calls for.
pub fn omega_m(
    x0: &RobotState,
    span: &EdgeSpan,
    xf: &RobotState,
    bounds: &Bounds2,
    mmp: &MmpConfig,
    world: &World,
    spec: &RobotSpec,
) -> Result<(SubPlanner, StateTrajectory), PlanError> {
    let verdict = label_edge(&span.from, &span.to, world, spec);
    match (span.label, verdict) {
        (_, Verdict::Impossible) => Err(PlanError::Contract("edge fails the necessary conditions".into())),
        (PossibilityLabel::Possible, Verdict::Possible) => plan_gait(x0, span, xf, spec)
            .map(|t| (SubPlanner::Gait, t))
            .map_err(|e| PlanError::Contract(e.to_string())),
        (PossibilityLabel::Possible, Verdict::Indeterminate) => {
            Err(PlanError::Contract("edge labeled possible fails the sufficient conditions".into()))
        }
        (PossibilityLabel::Indeterminate, _) => {
            let cfg = MmpConfig {
                flavor: Flavor::Guided,
                ..*mmp
            };
            let mut job = MmpJob::new(*x0, *xf, Some(Guide::from_span(span)), *bounds, cfg)
                .map_err(|e| PlanError::Contract(e.to_string()))?;
            Ok((SubPlanner::Mmp, job.run(world, spec)))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    RouteFound {
        cost: f64,
        edges: usize,
        indeterminate: usize,
    },
    EdgeDeleted {
        from: VertexId,
        to: VertexId,
    },
    SegmentSolved {
        planner: SubPlanner,
        from: VertexId,
        to: VertexId,
        states: usize,
    },
    SegmentFailed {
        from: VertexId,
        to: VertexId,
        iterations: usize,
    },
    SolutionFound,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunEvent {
    /// Planner clock reading when the event happened.
    pub at_s: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanStats {
    pub elapsed_s: f64,
    pub grow_iterations: usize,
    pub routes_found: usize,
    pub mmp_jobs: usize,
    pub mmp_failures: usize,
    pub possibility_vertices: usize,
    pub possibility_edges: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub trajectory: StateTrajectory,
    /// Sub-planner of each motion-graph edge on the solution path.
    pub segments: Vec<SubPlanner>,
    pub stats: PlanStats,
}

impl Solution {
    pub fn count(&self, planner: SubPlanner) -> usize {
        self.segments.iter().filter(|p| **p == planner).count()
    }
}

/// Sampled placements of one multi-modal job, for rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct JobTrace {
    pub from: VertexId,
    pub to: VertexId,
    pub guide: Option<Guide>,
    pub samples: Vec<TraceSample>,
    pub solved: bool,
}

/// Everything a run produced, for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRun {
    pub outcome: Result<Solution, PlanError>,
    pub events: Vec<RunEvent>,
    pub graph: PossibilityGraph,
    pub traces: Vec<JobTrace>,
}

pub fn plan(problem: &PlanningProblem, cfg: &PlannerConfig) -> Result<Solution, PlanError> {
    plan_detailed(problem, cfg).outcome
}

pub fn plan_detailed(problem: &PlanningProblem, cfg: &PlannerConfig) -> PlanRun {
    let graph = PossibilityGraph::new(&[problem.start], &[problem.goal]);
    if let Err(e) = cfg.validate().and_then(|_| problem.check()) {
        return PlanRun {
            outcome: Err(e),
            events: Vec::new(),
            graph,
            traces: Vec::new(),
        };
    }
    let mut c = Coordinator::new(problem, cfg, graph);
    let outcome = match (cfg.kind, cfg.exec) {
        (PlannerKind::Uninformed, _) => c.run_uninformed(),
        (PlannerKind::Rpg, ExecMode::Sequential) => c.run_sequential(),
        (PlannerKind::Rpg, ExecMode::Parallel) => c.run_parallel(),
    };
    c.stats.possibility_vertices = c.gp.vertex_count();
    c.stats.possibility_edges = c.gp.edge_count();
    let outcome = outcome.map(|(path, segments)| Solution {
        trajectory: path,
        segments,
        stats: c.stats,
    });
    PlanRun {
        outcome,
        events: c.events,
        graph: c.gp,
        traces: c.traces,
    }
}

/// A piece of a guide route handled by one sub-planner call.
#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Gait(PossibilityEdge),
    /// Already covered by a promoted motion.
    Promoted,
    Indeterminate(Vec<PossibilityEdge>),
}

fn split_route(route: &GuideRoute) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    for e in &route.edges {
        match (e.label, e.origin) {
            (PossibilityLabel::Possible, EdgeOrigin::Grown) => out.push(Segment::Gait(*e)),
            (PossibilityLabel::Possible, EdgeOrigin::Promoted) => {
                if out.last() != Some(&Segment::Promoted) {
                    out.push(Segment::Promoted);
                }
            }
            (PossibilityLabel::Indeterminate, _) => match out.last_mut() {
                Some(Segment::Indeterminate(run)) => run.push(*e),
                _ => out.push(Segment::Indeterminate(vec![*e])),
            },
        }
    }
    out
}

struct PendingJob {
    id: usize,
    from: VertexId,
    to: VertexId,
    job: MmpJob,
}

struct Finished {
    id: usize,
    from: VertexId,
    to: VertexId,
    status: MmpStatus,
    iterations: usize,
    samples: Vec<TraceSample>,
}

struct Coordinator<'a> {
    problem: &'a PlanningProblem,
    cfg: &'a PlannerConfig,
    gp: PossibilityGraph,
    gm: MotionGraph,
    rng: ChaCha8Rng,
    clock: Clock,
    /// Work done by lanes that would have run side by side, subtracted from
    /// the sequential work clock.
    overlap_s: f64,
    gait_done: BTreeSet<(VertexId, VertexId)>,
    guides: BTreeMap<usize, Guide>,
    events: Vec<RunEvent>,
    stats: PlanStats,
    traces: Vec<JobTrace>,
    x_start: RobotState,
    x_goal: RobotState,
}

type Found = (StateTrajectory, Vec<SubPlanner>);

impl<'a> Coordinator<'a> {
    fn new(problem: &'a PlanningProblem, cfg: &'a PlannerConfig, gp: PossibilityGraph) -> Self {
        let x_start = problem.start_state();
        let x_goal = problem.goal_state();
        Self {
            problem,
            cfg,
            gp,
            gm: MotionGraph::new(&[x_start], &[x_goal]),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            clock: Clock::start(cfg.clock, cfg.cost_model),
            overlap_s: 0.0,
            gait_done: BTreeSet::new(),
            guides: BTreeMap::new(),
            events: Vec::new(),
            stats: PlanStats::default(),
            traces: Vec::new(),
            x_start,
            x_goal,
        }
    }

    fn now(&self) -> f64 {
        self.clock.elapsed_s() - self.overlap_s
    }

    fn event(&mut self, kind: EventKind) {
        let at_s = self.now();
        self.events.push(RunEvent { at_s, kind });
    }

    fn timed_out(&mut self) -> Option<PlanError> {
        let t = self.now();
        if t >= self.cfg.timeout_s {
            self.stats.elapsed_s = self.cfg.timeout_s;
            self.event(EventKind::Timeout);
            Some(PlanError::Timeout(self.cfg.timeout_s))
        } else {
            None
        }
    }

    fn check_solution(&mut self) -> Option<Result<Found, PlanError>> {
        let path = extract_solution(&self.gm)?;
        if let Some(err) = self.timed_out() {
            return Some(Err(err));
        }
        self.stats.elapsed_s = self.now();
        self.event(EventKind::SolutionFound);
        let segments = path.edges.iter().map(|&e| self.gm.edges[e].planner).collect();
        Some(Ok((path.trajectory, segments)))
    }

    fn grow_batch(&mut self) {
        let p = self.problem;
        for _ in 0..self.cfg.grow_batch {
            self.gp
                .grow(&p.world, &p.spec, &p.bounds, &self.cfg.grow, &mut self.rng);
            self.stats.grow_iterations += 1;
        }
    }

    fn boundary_states(&self, v: VertexId) -> Vec<RobotState> {
        let mut out = Vec::new();
        if self.gp.start_ids().contains(&v) {
            out.push(self.x_start);
        }
        if self.gp.goal_ids().contains(&v) {
            out.push(self.x_goal);
        }
        out
    }

    /// Junction state at the start (or end) of an indeterminate run.
    fn junction_state(&mut self, v: VertexId, run: &[PossibilityEdge], at_start: bool) -> Option<RobotState> {
        let p = self.problem;
        let boundary = self.boundary_states(v);
        let span = if at_start {
            self.gp.span(&run[0])
        } else {
            self.gp.span(run.last().unwrap())
        };
        if !boundary.is_empty() {
            let j = if at_start {
                Junction::Start(&boundary, &span)
            } else {
                Junction::Goal(&span, &boundary)
            };
            return phi_m(j, self.cfg.junction_states, &p.world, &p.spec, &mut self.rng)
                .into_iter()
                .next();
        }
        // the neighbor piece is a possible edge or a promoted motion, both of
        // which meet the run at the nominal stance
        let pose = self.gp.pose(v);
        let neighbor = EdgeSpan {
            from: pose,
            to: pose,
            label: PossibilityLabel::Possible,
        };
        let j = if at_start {
            Junction::Between(&neighbor, &span)
        } else {
            Junction::Between(&span, &neighbor)
        };
        phi_m(j, self.cfg.junction_states, &p.world, &p.spec, &mut self.rng)
            .into_iter()
            .next()
    }

    /// Handles one route. Solves gait segments, removes the edges of every
    /// dispatched indeterminate run and returns the new jobs. The flag is
    /// `true` if the possibility graph changed.
    fn process_route(&mut self, route: &GuideRoute, capacity: usize) -> Result<(Vec<PendingJob>, bool), PlanError> {
        self.stats.routes_found += 1;
        let indeterminate = route
            .edges
            .iter()
            .filter(|e| e.label == PossibilityLabel::Indeterminate)
            .count();
        self.event(EventKind::RouteFound {
            cost: route.cost,
            edges: route.edges.len(),
            indeterminate,
        });
        let p = self.problem;
        let mut jobs = Vec::new();
        let mut changed = false;
        for seg in split_route(route) {
            match seg {
                Segment::Promoted => {}
                Segment::Gait(e) => {
                    let key = if e.from <= e.to { (e.from, e.to) } else { (e.to, e.from) };
                    if self.gait_done.contains(&key) {
                        continue;
                    }
                    let span = self.gp.span(&e);
                    let x0 = nominal_stance(&span.from, &p.spec);
                    let xf = nominal_stance(&span.to, &p.spec);
                    let (planner, traj) =
                        omega_m(&x0, &span, &xf, &p.bounds, &self.cfg.mmp, &p.world, &p.spec)?;
                    self.gm.insert(&traj, planner);
                    self.gait_done.insert(key);
                    self.event(EventKind::SegmentSolved {
                        planner,
                        from: e.from,
                        to: e.to,
                        states: traj.len(),
                    });
                }
                Segment::Indeterminate(run) => {
                    if jobs.len() >= capacity {
                        continue;
                    }
                    let from = run[0].from;
                    let to = run.last().unwrap().to;
                    let x0 = self.junction_state(from, &run, true);
                    let xf = self.junction_state(to, &run, false);
                    for e in &run {
                        self.gp
                            .remove_edge(e.from, e.to)
                            .expect("route edges are stored");
                        self.event(EventKind::EdgeDeleted {
                            from: e.from,
                            to: e.to,
                        });
                    }
                    changed = true;
                    let (Some(x0), Some(xf)) = (x0, xf) else {
                        continue;
                    };
                    let mut poses = vec![self.gp.pose(from)];
                    poses.extend(run.iter().map(|e| self.gp.pose(e.to)));
                    let guide = Guide::new(poses).expect("non-empty");
                    let cfg = MmpConfig {
                        flavor: Flavor::Guided,
                        seed: self.rng.gen(),
                        ..self.cfg.mmp
                    };
                    let job = MmpJob::new(x0, xf, Some(guide.clone()), p.bounds, cfg)
                        .map_err(|e| PlanError::Contract(e.to_string()))?;
                    let id = self.stats.mmp_jobs;
                    self.stats.mmp_jobs += 1;
                    self.guides.insert(id, guide);
                    jobs.push(PendingJob { id, from, to, job });
                }
            }
        }
        Ok((jobs, changed))
    }

    fn finish(&mut self, f: Finished) {
        let solved = matches!(f.status, MmpStatus::Solved(_));
        self.traces.push(JobTrace {
            from: f.from,
            to: f.to,
            guide: self.guides.remove(&f.id),
            samples: f.samples,
            solved,
        });
        match f.status {
            MmpStatus::Solved(traj) => {
                self.gm.insert(&traj, SubPlanner::Mmp);
                self.gp
                    .promote(f.from, f.to, traj.states(), self.cfg.promote_spacing);
                self.event(EventKind::SegmentSolved {
                    planner: SubPlanner::Mmp,
                    from: f.from,
                    to: f.to,
                    states: traj.len(),
                });
            }
            _ => {
                self.stats.mmp_failures += 1;
                self.event(EventKind::SegmentFailed {
                    from: f.from,
                    to: f.to,
                    iterations: f.iterations,
                });
            }
        }
    }

    /// Requests routes until none is left or no job slot is free.
    fn route_round(&mut self, active: usize) -> Result<Vec<PendingJob>, PlanError> {
        let mut launched = Vec::new();
        loop {
            let capacity = self.cfg.max_concurrent.saturating_sub(active + launched.len());
            let Some(route) = self
                .gp
                .find_guide_route(self.cfg.lambda, self.cfg.grow.yaw_weight)
            else {
                break;
            };
            let (jobs, changed) = self.process_route(&route, capacity)?;
            launched.extend(jobs);
            if !changed {
                break;
            }
        }
        Ok(launched)
    }

    fn run_sequential(&mut self) -> Result<Found, PlanError> {
        if let Some(found) = self.check_solution() {
            return found;
        }
        let p = self.problem;
        let mut active: Vec<PendingJob> = Vec::new();
        loop {
            if let Some(err) = self.timed_out() {
                return Err(err);
            }
            let round_start = self.clock.elapsed_s();
            let round_events = self.events.len();
            self.grow_batch();
            let jobs = self.route_round(active.len())?;
            active.extend(jobs);
            if let Some(found) = self.check_solution() {
                return found;
            }
            // On the work clock a round lasts as long as its busiest lane:
            // the coordinator or one job slice.
            let (mut slice_sum, mut slice_max) = (0.0f64, 0.0f64);
            let mut still = Vec::new();
            for mut pj in active.drain(..) {
                let slice_start = self.clock.elapsed_s();
                let status = pj.job.step(self.cfg.mmp_slice, &p.world, &p.spec).clone();
                let spent = self.clock.elapsed_s() - slice_start;
                slice_sum += spent;
                slice_max = slice_max.max(spent);
                if status == MmpStatus::Running {
                    still.push(pj);
                } else {
                    let f = Finished {
                        id: pj.id,
                        from: pj.from,
                        to: pj.to,
                        status,
                        iterations: pj.job.iterations(),
                        samples: pj.job.trace().to_vec(),
                    };
                    self.finish(f);
                }
            }
            active = still;
            if matches!(self.clock, Clock::Work { .. }) {
                let total = self.clock.elapsed_s() - round_start;
                let coordinator = total - slice_sum;
                let lasted = coordinator.max(slice_max);
                let begin = round_start - self.overlap_s;
                self.overlap_s += total - lasted;
                // squeeze this round's stamps into its shortened span
                if total > 0.0 {
                    for e in &mut self.events[round_events..] {
                        e.at_s = begin + (e.at_s - begin) * lasted / total;
                    }
                }
            }
            if let Some(found) = self.check_solution() {
                return found;
            }
        }
    }

    fn run_parallel(&mut self) -> Result<Found, PlanError> {
        if let Some(found) = self.check_solution() {
            return found;
        }
        let p = self.problem;
        let slice = self.cfg.mmp_slice;
        let cancel = AtomicBool::new(false);
        let (tx, rx) = mpsc::channel::<Finished>();
        std::thread::scope(|scope| {
            let mut active = 0usize;
            let result = loop {
                if let Some(err) = self.timed_out() {
                    break Err(err);
                }
                self.grow_batch();
                let jobs = match self.route_round(active) {
                    Ok(j) => j,
                    Err(e) => break Err(e),
                };
                for mut pj in jobs {
                    active += 1;
                    let tx = tx.clone();
                    let cancel = &cancel;
                    scope.spawn(move || {
                        while !cancel.load(AtomicOrdering::Relaxed) {
                            if *pj.job.step(slice, &p.world, &p.spec) != MmpStatus::Running {
                                break;
                            }
                        }
                        let _ = tx.send(Finished {
                            id: pj.id,
                            from: pj.from,
                            to: pj.to,
                            status: pj.job.status().clone(),
                            iterations: pj.job.iterations(),
                            samples: pj.job.trace().to_vec(),
                        });
                    });
                }
                while let Ok(f) = rx.try_recv() {
                    active -= 1;
                    self.finish(f);
                }
                if let Some(found) = self.check_solution() {
                    break found;
                }
            };
            cancel.store(true, AtomicOrdering::Relaxed);
            result
        })
    }

    fn run_uninformed(&mut self) -> Result<Found, PlanError> {
        let p = self.problem;
        let cfg = MmpConfig {
            flavor: Flavor::Uninformed,
            seed: self.rng.gen(),
            max_iterations: usize::MAX,
            ..self.cfg.mmp
        };
        let mut job = MmpJob::new(self.x_start, self.x_goal, None, p.bounds, cfg)
            .map_err(|e| PlanError::Contract(e.to_string()))?;
        self.stats.mmp_jobs = 1;
        loop {
            if let Some(err) = self.timed_out() {
                self.stats.mmp_failures = 1;
                self.traces.push(JobTrace {
                    from: VertexId(0),
                    to: VertexId(1),
                    guide: None,
                    samples: job.trace().to_vec(),
                    solved: false,
                });
                return Err(err);
            }
            if let MmpStatus::Solved(traj) = job.step(self.cfg.mmp_slice, &p.world, &p.spec).clone() {
                self.traces.push(JobTrace {
                    from: VertexId(0),
                    to: VertexId(1),
                    guide: None,
                    samples: job.trace().to_vec(),
                    solved: true,
                });
                self.gm.insert(&traj, SubPlanner::Mmp);
                if let Some(found) = self.check_solution() {
                    return found;
                }
            }
        }
    }
}

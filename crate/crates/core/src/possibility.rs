//! The possibility graph over root poses.
//!
//! Edges are labeled by two cheap checks. The necessary check sweeps the
//! minimal body volume and asks for a reachable foothold at each end; if it
//! fails the edge is impossible and never stored. The sufficient check sweeps
//! the bounding volume at nominal height and asks every gait foothold to be
//! supported; if it passes the edge is possible, otherwise indeterminate.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::f64::consts::PI;

use rand::Rng;
use thiserror::Error;

use crate::gait::gait_footholds;
use crate::geometry::{angle_diff, sweep_collides, Bounds2, Pose4, World};
use crate::robot::{foot_supported, RobotSpec, RobotState};

/// Label carried by a stored edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PossibilityLabel {
    Possible,
    Indeterminate,
}

/// Result of labeling a candidate edge. `Impossible` edges are never stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Impossible,
    Indeterminate,
    Possible,
}

impl Verdict {
    pub fn label(self) -> Option<PossibilityLabel> {
        match self {
            Verdict::Impossible => None,
            Verdict::Indeterminate => Some(PossibilityLabel::Indeterminate),
            Verdict::Possible => Some(PossibilityLabel::Possible),
        }
    }
}

/// An edge resolved to its endpoint poses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSpan {
    pub from: Pose4,
    pub to: Pose4,
    pub label: PossibilityLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

impl VertexId {
    fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Where a stored edge came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeOrigin {
    /// Added by the randomized grower; label equals `label_edge` of its ends.
    Grown,
    /// Projection of a verified motion; `Possible` by construction.
    Promoted,
}

/// A directed view of a stored edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PossibilityEdge {
    pub from: VertexId,
    pub to: VertexId,
    pub label: PossibilityLabel,
    pub origin: EdgeOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub pose: Pose4,
    /// Interior vertex of a promoted chain; never extended by the grower.
    pub promoted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct EdgeRecord {
    label: PossibilityLabel,
    origin: EdgeOrigin,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("edge {0:?} -> {1:?} is not in the graph")]
    MissingEdge(VertexId, VertexId),
    #[error("only indeterminate edges may be deleted")]
    DeletePossible,
    #[error("route index {0} out of range")]
    BadIndex(usize),
    #[error("unknown vertex {0:?}")]
    UnknownVertex(VertexId),
}

/// Ordered edge chain from a start vertex to a goal vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct GuideRoute {
    pub edges: Vec<PossibilityEdge>,
    pub cost: f64,
}

impl GuideRoute {
    /// Chaining invariants against `g`.
    pub fn is_valid(&self, g: &PossibilityGraph) -> bool {
        let (Some(first), Some(last)) = (self.edges.first(), self.edges.last()) else {
            return false;
        };
        g.start_ids.contains(&first.from)
            && g.goal_ids.contains(&last.to)
            && self.edges.windows(2).all(|w| w[0].to == w[1].from)
            && self
                .edges
                .iter()
                .all(|e| e.from != e.to && g.edge(e.from, e.to).map(|s| s.label) == Some(e.label))
    }
}

/// Grower parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowParams {
    /// Extension step, in the pose metric.
    pub step: f64,
    pub goal_bias: f64,
    /// Probability of rejecting an indeterminate extension when a possible
    /// one exists among the candidate directions.
    pub soft_weight: f64,
    pub soft_candidates: usize,
    /// New vertices also try to link to existing ones this close.
    pub connect_radius: f64,
    pub max_connections: usize,
    /// Meters per radian of yaw in the pose metric.
    pub yaw_weight: f64,
}

impl Default for GrowParams {
    fn default() -> Self {
        Self {
            step: 0.4,
            goal_bias: 0.1,
            soft_weight: 0.7,
            soft_candidates: 4,
            connect_radius: 0.6,
            max_connections: 4,
            yaw_weight: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowOutcome {
    Extended {
        vertex: VertexId,
        label: PossibilityLabel,
        links: usize,
    },
    LinkedGoal(VertexId),
    Rejected(Rejection),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    Degenerate,
    Impossible,
    SoftPreference,
    Duplicate,
}

/// Distance used for nearest-neighbor queries, steering and route cost.
pub fn pose_distance(a: &Pose4, b: &Pose4, yaw_weight: f64) -> f64 {
    a.position_distance(b) + yaw_weight * angle_diff(a.yaw, b.yaw).abs()
}

fn steer(from: &Pose4, to: &Pose4, step: f64, yaw_weight: f64) -> Pose4 {
    let d = pose_distance(from, to, yaw_weight);
    if d <= step {
        *to
    } else {
        from.interpolate(to, step / d)
    }
}

/// Sufficient conditions: the bounding volume at nominal height sweeps clear
/// and every foothold of the gait in either direction is on the floor.
pub fn check_sufficient(a: &Pose4, b: &Pose4, world: &World, spec: &RobotSpec) -> bool {
    let z = spec.nominal_root_z;
    gait_footholds(a, b, spec)
        .iter()
        .chain(gait_footholds(b, a, spec).iter())
        .all(|f| foot_supported(f, world, spec))
        && !sweep_collides(&spec.bounding_geom, &a.with_z(z), &b.with_z(z), spec.sweep_step, world)
}

/// Some floor lies within leg reach of the root. Any supported foothold
/// needs this, so a failure rules the pose out.
pub fn foothold_reachable(root: &Pose4, world: &World, spec: &RobotSpec) -> bool {
    world.floor_distance(&root.xy()) <= spec.leg_reach
}

/// Necessary conditions: the minimal volume sweeps clear and each endpoint has
/// a supported foothold within reach.
pub fn check_necessary(a: &Pose4, b: &Pose4, world: &World, spec: &RobotSpec) -> bool {
    foothold_reachable(a, world, spec)
        && foothold_reachable(b, world, spec)
        && !sweep_collides(&spec.minimal_geom, a, b, spec.sweep_step, world)
}

pub fn label_edge(a: &Pose4, b: &Pose4, world: &World, spec: &RobotSpec) -> Verdict {
    if !check_necessary(a, b, world, spec) {
        Verdict::Impossible
    } else if check_sufficient(a, b, world, spec) {
        Verdict::Possible
    } else {
        Verdict::Indeterminate
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    cost: f64,
    vertex: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, then on vertex id
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Vertices in the exploration space plus labeled, undirected-stored edges.
#[derive(Debug, Clone, PartialEq)]
pub struct PossibilityGraph {
    vertices: Vec<Vertex>,
    edges: BTreeMap<(u32, u32), EdgeRecord>,
    adjacency: Vec<BTreeSet<u32>>,
    start_ids: BTreeSet<VertexId>,
    goal_ids: BTreeSet<VertexId>,
}

fn key(a: VertexId, b: VertexId) -> (u32, u32) {
    if a.0 <= b.0 {
        (a.0, b.0)
    } else {
        (b.0, a.0)
    }
}

impl PossibilityGraph {
    pub fn new(starts: &[Pose4], goals: &[Pose4]) -> Self {
        let mut g = Self {
            vertices: Vec::new(),
            edges: BTreeMap::new(),
            adjacency: Vec::new(),
            start_ids: BTreeSet::new(),
            goal_ids: BTreeSet::new(),
        };
        for s in starts {
            let id = g.add_vertex(*s, false);
            g.start_ids.insert(id);
        }
        for p in goals {
            let id = g.add_vertex(*p, false);
            g.goal_ids.insert(id);
        }
        g
    }

    pub fn add_vertex(&mut self, pose: Pose4, promoted: bool) -> VertexId {
        let id = VertexId(self.vertices.len() as u32);
        self.vertices.push(Vertex { pose, promoted });
        self.adjacency.push(BTreeSet::new());
        id
    }

    /// Stores an edge. Rejects self-loops and replaces an existing label.
    pub fn add_edge(
        &mut self,
        a: VertexId,
        b: VertexId,
        label: PossibilityLabel,
        origin: EdgeOrigin,
    ) -> Result<(), GraphError> {
        for v in [a, b] {
            if v.idx() >= self.vertices.len() {
                return Err(GraphError::UnknownVertex(v));
            }
        }
        if a == b {
            return Err(GraphError::MissingEdge(a, b));
        }
        self.edges.insert(key(a, b), EdgeRecord { label, origin });
        self.adjacency[a.idx()].insert(b.0);
        self.adjacency[b.idx()].insert(a.0);
        Ok(())
    }

    pub fn remove_edge(&mut self, a: VertexId, b: VertexId) -> Result<(), GraphError> {
        self.edges
            .remove(&key(a, b))
            .ok_or(GraphError::MissingEdge(a, b))?;
        self.adjacency[a.idx()].remove(&b.0);
        self.adjacency[b.idx()].remove(&a.0);
        Ok(())
    }

    pub fn vertex(&self, id: VertexId) -> &Vertex {
        &self.vertices[id.idx()]
    }

    pub fn pose(&self, id: VertexId) -> Pose4 {
        self.vertices[id.idx()].pose
    }

    pub fn vertices(&self) -> impl Iterator<Item = (VertexId, &Vertex)> {
        self.vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (VertexId(i as u32), v))
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Stored edges, each once, oriented from lower to higher id.
    pub fn edges(&self) -> impl Iterator<Item = PossibilityEdge> + '_ {
        self.edges.iter().map(|(&(a, b), r)| PossibilityEdge {
            from: VertexId(a),
            to: VertexId(b),
            label: r.label,
            origin: r.origin,
        })
    }

    /// The stored edge between `a` and `b`, oriented `a -> b`.
    pub fn edge(&self, a: VertexId, b: VertexId) -> Option<PossibilityEdge> {
        self.edges.get(&key(a, b)).map(|r| PossibilityEdge {
            from: a,
            to: b,
            label: r.label,
            origin: r.origin,
        })
    }

    pub fn span(&self, e: &PossibilityEdge) -> EdgeSpan {
        EdgeSpan {
            from: self.pose(e.from),
            to: self.pose(e.to),
            label: e.label,
        }
    }

    pub fn start_ids(&self) -> &BTreeSet<VertexId> {
        &self.start_ids
    }

    pub fn goal_ids(&self) -> &BTreeSet<VertexId> {
        &self.goal_ids
    }

    fn nearest(&self, target: &Pose4, yaw_weight: f64) -> Option<VertexId> {
        self.vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.promoted)
            .map(|(i, v)| (i, pose_distance(&v.pose, target, yaw_weight)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| VertexId(i as u32))
    }

    fn sample_pose<R: Rng>(bounds: &Bounds2, spec: &RobotSpec, rng: &mut R) -> Pose4 {
        let (zmin, zmax) = spec.root_z_range;
        let x = rng.gen_range(bounds.min[0]..=bounds.max[0]);
        let y = rng.gen_range(bounds.min[1]..=bounds.max[1]);
        let z = rng.gen_range(zmin..=zmax);
        let yaw = rng.gen_range(-PI..=PI);
        Pose4::new(x, y, z, yaw)
    }

    /// One randomized hard/soft-constrained extension step.
    pub fn grow<R: Rng>(
        &mut self,
        world: &World,
        spec: &RobotSpec,
        bounds: &Bounds2,
        params: &GrowParams,
        rng: &mut R,
    ) -> GrowOutcome {
        let goal_target = if !self.goal_ids.is_empty() && rng.gen::<f64>() < params.goal_bias {
            let k = rng.gen_range(0..self.goal_ids.len());
            self.goal_ids.iter().nth(k).copied()
        } else {
            None
        };
        let target = match goal_target {
            Some(g) => self.pose(g),
            None => Self::sample_pose(bounds, spec, rng),
        };
        let Some(near) = self.nearest(&target, params.yaw_weight) else {
            return GrowOutcome::Rejected(Rejection::Degenerate);
        };
        let near_pose = self.pose(near);

        if let Some(goal) = goal_target {
            if goal != near && pose_distance(&near_pose, &target, params.yaw_weight) <= params.step {
                if self.edge(near, goal).is_some() {
                    return GrowOutcome::Rejected(Rejection::Duplicate);
                }
                return match label_edge(&near_pose, &target, world, spec).label() {
                    Some(label) => {
                        self.add_edge(near, goal, label, EdgeOrigin::Grown)
                            .expect("known vertices");
                        GrowOutcome::LinkedGoal(near)
                    }
                    None => GrowOutcome::Rejected(Rejection::Impossible),
                };
            }
        }

        let q = steer(&near_pose, &target, params.step, params.yaw_weight);
        if pose_distance(&near_pose, &q, params.yaw_weight) < 1e-6 {
            return GrowOutcome::Rejected(Rejection::Degenerate);
        }
        let label = match label_edge(&near_pose, &q, world, spec).label() {
            None => return GrowOutcome::Rejected(Rejection::Impossible),
            Some(l) => l,
        };
        if label == PossibilityLabel::Indeterminate && rng.gen::<f64>() < params.soft_weight {
            for _ in 0..params.soft_candidates {
                let t = Self::sample_pose(bounds, spec, rng);
                let alt = steer(&near_pose, &t, params.step, params.yaw_weight);
                if label_edge(&near_pose, &alt, world, spec) == Verdict::Possible {
                    return GrowOutcome::Rejected(Rejection::SoftPreference);
                }
            }
        }

        let v = self.add_vertex(q, false);
        self.add_edge(near, v, label, EdgeOrigin::Grown)
            .expect("known vertices");

        let mut neighbors: Vec<(f64, VertexId)> = self
            .vertices()
            .filter(|(id, vx)| *id != v && *id != near && !vx.promoted)
            .map(|(id, vx)| (pose_distance(&vx.pose, &q, params.yaw_weight), id))
            .filter(|(d, _)| *d <= params.connect_radius)
            .collect();
        neighbors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut links = 0;
        for (_, n) in neighbors.into_iter().take(params.max_connections) {
            if let Some(l) = label_edge(&q, &self.pose(n), world, spec).label() {
                self.add_edge(v, n, l, EdgeOrigin::Grown)
                    .expect("known vertices");
                links += 1;
            }
        }
        GrowOutcome::Extended {
            vertex: v,
            label,
            links,
        }
    }

    /// Cheapest start-to-goal route with indeterminate edges costing
    /// `lambda` times their length.
    pub fn find_guide_route(&self, lambda: f64, yaw_weight: f64) -> Option<GuideRoute> {
        assert!(lambda >= 1.0, "indeterminate penalty must be at least 1");
        let n = self.vertices.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev: Vec<Option<u32>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        for s in &self.start_ids {
            dist[s.idx()] = 0.0;
            heap.push(HeapEntry {
                cost: 0.0,
                vertex: s.0,
            });
        }
        let mut reached = None;
        while let Some(HeapEntry { cost, vertex }) = heap.pop() {
            if cost > dist[vertex as usize] {
                continue;
            }
            if self.goal_ids.contains(&VertexId(vertex)) {
                reached = Some(vertex);
                break;
            }
            let pose = self.vertices[vertex as usize].pose;
            for &nb in &self.adjacency[vertex as usize] {
                let rec = &self.edges[&key(VertexId(vertex), VertexId(nb))];
                let penalty = match rec.label {
                    PossibilityLabel::Possible => 1.0,
                    PossibilityLabel::Indeterminate => lambda,
                };
                let c = cost
                    + penalty * pose_distance(&pose, &self.vertices[nb as usize].pose, yaw_weight);
                if c < dist[nb as usize] {
                    dist[nb as usize] = c;
                    prev[nb as usize] = Some(vertex);
                    heap.push(HeapEntry { cost: c, vertex: nb });
                }
            }
        }
        let goal = reached?;
        let mut chain = vec![goal];
        while let Some(p) = prev[*chain.last().unwrap() as usize] {
            chain.push(p);
        }
        chain.reverse();
        let edges = chain
            .windows(2)
            .map(|w| {
                self.edge(VertexId(w[0]), VertexId(w[1]))
                    .expect("route follows stored edges")
            })
            .collect::<Vec<_>>();
        if edges.is_empty() {
            // a vertex that is both start and goal; nothing to route
            return None;
        }
        Some(GuideRoute {
            edges,
            cost: dist[goal as usize],
        })
    }

    /// Removes the `which`-th route edge, which must be indeterminate.
    pub fn delete_indeterminate(&mut self, route: &GuideRoute, which: usize) -> Result<(), GraphError> {
        let e = route.edges.get(which).ok_or(GraphError::BadIndex(which))?;
        let stored = self
            .edge(e.from, e.to)
            .ok_or(GraphError::MissingEdge(e.from, e.to))?;
        if stored.label != PossibilityLabel::Indeterminate {
            return Err(GraphError::DeletePossible);
        }
        self.remove_edge(e.from, e.to)
    }

    /// Inserts the projection of a verified state path running from vertex
    /// `from` to vertex `to` as a chain of possible edges. Interior vertices
    /// are kept at least `spacing` apart and are marked promoted.
    pub fn promote(
        &mut self,
        from: VertexId,
        to: VertexId,
        states: &[RobotState],
        spacing: f64,
    ) -> Vec<VertexId> {
        if states.is_empty() || from == to {
            return Vec::new();
        }
        let mut chain = vec![from];
        let mut last = self.pose(from);
        let end = self.pose(to);
        let interior = states.len().saturating_sub(1);
        for s in states.iter().take(interior).skip(1) {
            let p = s.root;
            if p.position_distance(&last) >= spacing && p.position_distance(&end) >= spacing {
                let id = self.add_vertex(p, true);
                chain.push(id);
                last = p;
            }
        }
        chain.push(to);
        for w in chain.windows(2) {
            self.add_edge(w[0], w[1], PossibilityLabel::Possible, EdgeOrigin::Promoted)
                .expect("known vertices");
        }
        chain
    }
}

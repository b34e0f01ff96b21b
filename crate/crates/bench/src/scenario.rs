//! Scenario files.
//!
//! A scenario is a TOML document. Lengths are meters, angles radians.
//!
//! ```toml
//! name = "limbo"
//! timeout_s = 120.0            # optional per-scenario default
//! bounds = { min = [-4.0, -4.0], max = [4.0, 4.0] }
//! start = { x = -3.0, y = 0.0, yaw = 0.0 }
//! goal = { x = 3.0, y = 0.0 }  # yaw defaults to 0
//!
//! [robot]                      # optional; any subset of fields
//! leg_reach = 0.5
//!
//! [[floor]]                    # convex walkable tiles, either winding
//! vertices = [[-4.0, -4.0], [4.0, -4.0], [4.0, 4.0], [-4.0, 4.0]]
//!
//! [[obstacle]]                 # convex footprint extruded over z
//! footprint = [[-0.05, -1.0], [0.05, -1.0], [0.05, 1.0], [-0.05, 1.0]]
//! z = [1.0, 1.1]
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rpg_core::geometry::{BoxSet, Bounds2, ConvexPolygon2, ObstaclePrism, Pose4, World};
use rpg_core::orchestrator::PlanningProblem;
use rpg_core::robot::{nominal_stance, state_feasible, RobotSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}\n  | {text}")]
    Parse {
        line: usize,
        column: usize,
        text: String,
        message: String,
    },
    #[error("invalid scenario:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub world: World,
    pub robot: RobotSpec,
    pub start: Pose4,
    pub goal: Pose4,
    pub bounds: Bounds2,
    pub timeout_s: Option<f64>,
}

impl Scenario {
    pub fn problem(&self) -> PlanningProblem {
        PlanningProblem {
            world: self.world.clone(),
            spec: self.robot.clone(),
            start: self.start,
            goal: self.goal,
            bounds: self.bounds,
        }
    }

    /// Elevated obstacles: those not resting on the floor.
    pub fn elevated_obstacles(&self) -> usize {
        self.world
            .obstacles()
            .iter()
            .filter(|o| o.z_interval().0 > 0.0)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsFile {
    min: [f64; 2],
    max: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseFile {
    x: f64,
    y: f64,
    #[serde(default)]
    yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RobotFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    bounding_geom: Option<BoxSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    minimal_geom: Option<BoxSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    foot_polygon: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nominal_stance_half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nominal_root_z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    root_z_range: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    leg_reach: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_step_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stride: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    torso_half_height: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    foot_height: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_turn: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FloorFile {
    vertices: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    footprint: Vec<[f64; 2]>,
    z: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timeout_s: Option<f64>,
    bounds: BoundsFile,
    start: PoseFile,
    goal: PoseFile,
    #[serde(default)]
    robot: RobotFile,
    #[serde(default)]
    floor: Vec<FloorFile>,
    #[serde(default)]
    obstacle: Vec<ObstacleFile>,
}

fn polygon(points: &[[f64; 2]]) -> Result<ConvexPolygon2, String> {
    ConvexPolygon2::from_xy(points).map_err(|e| e.to_string())
}

fn robot_from(f: &RobotFile, failed: &mut Vec<String>) -> RobotSpec {
    let mut r = RobotSpec::default();
    if let Some(b) = &f.bounding_geom {
        r.bounding_geom = b.clone();
    }
    if let Some(b) = &f.minimal_geom {
        r.minimal_geom = b.clone();
    }
    if let Some(p) = &f.foot_polygon {
        match polygon(p) {
            Ok(p) => r.foot_polygon = p,
            Err(e) => failed.push(format!("robot.foot_polygon: {e}")),
        }
    }
    macro_rules! take {
        ($($field:ident),*) => {
            $(if let Some(v) = f.$field { r.$field = v; })*
        };
    }
    take!(
        nominal_stance_half_width,
        nominal_root_z,
        leg_reach,
        max_step_length,
        stride,
        torso_half_height,
        foot_height,
        max_turn,
        sweep_step
    );
    if let Some([lo, hi]) = f.root_z_range {
        r.root_z_range = (lo, hi);
    }
    r
}

fn robot_to(r: &RobotSpec) -> RobotFile {
    RobotFile {
        bounding_geom: Some(r.bounding_geom.clone()),
        minimal_geom: Some(r.minimal_geom.clone()),
        foot_polygon: Some(r.foot_polygon.vertices().iter().map(|p| [p.x, p.y]).collect()),
        nominal_stance_half_width: Some(r.nominal_stance_half_width),
        nominal_root_z: Some(r.nominal_root_z),
        root_z_range: Some([r.root_z_range.0, r.root_z_range.1]),
        leg_reach: Some(r.leg_reach),
        max_step_length: Some(r.max_step_length),
        stride: Some(r.stride),
        torso_half_height: Some(r.torso_half_height),
        foot_height: Some(r.foot_height),
        max_turn: Some(r.max_turn),
        sweep_step: Some(r.sweep_step),
    }
}

fn parse_error(text: &str, err: toml::de::Error) -> ScenarioError {
    let (line, column) = match err.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            (line, column)
        }
        None => (0, 0),
    };
    let src = text.lines().nth(line.saturating_sub(1)).unwrap_or("").to_string();
    ScenarioError::Parse {
        line,
        column,
        text: src,
        message: err.message().to_string(),
    }
}

/// Parses and checks a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| parse_error(text, e))?;
    let mut failed = Vec::new();

    let robot = robot_from(&file.robot, &mut failed);
    if let Err(e) = robot.validate() {
        failed.push(format!("robot: {e}"));
    }

    if file.floor.is_empty() {
        failed.push("at least one [[floor]] tile is required".into());
    }
    let mut floor = Vec::new();
    for (i, f) in file.floor.iter().enumerate() {
        match polygon(&f.vertices) {
            Ok(p) => floor.push(p),
            Err(e) => failed.push(format!("floor[{i}]: {e}")),
        }
    }
    let mut obstacles = Vec::new();
    for (i, o) in file.obstacle.iter().enumerate() {
        let label = o.name.clone().unwrap_or_else(|| format!("obstacle[{i}]"));
        let [z_lo, z_hi] = o.z;
        if z_lo < 0.0 {
            failed.push(format!("{label}: z_lo {z_lo} is below the floor"));
        }
        match polygon(&o.footprint).and_then(|fp| ObstaclePrism::new(fp, z_lo, z_hi).map_err(|e| e.to_string())) {
            Ok(p) => obstacles.push(p),
            Err(e) => failed.push(format!("{label}: {e}")),
        }
    }

    let bounds = Bounds2::new(file.bounds.min, file.bounds.max);
    if !(bounds.min[0] < bounds.max[0] && bounds.min[1] < bounds.max[1]) {
        failed.push("bounds: min must be below max on both axes".into());
    }
    if let Some(t) = file.timeout_s {
        if !(t > 0.0) {
            failed.push(format!("timeout_s {t} must be positive"));
        }
    }
    let start = Pose4::new(file.start.x, file.start.y, robot.nominal_root_z, file.start.yaw);
    let goal = Pose4::new(file.goal.x, file.goal.y, robot.nominal_root_z, file.goal.yaw);
    for (name, p) in [("start", &start), ("goal", &goal)] {
        if !bounds.contains(p.x, p.y) {
            failed.push(format!("{name} ({}, {}) lies outside bounds", p.x, p.y));
        }
    }
    if !failed.is_empty() {
        return Err(ScenarioError::Invalid(failed));
    }

    let world = World::new(floor, obstacles).map_err(|e| ScenarioError::Invalid(vec![e.to_string()]))?;
    for (name, p) in [("start", &start), ("goal", &goal)] {
        if !state_feasible(&nominal_stance(p, &robot), &world, &robot) {
            failed.push(format!("nominal stance at {name} is not feasible"));
        }
    }
    if !failed.is_empty() {
        return Err(ScenarioError::Invalid(failed));
    }
    Ok(Scenario {
        name: file.name,
        world,
        robot,
        start,
        goal,
        bounds,
        timeout_s: file.timeout_s,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text)
}

/// Serializes a scenario; the output parses back to an identical scenario.
pub fn emit_scenario(s: &Scenario) -> String {
    let pts = |p: &ConvexPolygon2| p.vertices().iter().map(|v| [v.x, v.y]).collect::<Vec<_>>();
    let file = ScenarioFile {
        name: s.name.clone(),
        timeout_s: s.timeout_s,
        bounds: BoundsFile {
            min: s.bounds.min,
            max: s.bounds.max,
        },
        start: PoseFile {
            x: s.start.x,
            y: s.start.y,
            yaw: s.start.yaw,
        },
        goal: PoseFile {
            x: s.goal.x,
            y: s.goal.y,
            yaw: s.goal.yaw,
        },
        robot: robot_to(&s.robot),
        floor: s.world.floor().iter().map(|p| FloorFile { vertices: pts(p) }).collect(),
        obstacle: s
            .world
            .obstacles()
            .iter()
            .map(|o| {
                let (lo, hi) = o.z_interval();
                ObstacleFile {
                    name: None,
                    footprint: pts(o.footprint()),
                    z: [lo, hi],
                }
            })
            .collect(),
    };
    let mut out = String::new();
    let _ = writeln!(out, "# generated scenario: {}", s.name);
    out.push_str(&toml::to_string(&file).expect("scenario serializes"));
    out
}

/// Directory holding the bundled scenario corpus.
pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub const CORPUS: [&str; 7] = [
    "limbo",
    "four_routes",
    "four_routes_west_blocked",
    "four_routes_east_blocked",
    "four_routes_no_bars",
    "open_floor",
    "walled",
];

/// Resolves a bundled scenario name or a file path.
pub fn resolve(name_or_path: &str) -> PathBuf {
    let p = PathBuf::from(name_or_path);
    if p.exists() {
        return p;
    }
    let bundled = corpus_dir().join(format!("{name_or_path}.scenario"));
    if bundled.exists() {
        bundled
    } else {
        p
    }
}

pub fn load_bundled(name: &str) -> Result<Scenario, ScenarioError> {
    load_scenario(&corpus_dir().join(format!("{name}.scenario")))
}

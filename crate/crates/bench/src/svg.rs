//! SVG renders of worlds, possibility graphs, solutions and sample traces.
//!
//! Possible edges are green, indeterminate edges yellow, obstacles gray. Left
//! feet are blue, right feet magenta.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use rpg_core::gait::StateTrajectory;
use rpg_core::geometry::{Bounds2, World};
use rpg_core::orchestrator::JobTrace;
use rpg_core::possibility::{PossibilityGraph, PossibilityLabel};
use rpg_core::robot::{FootPlacement, RobotSpec, Side};

const STYLE: &str = "
.floor { fill: #f4f4f4; stroke: #bbbbbb; stroke-width: 1 }
.obstacle { fill: #808080; fill-opacity: 0.75; stroke: #555555; stroke-width: 1 }
.obstacle.elevated { fill-opacity: 0.35; stroke-dasharray: 4 2 }
.edge { stroke-width: 1.5; fill: none }
.edge.possible { stroke: #2ca02c }
.edge.indeterminate { stroke: #e6c200 }
.vertex { fill: #333333 }
.endpoint { fill: none; stroke: #000000; stroke-width: 2 }
.root-path { fill: none; stroke: #1f77b4; stroke-width: 2 }
.foot { stroke: #222222; stroke-width: 0.5 }
.foot.left { fill: #1f4fff }
.foot.right { fill: #d62fd6 }
.guide { fill: none; stroke: #ff7f0e; stroke-width: 2; stroke-dasharray: 6 3 }
.sample.accepted { fill: #2ca02c }
.sample.rejected { fill: #d62728; fill-opacity: 0.5 }
";

/// Something drawn on top of the world.
#[derive(Debug, Clone, Copy)]
pub enum Layer<'a> {
    Graph(&'a PossibilityGraph),
    Solution(&'a StateTrajectory),
    Trace(&'a [JobTrace]),
}

struct Canvas {
    min: [f64; 2],
    max_y: f64,
    scale: f64,
    margin: f64,
    width: f64,
    height: f64,
}

impl Canvas {
    fn new(b: &Bounds2) -> Self {
        let span = b.width().max(b.height()).max(1e-9);
        let scale = 800.0 / span;
        let margin = 20.0;
        Self {
            min: b.min,
            max_y: b.max[1],
            scale,
            margin,
            width: b.width() * scale + 2.0 * margin,
            height: b.height() * scale + 2.0 * margin,
        }
    }

    fn x(&self, x: f64) -> f64 {
        (x - self.min[0]) * self.scale + self.margin
    }

    fn y(&self, y: f64) -> f64 {
        (self.max_y - y) * self.scale + self.margin
    }

    fn points(&self, pts: impl IntoIterator<Item = (f64, f64)>) -> String {
        pts.into_iter()
            .map(|(x, y)| format!("{:.2},{:.2}", self.x(x), self.y(y)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn foot_polygon(c: &Canvas, f: &FootPlacement, spec: &RobotSpec, out: &mut String) {
    let side = match f.side {
        Side::Left => "left",
        Side::Right => "right",
    };
    let pts = spec.foot_polygon.placed(&f.pose());
    let _ = writeln!(
        out,
        r#"<polygon class="foot {side}" points="{}"/>"#,
        c.points(pts.iter().map(|p| (p.x, p.y)))
    );
}

/// Renders `layers` over the world. The drawing covers the union of `bounds`
/// and the floor.
pub fn render_svg(world: &World, bounds: &Bounds2, spec: &RobotSpec, layers: &[Layer<'_>]) -> String {
    let fb = world.floor_bounds();
    let view = Bounds2::new(
        [bounds.min[0].min(fb.min[0]), bounds.min[1].min(fb.min[1])],
        [bounds.max[0].max(fb.max[0]), bounds.max[1].max(fb.max[1])],
    );
    let c = Canvas::new(&view);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.2} {:.2}">"#,
        c.width, c.height, c.width, c.height
    );
    let _ = writeln!(out, "<style>{STYLE}</style>");
    out.push_str("<g id=\"world\">\n");
    for p in world.floor() {
        let _ = writeln!(
            out,
            r#"<polygon class="floor" points="{}"/>"#,
            c.points(p.vertices().iter().map(|v| (v.x, v.y)))
        );
    }
    for o in world.obstacles() {
        let (lo, hi) = o.z_interval();
        let class = if lo > 0.0 { "obstacle elevated" } else { "obstacle" };
        let _ = writeln!(
            out,
            r#"<polygon class="{class}" points="{}"><title>z {lo} to {hi}</title></polygon>"#,
            c.points(o.footprint().vertices().iter().map(|v| (v.x, v.y)))
        );
    }
    out.push_str("</g>\n");

    for layer in layers {
        match layer {
            Layer::Graph(g) => {
                out.push_str("<g id=\"possibility-graph\">\n");
                for e in g.edges() {
                    let s = g.span(&e);
                    let class = match e.label {
                        PossibilityLabel::Possible => "edge possible",
                        PossibilityLabel::Indeterminate => "edge indeterminate",
                    };
                    let _ = writeln!(
                        out,
                        r#"<line class="{class}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
                        c.x(s.from.x),
                        c.y(s.from.y),
                        c.x(s.to.x),
                        c.y(s.to.y)
                    );
                }
                for (id, v) in g.vertices() {
                    let class = if g.start_ids().contains(&id) || g.goal_ids().contains(&id) {
                        "endpoint"
                    } else {
                        "vertex"
                    };
                    let r = if class == "endpoint" { 6.0 } else { 1.5 };
                    let _ = writeln!(
                        out,
                        r#"<circle class="{class}" cx="{:.2}" cy="{:.2}" r="{r}"/>"#,
                        c.x(v.pose.x),
                        c.y(v.pose.y)
                    );
                }
                out.push_str("</g>\n");
            }
            Layer::Solution(t) => {
                out.push_str("<g id=\"solution\">\n");
                let _ = writeln!(
                    out,
                    r#"<polyline class="root-path" points="{}"/>"#,
                    c.points(t.states().iter().map(|s| (s.root.x, s.root.y)))
                );
                let mut drawn: Vec<FootPlacement> = Vec::new();
                for s in t.states() {
                    for f in s.stance.iter() {
                        if !drawn.contains(f) {
                            drawn.push(*f);
                            foot_polygon(&c, f, spec, &mut out);
                        }
                    }
                }
                out.push_str("</g>\n");
            }
            Layer::Trace(traces) => {
                out.push_str("<g id=\"mmp-trace\">\n");
                for t in traces.iter() {
                    if let Some(g) = &t.guide {
                        let _ = writeln!(
                            out,
                            r#"<polyline class="guide" points="{}"/>"#,
                            c.points(g.poses().iter().map(|p| (p.x, p.y)))
                        );
                    }
                    for s in &t.samples {
                        let class = if s.accepted { "sample accepted" } else { "sample rejected" };
                        let _ = writeln!(
                            out,
                            r#"<circle class="{class}" cx="{:.2}" cy="{:.2}" r="2"/>"#,
                            c.x(s.foot.x),
                            c.y(s.foot.y)
                        );
                    }
                }
                out.push_str("</g>\n");
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn emit_svg(world: &World, bounds: &Bounds2, spec: &RobotSpec, layers: &[Layer<'_>], path: &Path) -> io::Result<()> {
    std::fs::write(path, render_svg(world, bounds, spec, layers))
}

mod common;

use common::{any_world, bounds, limbo_world, rect};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rpg_core::geometry::{Pose4, World};
use rpg_core::possibility::{
    label_edge, EdgeOrigin, GrowParams, PossibilityGraph, PossibilityLabel, VertexId,
};
use rpg_core::robot::{nominal_stance, RobotSpec};

fn grown(world: &World, seed: u64, iterations: usize) -> PossibilityGraph {
    let spec = RobotSpec::default();
    let mut g = PossibilityGraph::new(&[Pose4::new(-2.5, -2.5, 0.9, 0.0)], &[Pose4::new(2.5, 2.5, 0.9, 0.0)]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..iterations {
        g.grow(world, &spec, &bounds(3.0), &GrowParams::default(), &mut rng);
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn stored_labels_match_recomputed(world in any_world(), seed in any::<u64>()) {
        let spec = RobotSpec::default();
        let g = grown(&world, seed, 300);
        for e in g.edges() {
            prop_assert_eq!(e.origin, EdgeOrigin::Grown);
            let s = g.span(&e);
            let verdict = label_edge(&s.from, &s.to, &world, &spec);
            prop_assert_eq!(verdict.label(), Some(e.label));
        }
    }

    #[test]
    fn routes_chain_from_start_to_goal(world in any_world(), seed in any::<u64>()) {
        let g = grown(&world, seed, 400);
        if let Some(route) = g.find_guide_route(5.0, 0.2) {
            prop_assert!(route.is_valid(&g));
            prop_assert!(route.cost.is_finite() && route.cost > 0.0);
        }
    }

    #[test]
    fn growth_is_deterministic(world in any_world(), seed in any::<u64>()) {
        prop_assert_eq!(grown(&world, seed, 150), grown(&world, seed, 150));
    }
}

/// Random graphs built by hand: route search must return valid chains or
/// nothing.
#[test]
fn random_graph_routes_are_valid() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..300 {
        let n = rng.gen_range(3..25);
        let poses: Vec<Pose4> = (0..n)
            .map(|_| Pose4::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), 0.9, 0.0))
            .collect();
        let mut g = PossibilityGraph::new(&poses[..1], &poses[1..2]);
        let ids: Vec<VertexId> = std::iter::once(VertexId(0))
            .chain(std::iter::once(VertexId(1)))
            .chain(poses[2..].iter().map(|p| g.add_vertex(*p, false)))
            .collect();
        for _ in 0..rng.gen_range(0..3 * n) {
            let (a, b) = (ids[rng.gen_range(0..n)], ids[rng.gen_range(0..n)]);
            let label = if rng.gen::<bool>() {
                PossibilityLabel::Possible
            } else {
                PossibilityLabel::Indeterminate
            };
            let _ = g.add_edge(a, b, label, EdgeOrigin::Grown);
        }
        if let Some(route) = g.find_guide_route(5.0, 0.2) {
            assert!(route.is_valid(&g));
        }
    }
}

#[test]
fn limbo_route_crosses_on_an_indeterminate_edge() {
    let world = limbo_world(0.93);
    let spec = RobotSpec::default();
    let mut g = PossibilityGraph::new(&[Pose4::new(-3.0, 0.0, 0.9, 0.0)], &[Pose4::new(3.0, 0.0, 0.9, 0.0)]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let b = rpg_core::geometry::Bounds2::new([-5.0, -2.0], [5.0, 2.0]);
    let mut route = None;
    for _ in 0..20_000 {
        g.grow(&world, &spec, &b, &GrowParams::default(), &mut rng);
        route = g.find_guide_route(5.0, 0.2);
        if route.is_some() {
            break;
        }
    }
    let route = route.expect("a route appears");
    let crossing = route.edges.iter().find(|e| {
        let s = g.span(e);
        s.from.x.min(s.to.x) < 0.3 && s.from.x.max(s.to.x) > -0.3
    });
    assert_eq!(crossing.map(|e| e.label), Some(PossibilityLabel::Indeterminate));
}

#[test]
fn deleting_then_growing_can_rediscover_the_corridor() {
    let world = limbo_world(0.93);
    let spec = RobotSpec::default();
    let b = rpg_core::geometry::Bounds2::new([-5.0, -2.0], [5.0, 2.0]);
    let mut g = PossibilityGraph::new(&[Pose4::new(-3.0, 0.0, 0.9, 0.0)], &[Pose4::new(3.0, 0.0, 0.9, 0.0)]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut found = 0;
    for _ in 0..40_000 {
        g.grow(&world, &spec, &b, &GrowParams::default(), &mut rng);
        if let Some(route) = g.find_guide_route(5.0, 0.2) {
            let which = route
                .edges
                .iter()
                .position(|e| e.label == PossibilityLabel::Indeterminate)
                .expect("the bar forces an indeterminate edge");
            g.delete_indeterminate(&route, which).unwrap();
            found += 1;
            if found == 3 {
                break;
            }
        }
    }
    assert_eq!(found, 3);
}

#[test]
fn promotion_never_raises_route_cost() {
    let world = World::new(vec![rect(-5.0, -5.0, 5.0, 5.0)], vec![]).unwrap();
    let spec = RobotSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..20 {
        let mut g = PossibilityGraph::new(&[Pose4::new(-2.0, 0.0, 0.9, 0.0)], &[Pose4::new(2.0, 0.0, 0.9, 0.0)]);
        let m = g.add_vertex(Pose4::new(0.0, 0.3 * trial as f64 / 20.0, 0.9, 0.0), false);
        g.add_edge(VertexId(0), m, PossibilityLabel::Indeterminate, EdgeOrigin::Grown).unwrap();
        g.add_edge(m, VertexId(1), PossibilityLabel::Possible, EdgeOrigin::Grown).unwrap();
        for _ in 0..50 {
            g.grow(&world, &spec, &bounds(5.0), &GrowParams::default(), &mut rng);
        }
        let before = g.find_guide_route(5.0, 0.2).unwrap().cost;
        let states = vec![nominal_stance(&g.pose(VertexId(0)), &spec), nominal_stance(&g.pose(m), &spec)];
        g.promote(VertexId(0), m, &states, 0.3);
        let after = g.find_guide_route(5.0, 0.2).unwrap().cost;
        assert!(after <= before + 1e-12, "trial {trial}: {after} > {before}");
    }
}

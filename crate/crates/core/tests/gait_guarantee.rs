mod common;

use common::{edge, sparse_world};
use proptest::prelude::*;
use rpg_core::gait::{audit_trajectory, plan_gait};
use rpg_core::possibility::{label_edge, EdgeSpan, PossibilityLabel, Verdict};
use rpg_core::robot::{nominal_stance, state_feasible, RobotSpec, Side};

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, max_global_rejects: 1_000_000, ..ProptestConfig::default() })]

    #[test]
    fn possible_edges_always_walk(world in sparse_world(), (a, b) in edge(2.5, 1.2)) {
        let spec = RobotSpec::default();
        prop_assume!(label_edge(&a, &b, &world, &spec) == Verdict::Possible);
        let span = EdgeSpan { from: a, to: b, label: PossibilityLabel::Possible };
        let (x0, xf) = (nominal_stance(&a, &spec), nominal_stance(&b, &spec));
        let t = plan_gait(&x0, &span, &xf, &spec).expect("preconditions hold");
        prop_assert!(!t.is_failure());
        prop_assert_eq!(t.first(), Some(&x0));
        prop_assert_eq!(t.last(), Some(&xf));
        for s in t.states() {
            prop_assert!(state_feasible(s, &world, &spec));
        }
        prop_assert_eq!(audit_trajectory(&t, &world, &spec), Ok(()));
    }

    #[test]
    fn steps_alternate_feet(world in sparse_world(), (a, b) in edge(2.5, 1.2)) {
        let spec = RobotSpec::default();
        prop_assume!(label_edge(&a, &b, &world, &spec) == Verdict::Possible);
        let span = EdgeSpan { from: a, to: b, label: PossibilityLabel::Possible };
        let t = plan_gait(&nominal_stance(&a, &spec), &span, &nominal_stance(&b, &spec), &spec).unwrap();
        // the side of every lift, in order
        let lifts: Vec<Side> = t
            .states()
            .windows(2)
            .filter(|w| w[0].stance.len() == 2 && w[1].stance.len() == 1)
            .map(|w| if w[1].stance.get(Side::Left).is_some() { Side::Right } else { Side::Left })
            .collect();
        for w in lifts.windows(2) {
            prop_assert_ne!(w[0], w[1]);
        }
    }
}

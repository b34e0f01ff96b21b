use proptest::prelude::*;
use rpg_bench::scenario::{emit_scenario, load_bundled, parse_scenario, CORPUS};
use rpg_bench::trials::{run_trials, Outcome, TrialOptions};
use rpg_core::gait::audit_trajectory;
use rpg_core::orchestrator::plan;

#[test]
fn every_bundled_scenario_loads_and_is_solvable_in_principle() {
    for name in CORPUS {
        let s = load_bundled(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(s.name, name);
        s.problem().check().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn bundled_scenarios_round_trip() {
    for name in CORPUS {
        let s = load_bundled(name).unwrap();
        let back = parse_scenario(&emit_scenario(&s)).unwrap();
        assert_eq!(back, s, "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edited_poses_round_trip(
        dx in -0.5..0.5f64,
        dy in -0.5..0.5f64,
        yaw in -3.1..3.1f64,
        timeout in 1.0..500.0f64,
    ) {
        let mut s = load_bundled("open_floor").unwrap();
        s.start = rpg_core::geometry::Pose4::new(s.start.x + dx, s.start.y + dy, s.start.z, yaw);
        s.timeout_s = Some(timeout);
        let back = parse_scenario(&emit_scenario(&s)).unwrap();
        prop_assert_eq!(back, s);
    }
}

#[test]
fn open_floor_always_succeeds() {
    let s = load_bundled("open_floor").unwrap();
    let opts = TrialOptions { trials: 30, ..TrialOptions::default() };
    let reports = run_trials(&s, &opts).unwrap();
    for r in &reports {
        assert_eq!(r.outcome, Outcome::Success, "seed {}", r.seed);
        assert_eq!(r.segments_mmp, 0);
    }
}

#[test]
fn walled_always_times_out() {
    let s = load_bundled("walled").unwrap();
    let opts = TrialOptions { trials: 30, timeout_s: 5.0, ..TrialOptions::default() };
    for r in run_trials(&s, &opts).unwrap() {
        assert_eq!(r.outcome, Outcome::Timeout, "seed {}", r.seed);
        assert!(r.wall_time_s >= 5.0);
    }
}

#[test]
fn limbo_solution_survives_an_audit() {
    let s = load_bundled("limbo").unwrap();
    let p = s.problem();
    let sol = plan(&p, &rpg_bench::trials::planner_config(&TrialOptions::default(), 0)).unwrap();
    assert_eq!(audit_trajectory(&sol.trajectory, &p.world, &p.spec), Ok(()));
}

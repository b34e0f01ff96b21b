//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails the
//! target if any criterion fails. Thresholds are the constants below.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::Point2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rpg_bench::scenario::{load_bundled, Scenario};
use rpg_bench::trials::{csv_string, run_trial, run_trials, summarize, Flavor, Summary, TrialOptions};
use rpg_core::gait::{audit_trajectory, plan_gait};
use rpg_core::geometry::{collide_at, sweep_samples, BoxSet, ConvexPolygon2, ObstaclePrism, Pose4, World};
use rpg_core::possibility::{check_necessary, check_sufficient, label_edge, EdgeSpan, PossibilityLabel, Verdict};
use rpg_core::robot::{nominal_stance, state_feasible, RobotSpec};

const LIMBO_TIMEOUT_S: f64 = 120.0;
const LIMBO_RPG_MIN_SUCCESS: f64 = 0.95;
const LIMBO_UNINFORMED_MAX_SUCCESS: f64 = 0.50;
const LIMBO_MEDIAN_RATIO: f64 = 10.0;

const FOUR_TIMEOUT_S: f64 = 300.0;
const FOUR_RPG_MIN_SUCCESS: f64 = 0.90;
const FOUR_UNINFORMED_MAX_SUCCESS: f64 = 0.10;
const NO_BARS_MEDIAN_RATIO: f64 = 3.0;

const TRIALS: usize = 30;
const LABEL_CASES: usize = 10_000;
const GAIT_EDGES: usize = 1000;
const FUZZ_RUNS: usize = 100;
const REPEATS: usize = 10;

/// Oracle resolution in meters.
const ORACLE_STEP: f64 = 0.005;

struct Outcome {
    pass: bool,
    detail: String,
}

fn batch(s: &Scenario, flavor: Flavor, timeout_s: f64, trials: usize, base_seed: u64) -> Summary {
    let opts = TrialOptions { flavor, trials, base_seed, timeout_s, ..TrialOptions::default() };
    summarize(&run_trials(s, &opts).expect("bundled scenario is valid"))
}

fn criterion_1() -> Outcome {
    let s = load_bundled("limbo").unwrap();
    let rpg = batch(&s, Flavor::Rpg, LIMBO_TIMEOUT_S, TRIALS, 0);
    let uni = batch(&s, Flavor::Uninformed, LIMBO_TIMEOUT_S, TRIALS, 0);
    let pass = rpg.success_rate >= LIMBO_RPG_MIN_SUCCESS
        && uni.success_rate <= LIMBO_UNINFORMED_MAX_SUCCESS
        && rpg.median_time_s * LIMBO_MEDIAN_RATIO <= uni.median_time_s;
    Outcome {
        pass,
        detail: format!(
            "limbo rpg success {:.2} (>= {LIMBO_RPG_MIN_SUCCESS}) median {:.2}s; uninformed success {:.2} (<= {LIMBO_UNINFORMED_MAX_SUCCESS}) median {:.2}s; ratio {:.1} (>= {LIMBO_MEDIAN_RATIO})",
            rpg.success_rate,
            rpg.median_time_s,
            uni.success_rate,
            uni.median_time_s,
            uni.median_time_s / rpg.median_time_s
        ),
    }
}

fn criterion_2() -> Outcome {
    let run = |name: &str, flavor| batch(&load_bundled(name).unwrap(), flavor, FOUR_TIMEOUT_S, TRIALS, 0);
    let base = run("four_routes", Flavor::Rpg);
    let uni = run("four_routes", Flavor::Uninformed);
    let west = run("four_routes_west_blocked", Flavor::Rpg);
    let east = run("four_routes_east_blocked", Flavor::Rpg);
    let open = run("four_routes_no_bars", Flavor::Rpg);
    let pass = base.success_rate >= FOUR_RPG_MIN_SUCCESS
        && uni.success_rate <= FOUR_UNINFORMED_MAX_SUCCESS
        && west.median_time_s > base.median_time_s
        && east.median_time_s > base.median_time_s
        && open.median_time_s * NO_BARS_MEDIAN_RATIO <= base.median_time_s;
    Outcome {
        pass,
        detail: format!(
            "four_routes rpg success {:.2} (>= {FOUR_RPG_MIN_SUCCESS}) median {:.2}s; uninformed success {:.2} (<= {FOUR_UNINFORMED_MAX_SUCCESS}); west_blocked median {:.2}s, east_blocked median {:.2}s (> {:.2}s); no_bars median {:.2}s (<= {:.2}s)",
            base.success_rate,
            base.median_time_s,
            uni.success_rate,
            west.median_time_s,
            east.median_time_s,
            base.median_time_s,
            open.median_time_s,
            base.median_time_s / NO_BARS_MEDIAN_RATIO
        ),
    }
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> ConvexPolygon2 {
    ConvexPolygon2::from_xy(&[[x0, y0], [x1, y0], [x1, y1], [x0, y1]]).unwrap()
}

fn random_prism(rng: &mut ChaCha8Rng) -> ObstaclePrism {
    let (cx, cy) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
    let (hl, hw) = (rng.gen_range(0.025..0.75), rng.gen_range(0.025..0.75));
    let yaw: f64 = rng.gen_range(-3.2..3.2);
    let (c, s) = (yaw.cos(), yaw.sin());
    let pts: Vec<[f64; 2]> = [(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)]
        .iter()
        .map(|(u, v)| [cx + c * u - s * v, cy + s * u + c * v])
        .collect();
    let lo = rng.gen_range(0.0..1.6);
    let hi = lo + rng.gen_range(0.05..1.2);
    ObstaclePrism::new(ConvexPolygon2::from_xy(&pts).unwrap(), lo, hi).unwrap()
}

fn random_tile(rng: &mut ChaCha8Rng) -> ConvexPolygon2 {
    let (x, y) = (rng.gen_range(-3.5..1.5), rng.gen_range(-3.5..1.5));
    rect(x, y, x + rng.gen_range(0.4..5.0), y + rng.gen_range(0.4..5.0))
}

/// One to four floor tiles with gaps between them, up to six prisms.
fn random_world(rng: &mut ChaCha8Rng) -> World {
    let floor = (0..rng.gen_range(1..5)).map(|_| random_tile(rng)).collect();
    let obstacles = (0..rng.gen_range(0..7)).map(|_| random_prism(rng)).collect();
    World::new(floor, obstacles).unwrap()
}

/// A large base floor plus a few extra tiles and prisms.
fn sparse_world(rng: &mut ChaCha8Rng) -> World {
    let mut floor: Vec<ConvexPolygon2> = (0..rng.gen_range(0..3)).map(|_| random_tile(rng)).collect();
    floor.push(rect(-3.0, -3.0, 3.0, 3.0));
    let obstacles = (0..rng.gen_range(0..3)).map(|_| random_prism(rng)).collect();
    World::new(floor, obstacles).unwrap()
}

fn random_edge(rng: &mut ChaCha8Rng, half: f64, reach: f64, spec: &RobotSpec) -> (Pose4, Pose4) {
    let (zmin, zmax) = spec.root_z_range;
    let a = Pose4::new(
        rng.gen_range(-half..half),
        rng.gen_range(-half..half),
        rng.gen_range(zmin..=zmax),
        rng.gen_range(-3.14..3.14),
    );
    let b = Pose4::new(
        a.x + rng.gen_range(-reach..reach),
        a.y + rng.gen_range(-reach..reach),
        rng.gen_range(zmin..=zmax),
        rng.gen_range(-3.14..3.14),
    );
    (a, b)
}

/// The planner's sweep samples with every gap subdivided until consecutive
/// samples are at most `ORACLE_STEP` apart.
fn oracle_sweep_collides(geom: &BoxSet, a: &Pose4, b: &Pose4, spec: &RobotSpec, world: &World) -> bool {
    let coarse = sweep_samples(a, b, spec.sweep_step, geom.radius());
    let k = (spec.sweep_step / ORACLE_STEP).ceil() as usize;
    let mut fine = vec![coarse[0]];
    for w in coarse.windows(2) {
        fine.extend((1..=k).map(|i| if i == k { w[1] } else { w[0].interpolate(&w[1], i as f64 / k as f64) }));
    }
    fine.iter().any(|p| collide_at(geom, p, world))
}

fn oracle_foothold_exists(root: &Pose4, spec: &RobotSpec, world: &World) -> bool {
    let r = spec.leg_reach;
    let n = (r / ORACLE_STEP).ceil() as i64;
    (-n..=n).any(|i| {
        (-n..=n).any(|j| {
            let (dx, dy) = (i as f64 * ORACLE_STEP, j as f64 * ORACLE_STEP);
            dx * dx + dy * dy <= r * r && world.on_floor(&Point2::new(root.x + dx, root.y + dy))
        })
    })
}

fn criterion_3() -> Outcome {
    let spec = RobotSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut implication_violations, mut false_impossible, mut impossible) = (0, 0, 0);
    for _ in 0..LABEL_CASES {
        let world = random_world(&mut rng);
        let (a, b) = random_edge(&mut rng, 3.0, 1.0, &spec);
        if check_sufficient(&a, &b, &world, &spec) && !check_necessary(&a, &b, &world, &spec) {
            implication_violations += 1;
        }
        if label_edge(&a, &b, &world, &spec) == Verdict::Impossible {
            impossible += 1;
            let confirmed = oracle_sweep_collides(&spec.minimal_geom, &a, &b, &spec, &world)
                || !oracle_foothold_exists(&a, &spec, &world)
                || !oracle_foothold_exists(&b, &spec, &world);
            if !confirmed {
                false_impossible += 1;
            }
        }
    }
    Outcome {
        pass: implication_violations == 0 && false_impossible == 0,
        detail: format!(
            "{LABEL_CASES} cases; sufficient-without-necessary {implication_violations} (== 0); false impossible {false_impossible} of {impossible} impossible verdicts (== 0) at {} mm oracle",
            ORACLE_STEP * 1000.0
        ),
    }
}

fn criterion_4() -> Outcome {
    let spec = RobotSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut tried, mut ok) = (0, 0);
    let mut draws = 0usize;
    while tried < GAIT_EDGES {
        draws += 1;
        let world = sparse_world(&mut rng);
        let (a, b) = random_edge(&mut rng, 2.5, 1.2, &spec);
        if label_edge(&a, &b, &world, &spec) != Verdict::Possible {
            continue;
        }
        tried += 1;
        let span = EdgeSpan { from: a, to: b, label: PossibilityLabel::Possible };
        let (x0, xf) = (nominal_stance(&a, &spec), nominal_stance(&b, &spec));
        let Ok(t) = plan_gait(&x0, &span, &xf, &spec) else {
            continue;
        };
        let sound = !t.is_failure()
            && t.first() == Some(&x0)
            && t.last() == Some(&xf)
            && t.states().iter().all(|s| state_feasible(s, &world, &spec))
            && audit_trajectory(&t, &world, &spec).is_ok();
        if sound {
            ok += 1;
        }
    }
    Outcome {
        pass: ok == tried,
        detail: format!("{ok}/{tried} possible edges walked with every state feasible (== 100%), {draws} edges drawn"),
    }
}

fn criterion_5() -> Outcome {
    // (scenario, flavor, runs)
    let plan: [(&str, Flavor, usize); 7] = [
        ("limbo", Flavor::Rpg, 30),
        ("limbo", Flavor::Uninformed, 10),
        ("open_floor", Flavor::Rpg, 30),
        ("four_routes", Flavor::Rpg, 8),
        ("four_routes_no_bars", Flavor::Rpg, 8),
        ("four_routes_west_blocked", Flavor::Rpg, 7),
        ("four_routes_east_blocked", Flavor::Rpg, 7),
    ];
    assert_eq!(plan.iter().map(|p| p.2).sum::<usize>(), FUZZ_RUNS);
    let (mut solved, mut violations) = (0, Vec::new());
    for (name, flavor, runs) in plan {
        let s = load_bundled(name).unwrap();
        let p = s.problem();
        let opts = TrialOptions {
            flavor,
            timeout_s: s.timeout_s.unwrap_or(LIMBO_TIMEOUT_S),
            ..TrialOptions::default()
        };
        for seed in 1000..1000 + runs as u64 {
            let (_, run) = run_trial(&s, &opts, seed).expect("bundled scenario is valid");
            let Ok(sol) = run.outcome else { continue };
            solved += 1;
            let t = &sol.trajectory;
            if t.first() != Some(&p.start_state()) || t.last() != Some(&p.goal_state()) {
                violations.push(format!("{name}/{flavor}/{seed}: endpoints"));
            } else if let Err(e) = audit_trajectory(t, &p.world, &p.spec) {
                violations.push(format!("{name}/{flavor}/{seed}: {e}"));
            }
        }
    }
    Outcome {
        pass: violations.is_empty() && solved > 0,
        detail: format!(
            "{FUZZ_RUNS} runs, {solved} solutions audited, {} violations (== 0){}",
            violations.len(),
            violations.first().map(|v| format!("; first: {v}")).unwrap_or_default()
        ),
    }
}

fn criterion_6() -> Outcome {
    let s = load_bundled("limbo").unwrap();
    let csv = || {
        let mut out = String::new();
        for (flavor, trials) in [(Flavor::Rpg, 3), (Flavor::Uninformed, 2)] {
            let opts = TrialOptions { flavor, trials, timeout_s: LIMBO_TIMEOUT_S, ..TrialOptions::default() };
            out.push_str(&csv_string(&run_trials(&s, &opts).unwrap()));
        }
        out
    };
    let first = csv();
    let same = (1..REPEATS).filter(|_| csv() == first).count() + 1;
    Outcome {
        pass: same == REPEATS,
        detail: format!("{same}/{REPEATS} sequential repetitions byte-identical ({} bytes)", first.len()),
    }
}

fn main() -> ExitCode {
    let criteria: [(usize, &str, fn() -> Outcome); 6] = [
        (1, "guided vs uninformed on limbo", criterion_1),
        (2, "four routes and its variants", criterion_2),
        (3, "labeling soundness", criterion_3),
        (4, "gait succeeds on possible edges", criterion_4),
        (5, "solution integrity fuzz", criterion_5),
        (6, "determinism", criterion_6),
    ];
    let only: Vec<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let v = f();
        println!(
            "criterion {n} ({name}): {} [{}] {:.0}s",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed().as_secs_f64()
        );
        if !v.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

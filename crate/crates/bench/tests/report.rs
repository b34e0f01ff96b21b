use std::process::Command;

use proptest::prelude::*;
use rpg_bench::trials::{csv_string, median, summarize, Flavor, Outcome, TrialReport, CSV_HEADER};

fn report(seed: u64, ok: bool, t: f64, gait: usize, mmp: usize, len: f64) -> TrialReport {
    TrialReport {
        scenario: "s".into(),
        flavor: Flavor::Rpg,
        seed,
        outcome: if ok { Outcome::Success } else { Outcome::Timeout },
        wall_time_s: t,
        segments_gait: if ok { gait } else { 0 },
        segments_mmp: if ok { mmp } else { 0 },
        path_length_m: ok.then_some(len),
    }
}

fn reports() -> impl Strategy<Value = Vec<TrialReport>> {
    prop::collection::vec((any::<bool>(), 0.0..300.0f64, 0..20usize, 0..5usize, 1.0..30.0f64), 1..40).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (ok, t, g, m, l))| report(i as u64, ok, t, g, m, l))
            .collect()
    })
}

fn cell(s: &str) -> f64 {
    s.parse().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn summary_row_recomputes_from_rows(rs in reports()) {
        let text = csv_string(&rs);
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        prop_assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER.to_vec());
        let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
        prop_assert_eq!(rows.len(), rs.len() + 1);
        let (body, last) = rows.split_at(rs.len());
        let times: Vec<f64> = body.iter().map(|r| cell(&r[4])).collect();
        let n = times.len() as f64;
        let mean = times.iter().sum::<f64>() / n;
        let std = if times.len() > 1 {
            (times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let rate = body.iter().filter(|r| &r[3] == "success").count() as f64 / n;
        let summary = &last[0];
        prop_assert_eq!(&summary[2], "summary");
        prop_assert!((cell(&summary[3]) - rate).abs() <= 0.005 + 1e-9);
        let (m, s) = summary[4].trim_end_matches(')').split_once(" (").unwrap();
        prop_assert!((cell(m) - mean).abs() <= 1e-9);
        prop_assert!((cell(s) - std).abs() <= 1e-9);
        let gait = body.iter().map(|r| cell(&r[5])).sum::<f64>() / n;
        prop_assert!((cell(&summary[5]) - gait).abs() <= 1e-9);
        prop_assert_eq!(summarize(&rs).median_time_s, median(&times));
    }
}

#[test]
fn cli_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let (csv_path, svg_path) = (dir.path().join("out.csv"), dir.path().join("out.svg"));
    let out = Command::new(env!("CARGO_BIN_EXE_rpg-bench"))
        .args(["--scenario", "open_floor", "--trials", "2", "--sequential", "--emit-csv"])
        .arg(&csv_path)
        .arg("--emit-svg")
        .arg(&svg_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("summary: success 1.00"));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(std::fs::read_to_string(&svg_path).unwrap().starts_with("<svg"));
}

#[test]
fn cli_rejects_bad_input() {
    let run = |args: &[&str]| Command::new(env!("CARGO_BIN_EXE_rpg-bench")).args(args).output().unwrap();
    let out = run(&["--scenario", "no_such_scenario"]);
    assert!(!out.status.success());
    let out = run(&["--scenario", "open_floor", "--trials", "0"]);
    assert!(!out.status.success());
    let out = run(&["--scenario", "open_floor", "--flavor", "fast"]);
    assert!(!out.status.success());
}

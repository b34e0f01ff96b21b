//! Per-thread work accounting and the planner clocks.
//!
//! Every rigid-geometry pose check and every whole-body feasibility query is
//! counted on the calling thread. A [`Clock::Work`] converts those counts into
//! nominal seconds with a fixed [`CostModel`], which makes run times a pure
//! function of the seed. [`Clock::Wall`] measures real elapsed time.

use std::cell::Cell;
use std::time::Instant;

use serde::{Deserialize, Serialize};

thread_local! {
    static POSE_CHECKS: Cell<u64> = const { Cell::new(0) };
    static STATE_CHECKS: Cell<u64> = const { Cell::new(0) };
}

pub(crate) fn charge_pose_checks(n: u64) {
    POSE_CHECKS.with(|c| c.set(c.get() + n));
}

pub(crate) fn charge_state_checks(n: u64) {
    STATE_CHECKS.with(|c| c.set(c.get() + n));
}

/// Counters accumulated on the current thread so far.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkCounts {
    pub pose_checks: u64,
    pub state_checks: u64,
}

impl WorkCounts {
    pub fn current() -> Self {
        Self {
            pose_checks: POSE_CHECKS.with(Cell::get),
            state_checks: STATE_CHECKS.with(Cell::get),
        }
    }

    pub fn since(&self, earlier: &WorkCounts) -> WorkCounts {
        WorkCounts {
            pose_checks: self.pose_checks - earlier.pose_checks,
            state_checks: self.state_checks - earlier.state_checks,
        }
    }
}

/// Nominal cost of each counted query, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// One rigid box-set placement tested against the obstacles.
    pub pose_check_s: f64,
    /// One whole-body feasibility query (stands in for an IK solve).
    pub state_check_s: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            pose_check_s: 20e-6,
            state_check_s: 1e-3,
        }
    }
}

impl CostModel {
    pub fn seconds(&self, w: &WorkCounts) -> f64 {
        w.pose_checks as f64 * self.pose_check_s + w.state_checks as f64 * self.state_check_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockKind {
    Work,
    Wall,
}

/// Elapsed-time source for a planning run. Work clocks only see work done on
/// the thread that created them.
#[derive(Debug, Clone)]
pub enum Clock {
    Work { start: WorkCounts, model: CostModel },
    Wall { start: Instant },
}

impl Clock {
    pub fn start(kind: ClockKind, model: CostModel) -> Self {
        match kind {
            ClockKind::Work => Clock::Work {
                start: WorkCounts::current(),
                model,
            },
            ClockKind::Wall => Clock::Wall {
                start: Instant::now(),
            },
        }
    }

    pub fn elapsed_s(&self) -> f64 {
        match self {
            Clock::Work { start, model } => model.seconds(&WorkCounts::current().since(start)),
            Clock::Wall { start } => start.elapsed().as_secs_f64(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn work_clock_is_count_driven() {
        let clock = Clock::start(ClockKind::Work, CostModel::default());
        assert_eq!(clock.elapsed_s(), 0.0);
        charge_state_checks(3);
        charge_pose_checks(50);
        let expect = 3.0 * 1e-3 + 50.0 * 20e-6;
        assert!((clock.elapsed_s() - expect).abs() < 1e-15);
    }

    #[test]
    fn counters_are_thread_local() {
        let before = WorkCounts::current();
        std::thread::spawn(|| charge_state_checks(10)).join().unwrap();
        assert_eq!(WorkCounts::current().since(&before).state_checks, 0);
    }
}

//! Hierarchical motion planning for legged robots.
//!
//! A cheap possibility graph over root poses guides two motion planners: a
//! fixed gait for edges known to be walkable and a multi-modal contact planner
//! for the rest. Verified motions are stored in a motion graph and folded back
//! into the possibility graph.

pub mod gait;
pub mod geometry;
pub mod meter;
pub mod mmp;
pub mod orchestrator;
pub mod possibility;
pub mod robot;

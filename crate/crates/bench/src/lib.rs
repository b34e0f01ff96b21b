//! Scenario corpus, seeded trial harness, CSV reports and SVG renders.

pub mod scenario;
pub mod svg;
pub mod trials;

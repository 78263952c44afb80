//! Configuration files, CSV interchange, JSON summaries and SVG plots.

pub mod config;
pub mod csv;
pub mod svg;

pub use config::{OutputConfig, RunConfig, SimulateConfig};

use crate::error::Result;
use crate::harness::ExperimentReport;

/// Pretty JSON summary of a report (records go to CSV).
pub fn report_json(report: &ExperimentReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

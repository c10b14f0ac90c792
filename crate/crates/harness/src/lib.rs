//! Experiment runner for the ifelab estimators: seeded replication sweeps,
//! the canned simulation grids and single-dataset analysis.

pub mod analyze;
pub mod appendix_c;
pub mod appendix_d;
pub mod config;
pub mod error;
pub mod report;
pub mod sweep;
pub mod table1;

pub use config::{archive_config, load_config, EstimatorEntry, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use report::{CellSummary, SweepReport};
pub use sweep::run_sweep;

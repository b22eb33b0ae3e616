//! Data generators, coverage trials and the figure experiments.

pub mod coverage;
pub mod experiments;
pub mod model;
pub mod rng;

pub use coverage::{run_coverage, CoverageSummary, Method};
pub use experiments::{ExperimentRow, ExperimentTable, Figure, RowValue};
pub use model::{draw_calibration, draw_test, GroupModel, SamplingScheme, ScoreLaw};

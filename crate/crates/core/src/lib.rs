//! Group-weighted conformal prediction under group-wise covariate shift.
//!
//! - [`quantile`]: weighted score distributions and exact weighted quantiles.
//! - [`conformal`]: split, weighted, group-weighted and corrected calibration rules.
//! - [`bounds`]: closed-form and Monte Carlo coverage lower bounds.
//! - [`simulate`]: data generators, coverage trials and the figure experiments.
//! - [`report`]: CSV / JSON rendering of experiment tables.

pub mod bounds;
pub mod conformal;
pub mod error;
pub mod quantile;
pub mod report;
pub mod simulate;
mod sum;

pub use error::{Error, Result};

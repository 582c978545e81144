//! Experiment runner for `fieldclt-core`: JSON configs in, reproducible
//! reports, CSV tables and SVG plots out.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod plot;
pub mod run;
pub mod suites;

pub use config::{ExperimentConfig, ExperimentKind, Format};
pub use error::{CliError, EXIT_PASS, EXIT_VERDICT_FAIL};
pub use plot::{emit_plot, PlotKind};
pub use run::{execute, run, RunOutcome};

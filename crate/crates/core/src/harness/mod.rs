//! Monte Carlo convergence studies, rate fitting, statistical validation
//! and report output.

pub mod config;
pub mod stats;
pub mod study;
pub mod table;
pub mod validate;

pub use config::{Equation, ErrorNorm, StudyConfig};
pub use stats::MeanEstimate;
pub use study::{collect_errors, run_study, ErrorSamples};
pub use table::{emit_csv, emit_report, fit_rate, parse_csv, write_csv, ConvergenceRow, ConvergenceTable};
pub use validate::{validate_statistics, ValidationConfig, ValidationReport};

//! Command line, CSV datasets, MPS export and JSON run reports.

pub mod cli;
pub mod dataset;
pub mod mps;
pub mod report;

pub use cli::run_command;
pub use dataset::read_dataset;
pub use mps::{export_model, parse_mps, solve_by_enumeration, write_mps};
pub use report::RunReport;

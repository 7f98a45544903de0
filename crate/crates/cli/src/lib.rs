//! Command-line front end: config loading, check orchestration and reports.
//!
//! Exit codes: 0 when every check passes, 2 when any check fails (the report
//! is still written), 1 on config or build errors (no report).

pub mod app;
pub mod checks;
pub mod config;
pub mod family;
pub mod suite;

pub use config::{load_config, parse_config, CliError, FamilySpec, SuiteConfig};
pub use suite::{run_suite, write_outputs, Format, Selection, SuiteReport};

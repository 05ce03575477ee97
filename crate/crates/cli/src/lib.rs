//! Config-driven batch evaluation for `gendd`: experiment configs in,
//! CSV/JSON reports and comparison tables out.

pub mod config;
pub mod report;
pub mod run;
pub mod table;

pub use config::Config;
pub use report::{ReportRow, Status};
pub use run::{run_config, write_reports, RunOptions};

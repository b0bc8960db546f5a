// `!(x > 0.0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Example scenarios, configuration, CSV/SVG export and run reports for
//! the `predfeed` command-line tool.

pub mod config;
pub mod error;
pub mod export;
pub mod report;
pub mod scenario;

pub use config::Overrides;
pub use error::{Result, WorkbenchError};
pub use export::{export_csv, export_plot, read_csv, write_csv, Table};
pub use report::{run, summarize, RunReport};
pub use scenario::{
    scenario, scenario_dc_motor, scenario_linear_scalar, scenario_teleoperation, Assertion, Scenario, ScenarioId,
};

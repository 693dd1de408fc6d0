//! Command-line front end for `espkit-core`: JSON run configurations,
//! trajectory CSV output, transition detection on stored trajectories,
//! short-time fits and the table and figure reproduction targets.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod repro;

pub use config::{load_config, parse_config, parse_override, RunConfig};
pub use error::{CliError, CliResult};
pub use io::parse_trajectory_csv;

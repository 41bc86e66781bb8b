//! Files, replication and the command line around `pirel-core`.
//!
//! CSV schemas live in [`csv_io`], parameter files in [`params_file`], run
//! configuration in [`config`], and the worked examples in [`run`].

pub mod config;
pub mod csv_io;
pub mod harness;
pub mod manifest;
pub mod params_file;
pub mod run;

pub use config::{load_config, parse_config, RunConfig};
pub use manifest::RunManifest;
pub use run::{run_example, run_method, ExampleOptions};

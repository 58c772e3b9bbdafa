//! Scenario-driven front end for `nls-core`: parse a TOML scenario, check
//! resolution up front, run the experiment and write hashed artifacts.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod manifest;
pub mod runner;
pub mod scenario;

pub use error::{CliError, Result};
pub use manifest::{sha256_hex, Artifacts, Manifest};
pub use runner::{preflight, run, run_path, Outcome, Status};
pub use scenario::{parse_scenario, Kind, Scenario};

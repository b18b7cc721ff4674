//! IO, file formats, rendering and pipeline orchestration on top of [`epfx_core`].
//!
//! * [`ingest`]: market CSV parsing and date helpers
//! * [`model_file`]: versioned JSON model files
//! * [`config`]: run configuration
//! * [`export`]: CSV/JSON tables
//! * [`render`]: SVG figures with companion CSVs
//! * [`parallel`]: multi-threaded dataset explanation
//! * [`pipeline`]: the `train` / `explain` / `report` / `oracle` stages
//! * [`synthetic`]: deterministic synthetic market files for demos and tests

pub mod config;
pub mod error;
pub mod export;
pub mod ingest;
pub mod model_file;
pub mod oracle;
pub mod parallel;
pub mod pipeline;
pub mod render;
pub mod synthetic;

pub use error::{CliError, ErrorKind};

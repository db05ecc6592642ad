//! Seeded experiment harness: strict TOML configs, per-trial CSV rows and a
//! JSON summary per run.

pub mod config;
mod error;
pub mod record;
pub mod run;
pub mod summary;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{Error, Result};
pub use record::{TrialRecord, SCHEMA_VERSION};
pub use run::{run_experiment, RunOutput};
pub use summary::{summarize, Summary};

//! Experiment configuration, orchestration and file output.

mod config;
mod output;
mod run;

pub use config::*;
pub use output::*;
pub use run::*;

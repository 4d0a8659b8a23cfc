//! Command-line front end for the `swpe` simulator: configuration parsing,
//! campaign orchestration and the file formats of its outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;

pub use config::{Angles, CampaignConfig, Sweep};
pub use error::{CliError, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SWPE_OUT_DIR";
/// Output directory when neither `--out`, the environment nor the config names one.
pub const DEFAULT_OUT_DIR: &str = "swpe_out";

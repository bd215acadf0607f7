//! Scenario runner for the soft arm simulator: configuration loading,
//! reference trajectories, closed-loop runs and result files.

pub mod config;
pub mod emit;
pub mod error;
pub mod runner;
pub mod svg;
pub mod trajectory;

pub use config::{load_config, parse_config, SimConfig};
pub use error::{Result, SimError};
pub use runner::{run_scenario, RunLog, Scenario, ScenarioKind};

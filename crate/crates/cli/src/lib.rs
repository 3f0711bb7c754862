//! Scenario files, figure recipes and randomized property suites on top of
//! `regretlab-core`.

pub mod config;
pub mod error;
pub mod output;
pub mod random;
pub mod recipes;
pub mod scenario;
pub mod suites;

pub use config::ScenarioConfig;
pub use error::{CliError, Result};
pub use recipes::{repro, FigureRecipe};
pub use scenario::{run_scenario, Mode};
pub use suites::{property_suite, SuiteReport};

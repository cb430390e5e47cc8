//! Batch experiments for the servo-hydraulic state estimators: configuration,
//! realization ensembles, scoring, and CSV/JSON outputs.

pub mod config;
pub mod manifest;
pub mod output;
pub mod scenario;

pub use config::{load_config, parse_config, ConfigError, Estimator, ScenarioConfig};
pub use manifest::RunManifest;
pub use scenario::{
    compare_models, run_scenario, simulate_plants, ComparisonRow, EstimatorRun, Quantity, ScenarioError,
    ScenarioReport,
};

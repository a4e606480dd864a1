//! Domain types shared by every other module.

mod dataset;
mod params;
mod scenario;

pub use dataset::{validate_dataset, ComplianceVector, DatasetError, ObservedDataset};
pub use params::{
    ChainConfig, ConfigError, ImputationPosture, Method, OutcomeParams, Priors, ProbitParams, StatKind, TestKind,
    TestResult,
};
pub use scenario::{ComplianceLevels, Predictiveness, ScenarioConfig, ETA_C0_GRID, TAU_ALTERNATIVE};

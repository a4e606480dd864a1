//! Fisher randomization tests with posterior predictive p-values for
//! randomized experiments with one-sided noncompliance.
//!
//! The crate covers the whole pipeline: a synthetic data generator
//! ([`dgp`]), a data-augmentation Gibbs sampler that imputes control-arm
//! compliance under four imputation postures ([`gibbs`]), the randomization
//! and model-based tests built on top of it ([`frt`]) and a deterministic,
//! parallel simulation harness ([`sim`]).

pub mod dgp;
pub mod frt;
pub mod gibbs;
pub mod model;
pub mod rng;
pub mod sim;

pub use dgp::{generate, marginal_complier_rate, TruthRecord};
pub use frt::{
    discrepancy, enumerate_frt_pvalue, frt_pp_pvalue, iv_statistic, model_based_pvalue, run_tests, run_tests_observed,
    Alternative, FrtError, TestOptions,
};
pub use gibbs::{run_chain, ChainState, GibbsError, GibbsSampler, TraceWriter};
pub use model::*;
pub use rng::{derive_stream, RngStream};
pub use sim::{
    results_from_csv, results_to_csv, run_grid, run_grid_with, run_replication, GridOutcome, GridSpec, Hypothesis,
    RejectionSummary, Scenario, SimError, RESULTS_HEADER,
};

//! Experiment runner for overlap-identity checks on exactly enumerable spin glasses.
//!
//! A run reads a [`config::RunConfig`], executes the requested checks and
//! writes `results.csv`, `summary.json` and one `*.curve.csv` per residual
//! curve. A sweep repeats a run over system sizes and fits the finite-size
//! trend of every integrated residual into `scaling.csv`. The desk suite
//! evaluates the built-in acceptance criteria.

// `!(x >= 0.0)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod runner;
pub mod suite;
pub mod sweep;

use gg_core::disorder::DisorderError;
use gg_core::gibbs::GibbsError;
use gg_core::identities::IdentityError;
use gg_core::model::ModelError;
use gg_core::observables::ObservableError;
use thiserror::Error;

/// Version string stamped on every result row.
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Version of the `results.csv` and `scaling.csv` layouts.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    /// 2 for configuration problems, 3 for infeasible work, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Infeasible(_) => 3,
            _ => 1,
        }
    }

    pub(crate) fn from_model(e: ModelError) -> Self {
        match e {
            ModelError::RemTooLarge(_) | ModelError::VolumeTooLarge(_) => BenchError::Infeasible(e.to_string()),
            _ => BenchError::Config(e.to_string()),
        }
    }
}

impl From<IdentityError> for BenchError {
    fn from(e: IdentityError) -> Self {
        match e {
            IdentityError::Observable(ObservableError::Parse { .. })
            | IdentityError::Observable(ObservableError::ReplicaIndex { .. })
            | IdentityError::Replicas { .. }
            | IdentityError::StepBelowZero { .. }
            | IdentityError::NonPositiveBeta(_)
            | IdentityError::InvalidRange { .. }
            | IdentityError::GridTooSmall(_)
            | IdentityError::TooFewSamples { .. } => BenchError::Config(e.to_string()),
            _ => BenchError::Infeasible(e.to_string()),
        }
    }
}

impl From<DisorderError> for BenchError {
    fn from(e: DisorderError) -> Self {
        BenchError::Infeasible(e.to_string())
    }
}

impl From<GibbsError> for BenchError {
    fn from(e: GibbsError) -> Self {
        BenchError::Infeasible(e.to_string())
    }
}

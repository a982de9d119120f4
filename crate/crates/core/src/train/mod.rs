//! Datasets, training protocols and run reports.

mod config;
mod dataset;
mod protocol;
mod report;
pub mod synthetic;

use thiserror::Error;

use crate::autodiff::EngineError;
use crate::hypergraph::HypergraphError;
use crate::layers::LayerError;

pub use config::{dataset_overrides, Overrides, Protocol, ReportRule, TrainConfig, WeightDecay};
pub use dataset::{load_dataset, reference_label_rate, stratified_split, DatasetBundle, DatasetJson, FeaturesJson, Split};
pub use protocol::{
    accuracy, carve_validation, cross_entropy, depth_sweep, effective_config, estimated_tape_bytes, evaluate, grid,
    self_loop_ablation, split_seed, sweep, train_inductive, train_on_visible, train_transductive, DepthCell,
    InductiveSplit, SweepProtocol, TrainedRun,
};
pub(crate) use report::render as report_render;
pub use report::{format_table, MeanStd, RunRecord, RunReport, Summary, Timing};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("schema error at '{path}': {message}")]
    Schema { path: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty {0} mask")]
    EmptyMask(String),
    #[error("non-finite loss {loss} at epoch {epoch}; parameter norms: {diagnostics}")]
    NonFiniteLoss { epoch: usize, loss: f64, diagnostics: String },
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Hypergraph(#[from] HypergraphError),
}

impl From<EngineError> for TrainError {
    fn from(e: EngineError) -> Self {
        TrainError::Layer(LayerError::Engine(e))
    }
}

impl TrainError {
    /// True for failures caused by non-finite numbers rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            TrainError::NonFiniteLoss { .. } | TrainError::Layer(LayerError::Engine(EngineError::NonFinite { .. }))
        )
    }
}

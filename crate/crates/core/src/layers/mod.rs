//! Two-stage hypergraph message passing layers and network assembly.
//!
//! Every layer first pools member features into each hyperedge with a mean
//! (`h_e`), then combines the incident hyperedge messages back into each
//! vertex. The variants differ only in that second stage:
//!
//! | variant      | vertex update                                                        |
//! |--------------|----------------------------------------------------------------------|
//! | `UniGcn`     | `1/sqrt(d_i) * sum_e 1/sqrt(d_e) * W h_e` over self-looped incidences |
//! | `UniGat`     | attention-weighted `sum_e a_ie * W h_e`, softmax per vertex           |
//! | `UniGin`     | `W((1 + eps) x_i + sum_e h_e)`                                        |
//! | `UniSage`    | `W(x_i + sum_e h_e)`                                                  |
//! | `UniGcnii`   | GCN propagation with initial residual and identity mapping           |
//! | `UniGcnStar` | GCN propagation, normalization, then `W`                              |

mod context;
mod conv;
pub mod gradcheck;
mod model;
mod spec;

use thiserror::Error;

use crate::autodiff::EngineError;
use crate::hypergraph::HypergraphError;

pub use context::LayerContext;
pub use conv::{
    propagate, stage1_mean, sum_readout, unigat_layer, unigcn_layer, unigcn_star_layer,
    unigcnii_layer, unigin_layer, unisage_layer, GatHead, GatOutput, ATTENTION_SLOPE,
};
pub use model::{Model, Param, ParamGroup, WeightsManifest};
pub use spec::{ModelSpec, Variant};

#[derive(Debug, Error)]
pub enum LayerError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Hypergraph(#[from] HypergraphError),
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("weights file error: {0}")]
    Weights(String),
}

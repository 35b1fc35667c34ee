//! S-SWIM: gradient-free, data-driven sampling of feed-forward spike response
//! model networks for multivariate time-series forecasting.

pub mod config;
pub mod error;
pub mod harness;
pub mod hidden;
pub mod kernels;
pub mod linalg;
pub mod network;
pub mod output;
pub mod rng;
pub mod sampling;
pub mod signal;
pub mod stats;

pub use config::{Architecture, DelayAggregation, NormalizerKind, SswimConfig, WeightCriterion};
pub use error::{Error, Phase, Result};
pub use kernels::{KernelFamily, KernelSpec, PlacedKernel, Rectification};
pub use network::{LayerParams, SnnModel};
pub use sampling::EmbeddingSpec;
pub use signal::{DiscreteSignal, SpikeTrainSet};

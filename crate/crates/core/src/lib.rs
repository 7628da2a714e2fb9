//! Training-free, hardware-aware search over DenseNet-style cell spaces.
//!
//! Architectures are scored by NN-Degree, a topology metric that predicts
//! accuracy through a three-parameter fit, and by linear area, latency and
//! energy models of an in-memory-computing accelerator. A lattice search
//! maximizes the combined objective under hardware constraints.

pub mod arch;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod hwmodel;
pub mod ols;
pub mod optimizer;
pub mod predictor;
pub mod store;
pub mod topology;

pub use arch::{ArchConfig, SpaceSpec};
pub use error::{Error, Result};
pub use hwmodel::{CostModels, HwConfig};
pub use predictor::AccuracyModel;

//! Deterministic federated learning simulator.
//!
//! Clients train small split MLPs (feature extractor + linear classifier) on
//! Dirichlet-partitioned data. Besides the FedAvg, FedProx and FedRS
//! baselines, the server can pair clients with complementary label
//! distributions through their per-class self-evaluation vectors; paired
//! clients swap classifiers halfway through local training and align their
//! features to server-aggregated per-class features (FedCME).
//!
//! Every random draw is derived from the run seed, so a configuration always
//! reproduces the same trajectory regardless of the worker count.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod seed;
pub mod server;
pub mod strategy;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{ParamVector, SplitModel};
pub use server::{Federation, GlobalState, RunConfig, Simulation, Variant};
pub use strategy::ClientConfig;
pub use tensor::Tensor;

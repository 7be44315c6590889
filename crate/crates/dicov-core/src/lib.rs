//! Communication-efficient distributed estimation of sparse inverse
//! covariance (precision) matrices.
//!
//! Data sits sharded across M machines, n Gaussian observations each.
//! Every machine fits an ℓ₁-penalized precision estimate ([`glasso`]),
//! removes the shrinkage bias with a one-step correction, and transmits
//! only its most significant entries within a bandwidth budget of B
//! logical matrix cells ([`debias`]). A central hub averages the sparse
//! updates — absent entries count as zero — and applies a final
//! significance threshold ([`hub`]). One round of communication per
//! machine suffices; the result approaches the accuracy of pooling all
//! the data while sending a small fraction of the p² entries.
//!
//! The crate also houses the supporting cast: dense/sparse symmetric
//! matrix primitives ([`matrix`]), a synthetic chain-graph data generator
//! with per-machine random streams ([`datagen`]), error and support
//! metrics ([`metrics`]), the binary wire protocol realizing the single
//! round over real sockets ([`wire`]), and a seeded experiment harness
//! ([`experiment`]).

pub mod datagen;
pub mod debias;
pub mod error;
pub mod experiment;
pub mod glasso;
pub mod hub;
pub mod matrix;
pub mod metrics;
pub mod wire;

pub use datagen::{chain_precision, sample_gaussian, split_samples, GroundTruthModel};
pub use debias::{bandwidth_threshold, debias, machine_estimate, variance_estimates, SparseUpdate};
pub use error::{Error, Result};
pub use experiment::{run_experiment, sweep_beta, sweep_machines, Estimator, ExperimentConfig};
pub use glasso::{graphical_lasso, kkt_residual, GlassoSolution};
pub use hub::{aggregate, final_threshold, full_estimators, hub_variance, naive_estimator, HubEstimate};
pub use matrix::{
    cholesky, empirical_covariance, invert_spd, DataMatrix, DenseSymMatrix, SparseSymMatrix,
};
pub use metrics::{frobenius_sq_error, linf_error, support_metrics, MetricsRecord};
pub use wire::{decode_update, encode_update, hub_serve, worker_run};

//! Point-cloud module pipelines with deferred neighbor aggregation.
//!
//! A module samples centroids from a cloud, finds each centroid's k nearest
//! neighbors, and produces one output feature row per centroid. The classic
//! ordering gathers neighbor offsets first and runs the shared MLP over
//! every gathered row. This crate also implements the reordered pipeline:
//! run the MLP once per input point, then aggregate in feature space with a
//! max and a single subtraction per centroid. The reordering cuts MLP work
//! by the neighborhood redundancy factor and is exact when the activation
//! is the identity.
//!
//! The crate has four parts:
//!
//! * [`pipeline`]: both orderings, network chaining, divergence reports.
//! * [`costmodel`]: closed-form MAC and byte counters plus a critical-path
//!   estimate.
//! * [`ausim`]: a cycle-approximate model of a banked aggregation unit with
//!   multi-round bank conflict resolution and column partitioning.
//! * [`formats`]: text clouds, the PCF1 matrix container, the NIT1 packed
//!   neighbor table, and the TOML network description.
//!
//! Everything is deterministic: randomness flows from explicit seeds
//! through a documented generator ([`rng::Xorshift64Star`]), so identical
//! inputs give identical outputs on every platform.

pub mod ausim;
pub mod costmodel;
pub mod error;
pub mod formats;
pub mod geometry;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod tensor;

pub use ausim::{
    bank_of, functional_aggregate_via_sim, partition_pft, schedule_rounds, simulate, AuConfig,
    AuStats,
};
pub use costmodel::{
    activation_footprint, cost_report, count_macs, critical_path, CostReport, StageCosts,
};
pub use error::{Error, Result};
pub use formats::{
    load_network_toml, nit_file_bytes, nit_stream_bytes, parse_network_toml, read_cloud,
    read_matrix_pcf1, read_nit, write_cloud, write_matrix_pcf1, write_nit, LoadedNetwork,
};
pub use geometry::{
    knn_search, knn_search_in, sample_centroids, NeighborIndexTable, PointCloud,
};
pub use pipeline::{
    aggregate_offsets, divergence_between, divergence_report, run_module_baseline,
    run_module_delayed, run_network, run_network_traced, DelayedRun, DivergenceReport, Mode,
    ModuleConfig, ModuleTrace, NetworkConfig, NetworkTrace, PointFeatureTable, SearchSpace,
};
pub use rng::{derive_seed, Xorshift64Star};
pub use synth::{synth_cloud, CloudShape};
pub use tensor::{
    matmul, mlp_forward, reduce_max_rows, rel_diff, sub_rowwise, Activation, Mat, Mlp,
};

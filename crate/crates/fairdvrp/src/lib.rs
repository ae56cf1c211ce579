//! Dynamic vehicle routing with two-sided fairness.
//!
//! This crate implements a rolling-horizon dispatch engine for two scenarios
//! (parking non-compliance capture and ride-hailing) together with 2FairGA, a
//! genetic algorithm that balances total utility, service-provider fairness
//! and customer fairness. It also ships greedy and plain-GA baselines, a
//! constrained K-means provider placement step, a synthetic dataset
//! generator, CSV ingestion for real datasets, and a benchmark harness that
//! writes reproducible metric reports.
//!
//! The main entry points are:
//!
//! - [`data::generate_synthetic`] — build a lattice world and a Poisson
//!   violation stream.
//! - [`simulator::run_simulation`] — drive one scenario minute by minute with
//!   a chosen dispatch algorithm and produce a [`metrics::MetricsReport`].
//! - [`baselines::AlgorithmKind`] — every shipped algorithm, including the
//!   ablation variants of 2FairGA.
//! - [`experiment::run_compare`] — algorithm × fleet-size × seed grids with
//!   `results.csv` output.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod baselines;
pub mod data;
pub mod encoding;
pub mod error;
pub mod experiment;
pub mod fairga;
pub mod metrics;
pub mod sampling;
pub mod simulator;
pub mod world;

pub use error::{Error, Result};

//! Langevin dynamics for potentials whose gradient is set-valued on a
//! finite exceptional set.
//!
//! The crate is organised around one-dimensional piecewise polynomial
//! potentials (plus a small ReLU-network posterior for the high-dimensional
//! case):
//!
//! * [`potential`] evaluates potentials, their Clarke subdifferentials and
//!   single-valued selections of the drift.
//! * [`sampler`] runs subgradient ULA, random-walk Metropolis and MALA chains.
//! * [`gibbs`] is the exact stationary oracle `exp(-f/sigma)/Z`.
//! * [`fokker_planck`] evolves the density with a conservative finite-volume
//!   scheme whose grid has a face on every breakpoint.
//! * [`jko`] runs the minimizing-movement scheme in quantile coordinates.
//! * [`metrics`] holds Wasserstein distances, histograms and free-energy traces.
//!
//! Data-parallel loops (independent chains, batched CDF/quantile evaluation)
//! go through [`par`], which uses rayon when the `parallel` feature is on and
//! plain iterators otherwise. Results are identical either way.

pub mod fokker_planck;
pub mod gibbs;
pub mod jko;
pub mod metrics;
pub mod par;
pub mod potential;
pub mod quad;
pub mod rng;
pub mod sampler;
pub mod tridiag;

pub use potential::{
    example_potential, PiecewisePotential1D, Potential, ReluNetPotential, SelectionRule,
    SubdiffValue,
};
pub use sampler::{Chain, ChainConfig, SamplerKind};
pub use gibbs::GibbsDensity;
pub use fokker_planck::{DensityField, Grid1D};
pub use metrics::Histogram;
pub use jko::{JkoRun, QuantileField};

//! Simulation and verification laboratory for mean-field particle systems
//! with many-body (U-statistic) interactions.
//!
//! The crate simulates the first-order and kinetic interacting particle
//! systems driven by a confinement potential plus symmetric k-body kernels,
//! solves the limiting nonlinear Fokker-Planck and Vlasov-Fokker-Planck
//! equations on 1D grids, evaluates the free-energy / entropy / Fisher
//! functionals of the mean-field limit, and packages quantitative
//! exponential-ergodicity experiments behind a CLI.
//!
//! Module map:
//! - [`potentials`]: model definitions and the assumption audit
//! - [`interaction`]: U-statistics, Hamiltonians, measure-polynomial calculus
//! - [`particles`]: stochastic integrators and invariant-measure sampling
//! - [`measures`]: grid divergences, Wasserstein distances, spectral gaps
//! - [`meanfield`]: limit functionals, fixed point, PDE flows, Cesaro limits
//! - [`experiments`]: decay fits and experiment harnesses

pub mod error;
pub mod experiments;
pub mod grid;
pub mod interaction;
pub mod meanfield;
pub mod measures;
pub mod particles;
pub mod potentials;
pub mod rng;

pub use error::{Error, Result};

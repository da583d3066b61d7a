//! Bayes factor asymptotics for competing time-series models.
//!
//! The crate simulates an AR(1) truth, computes log marginal likelihoods of
//! competing models by deterministic quadrature, estimates Kullback–Leibler
//! divergence rates (closed form and Monte Carlo), and checks that
//! `(1/n) log B_n` settles at `h_2(Theta_2) - h_1(Theta_1)` along individual
//! sample paths.
//!
//! Modules:
//! - [`model`]: domain types and the model contract
//! - [`ar1`]: simulation, likelihoods, closed-form rates, ergodic averages
//! - [`marginal`]: log marginal likelihood quadrature
//! - [`klrate`]: Monte Carlo KL rates and essential infima
//! - [`asymptotics`]: Bayes factor trajectories and limit estimation
//! - [`assumptions`]: finite-n diagnostics for the consistency conditions
//! - [`harness`]: configuration, suites, run records and commands

// `!(x > 0.0)` is used on purpose: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ar1;
pub mod assumptions;
pub mod asymptotics;
pub mod error;
pub mod harness;
pub mod klrate;
pub mod marginal;
pub mod model;
pub mod numeric;
pub mod rng;

pub use error::{Error, Result};
pub use model::{
    make_ar1_model, DivergenceRate, Interval, ModelFamily, ModelSpec, ParamBox, ParameterDomain, PriorKind, PriorSpec, RateMethod, Sample,
    SigmaSpec, Theta, TimeSeries, TrueProcess,
};

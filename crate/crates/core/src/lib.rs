//! Exact-enumeration toolkit for Gaussian spin glasses with subset interactions.
//!
//! A model is a list of interacting site subsets `X` with coupling variances
//! `Δ²_X`; the Hamiltonian is `H(σ) = -Σ_X J_X σ_X` with independent centered
//! Gaussian couplings. Everything downstream works by enumerating all `2^N`
//! configurations of one disorder realization and averaging over disorder
//! either by Monte Carlo or by tensor Gauss-Hermite quadrature.
//!
//! - [`model`]: interaction families, covariance, stability constants.
//! - [`disorder`]: coupling samples, quadrature, quenched averages, Wick checks.
//! - [`gibbs`]: partition function, energies, single-replica expectations, exact sampling.
//! - [`observables`]: overlap monomials and their replica expectations.
//! - [`identities`]: overlap identities, their building blocks, and variance bounds.
//!
//! The crate is `no_std` with `alloc` when built without the default `std`
//! feature. The `parallel` feature distributes disorder samples over a rayon
//! pool; reductions always run in a fixed pairwise order so results do not
//! depend on the number of threads.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x >= 0.0)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod math;
mod parallel;

pub mod disorder;
pub mod gibbs;
pub mod identities;
pub mod model;
pub mod observables;
pub mod stats;

pub use disorder::{DisorderSample, QuenchedEstimate, Scheme};
pub use gibbs::GibbsTable;
pub use model::{InteractionFamily, Preset, SpinConfiguration};
pub use observables::OverlapMonomial;

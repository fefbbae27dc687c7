//! Dynamic Stackelberg mean-field game laboratory.
//!
//! A government (leader) sets tax-and-spend policy for an economy of `N`
//! households (followers). The crate provides the economy simulator, the
//! game-theoretic metrics, a small reverse-mode network stack, the
//! leader-follower mean-field actor-critic trainer, classical tax
//! baselines, and the experiment runner used by the `smfg` binary.
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod econ;
pub mod error;
pub mod mfg;
pub mod nn;
pub mod runner;
pub mod seed;
pub mod smfrl;
pub mod stats;

pub use error::{Error, Result};

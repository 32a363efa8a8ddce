//! Mutual-information probing of frozen representations.
//!
//! A probe `T(y, h) = onehot(y) · FC(h)` trained on layer features is a
//! variational lower-bound estimator of `I(Y; H)`. This crate provides the
//! pieces needed to run and audit that idea end to end:
//!
//! - [`numerics`]: dense matrices, a fixed-algorithm seeded RNG, stable
//!   log-domain reductions, AdamW and a finite-difference gradient checker.
//! - [`probes`]: linear, MLP and network-suffix probes with hand-derived
//!   backward passes, plus the toy base network they attach to.
//! - [`estimators`]: cross-entropy, MINE and InfoNCE estimates, label
//!   entropy and accuracy.
//! - [`trainer`]: probe training with early stopping on validation MI and
//!   the per-layer sweep driver.
//! - [`oracle`]: enumerable Markov-chain pipelines with exact MI, DPI
//!   audits, and synthetic dataset generators.
//! - [`bounds`]: harnesses for the margin bound and the accuracy/MI bounds.
//!
//! The crate is `no_std` (with `alloc`). All logarithms are natural, so every
//! information quantity is in nats. Transcendental functions go through
//! `libm`, which keeps results bitwise reproducible across platforms.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod numerics;
pub mod oracle;
pub mod probes;
pub mod trainer;

pub use error::{Error, Result};
pub use estimators::{LabelDistribution, MIEstimate, Objective};
pub use numerics::{AdamConfig, AdamState, Matrix, Rng};
pub use probes::{ProbeKind, ProbeSpec, ProbeState, ToyNetwork};

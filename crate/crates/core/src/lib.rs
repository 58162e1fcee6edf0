//! Policy-entropy out-of-distribution classification.
//!
//! A trained policy-gradient agent tends to become confident (low action
//! entropy) on states it saw during training and stays uncertain elsewhere.
//! This crate contains everything needed to test that idea end to end without
//! touching the filesystem:
//!
//! - [`env`]: a seed-deterministic procedural gridworld, "CorridorWorld".
//! - [`nn`]: a small dense network with hand-written backpropagation and Adam.
//! - [`ppo`]: a PPO-clip trainer with GAE and an entropy bonus.
//! - [`peoc`]: the entropy classifier built from a policy snapshot.
//! - [`baselines`]: autoencoder and k-NN one-class baselines.
//! - [`evalx`]: splits, ROC curves with tie handling, AUC and aggregation.
//! - [`bench`]: the per-repeat benchmark pipeline and seed derivation.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;

pub mod baselines;
pub mod bench;
pub mod env;
pub mod error;
pub mod evalx;
pub mod nn;
pub mod peoc;
pub mod ppo;
pub mod rng;

pub use error::{Error, Result};

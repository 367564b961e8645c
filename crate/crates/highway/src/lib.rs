//! Highway overtaking simulator and deep-RL training harness.
//!
//! The crate is organized around a deterministic microscopic traffic
//! simulation ([`sim`]), the rule-based driver stack used by surrounding
//! vehicles ([`driver`]), a discrete-action MDP facade ([`env`]), a small
//! dense network with exact backpropagation ([`neural`]), the learning
//! algorithms ([`agent`]), and the experiment harness
//! ([`config`] / [`commands`] / file formats).
//!
//! See the runnable programs in `examples/` for end-to-end usage; the
//! `highway` binary exposes the same functionality as subcommands.

pub mod agent;
pub mod commands;
pub mod config;
pub mod driver;
pub mod env;
pub mod error;
pub mod gridworld;
pub mod metrics;
pub mod neural;
pub mod sim;
pub mod trace;
pub mod weights;

pub use error::{Error, Result};

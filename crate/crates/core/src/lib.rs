//! Deep-reinforcement-learning active flow control of a cylinder wake.
//!
//! - [`flow`]: immersed-boundary Navier-Stokes solver with synthetic jets,
//!   force, pressure and witness-point diagnostics.
//! - [`agent`]: PPO actor-critic over the jet flow rate.
//! - [`broker`]: in-memory tensor store over TCP.
//! - [`orchestrator`]: baseline runs, training episodes, evaluation and
//!   statistics.

// `!(x > 0.0)` is used deliberately so that NaN fails validation, and
// index loops are kept where they mirror the stencil formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod agent;
pub mod broker;
pub mod flow;
pub mod orchestrator;
pub mod par;

//! In-memory key -> tensor store over TCP, with blocking reads.
//!
//! Solver workers and the trainer exchange observations, actions and
//! rewards through it; any language that can speak the frame format in
//! [`wire`] can take either role.

pub mod client;
pub mod server;
pub mod wire;

pub use client::{Client, ClientError, DEFAULT_GET_TIMEOUT};
pub use server::{serve, BrokerHandle, Store};
pub use wire::{DType, Frame, Opcode, Tensor, WireError};

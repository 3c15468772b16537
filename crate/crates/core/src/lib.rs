//! Joint sparse support recovery over sensor networks: centralized and
//! decentralized greedy pursuit, message accounting, and analytical bounds
//! for fusion over a multiple access channel.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod combin;
pub mod decentralized;
pub mod error;
pub mod greedy;
pub mod harness;
pub mod mac;
pub mod metrics;
pub mod network;
pub mod rng;
pub mod sensing;

pub use error::{Error, Result};

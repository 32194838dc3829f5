//! MMSE transceiver design for two-hop MIMO amplify-and-forward relays,
//! Monte Carlo outage estimation, and closed-form diversity predictions.

pub mod channel;
pub mod cli;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod simulator;
pub mod theory;
pub mod transceiver;

pub use error::{Error, Result};

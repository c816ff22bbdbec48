//! Capacity and capacity-achieving transmit covariance for ergodic MIMO
//! channels with additive white Gaussian noise.
//!
//! Rates are in nats per complex symbol. The SNR `γ` is folded into
//! `S = γ H†H` and covariances are normalized to unit trace.

pub mod analysis;
pub mod channels;
pub mod covopt;
pub mod error;
pub mod linalg;
pub mod montecarlo;
pub mod waterfill;

pub use error::{Error, Result};

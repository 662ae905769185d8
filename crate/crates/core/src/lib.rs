//! Joint source and relay design for multiuser MIMO amplify-and-forward relay
//! systems under the MSE criterion.

pub mod baselines;
pub mod channel;
pub mod downlink;
pub mod error;
pub mod linalg;
pub mod montecarlo;
pub mod qcqp;
pub mod relay;
pub mod sdp;
pub mod trace;
pub mod uplink;
pub mod waterfill;

pub use error::{Error, Result};

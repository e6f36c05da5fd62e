//! Wi-Fi 7 multi-link operation lab: an analytic saturation-throughput model,
//! an epoch-driven CSMA/CA simulator, reference policies and a step
//! environment served over newline-delimited JSON.

pub mod baselines;
pub mod bianchi;
pub mod channel;
pub mod config;
pub mod env;
pub mod mac;
pub mod matrix;
pub mod sim;

pub use config::{config_hash, ConfigFile};
pub use mac::{IcwMatrix, NetworkConfig, PolicyMatrix, RawAction};
pub use matrix::Matrix;

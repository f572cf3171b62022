//! Learned generative models of an OFDM command link for jammer detection,
//! characterization, suppression, classification, modulation conversion and
//! anti-jamming resource selection.

pub mod abnormality;
pub mod active;
pub mod classifier;
pub mod error;
pub mod gaussian;
pub mod harness;
pub mod jammer_ops;
pub mod mjpf;
pub mod radio;
pub mod transport;
pub mod vocab;

pub use error::{Error, Result};

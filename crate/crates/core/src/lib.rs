//! Codec and link-level building blocks for grant-free massive access with
//! second-order Reed-Muller sequences.
//!
//! - [`rm_core`]: exact pair/sequence algebra and the Walsh-Hadamard
//!   transform.
//! - [`codec`]: payload bits to transmit waveforms (full-frame, two-slot
//!   sparse, and patched encodings).
//! - [`decoder`]: layered WHT detection with successive interference
//!   cancellation, list decoding, and the slotted decoder with message
//!   passing.
//! - [`channel`]: Poisson/uniform device fields, Rayleigh fading with path
//!   loss, and received-signal synthesis.

pub mod channel;
pub mod codec;
pub mod decoder;
mod error;
pub mod rm_core;

pub use error::Error;

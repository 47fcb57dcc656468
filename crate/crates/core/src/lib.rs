//! Preamble-embedded AP authentication: sliced signature chains, channel
//! coding, a bit-flip PHY model, relay timing detection, protocol state
//! machines with a bounded model checker, and PCA frame fingerprinting.

pub mod bits;
pub mod codec;
pub mod harness;
pub mod numfmt;
pub mod phych;
pub mod protofsm;
pub mod sigchain;
pub mod sigpca;
pub mod timebound;

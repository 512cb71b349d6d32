//! Software acoustic modem.
//!
//! Everything downstream of the transducer is done in software: a wideband
//! zero-padded OFDM layer for payload traffic, a chirp-spread-spectrum layer
//! for robust low-rate control, channel probing (PN trains and swept sines),
//! a half-duplex stop-and-wait link layer, and subcarrier-selection rate
//! adaptation driven by measured per-subcarrier error statistics.
//!
//! The crate is organized bottom-up:
//!
//! * [`signal`]: sample types, up/down conversion, resampling, reference
//!   sequences, correlation, raw I/Q file exchange
//! * [`fec`]: terminated convolutional code, soft Viterbi, seeded interleaver
//! * [`ofdm`]: the high-rate physical layer
//! * [`css`]: the chirp physical layer
//! * [`channel`]: propagation models and the shared-medium simulator
//! * [`probe`]: channel sounding built on the probe waveforms
//! * [`link`]: MAC framing and the ARQ state machines
//! * [`rate_adapt`]: error profiles and subcarrier selection
//! * [`experiments`]: reproducible experiment runners behind the `modemctl` CLI

pub mod channel;
pub mod css;
pub mod error;
pub mod experiments;
pub mod fec;
pub mod link;
pub mod ofdm;
pub mod probe;
pub mod rate_adapt;
pub mod signal;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

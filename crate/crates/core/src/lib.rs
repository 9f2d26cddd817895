//! Unitary-precoded single-carrier (USC) waveforms over doubly-selective channels.
//!
//! The crate covers the whole baseband chain:
//!
//! - [`transforms`]: the unitary precoders (identity, DFT, WHT, DCT) and the
//!   row-column interleaver that maps the delay-time grid to samples.
//! - [`modem`]: frame layout with an embedded pilot, Gray QAM, and the
//!   modulators/demodulators for OTFS, OTSM, DCT-USC, SC and OFDM.
//! - [`channel`]: EVA multipath with Jakes Doppler, the discrete delay-time
//!   channel and its per-block banded matrices.
//! - [`chanest`]: embedded-pilot estimation and interpolation of the
//!   delay-time channel.
//! - [`detect`]: single-tap, block MMSE and matched-filtered Gauss-Seidel
//!   receivers.
//! - [`bench`]: the seeded Monte-Carlo BER runner behind the `usc-bench` CLI.

pub mod bench;
pub mod chanest;
pub mod channel;
pub mod detect;
mod error;
pub mod grid;
pub mod modem;
pub mod transforms;
pub mod validate;

#[cfg(test)]
mod properties;

pub use error::{Error, Result};
pub use grid::Grid;

/// Complex sample type used throughout.
pub type C64 = num_complex::Complex64;

//! Doubly-selective multipath channel: EVA path generation with Jakes
//! Doppler, the discrete delay-time channel `ḡ[l,q]`, AWGN, and the
//! per-block banded channel matrices of a zero-padded frame.

mod blocks;
mod delay_time;
mod eva;

pub use blocks::{block_matrices, BandedLower, BlockChannelMatrix};
pub use delay_time::{apply_channel, discrete_channel, DelayTimeChannel};
pub use eva::{
    doppler_from_speed, gen_paths_eva, gen_paths_eva_with, Path, PathModel, PathSet,
    SPEED_OF_LIGHT, EVA_PROFILE,
};

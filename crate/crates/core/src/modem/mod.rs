//! Frame layout, QAM mapping and the modulation chains.

mod config;
mod frame;
mod modulation;
mod qam;

pub use config::{FrameConfig, PilotConfig, Scheme};
pub use frame::{build_frame, CellRole, FrameLayout, SymbolGrid};
pub use modulation::{
    demodulate, modulate, multicarrier_modulate, usc_demodulate, usc_modulate, Waveform,
};
pub use qam::{qam_demap, qam_map, qam_slice, qam_slice_labels, QamOrder};

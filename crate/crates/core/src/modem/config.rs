use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::qam::QamOrder;
use crate::transforms::{build_unitary, UnitaryKind};
use crate::{Error, Result};

/// Waveform family, resolved to its `(U_F, U_T)` precoder pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    Otfs,
    Otsm,
    DctUsc,
    Sc,
    Ofdm,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Otfs,
        Scheme::Otsm,
        Scheme::DctUsc,
        Scheme::Sc,
        Scheme::Ofdm,
    ];

    /// `(U_F, U_T)` kinds.
    pub fn precoders(self) -> (UnitaryKind, UnitaryKind) {
        match self {
            Scheme::Otfs => (UnitaryKind::Dft, UnitaryKind::InverseDft),
            Scheme::Otsm => (UnitaryKind::Dft, UnitaryKind::Wht),
            Scheme::DctUsc => (UnitaryKind::Dft, UnitaryKind::Dct),
            Scheme::Sc => (UnitaryKind::Dft, UnitaryKind::Identity),
            Scheme::Ofdm => (UnitaryKind::Identity, UnitaryKind::Identity),
        }
    }

    /// True when `U_F = F_M`, i.e. the 1-D time-precoded path applies.
    pub fn is_usc(self) -> bool {
        self.precoders().0 == UnitaryKind::Dft
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Otfs => "OTFS",
            Scheme::Otsm => "OTSM",
            Scheme::DctUsc => "DCT_USC",
            Scheme::Sc => "SC",
            Scheme::Ofdm => "OFDM",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "OTFS" => Ok(Scheme::Otfs),
            "OTSM" => Ok(Scheme::Otsm),
            "DCT_USC" | "DCT" => Ok(Scheme::DctUsc),
            "SC" => Ok(Scheme::Sc),
            "OFDM" => Ok(Scheme::Ofdm),
            other => Err(Error::config(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Embedded pilot position and amplitude `|x_p|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotConfig {
    pub m_p: usize,
    pub n_p: usize,
    pub amplitude: f64,
}

/// Frame dimensions, waveform and physical parameters.
///
/// The last `guard_len` delay rows of every block form the zero-padded guard
/// that also hosts the pilot, so a frame is exactly `M·N` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    /// Delay bins per block (`M`).
    pub m: usize,
    /// Blocks / time slots (`N`).
    pub n: usize,
    /// Subcarrier spacing in Hz; the block duration is `1/Δf`.
    pub delta_f: f64,
    pub carrier_hz: f64,
    pub guard_len: usize,
    pub l_max: usize,
    pub scheme: Scheme,
    pub qam: QamOrder,
    pub pilot: PilotConfig,
}

impl FrameConfig {
    /// Frame with default pilot placement (`m_p = M − L_G + l_max`, `n_p = 0`,
    /// `|x_p| = √N`), 15 kHz spacing, 4 GHz carrier and QPSK.
    pub fn new(m: usize, n: usize, guard_len: usize, l_max: usize, scheme: Scheme) -> Self {
        FrameConfig {
            m,
            n,
            delta_f: 15e3,
            carrier_hz: 4e9,
            guard_len,
            l_max,
            scheme,
            qam: QamOrder::Qpsk,
            pilot: PilotConfig {
                m_p: (m + l_max).saturating_sub(guard_len),
                n_p: 0,
                amplitude: (n as f64).sqrt(),
            },
        }
    }

    /// `M = N = 64`, `l_max = 3`, `L_G = 16` (48 of 64 delay rows carry data).
    pub fn standard(scheme: Scheme) -> Self {
        FrameConfig::new(64, 64, 16, 3, scheme)
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_qam(mut self, qam: QamOrder) -> Self {
        self.qam = qam;
        self
    }

    /// Pilot amplitude `√N · 10^(boost/20)`.
    pub fn with_pilot_boost_db(mut self, boost_db: f64) -> Self {
        self.pilot.amplitude = (self.n as f64).sqrt() * 10f64.powf(boost_db / 20.0);
        self
    }

    pub fn pilot_boost_db(&self) -> f64 {
        20.0 * (self.pilot.amplitude / (self.n as f64).sqrt()).log10()
    }

    pub fn frame_len(&self) -> usize {
        self.m * self.n
    }

    /// First guard row, `M − L_G`.
    pub fn guard_start(&self) -> usize {
        self.m - self.guard_len
    }

    pub fn sample_rate(&self) -> f64 {
        self.m as f64 * self.delta_f
    }

    /// Frame duration `N·T` with `T = 1/Δf`.
    pub fn frame_duration(&self) -> f64 {
        self.n as f64 / self.delta_f
    }

    pub fn data_cells(&self) -> usize {
        self.guard_start() * self.n
    }

    pub fn data_bits(&self) -> usize {
        self.data_cells() * self.qam.bits_per_symbol()
    }

    /// Fraction of the `M·N` grid carrying data.
    pub fn spectral_efficiency(&self) -> f64 {
        self.data_cells() as f64 / self.frame_len() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::config("M and N must be positive"));
        }
        if self.guard_len >= self.m {
            return Err(Error::config(format!(
                "M = {} must exceed L_G = {}",
                self.m, self.guard_len
            )));
        }
        if self.guard_len < 2 * self.l_max + 1 {
            return Err(Error::config(format!(
                "L_G = {} must be at least 2·l_max + 1 = {}",
                self.guard_len,
                2 * self.l_max + 1
            )));
        }
        if !(self.delta_f > 0.0 && self.delta_f.is_finite()) {
            return Err(Error::config("subcarrier spacing must be positive"));
        }
        if !(self.carrier_hz >= 0.0 && self.carrier_hz.is_finite()) {
            return Err(Error::config("carrier frequency must be non-negative"));
        }
        let (_, u_t) = self.scheme.precoders();
        if u_t == UnitaryKind::Wht && !self.n.is_power_of_two() {
            return Err(Error::config(format!(
                "{} needs N to be a power of two, got {}",
                self.scheme, self.n
            )));
        }
        let lo = self.m - self.guard_len + self.l_max;
        let hi = self.m - 1 - self.l_max;
        let p = &self.pilot;
        if p.m_p < lo || p.m_p > hi {
            return Err(Error::config(format!(
                "pilot delay index m_p = {} outside [{lo}, {hi}]",
                p.m_p
            )));
        }
        if p.n_p >= self.n {
            return Err(Error::config(format!(
                "pilot row n_p = {} must be below N = {}",
                p.n_p, self.n
            )));
        }
        if !(p.amplitude > 0.0 && p.amplitude.is_finite()) {
            return Err(Error::config("pilot amplitude must be positive"));
        }
        Ok(())
    }

    /// Embedded-pilot estimation divides by `U_T[n_p, n]` for every `n`.
    pub fn check_pilot_row(&self) -> Result<()> {
        let (_, u_t) = self.scheme.precoders();
        let u = build_unitary(u_t, self.n)?;
        match u.row(self.pilot.n_p).iter().position(|v| v.norm() < 1e-12) {
            Some(col) => Err(Error::ZeroPrecoderEntry {
                row: self.pilot.n_p,
                col,
            }),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_of_precoders() {
        use UnitaryKind::*;
        assert_eq!(Scheme::Ofdm.precoders(), (Identity, Identity));
        assert_eq!(Scheme::Sc.precoders(), (Dft, Identity));
        assert_eq!(Scheme::Otfs.precoders(), (Dft, InverseDft));
        assert_eq!(Scheme::Otsm.precoders(), (Dft, Wht));
        assert_eq!(Scheme::DctUsc.precoders(), (Dft, Dct));
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
    }

    #[test]
    fn standard_config_valid() {
        for s in Scheme::ALL {
            let cfg = FrameConfig::standard(s);
            cfg.validate().unwrap();
            assert_eq!(cfg.pilot.m_p, 51);
            assert_eq!(cfg.spectral_efficiency(), 48.0 / 64.0);
            assert!((cfg.sample_rate() - 960e3).abs() < 1e-9);
        }
    }

    #[test]
    fn small_example_config_valid() {
        let mut cfg = FrameConfig::new(8, 2, 3, 1, Scheme::Otsm);
        cfg.pilot.m_p = 6;
        cfg.validate().unwrap();
        assert_eq!(cfg.data_cells(), 10);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(FrameConfig::new(4, 2, 4, 1, Scheme::Otfs).validate().is_err());
        assert!(FrameConfig::new(8, 2, 2, 1, Scheme::Otfs).validate().is_err());
        assert!(FrameConfig::new(16, 6, 7, 3, Scheme::Otsm).validate().is_err());
        assert!(FrameConfig::new(16, 6, 7, 3, Scheme::Otfs).validate().is_ok());
        let mut cfg = FrameConfig::new(16, 4, 7, 3, Scheme::Otfs);
        cfg.pilot.m_p = 13;
        assert!(cfg.validate().is_err());
        cfg.pilot.m_p = 12;
        cfg.validate().unwrap();
        cfg.pilot.n_p = 4;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn pilot_row_check() {
        assert!(FrameConfig::standard(Scheme::Otfs).check_pilot_row().is_ok());
        assert!(FrameConfig::standard(Scheme::Otsm).check_pilot_row().is_ok());
        assert!(FrameConfig::standard(Scheme::DctUsc).check_pilot_row().is_ok());
        assert!(matches!(
            FrameConfig::standard(Scheme::Sc).check_pilot_row(),
            Err(Error::ZeroPrecoderEntry { .. })
        ));
    }

    #[test]
    fn pilot_boost_round_trip() {
        let cfg = FrameConfig::standard(Scheme::Otfs).with_pilot_boost_db(6.0);
        assert!((cfg.pilot_boost_db() - 6.0).abs() < 1e-12);
        assert!((FrameConfig::standard(Scheme::Otfs).pilot.amplitude - 8.0).abs() < 1e-15);
    }
}

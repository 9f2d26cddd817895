use std::f64::consts::PI;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::modem::FrameConfig;
use crate::{Error, Result, C64};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Extended Vehicular A power-delay profile (3GPP TS 36.104, Annex B.2):
/// `(excess delay in ns, relative power in dB)`.
pub const EVA_PROFILE: [(f64, f64); 9] = [
    (0.0, 0.0),
    (30.0, -1.5),
    (150.0, -1.4),
    (310.0, -3.6),
    (370.0, -0.6),
    (710.0, -9.1),
    (1090.0, -7.0),
    (1730.0, -12.0),
    (2510.0, -16.9),
];

/// One propagation path: gain `h_i`, integer delay tap `l_i` and normalized
/// Doppler `κ_i = ν_i·N·T` (fractional values allowed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub gain: C64,
    pub delay: usize,
    pub doppler: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub paths: Vec<Path>,
}

impl PathSet {
    pub fn new(paths: Vec<Path>) -> Self {
        PathSet { paths }
    }

    pub fn single(gain: C64, delay: usize, doppler: f64) -> Self {
        PathSet::new(vec![Path {
            gain,
            delay,
            doppler,
        }])
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn total_power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }

    pub fn max_delay(&self) -> usize {
        self.paths.iter().map(|p| p.delay).max().unwrap_or(0)
    }
}

/// How EVA paths become [`Path`]s once delays are rounded to integer taps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum PathModel {
    /// Each of the nine EVA paths keeps its own gain and Doppler draw; paths
    /// landing on the same tap add up as a sum of sinusoids.
    #[default]
    PerPath,
    /// Paths on the same tap are merged by power addition into a single path
    /// with one gain and one Doppler draw.
    PerTap,
    /// A single unit-gain, zero-delay, zero-Doppler path (noise-only channel).
    Awgn,
}

impl PathModel {
    pub fn name(self) -> &'static str {
        match self {
            PathModel::PerPath => "per-path",
            PathModel::PerTap => "per-tap",
            PathModel::Awgn => "awgn",
        }
    }
}

impl FromStr for PathModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "per-path" | "per_path" => Ok(PathModel::PerPath),
            "per-tap" | "per_tap" => Ok(PathModel::PerTap),
            "awgn" => Ok(PathModel::Awgn),
            other => Err(Error::config(format!("unknown path model '{other}'"))),
        }
    }
}

/// Maximum Doppler shift `v·f_c/c` in Hz for a speed in km/h.
pub fn doppler_from_speed(speed_kmh: f64, carrier_hz: f64) -> f64 {
    speed_kmh / 3.6 * carrier_hz / SPEED_OF_LIGHT
}

/// EVA realization with the default [`PathModel::PerPath`].
pub fn gen_paths_eva<R: Rng + ?Sized>(nu_max_hz: f64, cfg: &FrameConfig, rng: &mut R) -> PathSet {
    gen_paths_eva_with(nu_max_hz, cfg, PathModel::PerPath, rng)
}

/// Draws an EVA channel: delays rounded to taps at `M·Δf` and clipped to
/// `l_max`, complex Gaussian gains with profile powers normalized to unit sum,
/// and `ν_i = ν_max·cos θ_i` with `θ_i ~ U(−π, π)`.
pub fn gen_paths_eva_with<R: Rng + ?Sized>(
    nu_max_hz: f64,
    cfg: &FrameConfig,
    model: PathModel,
    rng: &mut R,
) -> PathSet {
    if model == PathModel::Awgn {
        return PathSet::single(C64::new(1.0, 0.0), 0, 0.0);
    }
    let fs = cfg.sample_rate();
    let linear: Vec<f64> = EVA_PROFILE
        .iter()
        .map(|&(_, db)| 10f64.powf(db / 10.0))
        .collect();
    let total: f64 = linear.iter().sum();
    let taps: Vec<(usize, f64)> = EVA_PROFILE
        .iter()
        .zip(&linear)
        .map(|(&(ns, _), &p)| {
            let tap = (ns * 1e-9 * fs).round() as usize;
            (tap.min(cfg.l_max), p / total)
        })
        .collect();

    let powers: Vec<(usize, f64)> = match model {
        PathModel::PerPath | PathModel::Awgn => taps,
        PathModel::PerTap => {
            let mut merged: Vec<(usize, f64)> = Vec::new();
            for (tap, p) in taps {
                match merged.iter_mut().find(|(t, _)| *t == tap) {
                    Some(entry) => entry.1 += p,
                    None => merged.push((tap, p)),
                }
            }
            merged
        }
    };

    let kappa_scale = cfg.frame_duration();
    let paths = powers
        .into_iter()
        .map(|(delay, power)| {
            let (re, im): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
            let gain = C64::new(re, im) * (power / 2.0).sqrt();
            let theta = rng.random_range(-PI..PI);
            let nu = nu_max_hz * theta.cos();
            Path {
                gain,
                delay,
                doppler: nu * kappa_scale,
            }
        })
        .collect();
    PathSet { paths }
}

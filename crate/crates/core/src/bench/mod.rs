//! Seeded Monte-Carlo BER experiments: plan files and presets, per-point
//! simulation, CSV output and a resumable run manifest.
//!
//! Every `(speed, SNR)` grid point owns a sub-seed derived from the plan seed,
//! and every frame draws from its own ChaCha stream of that seed. Results are
//! therefore identical for any worker count, and all schemes and detectors
//! at a point see the same channels, bits and noise.

mod output;
mod plan;
mod sim;

pub use output::{
    manifest_path, read_csv, records_to_csv, run_plan, Manifest, ManifestPoint, RunOptions,
    RunSummary, CSV_HEADER, LIBRARY_NAME, LIBRARY_VERSION,
};
pub use plan::{CsiMode, ExperimentPlan, PLAN_KEYS, PRESETS};
pub use sim::{
    plan_points, run_point, snr_to_noise_var, BerRecord, PointCounts, PointRunner, PointSpec,
};

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{discrete_channel, doppler_from_speed, gen_paths_eva_with, PathModel};
use crate::modem::FrameConfig;
use crate::Result;

/// Writes one EVA delay-time channel realization as `l,q,re,im` rows.
pub fn dump_channel(
    cfg: &FrameConfig,
    speed_kmh: f64,
    seed: u64,
    model: PathModel,
    out: &mut impl Write,
) -> Result<()> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paths = gen_paths_eva_with(doppler_from_speed(speed_kmh, cfg.carrier_hz), cfg, model, &mut rng);
    let chan = discrete_channel(&paths, cfg)?;
    let io = |e| crate::Error::io("<channel output>", e);
    writeln!(out, "l,q,re,im").map_err(io)?;
    for l in 0..=chan.l_max() {
        for (q, v) in chan.tap(l).iter().enumerate() {
            writeln!(out, "{l},{q},{:e},{:e}", v.re, v.im).map_err(io)?;
        }
    }
    Ok(())
}

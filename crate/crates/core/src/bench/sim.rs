use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{CsiMode, ExperimentPlan};
use crate::chanest::{reconstruct_blocks, ChannelEstimator, EstimatorOptions};
use crate::channel::{
    apply_channel, block_matrices, discrete_channel, doppler_from_speed, gen_paths_eva_with,
};
use crate::detect::{Detector, EqualizerKind, EqualizerSpec};
use crate::modem::{build_frame, qam_demap, FrameConfig, Scheme};
use crate::{Error, Result};

/// `σ_w² = E_s / 10^(SNR/10)` where `E_s` is the mean energy of the QAM
/// alphabet. Unitary precoding keeps that energy per data-bearing sample, so
/// the SNR is referenced to data and ignores pilot power and the zero guard.
pub fn snr_to_noise_var(snr_db: f64, cfg: &FrameConfig) -> f64 {
    let alphabet = cfg.qam.alphabet();
    let es = alphabet.iter().map(|a| a.norm_sqr()).sum::<f64>() / alphabet.len() as f64;
    es / 10f64.powf(snr_db / 10.0)
}

/// One cell of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSpec {
    pub scheme: Scheme,
    pub detector: EqualizerKind,
    pub snr_db: f64,
    pub speed_kmh: f64,
    pub speed_idx: usize,
    pub snr_idx: usize,
}

/// All points of a plan in output order: scheme, detector, speed, SNR.
pub fn plan_points(plan: &ExperimentPlan) -> Vec<PointSpec> {
    let mut out = Vec::new();
    for &scheme in &plan.schemes {
        for &detector in &plan.detectors {
            for (speed_idx, &speed_kmh) in plan.speed_kmh_grid.iter().enumerate() {
                for (snr_idx, &snr_db) in plan.snr_db_grid.iter().enumerate() {
                    out.push(PointSpec {
                        scheme,
                        detector,
                        snr_db,
                        speed_kmh,
                        speed_idx,
                        snr_idx,
                    });
                }
            }
        }
    }
    out
}

/// Error counts of one point. Aggregation is integer-only, so the totals do
/// not depend on how frames are split across workers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointCounts {
    pub bit_errors: u64,
    pub bits: u64,
    pub frame_errors: u64,
    pub frames: u64,
    /// Frames whose equalizer reported a degenerate system; each counts as a
    /// frame error with half its bits wrong.
    pub anomalies: u64,
    /// Total MF-GS iterations over all frames.
    pub iterations: u64,
}

impl PointCounts {
    fn merge(self, o: PointCounts) -> PointCounts {
        PointCounts {
            bit_errors: self.bit_errors + o.bit_errors,
            bits: self.bits + o.bits,
            frame_errors: self.frame_errors + o.frame_errors,
            frames: self.frames + o.frames,
            anomalies: self.anomalies + o.anomalies,
            iterations: self.iterations + o.iterations,
        }
    }
}

/// Everything needed to simulate frames of one point.
pub struct PointRunner {
    cfg: FrameConfig,
    detector: Detector,
    estimator: Option<ChannelEstimator>,
    spec: EqualizerSpec,
    sigma_w: f64,
    nu_max: f64,
    plan: ExperimentPlan,
    seed: u64,
}

impl PointRunner {
    pub fn new(plan: &ExperimentPlan, point: &PointSpec) -> Result<Self> {
        let cfg = plan.frame.clone().with_scheme(point.scheme);
        let noise_var = snr_to_noise_var(point.snr_db, &cfg);
        let spec = plan
            .detector_specs()
            .into_iter()
            .find(|s| s.kind == point.detector)
            .unwrap_or_else(|| EqualizerSpec::new(point.detector, 0.0))
            .with_noise_var(noise_var);
        let estimator = match plan.csi {
            CsiMode::Perfect => None,
            CsiMode::Estimated => Some(ChannelEstimator::new(
                &cfg,
                EstimatorOptions {
                    method: plan.interpolation,
                    threshold: None,
                },
            )?),
        };
        Ok(PointRunner {
            detector: Detector::new(&cfg)?,
            estimator,
            spec,
            sigma_w: noise_var.sqrt(),
            nu_max: doppler_from_speed(point.speed_kmh, cfg.carrier_hz),
            seed: plan.point_seed(point.speed_idx, point.snr_idx),
            plan: plan.clone(),
            cfg,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec(&self) -> &EqualizerSpec {
        &self.spec
    }

    /// Independent stream per frame: channel, then bits, then noise.
    pub fn frame_rng(&self, frame: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(frame);
        rng
    }

    pub fn run_frame(&self, frame: u64) -> Result<PointCounts> {
        let cfg = &self.cfg;
        let mut rng = self.frame_rng(frame);
        let paths = gen_paths_eva_with(self.nu_max, cfg, self.plan.path_model, &mut rng);
        let bits = random_bits(&mut rng, cfg.data_bits());
        let tx = build_frame(&bits, cfg)?;
        let s = self.detector.waveform().modulate(&tx.values)?;
        let chan = discrete_channel(&paths, cfg)?;
        let r = apply_channel(&s, &chan, self.sigma_w, &mut rng);
        let g = match &self.estimator {
            None => block_matrices(&chan, cfg),
            Some(est) => reconstruct_blocks(&est.estimate(&r, self.sigma_w)?, cfg),
        };
        let nbits = bits.len() as u64;
        match self.detector.detect(&r, &g, &self.spec) {
            Ok(res) => {
                let rx = qam_demap(self.detector.layout().data_slice(&res.hard), cfg.qam);
                let errors = rx.iter().zip(&bits).filter(|(a, b)| a != b).count() as u64;
                Ok(PointCounts {
                    bit_errors: errors,
                    bits: nbits,
                    frame_errors: u64::from(errors > 0),
                    frames: 1,
                    anomalies: 0,
                    iterations: res.iterations_used as u64,
                })
            }
            Err(Error::DegenerateEqualization { .. }) => Ok(PointCounts {
                bit_errors: nbits / 2,
                bits: nbits,
                frame_errors: 1,
                frames: 1,
                anomalies: 1,
                iterations: 0,
            }),
            Err(e) => Err(e),
        }
    }

    /// Runs frames `0..count` on the current rayon pool.
    pub fn run(&self, count: u64) -> Result<PointCounts> {
        (0..count)
            .into_par_iter()
            .map(|f| self.run_frame(f))
            .try_reduce(PointCounts::default, |a, b| Ok(a.merge(b)))
    }
}

fn random_bits(rng: &mut impl RngCore, n: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let word: u64 = rng.random();
        let take = (n - out.len()).min(64);
        out.extend((0..take).map(|i| ((word >> i) & 1) as u8));
    }
    out
}

/// One row of results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub scheme: String,
    pub detector: String,
    pub snr_db: f64,
    pub speed_kmh: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub frame_errors: u64,
    pub frames: u64,
    pub ber: f64,
    pub fer: f64,
    /// RNG seed of the grid point.
    pub seed: u64,
    pub elapsed_ms: u64,
}

impl BerRecord {
    pub fn from_counts(point: &PointSpec, counts: &PointCounts, seed: u64, elapsed_ms: u64) -> Self {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        BerRecord {
            scheme: point.scheme.name().to_string(),
            detector: point.detector.label().to_string(),
            snr_db: point.snr_db,
            speed_kmh: point.speed_kmh,
            bit_errors: counts.bit_errors,
            bits: counts.bits,
            frame_errors: counts.frame_errors,
            frames: counts.frames,
            ber: ratio(counts.bit_errors, counts.bits),
            fer: ratio(counts.frame_errors, counts.frames),
            seed,
            elapsed_ms,
        }
    }

    /// A nonzero BER resting on fewer than 10 observed bit errors.
    pub fn low_confidence(&self) -> bool {
        self.bit_errors > 0 && self.bit_errors < 10
    }

    /// Binomial standard error of the BER estimate.
    pub fn ber_std(&self) -> f64 {
        if self.bits == 0 {
            return 0.0;
        }
        (self.ber * (1.0 - self.ber) / self.bits as f64).sqrt()
    }
}

/// Simulates one point of `plan` and times it when the plan asks for it.
pub fn run_point(plan: &ExperimentPlan, point: &PointSpec) -> Result<(BerRecord, PointCounts)> {
    let start = Instant::now();
    let runner = PointRunner::new(plan, point)?;
    let counts = runner.run(plan.frames_per_point)?;
    let elapsed = if plan.timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    Ok((
        BerRecord::from_counts(point, &counts, runner.seed(), elapsed),
        counts,
    ))
}

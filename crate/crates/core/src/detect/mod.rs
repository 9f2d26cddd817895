//! Block-wise receivers for zero-padded frames: the frequency-domain
//! single-tap equalizer, the time-domain block MMSE equalizer and the
//! matched-filtered Gauss-Seidel (MF-GS) iterative detector.
//!
//! All three work on the received samples split into `N` blocks of `M`
//! (`r_n = G_n·s_n + w_n`), produce a delay-time estimate `Ŝ = [ŝ_0 … ŝ_{N−1}]`
//! and map it back with the scheme's receive transform.

mod banded;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use banded::{BandedCholesky, BandedHermitian};

use crate::channel::{BandedLower, BlockChannelMatrix};
use crate::modem::{qam_slice, FrameConfig, FrameLayout, QamOrder, Waveform};
use crate::transforms::{build_unitary, UnitaryKind, UnitaryMatrix};
use crate::{Error, Grid, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EqualizerKind {
    SingleTap,
    BlockMmse,
    MfGs,
}

impl EqualizerKind {
    pub const ALL: [EqualizerKind; 3] = [
        EqualizerKind::SingleTap,
        EqualizerKind::BlockMmse,
        EqualizerKind::MfGs,
    ];

    /// Label used in CSV output and plan files.
    pub fn label(self) -> &'static str {
        match self {
            EqualizerKind::SingleTap => "single-tap",
            EqualizerKind::BlockMmse => "mmse",
            EqualizerKind::MfGs => "mf-gs",
        }
    }
}

impl fmt::Display for EqualizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EqualizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "single-tap" | "singletap" | "single_tap" => Ok(EqualizerKind::SingleTap),
            "mmse" | "block-mmse" | "blockmmse" | "block_mmse" => Ok(EqualizerKind::BlockMmse),
            "mf-gs" | "mfgs" | "mf_gs" | "gs" => Ok(EqualizerKind::MfGs),
            other => Err(Error::config(format!("unknown detector '{other}'"))),
        }
    }
}

/// Starting point of the MF-GS iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum GsInit {
    #[default]
    Zero,
    SingleTap,
}

impl FromStr for GsInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zero" => Ok(GsInit::Zero),
            "single-tap" | "singletap" | "single_tap" => Ok(GsInit::SingleTap),
            other => Err(Error::config(format!("unknown MF-GS init '{other}'"))),
        }
    }
}

pub const DEFAULT_MAX_ITERS: usize = 15;

/// Relaxation default: 1 for QPSK and 16-QAM, 0.5 for 64-QAM.
pub fn default_delta(qam: QamOrder) -> f64 {
    match qam {
        QamOrder::Qam64 => 0.5,
        _ => 1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualizerSpec {
    pub kind: EqualizerKind,
    /// MF-GS iteration cap.
    pub max_iters: usize,
    /// MF-GS relaxation `δ ∈ (0, 1]`.
    pub delta: f64,
    pub init: GsInit,
    /// Noise variance `σ_w²` known to the receiver.
    pub noise_var: f64,
    /// When false, MF-GS runs plain Gauss-Seidel on the normal equations:
    /// no slicing, no clamping of known cells, no relaxation.
    pub slicing: bool,
    /// Stop MF-GS once two consecutive hard decisions agree.
    pub stop_at_fixed_point: bool,
}

impl EqualizerSpec {
    pub fn new(kind: EqualizerKind, noise_var: f64) -> Self {
        EqualizerSpec {
            kind,
            max_iters: DEFAULT_MAX_ITERS,
            delta: 1.0,
            init: GsInit::Zero,
            noise_var,
            slicing: true,
            stop_at_fixed_point: true,
        }
    }

    pub fn single_tap(noise_var: f64) -> Self {
        Self::new(EqualizerKind::SingleTap, noise_var)
    }

    pub fn block_mmse(noise_var: f64) -> Self {
        Self::new(EqualizerKind::BlockMmse, noise_var)
    }

    pub fn mf_gs(noise_var: f64) -> Self {
        Self::new(EqualizerKind::MfGs, noise_var)
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_init(mut self, init: GsInit) -> Self {
        self.init = init;
        self
    }

    pub fn with_noise_var(mut self, noise_var: f64) -> Self {
        self.noise_var = noise_var;
        self
    }

    pub fn with_slicing(mut self, slicing: bool) -> Self {
        self.slicing = slicing;
        self
    }

    pub fn with_fixed_point_stop(mut self, stop: bool) -> Self {
        self.stop_at_fixed_point = stop;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::config(format!(
                "relaxation delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters must be at least 1"));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(Error::config(format!(
                "noise variance must be finite and non-negative, got {}",
                self.noise_var
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Soft estimate of the information grid before slicing.
    pub symbols: Grid,
    /// Data cells sliced to the QAM alphabet, known cells at their values.
    pub hard: Grid,
    pub iterations_used: usize,
    /// `‖z − R·ŝ‖` over the whole frame after each MF-GS sweep.
    pub residuals: Vec<f64>,
}

/// Receive-side transforms and frame layout, reusable across frames.
#[derive(Debug, Clone)]
pub struct Detector {
    cfg: FrameConfig,
    waveform: Waveform,
    layout: FrameLayout,
    dft: UnitaryMatrix,
}

impl Detector {
    pub fn new(cfg: &FrameConfig) -> Result<Self> {
        Ok(Detector {
            cfg: cfg.clone(),
            waveform: Waveform::new(cfg)?,
            layout: FrameLayout::new(cfg)?,
            dft: build_unitary(UnitaryKind::Dft, cfg.m)?,
        })
    }

    pub fn config(&self) -> &FrameConfig {
        &self.cfg
    }

    pub fn waveform(&self) -> &Waveform {
        &self.waveform
    }

    pub fn layout(&self) -> &FrameLayout {
        &self.layout
    }

    pub fn detect(
        &self,
        r: &[C64],
        g: &BlockChannelMatrix,
        spec: &EqualizerSpec,
    ) -> Result<DetectionResult> {
        spec.validate()?;
        self.check_shapes(r, g)?;
        match spec.kind {
            EqualizerKind::SingleTap => {
                let s = self.single_tap_time(r, g, spec.noise_var);
                self.finish(&s, 0, Vec::new())
            }
            EqualizerKind::BlockMmse => {
                let s = self.block_mmse_time(r, g, spec.noise_var)?;
                self.finish(&s, 0, Vec::new())
            }
            EqualizerKind::MfGs => self.mf_gs(r, g, spec),
        }
    }

    fn check_shapes(&self, r: &[C64], g: &BlockChannelMatrix) -> Result<()> {
        let (m, n) = (self.cfg.m, self.cfg.n);
        if r.len() != m * n {
            return Err(Error::DimensionMismatch {
                what: "received samples",
                expected: m * n,
                got: r.len(),
            });
        }
        if g.num_blocks() != n {
            return Err(Error::DimensionMismatch {
                what: "channel blocks",
                expected: n,
                got: g.num_blocks(),
            });
        }
        if g.block_size() != m {
            return Err(Error::DimensionMismatch {
                what: "channel block size",
                expected: m,
                got: g.block_size(),
            });
        }
        Ok(())
    }

    /// Column `n` of the delay-time grid is block `n` of the sample stream.
    /// Delay-time grid from per-block vectors `ŝ_n`.
    fn blocks_to_grid(&self, blocks: &[Vec<C64>]) -> Grid {
        Grid::from_vec(self.cfg.n, self.cfg.m, blocks.concat()).transpose()
    }

    /// Frequency response of block `G_n` on the subcarriers,
    /// `h̄[m] = [F_M·G_n·F_M†]_{m,m} = Σ_l a_l·e^{−j2πml/M}` with `a_l` the
    /// mean of the `l`-th subdiagonal.
    pub fn single_tap_response(&self, g: &BandedLower) -> Vec<C64> {
        let m = g.size();
        let mut h = vec![C64::new(0.0, 0.0); m];
        for l in 0..g.bandwidth().min(m) {
            let a: C64 = (l..m).map(|q| g.diag_entry(q, l)).sum::<C64>() / m as f64;
            for (k, hk) in h.iter_mut().enumerate() {
                let phase = -2.0 * std::f64::consts::PI * ((k * l) % m) as f64 / m as f64;
                *hk += a * C64::from_polar(1.0, phase);
            }
        }
        h
    }

    /// Single-tap delay-time estimate `Ŝ`. A subcarrier with `h̄ = 0` at
    /// `σ_w² = 0` yields a zero estimate.
    pub fn single_tap_time(&self, r: &[C64], g: &BlockChannelMatrix, noise_var: f64) -> Grid {
        let m = self.cfg.m;
        let blocks: Vec<Vec<C64>> = r
            .chunks_exact(m)
            .zip(&g.blocks)
            .map(|(rn, gn)| {
                let h = self.single_tap_response(gn);
                let mut x = rn.to_vec();
                self.dft.apply_left(&mut x);
                for (xk, hk) in x.iter_mut().zip(&h) {
                    let den = hk.norm_sqr() + noise_var;
                    *xk = if den > 0.0 { hk.conj() * *xk / den } else { C64::new(0.0, 0.0) };
                }
                self.dft.apply_left_adjoint(&mut x);
                x
            })
            .collect();
        self.blocks_to_grid(&blocks)
    }

    /// `ŝ_n = (G_n†G_n + σ_w²I)⁻¹·G_n†·r_n` via a banded Cholesky factor.
    pub fn block_mmse_time(
        &self,
        r: &[C64],
        g: &BlockChannelMatrix,
        noise_var: f64,
    ) -> Result<Grid> {
        let m = self.cfg.m;
        let blocks = r
            .chunks_exact(m)
            .zip(&g.blocks)
            .enumerate()
            .map(|(n, (rn, gn))| {
                let mut a = BandedHermitian::gram(gn);
                a.add_to_diagonal(noise_var);
                let chol = a
                    .cholesky()
                    .ok_or(Error::DegenerateEqualization { block: n })?;
                let mut x = gn.adjoint_mul_vec(rn);
                chol.solve_in_place(&mut x);
                Ok(x)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.blocks_to_grid(&blocks))
    }

    /// Slices data cells and restores the known pilot and guard values.
    pub fn harden(&self, c: &Grid) -> Grid {
        let mut hard = self.layout.known_grid();
        let sliced = qam_slice(self.layout.data_slice(c), self.cfg.qam);
        self.layout.data_slice_mut(&mut hard).copy_from_slice(&sliced);
        hard
    }

    fn finish(&self, s: &Grid, iterations: usize, residuals: Vec<f64>) -> Result<DetectionResult> {
        let symbols = self.waveform.from_delay_time(s)?;
        let hard = self.harden(&symbols);
        Ok(DetectionResult {
            symbols,
            hard,
            iterations_used: iterations,
            residuals,
        })
    }

    fn mf_gs(
        &self,
        r: &[C64],
        g: &BlockChannelMatrix,
        spec: &EqualizerSpec,
    ) -> Result<DetectionResult> {
        let m = self.cfg.m;
        let grams: Vec<BandedHermitian> = g.blocks.iter().map(BandedHermitian::gram).collect();
        if let Some(block) = grams.iter().position(|rn| rn.zero_diagonal().is_some()) {
            return Err(Error::DegenerateEqualization { block });
        }
        let z: Vec<Vec<C64>> = r
            .chunks_exact(m)
            .zip(&g.blocks)
            .map(|(rn, gn)| gn.adjoint_mul_vec(rn))
            .collect();

        // Row n of `s` is block ŝ_n, so the sweeps run on contiguous memory.
        let (mut s, mut prev_hard) = match spec.init {
            GsInit::Zero => (Grid::zeros(self.cfg.n, m), None),
            GsInit::SingleTap => {
                let st = self.single_tap_time(r, g, spec.noise_var);
                if spec.slicing {
                    let hard = self.harden(&self.waveform.from_delay_time(&st)?);
                    let remod = self.waveform.to_delay_time(&hard)?;
                    (remod.transpose(), Some(hard))
                } else {
                    (st.transpose(), None)
                }
            }
        };

        let mut residuals = Vec::with_capacity(spec.max_iters);
        let mut soft = Grid::zeros(m, self.cfg.n);
        let mut hard = Grid::zeros(m, self.cfg.n);
        for _ in 0..spec.max_iters {
            let mut res = 0.0;
            for (n, (rn, zn)) in grams.iter().zip(&z).enumerate() {
                let sn = s.row_mut(n);
                rn.gauss_seidel_sweep(zn, sn);
                res += rn.residual_norm_sqr(zn, sn);
            }
            residuals.push(res.sqrt());

            soft = self.waveform.from_delay_time(&s.transpose())?;
            hard = self.harden(&soft);
            if !spec.slicing {
                continue;
            }
            let remod = self.waveform.to_delay_time(&hard)?.transpose();
            let delta = spec.delta;
            for (v, t) in s.as_mut_slice().iter_mut().zip(remod.as_slice()) {
                *v = *v * (1.0 - delta) + t * delta;
            }
            if spec.stop_at_fixed_point && prev_hard.as_ref() == Some(&hard) {
                break;
            }
            prev_hard = Some(hard.clone());
        }
        Ok(DetectionResult {
            symbols: soft,
            hard,
            iterations_used: residuals.len(),
            residuals,
        })
    }
}

/// Single-tap frequency-domain equalization of one frame.
pub fn single_tap(
    r: &[C64],
    g: &BlockChannelMatrix,
    noise_var: f64,
    cfg: &FrameConfig,
) -> Result<DetectionResult> {
    Detector::new(cfg)?.detect(r, g, &EqualizerSpec::single_tap(noise_var))
}

/// Block MMSE equalization of one frame.
pub fn block_mmse(
    r: &[C64],
    g: &BlockChannelMatrix,
    noise_var: f64,
    cfg: &FrameConfig,
) -> Result<DetectionResult> {
    Detector::new(cfg)?.detect(r, g, &EqualizerSpec::block_mmse(noise_var))
}

/// Matched-filtered Gauss-Seidel detection of one frame.
pub fn mf_gs(
    r: &[C64],
    g: &BlockChannelMatrix,
    spec: &EqualizerSpec,
    cfg: &FrameConfig,
) -> Result<DetectionResult> {
    Detector::new(cfg)?.detect(r, g, &EqualizerSpec { kind: EqualizerKind::MfGs, ..*spec })
}

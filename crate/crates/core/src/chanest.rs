//! Embedded-pilot estimation of the delay-time channel.
//!
//! The single pilot `x_p` at `(m_p, n_p)` turns into one time-domain pilot
//! sample per block, `x_p·U_T[n_p, n]` at `q = m_p + nM`. Its echoes at
//! `q + l` for `l ≤ l_max` sit in the zero guard, so dividing them by the
//! transmitted pilot sample gives `ĝ[l, m_p + nM + l]` directly. Each delay row
//! is then interpolated across blocks to cover the whole frame.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{block_matrices, BlockChannelMatrix, DelayTimeChannel};
use crate::modem::FrameConfig;
use crate::transforms::build_unitary;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum InterpMethod {
    Linear,
    /// Cubic spline with not-a-knot end conditions.
    #[default]
    Spline,
    /// Cubic spline with zero second derivative at the end knots.
    NaturalSpline,
}

impl InterpMethod {
    pub fn name(self) -> &'static str {
        match self {
            InterpMethod::Linear => "linear",
            InterpMethod::Spline => "spline",
            InterpMethod::NaturalSpline => "natural-spline",
        }
    }

    pub fn min_points(self) -> usize {
        match self {
            InterpMethod::Linear => 2,
            InterpMethod::Spline | InterpMethod::NaturalSpline => 4,
        }
    }
}

impl fmt::Display for InterpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InterpMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(InterpMethod::Linear),
            "spline" | "cubic" => Ok(InterpMethod::Spline),
            "natural-spline" | "natural" => Ok(InterpMethod::NaturalSpline),
            other => Err(Error::config(format!(
                "unknown interpolation method `{other}`"
            ))),
        }
    }
}

/// `ĝ[l, m_p + nM + l]` for `l ∈ [0, l_max]`, `n ∈ [0, N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservations {
    l_max: usize,
    n: usize,
    samples: Vec<C64>,
}

impl PilotObservations {
    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn blocks(&self) -> usize {
        self.n
    }

    pub fn get(&self, l: usize, n: usize) -> C64 {
        self.samples[l * self.n + n]
    }

    pub fn row(&self, l: usize) -> &[C64] {
        &self.samples[l * self.n..(l + 1) * self.n]
    }

    fn row_mut(&mut self, l: usize) -> &mut [C64] {
        &mut self.samples[l * self.n..(l + 1) * self.n]
    }

    /// Sample index of observation `(l, n)`.
    pub fn position(cfg: &FrameConfig, l: usize, n: usize) -> usize {
        cfg.pilot.m_p + n * cfg.m + l
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Perfect,
    Estimated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedChannel {
    pub taps: DelayTimeChannel,
    pub provenance: Provenance,
}

impl EstimatedChannel {
    /// Wraps the true channel (genie CSI).
    pub fn perfect(taps: DelayTimeChannel) -> Self {
        EstimatedChannel {
            taps,
            provenance: Provenance::Perfect,
        }
    }
}

/// Estimator settings. `threshold`, when set, zeroes every delay row whose
/// RMS estimate falls below `threshold × (estimate noise std)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub method: InterpMethod,
    pub threshold: Option<f64>,
}

/// Per-frame pilot estimator with the transmitted pilot samples cached.
#[derive(Debug, Clone)]
pub struct ChannelEstimator {
    cfg: FrameConfig,
    options: EstimatorOptions,
    pilot_samples: Vec<C64>,
}

impl ChannelEstimator {
    pub fn new(cfg: &FrameConfig, options: EstimatorOptions) -> Result<Self> {
        cfg.validate()?;
        cfg.check_pilot_row()?;
        let needed = options.method.min_points();
        if cfg.n < needed {
            return Err(Error::TooFewPoints {
                method: options.method.name(),
                needed,
                got: cfg.n,
            });
        }
        let (_, u_t) = cfg.scheme.precoders();
        let u = build_unitary(u_t, cfg.n)?;
        let xp = C64::new(cfg.pilot.amplitude, 0.0);
        let pilot_samples = u.row(cfg.pilot.n_p).iter().map(|v| xp * v).collect();
        Ok(ChannelEstimator {
            cfg: cfg.clone(),
            options,
            pilot_samples,
        })
    }

    /// Transmitted pilot sample `x_p·U_T[n_p, n]` of block `n`.
    pub fn pilot_sample(&self, n: usize) -> C64 {
        self.pilot_samples[n]
    }

    pub fn observe(&self, r: &[C64]) -> Result<PilotObservations> {
        let cfg = &self.cfg;
        if r.len() != cfg.frame_len() {
            return Err(Error::DimensionMismatch {
                what: "received frame length",
                expected: cfg.frame_len(),
                got: r.len(),
            });
        }
        let mut samples = Vec::with_capacity((cfg.l_max + 1) * cfg.n);
        for l in 0..=cfg.l_max {
            for n in 0..cfg.n {
                samples.push(r[PilotObservations::position(cfg, l, n)] / self.pilot_samples[n]);
            }
        }
        Ok(PilotObservations {
            l_max: cfg.l_max,
            n: cfg.n,
            samples,
        })
    }

    /// Observation, optional thresholding (needs the noise std) and interpolation.
    pub fn estimate(&self, r: &[C64], sigma_w: f64) -> Result<EstimatedChannel> {
        let mut obs = self.observe(r)?;
        if let Some(factor) = self.options.threshold {
            let noise_rms = (self
                .pilot_samples
                .iter()
                .map(|p| sigma_w * sigma_w / p.norm_sqr())
                .sum::<f64>()
                / self.cfg.n as f64)
                .sqrt();
            apply_threshold(&mut obs, factor * noise_rms);
        }
        interpolate(&obs, &self.cfg, self.options.method)
    }
}

fn apply_threshold(obs: &mut PilotObservations, level: f64) {
    for l in 0..=obs.l_max {
        let row = obs.row_mut(l);
        let rms = (row.iter().map(|v| v.norm_sqr()).sum::<f64>() / row.len() as f64).sqrt();
        if rms < level {
            row.fill(C64::new(0.0, 0.0));
        }
    }
}

/// `ĝ[l, m_p + nM + l] = r[m_p + nM + l] / (x_p·U_T[n_p, n])`.
pub fn estimate_taps(r: &[C64], cfg: &FrameConfig) -> Result<PilotObservations> {
    ChannelEstimator::new(
        cfg,
        EstimatorOptions {
            method: InterpMethod::Linear,
            threshold: None,
        },
    )?
    .observe(r)
}

/// Interpolates every delay row through its `N` observations, evaluated at
/// all `q ∈ [0, NM)`, independently for real and imaginary parts.
///
/// Outside the first and last knots, linear interpolation holds the nearest
/// sample while the splines evaluate their end-segment cubics.
pub fn interpolate(
    obs: &PilotObservations,
    cfg: &FrameConfig,
    method: InterpMethod,
) -> Result<EstimatedChannel> {
    let needed = method.min_points();
    if obs.n < needed {
        return Err(Error::TooFewPoints {
            method: method.name(),
            needed,
            got: obs.n,
        });
    }
    let len = cfg.frame_len();
    let mut taps = DelayTimeChannel::zeros(obs.l_max, len);
    let h = cfg.m as f64;
    for l in 0..=obs.l_max {
        let x0 = PilotObservations::position(cfg, l, 0) as f64;
        let row = taps.tap_mut(l);
        match method {
            InterpMethod::Linear => linear_uniform(obs.row(l), x0, h, row),
            InterpMethod::Spline => {
                CubicSpline::new(obs.row(l), x0, h, EndCondition::NotAKnot).eval_into(row)
            }
            InterpMethod::NaturalSpline => {
                CubicSpline::new(obs.row(l), x0, h, EndCondition::Natural).eval_into(row)
            }
        }
    }
    Ok(EstimatedChannel {
        taps,
        provenance: Provenance::Estimated,
    })
}

/// Per-block matrices of an estimated (or perfect) channel.
pub fn reconstruct_blocks(est: &EstimatedChannel, cfg: &FrameConfig) -> BlockChannelMatrix {
    block_matrices(&est.taps, cfg)
}

fn linear_uniform(y: &[C64], x0: f64, h: f64, out: &mut [C64]) {
    let last = y.len() - 1;
    for (q, v) in out.iter_mut().enumerate() {
        let t = (q as f64 - x0) / h;
        *v = if t <= 0.0 {
            y[0]
        } else if t >= last as f64 {
            y[last]
        } else {
            let i = t.floor() as usize;
            let f = t - i as f64;
            y[i] * (1.0 - f) + y[i + 1] * f
        };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EndCondition {
    Natural,
    NotAKnot,
}

/// Cubic spline on uniformly spaced knots `x0 + i·h`, stored as the second
/// derivatives at the knots.
struct CubicSpline<'a> {
    y: &'a [C64],
    x0: f64,
    h: f64,
    m2: Vec<C64>,
}

impl<'a> CubicSpline<'a> {
    /// Needs at least 4 knots.
    fn new(y: &'a [C64], x0: f64, h: f64, end: EndCondition) -> Self {
        let n = y.len();
        assert!(n >= 4, "cubic spline needs 4 knots");
        // Continuity of the first derivative at interior knot i:
        //   m[i−1] + 4·m[i] + m[i+1] = 6·(y[i+1] − 2·y[i] + y[i−1]) / h².
        // Natural ends fix m[0] = m[n−1] = 0. Not-a-knot ends impose
        // m[0] − 2·m[1] + m[2] = 0 (and its mirror), which on uniform knots
        // turns the first and last interior rows into 6·m[i] = rhs[i].
        let k = n - 2;
        let rhs: Vec<C64> = (1..n - 1)
            .map(|i| (y[i + 1] - y[i] * 2.0 + y[i - 1]) * (6.0 / (h * h)))
            .collect();
        let mut lower = vec![1.0; k];
        let mut diag = vec![4.0; k];
        let mut upper = vec![1.0; k];
        if end == EndCondition::NotAKnot {
            diag[0] = 6.0;
            upper[0] = 0.0;
            diag[k - 1] = 6.0;
            lower[k - 1] = 0.0;
        }
        let inner = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        let mut m2 = vec![C64::new(0.0, 0.0); n];
        m2[1..n - 1].copy_from_slice(&inner);
        if end == EndCondition::NotAKnot {
            m2[0] = m2[1] * 2.0 - m2[2];
            m2[n - 1] = m2[n - 2] * 2.0 - m2[n - 3];
        }
        CubicSpline { y, x0, h, m2 }
    }

    fn eval(&self, x: f64) -> C64 {
        let n = self.y.len();
        let t = (x - self.x0) / self.h;
        let seg = if t <= 0.0 {
            0
        } else {
            (t.floor() as usize).min(n - 2)
        };
        let dx = x - (self.x0 + seg as f64 * self.h);
        let (y0, y1) = (self.y[seg], self.y[seg + 1]);
        let (a, b) = (self.m2[seg], self.m2[seg + 1]);
        let slope = (y1 - y0) / self.h - (a * 2.0 + b) * (self.h / 6.0);
        y0 + slope * dx + a * (dx * dx / 2.0) + (b - a) * (dx * dx * dx / (6.0 * self.h))
    }

    fn eval_into(&self, out: &mut [C64]) {
        for (q, v) in out.iter_mut().enumerate() {
            *v = self.eval(q as f64);
        }
    }
}

/// Thomas algorithm; `lower[0]` and `upper[k−1]` are ignored.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[C64]) -> Vec<C64> {
    let k = diag.len();
    let mut c = vec![0.0; k];
    let mut d = vec![C64::new(0.0, 0.0); k];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..k {
        let denom = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - d[i - 1] * lower[i]) / denom;
    }
    let mut x = vec![C64::new(0.0, 0.0); k];
    x[k - 1] = d[k - 1];
    for i in (0..k - 1).rev() {
        x[i] = d[i] - x[i + 1] * c[i];
    }
    x
}

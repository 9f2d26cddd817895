use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chanest::InterpMethod;
use crate::channel::PathModel;
use crate::detect::{default_delta, EqualizerKind, EqualizerSpec, GsInit, DEFAULT_MAX_ITERS};
use crate::modem::{FrameConfig, QamOrder, Scheme};
use crate::{Error, Result};

/// Channel knowledge at the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum CsiMode {
    #[default]
    Perfect,
    Estimated,
}

impl CsiMode {
    pub fn name(self) -> &'static str {
        match self {
            CsiMode::Perfect => "perfect",
            CsiMode::Estimated => "estimated",
        }
    }
}

impl FromStr for CsiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "perfect" => Ok(CsiMode::Perfect),
            "estimated" => Ok(CsiMode::Estimated),
            other => Err(Error::config(format!("unknown csi mode '{other}'"))),
        }
    }
}

/// A Monte-Carlo sweep over scheme × detector × speed × SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub name: String,
    /// Frame parameters; the scheme field is replaced per point.
    pub frame: FrameConfig,
    pub schemes: Vec<Scheme>,
    pub detectors: Vec<EqualizerKind>,
    pub max_iters: usize,
    /// MF-GS relaxation; `None` picks the per-constellation default.
    pub delta: Option<f64>,
    pub gs_init: GsInit,
    pub snr_db_grid: Vec<f64>,
    pub speed_kmh_grid: Vec<f64>,
    pub frames_per_point: u64,
    pub seed: u64,
    pub csi: CsiMode,
    pub interpolation: InterpMethod,
    pub path_model: PathModel,
    /// Record wall-clock time per point; when off `elapsed_ms` is 0 and the
    /// CSV is byte-for-byte reproducible.
    pub timing: bool,
}

/// Keys accepted in plan files, in canonical order.
pub const PLAN_KEYS: [&str; 24] = [
    "name",
    "m",
    "n",
    "guard_len",
    "l_max",
    "delta_f",
    "carrier_hz",
    "qam",
    "pilot_row",
    "pilot_col",
    "pilot_boost_db",
    "schemes",
    "detectors",
    "max_iters",
    "delta",
    "gs_init",
    "snr_db",
    "speed_kmh",
    "frames",
    "seed",
    "csi",
    "interpolation",
    "path_model",
    "timing",
];

const REQUIRED_KEYS: [&str; 4] = ["schemes", "detectors", "snr_db", "speed_kmh"];

/// Names accepted by [`ExperimentPlan::preset`].
pub const PRESETS: [&str; 4] = ["fig1-desk", "fig2-desk", "fig3-desk", "smoke"];

impl ExperimentPlan {
    /// Standard 64 × 64 frame, MF-GS, perfect CSI, 2000 frames per point.
    pub fn new(name: &str) -> Self {
        ExperimentPlan {
            name: name.to_string(),
            frame: FrameConfig::standard(Scheme::Otfs),
            schemes: vec![Scheme::Otfs],
            detectors: vec![EqualizerKind::MfGs],
            max_iters: DEFAULT_MAX_ITERS,
            delta: None,
            gs_init: GsInit::Zero,
            snr_db_grid: vec![20.0],
            speed_kmh_grid: vec![500.0],
            frames_per_point: 2000,
            seed: 1,
            csi: CsiMode::Perfect,
            interpolation: InterpMethod::Spline,
            path_model: PathModel::PerPath,
            timing: true,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        const SPEEDS: [f64; 4] = [30.0, 120.0, 250.0, 500.0];
        const USC_AND_SC: [Scheme; 4] = [Scheme::Otfs, Scheme::Otsm, Scheme::DctUsc, Scheme::Sc];
        let mut plan = ExperimentPlan::new(name);
        match name {
            "fig1-desk" => {
                plan.schemes = Scheme::ALL.to_vec();
                plan.detectors = vec![EqualizerKind::SingleTap];
                plan.speed_kmh_grid = SPEEDS.to_vec();
            }
            "fig2-desk" => {
                plan.schemes = USC_AND_SC.to_vec();
                plan.detectors = vec![EqualizerKind::BlockMmse, EqualizerKind::MfGs];
                plan.speed_kmh_grid = SPEEDS.to_vec();
            }
            "fig3-desk" => {
                plan.schemes = USC_AND_SC.to_vec();
                plan.detectors = vec![EqualizerKind::MfGs];
                plan.snr_db_grid = (0..7).map(|i| 8.0 + 2.0 * i as f64).collect();
            }
            "smoke" => {
                plan.frame = FrameConfig::new(16, 16, 7, 3, Scheme::Otfs);
                plan.schemes = USC_AND_SC.to_vec();
                plan.detectors = EqualizerKind::ALL.to_vec();
                plan.snr_db_grid = vec![10.0, 20.0];
                plan.speed_kmh_grid = vec![120.0];
                plan.frames_per_point = 20;
            }
            other => {
                return Err(Error::config(format!(
                    "unknown preset '{other}' (available: {})",
                    PRESETS.join(", ")
                )))
            }
        }
        Ok(plan)
    }

    /// Relaxation actually used by MF-GS.
    pub fn effective_delta(&self) -> f64 {
        self.delta.unwrap_or_else(|| default_delta(self.frame.qam))
    }

    /// Detector settings; the noise variance is filled in per SNR point.
    pub fn detector_specs(&self) -> Vec<EqualizerSpec> {
        self.detectors
            .iter()
            .map(|&kind| {
                EqualizerSpec::new(kind, 0.0)
                    .with_max_iters(self.max_iters)
                    .with_delta(self.effective_delta())
                    .with_init(self.gs_init)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames_per_point == 0 {
            return Err(Error::config("frames must be at least 1"));
        }
        for (what, empty) in [
            ("schemes", self.schemes.is_empty()),
            ("detectors", self.detectors.is_empty()),
            ("snr_db", self.snr_db_grid.is_empty()),
            ("speed_kmh", self.speed_kmh_grid.is_empty()),
        ] {
            if empty {
                return Err(Error::config(format!("{what} must not be empty")));
            }
        }
        if self.snr_db_grid.iter().any(|s| s.is_nan()) {
            return Err(Error::config("snr_db values must be numbers"));
        }
        if self.speed_kmh_grid.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config("speed_kmh values must be finite and non-negative"));
        }
        for spec in self.detector_specs() {
            spec.validate()?;
        }
        for &scheme in &self.schemes {
            let cfg = self.frame.clone().with_scheme(scheme);
            cfg.validate()?;
            if self.csi == CsiMode::Estimated {
                cfg.check_pilot_row().map_err(|e| {
                    Error::config(format!("estimated CSI is not available for {scheme}: {e}"))
                })?;
                if cfg.n < self.interpolation.min_points() {
                    return Err(Error::config(format!(
                        "{} interpolation needs N ≥ {}",
                        self.interpolation,
                        self.interpolation.min_points()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Canonical plan text: every key, fixed order, shortest round-trip
    /// number formatting. Parsing it gives back an identical plan.
    pub fn to_plan_text(&self) -> String {
        let f = &self.frame;
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ");
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("name", self.name.clone());
        kv("m", f.m.to_string());
        kv("n", f.n.to_string());
        kv("guard_len", f.guard_len.to_string());
        kv("l_max", f.l_max.to_string());
        kv("delta_f", format!("{}", f.delta_f));
        kv("carrier_hz", format!("{}", f.carrier_hz));
        kv("qam", f.qam.order().to_string());
        kv("pilot_row", f.pilot.m_p.to_string());
        kv("pilot_col", f.pilot.n_p.to_string());
        kv("pilot_boost_db", format!("{}", f.pilot_boost_db()));
        kv(
            "schemes",
            self.schemes.iter().map(|s| s.name()).collect::<Vec<_>>().join(", "),
        );
        kv(
            "detectors",
            self.detectors.iter().map(|d| d.label()).collect::<Vec<_>>().join(", "),
        );
        kv("max_iters", self.max_iters.to_string());
        kv(
            "delta",
            self.delta.map_or_else(|| "auto".to_string(), |d| format!("{d}")),
        );
        kv(
            "gs_init",
            match self.gs_init {
                GsInit::Zero => "zero",
                GsInit::SingleTap => "single-tap",
            }
            .to_string(),
        );
        kv("snr_db", list(&self.snr_db_grid));
        kv("speed_kmh", list(&self.speed_kmh_grid));
        kv("frames", self.frames_per_point.to_string());
        kv("seed", self.seed.to_string());
        kv("csi", self.csi.name().to_string());
        kv("interpolation", self.interpolation.name().to_string());
        kv("path_model", self.path_model.name().to_string());
        kv("timing", if self.timing { "on" } else { "off" }.to_string());
        out
    }

    /// SHA-256 of the canonical plan text.
    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_plan_text().as_bytes()))
    }

    /// RNG seed of the `(speed, SNR)` grid point. Scheme and detector are
    /// deliberately excluded so every waveform and receiver sees the same
    /// channels, bits and noise.
    pub fn point_seed(&self, speed_idx: usize, snr_idx: usize) -> u64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update((speed_idx as u64).to_le_bytes());
        h.update((snr_idx as u64).to_le_bytes());
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }

    /// Parses the flat `key = value` format. `#` starts a comment; lists are
    /// comma separated; numeric grids also accept `start:step:stop`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut plan = ExperimentPlan::new("custom");
        let mut seen = HashSet::new();
        let mut pilot_row = None;
        let mut pilot_boost_db = 0.0;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Plan { line, msg };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            if !PLAN_KEYS.contains(&key.as_str()) {
                return Err(err(format!("unknown key `{key}`")));
            }
            if !seen.insert(key.clone()) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            let wrap = |e: Error| err(e.to_string());
            match key.as_str() {
                "name" => plan.name = value.to_string(),
                "m" => plan.frame.m = parse_num(value).map_err(&err)?,
                "n" => plan.frame.n = parse_num(value).map_err(&err)?,
                "guard_len" => plan.frame.guard_len = parse_num(value).map_err(&err)?,
                "l_max" => plan.frame.l_max = parse_num(value).map_err(&err)?,
                "delta_f" => plan.frame.delta_f = parse_num(value).map_err(&err)?,
                "carrier_hz" => plan.frame.carrier_hz = parse_num(value).map_err(&err)?,
                "qam" => {
                    plan.frame.qam =
                        QamOrder::from_order(parse_num(value).map_err(&err)?).map_err(wrap)?
                }
                "pilot_row" => pilot_row = Some(parse_num(value).map_err(&err)?),
                "pilot_col" => plan.frame.pilot.n_p = parse_num(value).map_err(&err)?,
                "pilot_boost_db" => pilot_boost_db = parse_num(value).map_err(&err)?,
                "schemes" => plan.schemes = parse_list(value).map_err(wrap)?,
                "detectors" => plan.detectors = parse_list(value).map_err(wrap)?,
                "max_iters" => plan.max_iters = parse_num(value).map_err(&err)?,
                "delta" => {
                    plan.delta = if value.eq_ignore_ascii_case("auto") {
                        None
                    } else {
                        Some(parse_num(value).map_err(&err)?)
                    }
                }
                "gs_init" => plan.gs_init = value.parse().map_err(wrap)?,
                "snr_db" => plan.snr_db_grid = parse_grid(value).map_err(&err)?,
                "speed_kmh" => plan.speed_kmh_grid = parse_grid(value).map_err(&err)?,
                "frames" => plan.frames_per_point = parse_num(value).map_err(&err)?,
                "seed" => plan.seed = parse_num(value).map_err(&err)?,
                "csi" => plan.csi = value.parse().map_err(wrap)?,
                "interpolation" => plan.interpolation = value.parse().map_err(wrap)?,
                "path_model" => plan.path_model = value.parse().map_err(wrap)?,
                "timing" => plan.timing = parse_switch(value).map_err(&err)?,
                _ => unreachable!("key list checked above"),
            }
        }
        if let Some(missing) = REQUIRED_KEYS.iter().find(|k| !seen.contains(**k)) {
            return Err(Error::Plan {
                line: 0,
                msg: format!("missing required key `{missing}`"),
            });
        }
        let f = &mut plan.frame;
        f.pilot.m_p = pilot_row.unwrap_or_else(|| (f.m + f.l_max).saturating_sub(f.guard_len));
        *f = f.clone().with_pilot_boost_db(pilot_boost_db);
        plan.validate()?;
        Ok(plan)
    }
}

fn parse_num<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse `{value}` as a number"))
}

fn parse_switch(value: &str) -> std::result::Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        other => Err(format!("expected on/off, got `{other}`")),
    }
}

fn parse_list<T: FromStr<Err = Error>>(value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

/// `a, b, c` or `start:step:stop` (inclusive, tolerant to rounding).
fn parse_grid(value: &str) -> std::result::Result<Vec<f64>, String> {
    if value.contains(':') {
        let parts: Vec<f64> = value
            .split(':')
            .map(|p| parse_num(p.trim()))
            .collect::<std::result::Result<_, _>>()?;
        let [start, step, stop] = parts[..] else {
            return Err(format!("range `{value}` must be start:step:stop"));
        };
        if !(step > 0.0) || stop < start {
            return Err(format!("range `{value}` needs step > 0 and stop ≥ start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| start + step * i as f64).collect());
    }
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            if s.eq_ignore_ascii_case("inf") {
                Ok(f64::INFINITY)
            } else {
                parse_num(s)
            }
        })
        .collect()
}

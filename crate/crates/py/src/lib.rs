//! Python bindings: frame configuration, modulation, EVA channels, pilot
//! estimation, the three detectors and the Monte-Carlo runner.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use usc_core::bench::{plan_points, run_point, ExperimentPlan};
use usc_core::chanest::{ChannelEstimator, EstimatorOptions};
use usc_core::channel::{self, block_matrices, DelayTimeChannel, PathSet};
use usc_core::detect::{Detector, EqualizerSpec};
use usc_core::modem::{self, QamOrder, Waveform};
use usc_core::{Grid, C64};

fn err(e: usc_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_rows(g: &Grid) -> Vec<Vec<C64>> {
    (0..g.rows()).map(|r| g.row(r).to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<C64>>) -> PyResult<Grid> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("grid rows must all have the same length"));
    }
    Ok(Grid::from_vec(m, n, rows.into_iter().flatten().collect()))
}

fn qam(order: u32) -> PyResult<QamOrder> {
    QamOrder::from_order(order).map_err(err)
}

/// Frame dimensions, waveform and pilot layout.
#[pyclass(name = "FrameConfig", from_py_object)]
#[derive(Clone)]
struct PyFrameConfig {
    inner: modem::FrameConfig,
}

#[pymethods]
impl PyFrameConfig {
    #[new]
    #[pyo3(signature = (scheme="OTFS", m=64, n=64, guard_len=16, l_max=3, qam=4, pilot_boost_db=0.0, delta_f=15e3, carrier_hz=4e9))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        scheme: &str,
        m: usize,
        n: usize,
        guard_len: usize,
        l_max: usize,
        qam: u32,
        pilot_boost_db: f64,
        delta_f: f64,
        carrier_hz: f64,
    ) -> PyResult<Self> {
        let mut inner = modem::FrameConfig::new(m, n, guard_len, l_max, scheme.parse().map_err(err)?)
            .with_qam(QamOrder::from_order(qam).map_err(err)?)
            .with_pilot_boost_db(pilot_boost_db);
        inner.delta_f = delta_f;
        inner.carrier_hz = carrier_hz;
        inner.validate().map_err(err)?;
        Ok(PyFrameConfig { inner })
    }

    #[getter]
    fn scheme(&self) -> &'static str {
        self.inner.scheme.name()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn guard_len(&self) -> usize {
        self.inner.guard_len
    }

    #[getter]
    fn l_max(&self) -> usize {
        self.inner.l_max
    }

    #[getter]
    fn qam(&self) -> u32 {
        self.inner.qam.order()
    }

    /// `(m_p, n_p, amplitude)`.
    #[getter]
    fn pilot(&self) -> (usize, usize, f64) {
        let p = self.inner.pilot;
        (p.m_p, p.n_p, p.amplitude)
    }

    #[getter]
    fn data_bits(&self) -> usize {
        self.inner.data_bits()
    }

    #[getter]
    fn frame_len(&self) -> usize {
        self.inner.frame_len()
    }

    #[getter]
    fn spectral_efficiency(&self) -> f64 {
        self.inner.spectral_efficiency()
    }

    fn with_scheme(&self, scheme: &str) -> PyResult<Self> {
        Ok(PyFrameConfig {
            inner: self.inner.clone().with_scheme(scheme.parse().map_err(err)?),
        })
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "FrameConfig(scheme='{}', m={}, n={}, guard_len={}, l_max={}, qam={})",
            c.scheme,
            c.m,
            c.n,
            c.guard_len,
            c.l_max,
            c.qam.order()
        )
    }
}

/// Discrete delay-time channel `ḡ[l, q]` with the paths that produced it.
#[pyclass(name = "Channel", skip_from_py_object)]
struct PyChannel {
    taps: DelayTimeChannel,
    paths: Option<PathSet>,
}

#[pymethods]
impl PyChannel {
    /// One EVA realization at the given speed.
    #[staticmethod]
    #[pyo3(signature = (cfg, speed_kmh, seed, model="per-path"))]
    fn eva(cfg: &PyFrameConfig, speed_kmh: f64, seed: u64, model: &str) -> PyResult<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nu_max = channel::doppler_from_speed(speed_kmh, cfg.inner.carrier_hz);
        let paths = channel::gen_paths_eva_with(nu_max, &cfg.inner, model.parse().map_err(err)?, &mut rng);
        let taps = channel::discrete_channel(&paths, &cfg.inner).map_err(err)?;
        Ok(PyChannel {
            taps,
            paths: Some(paths),
        })
    }

    /// Channel from explicit `(gain, delay, doppler)` paths, Doppler normalized
    /// to the frame duration.
    #[staticmethod]
    fn from_paths(cfg: &PyFrameConfig, paths: Vec<(C64, usize, f64)>) -> PyResult<Self> {
        let paths = PathSet::new(
            paths
                .into_iter()
                .map(|(gain, delay, doppler)| channel::Path { gain, delay, doppler })
                .collect(),
        );
        let taps = channel::discrete_channel(&paths, &cfg.inner).map_err(err)?;
        Ok(PyChannel {
            taps,
            paths: Some(paths),
        })
    }

    #[getter]
    fn l_max(&self) -> usize {
        self.taps.l_max()
    }

    fn __len__(&self) -> usize {
        self.taps.len()
    }

    /// `taps()[l][q] = ḡ[l, q]`.
    fn taps(&self) -> Vec<Vec<C64>> {
        (0..=self.taps.l_max()).map(|l| self.taps.tap(l).to_vec()).collect()
    }

    fn paths(&self) -> Vec<(C64, usize, f64)> {
        self.paths
            .as_ref()
            .map(|p| p.paths.iter().map(|p| (p.gain, p.delay, p.doppler)).collect())
            .unwrap_or_default()
    }

    /// Squared error against another channel, summed over all entries.
    fn squared_error(&self, other: &PyChannel) -> f64 {
        self.taps.squared_error(&other.taps)
    }

    fn energy(&self) -> f64 {
        self.taps.energy()
    }

    #[pyo3(signature = (samples, sigma_w=0.0, seed=0))]
    fn apply(&self, samples: Vec<C64>, sigma_w: f64, seed: u64) -> PyResult<Vec<C64>> {
        if samples.len() != self.taps.len() {
            return Err(PyValueError::new_err(format!(
                "expected {} samples, got {}",
                self.taps.len(),
                samples.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(channel::apply_channel(&samples, &self.taps, sigma_w, &mut rng))
    }
}

#[pyfunction]
fn qam_map(bits: Vec<u8>, order: u32) -> PyResult<Vec<C64>> {
    modem::qam_map(&bits, qam(order)?).map_err(err)
}

#[pyfunction]
fn qam_demap(symbols: Vec<C64>, order: u32) -> PyResult<Vec<u8>> {
    Ok(modem::qam_demap(&symbols, qam(order)?))
}

/// Information grid with data, pilot and zero guard.
#[pyfunction]
fn build_frame(bits: Vec<u8>, cfg: &PyFrameConfig) -> PyResult<Vec<Vec<C64>>> {
    Ok(to_rows(&modem::build_frame(&bits, &cfg.inner).map_err(err)?.values))
}

#[pyfunction]
fn modulate(grid: Vec<Vec<C64>>, cfg: &PyFrameConfig) -> PyResult<Vec<C64>> {
    let wf = Waveform::new(&cfg.inner).map_err(err)?;
    wf.modulate(&from_rows(grid)?).map_err(err)
}

#[pyfunction]
fn demodulate(samples: Vec<C64>, cfg: &PyFrameConfig) -> PyResult<Vec<Vec<C64>>> {
    let wf = Waveform::new(&cfg.inner).map_err(err)?;
    Ok(to_rows(&wf.demodulate(&samples).map_err(err)?))
}

#[pyfunction]
fn snr_to_noise_var(snr_db: f64, cfg: &PyFrameConfig) -> f64 {
    usc_core::bench::snr_to_noise_var(snr_db, &cfg.inner)
}

/// Embedded-pilot estimate of the delay-time channel.
#[pyfunction]
#[pyo3(signature = (samples, cfg, sigma_w=0.0, method="spline"))]
fn estimate_channel(samples: Vec<C64>, cfg: &PyFrameConfig, sigma_w: f64, method: &str) -> PyResult<PyChannel> {
    let est = ChannelEstimator::new(
        &cfg.inner,
        EstimatorOptions {
            method: method.parse().map_err(err)?,
            threshold: None,
        },
    )
    .map_err(err)?;
    let e = est.estimate(&samples, sigma_w).map_err(err)?;
    Ok(PyChannel {
        taps: e.taps,
        paths: None,
    })
}

/// Equalizes one received frame; returns soft and hard grids, data bits,
/// iteration count and MF-GS residuals.
#[pyfunction]
#[pyo3(signature = (samples, channel, cfg, detector="mf-gs", noise_var=0.0, max_iters=15, delta=None, init="zero"))]
#[allow(clippy::too_many_arguments)]
fn detect<'py>(
    py: Python<'py>,
    samples: Vec<C64>,
    channel: &PyChannel,
    cfg: &PyFrameConfig,
    detector: &str,
    noise_var: f64,
    max_iters: usize,
    delta: Option<f64>,
    init: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let det = Detector::new(&cfg.inner).map_err(err)?;
    let spec = EqualizerSpec::new(detector.parse().map_err(err)?, noise_var)
        .with_max_iters(max_iters)
        .with_delta(delta.unwrap_or_else(|| usc_core::detect::default_delta(cfg.inner.qam)))
        .with_init(init.parse().map_err(err)?);
    if channel.taps.len() != cfg.inner.frame_len() {
        return Err(PyValueError::new_err("channel length does not match the frame"));
    }
    let g = block_matrices(&channel.taps, &cfg.inner);
    let res = det.detect(&samples, &g, &spec).map_err(err)?;
    let bits = modem::qam_demap(det.layout().data_slice(&res.hard), cfg.inner.qam);
    let out = PyDict::new(py);
    out.set_item("symbols", to_rows(&res.symbols))?;
    out.set_item("hard", to_rows(&res.hard))?;
    out.set_item("bits", bits)?;
    out.set_item("iterations", res.iterations_used)?;
    out.set_item("residuals", res.residuals)?;
    Ok(out)
}

/// Runs a plan (file text or preset name) in memory and returns one dict
/// per grid point with the CSV columns.
#[pyfunction]
#[pyo3(signature = (plan=None, preset=None, frames=None, seed=None))]
fn run_plan<'py>(
    py: Python<'py>,
    plan: Option<&str>,
    preset: Option<&str>,
    frames: Option<u64>,
    seed: Option<u64>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut p = match (plan, preset) {
        (Some(text), None) => ExperimentPlan::parse(text).map_err(err)?,
        (None, Some(name)) => ExperimentPlan::preset(name).map_err(err)?,
        _ => return Err(PyValueError::new_err("pass exactly one of plan= or preset=")),
    };
    if let Some(f) = frames {
        p.frames_per_point = f;
    }
    if let Some(s) = seed {
        p.seed = s;
    }
    p.validate().map_err(err)?;
    let records = py
        .detach(|| {
            plan_points(&p)
                .iter()
                .map(|pt| run_point(&p, pt).map(|(r, _)| r))
                .collect::<usc_core::Result<Vec<_>>>()
        })
        .map_err(err)?;
    records
        .into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("scheme", r.scheme)?;
            d.set_item("detector", r.detector)?;
            d.set_item("snr_db", r.snr_db)?;
            d.set_item("speed_kmh", r.speed_kmh)?;
            d.set_item("bit_errors", r.bit_errors)?;
            d.set_item("bits", r.bits)?;
            d.set_item("frame_errors", r.frame_errors)?;
            d.set_item("frames", r.frames)?;
            d.set_item("ber", r.ber)?;
            d.set_item("fer", r.fer)?;
            d.set_item("seed", r.seed)?;
            d.set_item("elapsed_ms", r.elapsed_ms)?;
            Ok(d)
        })
        .collect()
}

/// The invariant suite as `(name, passed, detail)` tuples.
#[pyfunction]
fn validate(py: Python<'_>) -> Vec<(String, bool, String)> {
    py.detach(usc_core::validate::run_all)
        .into_iter()
        .map(|c| (c.name.to_string(), c.passed, c.detail))
        .collect()
}

#[pymodule]
mod usc_py {
    #[pymodule_export]
    use super::{
        build_frame, demodulate, detect, estimate_channel, modulate, qam_demap, qam_map, run_plan,
        snr_to_noise_var, validate, PyChannel, PyFrameConfig,
    };

    #[pymodule_init]
    fn init(m: &pyo3::Bound<'_, pyo3::types::PyModule>) -> pyo3::PyResult<()> {
        use pyo3::types::PyModuleMethods;
        m.add("__version__", usc_core::bench::LIBRARY_VERSION)?;
        m.add(
            "SCHEMES",
            usc_core::modem::Scheme::ALL.map(|s| s.name()).to_vec(),
        )?;
        Ok(())
    }
}

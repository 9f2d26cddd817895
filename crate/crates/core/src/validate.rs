//! Self-checks against independent dense-matrix and closed-form references.
//!
//! Each check returns a [`Check`] with the measured figure in `detail`; the
//! `usc-bench validate` command prints them all.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

use crate::bench::{plan_points, records_to_csv, run_point, ExperimentPlan};
use crate::channel::{
    apply_channel, block_matrices, discrete_channel, doppler_from_speed, gen_paths_eva,
    DelayTimeChannel, Path, PathModel, PathSet,
};
use crate::detect::{Detector, EqualizerKind, EqualizerSpec};
use crate::modem::{
    usc_demodulate, usc_modulate, FrameConfig, Scheme, Waveform,
};
use crate::transforms::{build_unitary, deinterleave, interleave, InterleaverSpec};
use crate::{Grid, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Check {
            name,
            passed,
            detail,
        }
    }
}

const USC: [Scheme; 4] = [Scheme::Otfs, Scheme::Otsm, Scheme::DctUsc, Scheme::Sc];

fn random_c64(rng: &mut impl Rng) -> C64 {
    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
}

fn random_grid(rng: &mut impl Rng, m: usize, n: usize) -> Grid {
    Grid::from_fn(m, n, |_, _| random_c64(rng))
}

/// Full `NM × NM` channel matrix, `H[q, q−l] = ḡ[l, q]`.
pub fn dense_channel_matrix(chan: &DelayTimeChannel) -> DMatrix<C64> {
    let len = chan.len();
    let mut h = DMatrix::zeros(len, len);
    for l in 0..=chan.l_max() {
        for q in l..len {
            h[(q, q - l)] = chan.get(l, q);
        }
    }
    h
}

/// Largest `|demodulate(modulate(X)) − X|` over all schemes at `M × N`.
pub fn round_trip_error(m: usize, n: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for scheme in Scheme::ALL {
        let cfg = FrameConfig { m, n, ..FrameConfig::standard(scheme) };
        let wf = Waveform::new(&cfg)?;
        let x = random_grid(&mut rng, m, n);
        let back = wf.demodulate(&wf.modulate(&x)?)?;
        worst = worst.max(back.max_abs_diff(&x));
    }
    Ok(worst)
}

/// Every `(m, k)` maps to a distinct sample and back, for all sizes up to
/// `max × max`.
pub fn interleaver_bijective(max: usize) -> bool {
    for m in 1..=max {
        for n in 1..=max {
            let spec = InterleaverSpec::new(m, n);
            let mut seen = vec![false; m * n];
            for r in 0..m {
                for k in 0..n {
                    let q = spec.sample_index(r, k);
                    if q >= m * n || seen[q] || spec.cell(q) != (r, k) {
                        return false;
                    }
                    seen[q] = true;
                }
            }
            let x = Grid::from_fn(m, n, |r, k| C64::new(r as f64, k as f64));
            match deinterleave(&interleave(&x), spec) {
                Ok(back) if back == x => {}
                _ => return false,
            }
        }
    }
    true
}

/// Largest deviation between the receive pipeline and the matrix relation
/// `y = (I_M ⊗ Ū_T)·Pᵀ·H·P·(I_M ⊗ U_Tᵀ)·x + (I_M ⊗ Ū_T)·Pᵀ·w` on row-major
/// `x = vec(X)`, where `P` is the interleaver permutation.
pub fn pipeline_matrix_error(max: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    let mut sizes = Vec::new();
    let mut s = 2;
    while s <= max {
        sizes.push(s);
        s *= 2;
    }
    for &m in &sizes {
        for &n in &sizes {
            let l_max = if m >= 4 { 1 } else { 0 };
            for scheme in USC {
                let cfg = FrameConfig::new(m, n, 2 * l_max + 1, l_max, scheme);
                let len = m * n;
                let x = random_grid(&mut rng, m, n);
                let paths = PathSet::new(
                    (0..3)
                        .map(|i| Path {
                            gain: random_c64(&mut rng),
                            delay: i.min(l_max),
                            doppler: rng.random::<f64>() * 4.0 - 2.0,
                        })
                        .collect(),
                );
                let chan = discrete_channel(&paths, &cfg)?;
                let w: Vec<C64> = (0..len).map(|_| random_c64(&mut rng) * 0.1).collect();

                let mut r = apply_channel(&usc_modulate(&x, &cfg)?, &chan, 0.0, &mut rng);
                for (ri, wi) in r.iter_mut().zip(&w) {
                    *ri += wi;
                }
                let y = usc_demodulate(&r, &cfg)?;

                let ut = build_unitary(cfg.scheme.precoders().1, n)?;
                let t = DMatrix::from_fn(len, len, |i, j| {
                    if i / n == j / n {
                        ut.get(j % n, i % n)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                });
                let t_inv = t.adjoint();
                let spec = InterleaverSpec::new(m, n);
                let p = DMatrix::from_fn(len, len, |q, j| {
                    if spec.sample_index(j / n, j % n) == q {
                        C64::new(1.0, 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                });
                let h = dense_channel_matrix(&chan);
                let h_eff = &t_inv * p.transpose() * h * &p * &t;
                let xv = DVector::from_row_slice(x.as_slice());
                let wv = DVector::from_vec(w);
                let want = h_eff * xv + t_inv * p.transpose() * wv;
                for (a, b) in y.as_slice().iter().zip(want.iter()) {
                    worst = worst.max((a - b).norm());
                }
            }
        }
    }
    Ok(worst)
}

/// `apply_channel` against the dense channel matrix on an EVA realization.
pub fn apply_channel_error(cfg: &FrameConfig, speed_kmh: f64, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paths = gen_paths_eva(doppler_from_speed(speed_kmh, cfg.carrier_hz), cfg, &mut rng);
    let chan = discrete_channel(&paths, cfg)?;
    let s: Vec<C64> = (0..cfg.frame_len()).map(|_| random_c64(&mut rng)).collect();
    let r = apply_channel(&s, &chan, 0.0, &mut rng);
    let want = dense_channel_matrix(&chan) * DVector::from_vec(s);
    Ok(r.iter()
        .zip(want.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max))
}

struct BlockProblem {
    cfg: FrameConfig,
    r: Vec<C64>,
    g: crate::channel::BlockChannelMatrix,
}

/// Random frame through a channel whose direct path dominates, so every
/// block is well conditioned.
fn block_problem(m: usize, n: usize, l_max: usize, sigma_w: f64, rng: &mut impl Rng) -> Result<BlockProblem> {
    let cfg = FrameConfig::new(m, n, 2 * l_max + 1, l_max, Scheme::Otsm);
    let mut paths: Vec<Path> = (0..=l_max)
        .map(|l| Path {
            gain: random_c64(rng) * 0.8,
            delay: l,
            doppler: rng.random::<f64>() * 2.0 - 1.0,
        })
        .collect();
    paths[0].gain = C64::from_polar(1.0, rng.random::<f64>() * 6.0);
    let chan = discrete_channel(&PathSet::new(paths), &cfg)?;
    let s: Vec<C64> = (0..cfg.frame_len()).map(|_| random_c64(rng)).collect();
    let r = apply_channel(&s, &chan, sigma_w, rng);
    Ok(BlockProblem {
        g: block_matrices(&chan, &cfg),
        cfg,
        r,
    })
}

fn dense_block_solve(p: &BlockProblem, noise_var: f64) -> Vec<DVector<C64>> {
    let m = p.cfg.m;
    p.g.blocks
        .iter()
        .zip(p.r.chunks_exact(m))
        .map(|(gn, rn)| {
            let g = DMatrix::from_fn(m, m, |i, j| gn.get(i, j));
            let a = g.adjoint() * &g + DMatrix::identity(m, m) * C64::new(noise_var, 0.0);
            let z = g.adjoint() * DVector::from_column_slice(rn);
            a.lu().solve(&z).expect("well-conditioned block")
        })
        .collect()
}

fn max_grid_vs_blocks(s: &Grid, blocks: &[DVector<C64>]) -> f64 {
    let mut worst = 0.0_f64;
    for (n, b) in blocks.iter().enumerate() {
        for (q, v) in b.iter().enumerate() {
            worst = worst.max((s[(q, n)] - v).norm());
        }
    }
    worst
}

/// Banded block MMSE against a dense LU solve of `(G†G + σ²I)·s = G†r`.
pub fn block_mmse_error(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for (m, n, l_max, noise_var) in [(16, 8, 2, 0.01_f64), (32, 4, 3, 0.1), (8, 8, 1, 1e-4)] {
        let p = block_problem(m, n, l_max, noise_var.sqrt(), &mut rng)?;
        let det = Detector::new(&p.cfg)?;
        let s = det.block_mmse_time(&p.r, &p.g, noise_var)?;
        worst = worst.max(max_grid_vs_blocks(&s, &dense_block_solve(&p, noise_var)));
    }
    Ok(worst)
}

/// Gauss-Seidel without slicing after `sweeps` iterations against the dense
/// least-squares solution, at `M ≤ 32`.
pub fn gauss_seidel_ls_error(sweeps: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for (m, n, l_max) in [(8, 4, 1), (16, 8, 2), (32, 8, 3)] {
        let p = block_problem(m, n, l_max, 0.1, &mut rng)?;
        let det = Detector::new(&p.cfg)?;
        let spec = EqualizerSpec::mf_gs(0.0)
            .with_slicing(false)
            .with_max_iters(sweeps)
            .with_fixed_point_stop(false);
        let res = det.detect(&p.r, &p.g, &spec)?;
        let s = det.waveform().to_delay_time(&res.symbols)?;
        worst = worst.max(max_grid_vs_blocks(&s, &dense_block_solve(&p, 0.0)));
    }
    Ok(worst)
}

/// Gaussian tail `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Simulated SC / single-tap QPSK BER over a noise-only channel against
/// `Q(√SNR)`: returns `(snr_db, measured, analytic, binomial std)`.
pub fn awgn_qpsk(snr_db: &[f64], frames: u64, seed: u64) -> Result<Vec<(f64, f64, f64, f64)>> {
    let mut plan = ExperimentPlan::new("awgn");
    plan.schemes = vec![Scheme::Sc];
    plan.detectors = vec![EqualizerKind::SingleTap];
    plan.path_model = PathModel::Awgn;
    plan.speed_kmh_grid = vec![0.0];
    plan.snr_db_grid = snr_db.to_vec();
    plan.frames_per_point = frames;
    plan.seed = seed;
    plan.timing = false;
    plan_points(&plan)
        .iter()
        .map(|p| {
            let (rec, _) = run_point(&plan, p)?;
            let analytic = q_function(10f64.powf(p.snr_db / 20.0));
            let std = (analytic * (1.0 - analytic) / rec.bits as f64).sqrt();
            Ok((p.snr_db, rec.ber, analytic, std))
        })
        .collect()
}

/// CSV bytes of `plan` computed on pools of each given size.
pub fn csv_bytes_per_worker_count(plan: &ExperimentPlan, workers: &[usize]) -> Result<Vec<Vec<u8>>> {
    workers
        .iter()
        .map(|&w| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| crate::Error::InvalidConfig(e.to_string()))?;
            let records = pool.install(|| {
                plan_points(plan)
                    .iter()
                    .map(|p| run_point(plan, p).map(|(r, _)| r))
                    .collect::<Result<Vec<_>>>()
            })?;
            Ok(records_to_csv(&records))
        })
        .collect()
}

fn numeric(name: &'static str, value: Result<f64>, tol: f64) -> Check {
    match value {
        Ok(v) => Check::new(name, v < tol, format!("max error {v:.3e} (tolerance {tol:.0e})")),
        Err(e) => Check::new(name, false, format!("error: {e}")),
    }
}

/// The full invariant suite.
pub fn run_all() -> Vec<Check> {
    let mut out = vec![
        numeric("round trip, all schemes, 64x64", round_trip_error(64, 64, 1), 1e-10),
        numeric("pipeline vs matrix relation, M,N <= 8", pipeline_matrix_error(8, 2), 1e-10),
        Check::new(
            "interleaver bijective, M,N <= 8",
            interleaver_bijective(8),
            "exhaustive".to_string(),
        ),
        numeric(
            "apply_channel vs dense matrix, 64x64 EVA 500 km/h",
            apply_channel_error(&FrameConfig::standard(Scheme::Otfs), 500.0, 3),
            1e-10,
        ),
        numeric("block MMSE vs dense solve", block_mmse_error(4), 1e-9),
        numeric("Gauss-Seidel (no slicing) vs dense least squares", gauss_seidel_ls_error(3000, 5), 1e-6),
    ];
    match awgn_qpsk(&[4.0, 8.0], 100, 6) {
        Ok(rows) => {
            for (snr, ber, q, std) in rows {
                out.push(Check::new(
                    if snr == 4.0 { "AWGN QPSK BER vs Q-function, 4 dB" } else { "AWGN QPSK BER vs Q-function, 8 dB" },
                    (ber - q).abs() <= 3.0 * std,
                    format!("measured {ber:.4e}, analytic {q:.4e}, 3σ {:.1e}", 3.0 * std),
                ));
            }
        }
        Err(e) => out.push(Check::new("AWGN QPSK BER vs Q-function", false, e.to_string())),
    }
    let mut plan = ExperimentPlan::preset("smoke").expect("built-in preset");
    plan.timing = false;
    plan.frames_per_point = 6;
    out.push(match csv_bytes_per_worker_count(&plan, &[1, 2, 4]) {
        Ok(csvs) => Check::new(
            "identical CSV for 1, 2 and 4 workers",
            csvs.windows(2).all(|w| w[0] == w[1]),
            format!("{} bytes", csvs[0].len()),
        ),
        Err(e) => Check::new("identical CSV for 1, 2 and 4 workers", false, e.to_string()),
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_algebra_checks_pass() {
        assert!(round_trip_error(16, 8, 1).unwrap() < 1e-10);
        assert!(interleaver_bijective(5));
        assert!(pipeline_matrix_error(4, 2).unwrap() < 1e-10);
        assert!(apply_channel_error(&FrameConfig::new(16, 16, 7, 3, Scheme::Otfs), 500.0, 3).unwrap() < 1e-10);
    }

    #[test]
    fn q_function_reference_values() {
        assert!((q_function(0.0) - 0.5).abs() < 1e-15);
        for (x, q) in [(1.0, 0.158_655_253_931_457_07), (3.0, 1.349_898_031_630_095_6e-3)] {
            assert!((q_function(x) / q - 1.0).abs() < 1e-9, "Q({x})");
        }
    }
}

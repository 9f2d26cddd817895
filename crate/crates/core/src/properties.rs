use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bench::ExperimentPlan;
use crate::chanest::{estimate_taps, interpolate, InterpMethod, PilotObservations};
use crate::channel::{apply_channel, discrete_channel, BandedLower, Path, PathSet};
use crate::detect::{BandedHermitian, EqualizerKind};
use crate::modem::{FrameConfig, Scheme, Waveform};
use crate::{Grid, C64};

fn c64(rng: &mut impl Rng) -> C64 {
    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
}

fn scheme() -> impl Strategy<Value = Scheme> {
    prop::sample::select(Scheme::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn plan_text_round_trips(
        schemes in prop::sample::subsequence(Scheme::ALL.to_vec(), 1..=5),
        detectors in prop::sample::subsequence(EqualizerKind::ALL.to_vec(), 1..=3),
        snrs in prop::collection::vec(-5i32..40, 1..6),
        speeds in prop::collection::vec(0u32..600, 1..5),
        seed in any::<u64>(),
        frames in 1u64..100_000,
    ) {
        let mut plan = ExperimentPlan::new("prop");
        plan.schemes = schemes;
        plan.detectors = detectors;
        plan.snr_db_grid = snrs.into_iter().map(|s| s as f64 * 0.5).collect();
        plan.speed_kmh_grid = speeds.into_iter().map(f64::from).collect();
        plan.seed = seed;
        plan.frames_per_point = frames;
        let parsed = ExperimentPlan::parse(&plan.to_plan_text()).unwrap();
        prop_assert_eq!(&parsed, &plan);
        prop_assert_eq!(parsed.config_hash(), plan.config_hash());
    }

    #[test]
    fn modulation_preserves_energy(s in scheme(), seed in any::<u64>()) {
        let cfg = FrameConfig::new(16, 8, 5, 2, s);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Grid::from_fn(16, 8, |_, _| c64(&mut rng));
        let samples = Waveform::new(&cfg).unwrap().modulate(&x).unwrap();
        let e: f64 = samples.iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((e - x.frobenius_norm_sqr()).abs() < 1e-9 * e.max(1.0));
    }

    #[test]
    fn interpolation_is_exact_at_pilot_samples(
        s in prop::sample::select(vec![Scheme::Otfs, Scheme::Otsm, Scheme::DctUsc]),
        seed in any::<u64>(),
    ) {
        let cfg = FrameConfig::new(16, 8, 7, 3, s);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let paths = PathSet::new(
            (0..=3)
                .map(|l| Path { gain: c64(&mut rng), delay: l, doppler: rng.random::<f64>() - 0.5 })
                .collect(),
        );
        let chan = discrete_channel(&paths, &cfg).unwrap();
        let x = crate::modem::FrameLayout::new(&cfg).unwrap().known_grid();
        let r = apply_channel(&Waveform::new(&cfg).unwrap().modulate(&x).unwrap(), &chan, 0.0, &mut rng);
        let obs = estimate_taps(&r, &cfg).unwrap();
        for method in [InterpMethod::Linear, InterpMethod::Spline, InterpMethod::NaturalSpline] {
            let est = interpolate(&obs, &cfg, method).unwrap();
            for l in 0..=3 {
                for n in 0..cfg.n {
                    let q = PilotObservations::position(&cfg, l, n);
                    prop_assert!((est.taps.get(l, q) - obs.get(l, n)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gauss_seidel_residual_never_increases(seed in any::<u64>(), m in 4usize..40, bw in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = BandedLower::zeros(m, bw);
        for row in 0..m {
            for l in 0..bw.min(row + 1) {
                g.set_diag_entry(row, l, c64(&mut rng));
            }
            g.set_diag_entry(row, 0, C64::new(1.0, 0.0) + c64(&mut rng) * 0.2);
        }
        let r = BandedHermitian::gram(&g);
        let z: Vec<C64> = (0..m).map(|_| c64(&mut rng)).collect();
        let mut x = vec![C64::new(0.0, 0.0); m];
        let mut last = r.residual_norm(&z, &x);
        for _ in 0..20 {
            r.gauss_seidel_sweep(&z, &mut x);
            let now = r.residual_norm(&z, &x);
            prop_assert!(now <= last * (1.0 + 1e-12) + 1e-14);
            last = now;
        }
    }
}

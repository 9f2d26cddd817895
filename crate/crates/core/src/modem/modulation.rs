use super::config::{FrameConfig, Scheme};
use crate::transforms::{
    build_unitary, deinterleave, interleave, InterleaverSpec, UnitaryKind, UnitaryMatrix,
};
use crate::{Error, Grid, Result, C64};

/// Precomputed transmit/receive transforms for one scheme and frame size.
///
/// Maps information grids `X` to delay-time grids `X̃ = F_M†·U_F·X·U_T` and
/// back; for USC schemes (`U_F = F_M`) this is the time precoding `X·U_T`.
#[derive(Debug, Clone)]
pub struct Waveform {
    scheme: Scheme,
    spec: InterleaverSpec,
    u_f: UnitaryMatrix,
    u_t: UnitaryMatrix,
    dft_m: UnitaryMatrix,
}

impl Waveform {
    pub fn new(cfg: &FrameConfig) -> Result<Self> {
        let (uf, ut) = cfg.scheme.precoders();
        Ok(Waveform {
            scheme: cfg.scheme,
            spec: InterleaverSpec::new(cfg.m, cfg.n),
            u_f: build_unitary(uf, cfg.m)?,
            u_t: build_unitary(ut, cfg.n)?,
            dft_m: build_unitary(UnitaryKind::Dft, cfg.m)?,
        })
    }

    /// General 2-D precoded form with arbitrary `U_F` and `U_T`.
    pub fn with_precoders(
        scheme: Scheme,
        u_f: UnitaryMatrix,
        u_t: UnitaryMatrix,
    ) -> Result<Self> {
        let m = u_f.size();
        Ok(Waveform {
            scheme,
            spec: InterleaverSpec::new(m, u_t.size()),
            dft_m: build_unitary(UnitaryKind::Dft, m)?,
            u_f,
            u_t,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn u_t(&self) -> &UnitaryMatrix {
        &self.u_t
    }

    pub fn u_f(&self) -> &UnitaryMatrix {
        &self.u_f
    }

    pub fn interleaver(&self) -> InterleaverSpec {
        self.spec
    }

    fn frequency_is_dft(&self) -> bool {
        self.u_f.kind() == UnitaryKind::Dft
    }

    fn check_grid(&self, x: &Grid) -> Result<()> {
        if x.rows() != self.spec.m || x.cols() != self.spec.n {
            return Err(Error::DimensionMismatch {
                what: "grid size (rows·cols)",
                expected: self.spec.len(),
                got: x.rows() * x.cols(),
            });
        }
        Ok(())
    }

    /// `X̃ = F_M†·U_F·X·U_T`.
    pub fn to_delay_time(&self, x: &Grid) -> Result<Grid> {
        self.check_grid(x)?;
        let mut out = x.clone();
        if !self.frequency_is_dft() {
            self.map_columns(&mut out, |col| {
                self.u_f.apply_left(col);
                self.dft_m.apply_left_adjoint(col);
            });
        }
        for m in 0..out.rows() {
            self.u_t.apply_right(out.row_mut(m));
        }
        Ok(out)
    }

    /// `Y = U_F†·F_M·Ỹ·U_T†`, the inverse of [`Waveform::to_delay_time`].
    pub fn from_delay_time(&self, y: &Grid) -> Result<Grid> {
        self.check_grid(y)?;
        let mut out = y.clone();
        for m in 0..out.rows() {
            self.u_t.apply_right_adjoint(out.row_mut(m));
        }
        if !self.frequency_is_dft() {
            self.map_columns(&mut out, |col| {
                self.dft_m.apply_left(col);
                self.u_f.apply_left_adjoint(col);
            });
        }
        Ok(out)
    }

    fn map_columns(&self, g: &mut Grid, f: impl Fn(&mut [C64])) {
        let mut col = vec![C64::new(0.0, 0.0); g.rows()];
        for c in 0..g.cols() {
            for (r, v) in col.iter_mut().enumerate() {
                *v = g[(r, c)];
            }
            f(&mut col);
            for (r, v) in col.iter().enumerate() {
                g[(r, c)] = *v;
            }
        }
    }

    /// Transmit samples `s = vec(X̃)`.
    pub fn modulate(&self, x: &Grid) -> Result<Vec<C64>> {
        Ok(interleave(&self.to_delay_time(x)?))
    }

    /// Received information grid from `NM` samples.
    pub fn demodulate(&self, r: &[C64]) -> Result<Grid> {
        self.from_delay_time(&deinterleave(r, self.spec)?)
    }
}

/// `s = interleave(X·U_T)` for USC schemes.
pub fn usc_modulate(x: &Grid, cfg: &FrameConfig) -> Result<Vec<C64>> {
    if !cfg.scheme.is_usc() {
        return Err(Error::SchemeMismatch(cfg.scheme.to_string()));
    }
    Waveform::new(cfg)?.modulate(x)
}

/// `s = vec(F_M†·U_F·X·U_T)` for arbitrary precoders.
pub fn multicarrier_modulate(
    x: &Grid,
    u_f: &UnitaryMatrix,
    u_t: &UnitaryMatrix,
    cfg: &FrameConfig,
) -> Result<Vec<C64>> {
    if u_f.size() != cfg.m || u_t.size() != cfg.n {
        return Err(Error::DimensionMismatch {
            what: "precoder sizes (M·N)",
            expected: cfg.m * cfg.n,
            got: u_f.size() * u_t.size(),
        });
    }
    Waveform::with_precoders(cfg.scheme, u_f.clone(), u_t.clone())?.modulate(x)
}

/// `Y = deinterleave(r)·U_T†` for USC schemes.
pub fn usc_demodulate(r: &[C64], cfg: &FrameConfig) -> Result<Grid> {
    if !cfg.scheme.is_usc() {
        return Err(Error::SchemeMismatch(cfg.scheme.to_string()));
    }
    Waveform::new(cfg)?.demodulate(r)
}

/// Scheme-general modulation (USC or OFDM).
pub fn modulate(x: &Grid, cfg: &FrameConfig) -> Result<Vec<C64>> {
    Waveform::new(cfg)?.modulate(x)
}

/// Scheme-general demodulation (USC or OFDM).
pub fn demodulate(r: &[C64], cfg: &FrameConfig) -> Result<Grid> {
    Waveform::new(cfg)?.demodulate(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::build_frame;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rng: &mut impl Rng, m: usize, n: usize) -> Grid {
        Grid::from_fn(m, n, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn sc_is_column_vectorization() {
        let cfg = FrameConfig::new(8, 4, 3, 1, Scheme::Sc);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_grid(&mut rng, 8, 4);
        assert_eq!(usc_modulate(&x, &cfg).unwrap(), interleave(&x));
    }

    #[test]
    fn otsm_pilot_only() {
        let cfg = FrameConfig::new(16, 8, 7, 3, Scheme::Otsm);
        let layout = crate::modem::FrameLayout::new(&cfg).unwrap();
        let x = layout.known_grid();
        let s = usc_modulate(&x, &cfg).unwrap();
        let w = build_unitary(UnitaryKind::Wht, 8).unwrap();
        let (mp, np) = (cfg.pilot.m_p, cfg.pilot.n_p);
        for q in 0..s.len() {
            let (m, n) = (q % 16, q / 16);
            let want = if m == mp {
                cfg.pilot.amplitude * w.get(np, n)
            } else {
                C64::new(0.0, 0.0)
            };
            assert!((s[q] - want).norm() < 1e-14, "q = {q}");
        }
    }

    #[test]
    fn ofdm_delta_is_idft_column() {
        let cfg = FrameConfig::new(8, 4, 3, 1, Scheme::Ofdm);
        let f = build_unitary(UnitaryKind::Dft, 8).unwrap();
        let mut x = Grid::zeros(8, 4);
        x[(3, 2)] = C64::new(1.0, 0.0);
        let s = modulate(&x, &cfg).unwrap();
        for q in 0..32 {
            let (m, n) = (q % 8, q / 8);
            let want = if n == 2 {
                f.get(3, m).conj()
            } else {
                C64::new(0.0, 0.0)
            };
            assert!((s[q] - want).norm() < 1e-14);
        }
    }

    #[test]
    fn multicarrier_with_dft_matches_usc() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for scheme in [Scheme::Otfs, Scheme::Otsm, Scheme::DctUsc, Scheme::Sc] {
            let cfg = FrameConfig::new(16, 8, 7, 3, scheme);
            let x = random_grid(&mut rng, 16, 8);
            let (_, ut) = scheme.precoders();
            let a = multicarrier_modulate(
                &x,
                &build_unitary(UnitaryKind::Dft, 16).unwrap(),
                &build_unitary(ut, 8).unwrap(),
                &cfg,
            )
            .unwrap();
            let b = usc_modulate(&x, &cfg).unwrap();
            let err = a.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "{scheme}: {err:e}");
        }
        let cfg = FrameConfig::new(16, 8, 7, 3, Scheme::Ofdm);
        let zero = modulate(&Grid::zeros(16, 8), &cfg).unwrap();
        assert!(zero.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn otfs_demod_is_row_dft() {
        let cfg = FrameConfig::new(8, 8, 3, 1, Scheme::Otfs);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r: Vec<C64> = (0..64)
            .map(|_| C64::new(rng.random(), rng.random()))
            .collect();
        let y = usc_demodulate(&r, &cfg).unwrap();
        let f = build_unitary(UnitaryKind::Dft, 8).unwrap();
        let folded = deinterleave(&r, InterleaverSpec::new(8, 8)).unwrap();
        for m in 0..8 {
            for n in 0..8 {
                let want: C64 = (0..8).map(|k| folded[(m, k)] * f.get(k, n)).sum();
                assert!((y[(m, n)] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn scheme_and_length_errors() {
        let cfg = FrameConfig::new(8, 4, 3, 1, Scheme::Ofdm);
        assert!(matches!(
            usc_modulate(&Grid::zeros(8, 4), &cfg),
            Err(Error::SchemeMismatch(_))
        ));
        assert!(matches!(
            usc_demodulate(&[C64::new(0.0, 0.0); 32], &cfg),
            Err(Error::SchemeMismatch(_))
        ));
        let cfg = cfg.with_scheme(Scheme::Otfs);
        assert!(matches!(
            usc_demodulate(&[C64::new(0.0, 0.0); 31], &cfg),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn round_trip_and_energy_all_schemes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for scheme in Scheme::ALL {
            let cfg = FrameConfig::standard(scheme);
            let bits: Vec<u8> = (0..cfg.data_bits()).map(|_| rng.random_range(0..2)).collect();
            let x = build_frame(&bits, &cfg).unwrap().values;
            let s = modulate(&x, &cfg).unwrap();
            let es: f64 = s.iter().map(|v| v.norm_sqr()).sum();
            let ex = x.frobenius_norm_sqr();
            assert!(((es - ex) / ex).abs() < 1e-12, "{scheme}");
            let y = demodulate(&s, &cfg).unwrap();
            assert!(y.max_abs_diff(&x) < 1e-10, "{scheme}");
        }
    }

    #[test]
    fn usc_tail_rows_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for scheme in [Scheme::Otfs, Scheme::Otsm, Scheme::DctUsc, Scheme::Sc] {
            let cfg = FrameConfig::standard(scheme).with_pilot_boost_db(10.0);
            let bits: Vec<u8> = (0..cfg.data_bits()).map(|_| rng.random_range(0..2)).collect();
            let x = build_frame(&bits, &cfg).unwrap().values;
            let s = usc_modulate(&x, &cfg).unwrap();
            for n in 0..cfg.n {
                for m in cfg.m - cfg.l_max..cfg.m {
                    assert_eq!(s[m + n * cfg.m], C64::new(0.0, 0.0));
                }
            }
        }
    }
}

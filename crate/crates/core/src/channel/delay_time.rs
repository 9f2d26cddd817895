use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::eva::PathSet;
use crate::modem::FrameConfig;
use crate::{Error, Result, C64};

/// Discrete delay-time channel `ḡ[l,q]` for `l ∈ [0, l_max]`, `q ∈ [0, NM)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTimeChannel {
    l_max: usize,
    len: usize,
    taps: Vec<C64>,
}

impl DelayTimeChannel {
    pub fn zeros(l_max: usize, len: usize) -> Self {
        DelayTimeChannel {
            l_max,
            len,
            taps: vec![C64::new(0.0, 0.0); (l_max + 1) * len],
        }
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// Frame length `NM`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, l: usize, q: usize) -> C64 {
        self.taps[l * self.len + q]
    }

    pub fn set(&mut self, l: usize, q: usize, v: C64) {
        self.taps[l * self.len + q] = v;
    }

    /// Row `ḡ[l, ·]`.
    pub fn tap(&self, l: usize) -> &[C64] {
        &self.taps[l * self.len..(l + 1) * self.len]
    }

    pub fn tap_mut(&mut self, l: usize) -> &mut [C64] {
        &mut self.taps[l * self.len..(l + 1) * self.len]
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|v| v.norm_sqr()).sum()
    }

    /// `Σ |a − b|²` over all entries.
    pub fn squared_error(&self, other: &DelayTimeChannel) -> f64 {
        assert_eq!((self.l_max, self.len), (other.l_max, other.len));
        self.taps
            .iter()
            .zip(&other.taps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum()
    }
}

/// Evaluates `ḡ[l,q] = Σ_i h_i·z^{κ_i(q−l_i)}·δ[l−l_i]` with `z = e^{j2π/NM}`.
pub fn discrete_channel(paths: &PathSet, cfg: &FrameConfig) -> Result<DelayTimeChannel> {
    let len = cfg.frame_len();
    let mut chan = DelayTimeChannel::zeros(cfg.l_max, len);
    let w = 2.0 * PI / len as f64;
    for p in &paths.paths {
        if p.delay > cfg.l_max {
            return Err(Error::DelayOutOfRange {
                delay: p.delay,
                l_max: cfg.l_max,
            });
        }
        let row = chan.tap_mut(p.delay);
        if p.doppler == 0.0 {
            for v in row.iter_mut() {
                *v += p.gain;
            }
        } else {
            for (q, v) in row.iter_mut().enumerate() {
                let phase = w * p.doppler * (q as f64 - p.delay as f64);
                *v += p.gain * C64::from_polar(1.0, phase);
            }
        }
    }
    Ok(chan)
}

/// `r[q] = Σ_l ḡ[l,q]·s[q−l] + w[q]` with zero state before the frame and
/// circularly-symmetric Gaussian noise of variance `σ_w²` per sample.
pub fn apply_channel<R: Rng + ?Sized>(
    s: &[C64],
    chan: &DelayTimeChannel,
    sigma_w: f64,
    rng: &mut R,
) -> Vec<C64> {
    assert_eq!(s.len(), chan.len(), "signal length vs channel length");
    let mut r = vec![C64::new(0.0, 0.0); s.len()];
    for l in 0..=chan.l_max() {
        let tap = chan.tap(l);
        for q in l..s.len() {
            r[q] += tap[q] * s[q - l];
        }
    }
    if sigma_w > 0.0 {
        let std = sigma_w / 2f64.sqrt();
        for v in r.iter_mut() {
            let (re, im): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
            *v += C64::new(re, im) * std;
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PathSet;
    use crate::modem::Scheme;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> FrameConfig {
        FrameConfig::new(16, 8, 7, 3, Scheme::Otfs)
    }

    fn random_signal(rng: &mut impl Rng, n: usize) -> Vec<C64> {
        (0..n)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    #[test]
    fn identity_path() {
        let c = discrete_channel(&PathSet::single(C64::new(1.0, 0.0), 0, 0.0), &cfg()).unwrap();
        for q in 0..c.len() {
            assert_eq!(c.get(0, q), C64::new(1.0, 0.0));
            for l in 1..=3 {
                assert_eq!(c.get(l, q), C64::new(0.0, 0.0));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = random_signal(&mut rng, 128);
        assert_eq!(apply_channel(&s, &c, 0.0, &mut rng), s);
    }

    #[test]
    fn one_tap_delay_with_doppler() {
        let kappa = 1.3;
        let c = discrete_channel(&PathSet::single(C64::new(1.0, 0.0), 1, kappa), &cfg()).unwrap();
        let nm = 128.0;
        for q in 0..128 {
            let want = C64::from_polar(1.0, 2.0 * PI * kappa * (q as f64 - 1.0) / nm);
            assert!((c.get(1, q) - want).norm() < 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_signal(&mut rng, 128);
        let r = apply_channel(&s, &c, 0.0, &mut rng);
        assert_eq!(r[0], C64::new(0.0, 0.0));
        for q in 1..128 {
            assert!((r[q] - s[q - 1] * c.get(1, q)).norm() < 1e-12);
        }
    }

    #[test]
    fn same_tap_paths_add() {
        let paths = PathSet::new(vec![
            crate::channel::Path {
                gain: C64::new(0.5, 0.1),
                delay: 2,
                doppler: 0.7,
            },
            crate::channel::Path {
                gain: C64::new(-0.2, 0.3),
                delay: 2,
                doppler: -2.1,
            },
        ]);
        let c = discrete_channel(&paths, &cfg()).unwrap();
        let w = 2.0 * PI / 128.0;
        for q in 0..128 {
            let t = q as f64 - 2.0;
            let want = C64::new(0.5, 0.1) * C64::from_polar(1.0, w * 0.7 * t)
                + C64::new(-0.2, 0.3) * C64::from_polar(1.0, -w * 2.1 * t);
            assert!((c.get(2, q) - want).norm() < 1e-12);
        }
    }

    #[test]
    fn delay_out_of_range() {
        let err = discrete_channel(&PathSet::single(C64::new(1.0, 0.0), 4, 0.0), &cfg());
        assert!(matches!(err, Err(Error::DelayOutOfRange { delay: 4, l_max: 3 })));
    }

    #[test]
    fn static_channel_constant_over_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = cfg();
        let paths = crate::channel::gen_paths_eva(0.0, &c, &mut rng);
        let ch = discrete_channel(&paths, &c).unwrap();
        for l in 0..=3 {
            assert!(ch.tap(l).iter().all(|v| *v == ch.get(l, 0)));
        }
    }

    #[test]
    fn linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = cfg();
        let ch = discrete_channel(&crate::channel::gen_paths_eva(900.0, &c, &mut rng), &c).unwrap();
        let s1 = random_signal(&mut rng, 128);
        let s2 = random_signal(&mut rng, 128);
        let (a, b) = (C64::new(0.3, -1.2), C64::new(2.0, 0.5));
        let mix: Vec<C64> = s1.iter().zip(&s2).map(|(x, y)| a * x + b * y).collect();
        let r = apply_channel(&mix, &ch, 0.0, &mut rng);
        let r1 = apply_channel(&s1, &ch, 0.0, &mut rng);
        let r2 = apply_channel(&s2, &ch, 0.0, &mut rng);
        for q in 0..128 {
            assert!((r[q] - (a * r1[q] + b * r2[q])).norm() < 1e-12);
        }
    }

    #[test]
    fn noise_variance_calibrated() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut c = cfg();
        c.m = 1024;
        c.n = 1024;
        c.guard_len = 16;
        let ch = discrete_channel(&PathSet::single(C64::new(0.8, 0.6), 1, 3.0), &c).unwrap();
        let s = random_signal(&mut rng, c.frame_len());
        let sigma = 0.3;
        let noisy = apply_channel(&s, &ch, sigma, &mut rng);
        let clean = apply_channel(&s, &ch, 0.0, &mut rng);
        let var = noisy
            .iter()
            .zip(&clean)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / noisy.len() as f64;
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.02, "{var}");
    }
}

//! Gray-labelled square QAM with unit average symbol energy.
//!
//! A label of `k` bits is split into an in-phase half (first `k/2` bits) and a
//! quadrature half. Each half selects a PAM level through a binary-reflected
//! Gray code, with label 0 on the most positive level:
//!
//! | order | I/Q levels (label 0 first) | scale |
//! |-------|----------------------------|-------|
//! | 4     | +1, −1                     | 1/√2  |
//! | 16    | +3, +1, −3, −1             | 1/√10 |
//! | 64    | +7, +5, +1, +3, −7, −5, −1, −3 | 1/√42 |

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QamOrder {
    Qpsk,
    Qam16,
    Qam64,
}

impl QamOrder {
    pub fn from_order(order: u32) -> Result<Self> {
        match order {
            4 => Ok(QamOrder::Qpsk),
            16 => Ok(QamOrder::Qam16),
            64 => Ok(QamOrder::Qam64),
            other => Err(Error::UnsupportedQamOrder(other)),
        }
    }

    pub fn order(self) -> u32 {
        match self {
            QamOrder::Qpsk => 4,
            QamOrder::Qam16 => 16,
            QamOrder::Qam64 => 64,
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        self.order().trailing_zeros() as usize
    }

    fn bits_per_axis(self) -> usize {
        self.bits_per_symbol() / 2
    }

    fn levels(self) -> usize {
        1 << self.bits_per_axis()
    }

    /// Amplitude normalization so the mean symbol energy is 1.
    fn scale(self) -> f64 {
        let m = self.order() as f64;
        1.0 / (2.0 * (m - 1.0) / 3.0).sqrt()
    }

    /// Unnormalized PAM amplitude of level index `i` (0 is most positive).
    fn level_amplitude(self, i: usize) -> f64 {
        (self.levels() - 1) as f64 - 2.0 * i as f64
    }

    /// Constellation point for a label.
    pub fn point(self, label: u32) -> C64 {
        let k = self.bits_per_axis();
        let mask = (1u32 << k) - 1;
        let i_gray = (label >> k) & mask;
        let q_gray = label & mask;
        C64::new(
            self.level_amplitude(gray_decode(i_gray) as usize),
            self.level_amplitude(gray_decode(q_gray) as usize),
        ) * self.scale()
    }

    /// All points, indexed by label.
    pub fn alphabet(self) -> Vec<C64> {
        (0..self.order()).map(|l| self.point(l)).collect()
    }

    /// Half the minimum distance between constellation points.
    pub fn half_min_distance(self) -> f64 {
        self.scale()
    }

    /// Label of the nearest point. Equidistant candidates resolve to the
    /// lowest label.
    pub fn slice_label(self, y: C64) -> u32 {
        let k = self.bits_per_axis();
        (self.slice_axis(y.re / self.scale()) << k) | self.slice_axis(y.im / self.scale())
    }

    fn slice_axis(self, x: f64) -> u32 {
        let top = self.levels() - 1;
        // Level index as a real number; level i sits at amplitude top − 2i.
        let t = (top as f64 - x) / 2.0;
        if !t.is_finite() {
            return gray_encode(if t > 0.0 { top as u32 } else { 0 });
        }
        if t <= 0.0 {
            return gray_encode(0);
        }
        if t >= top as f64 {
            return gray_encode(top as u32);
        }
        let lo = t.floor();
        let frac = t - lo;
        let lo = lo as u32;
        let idx = if frac < 0.5 {
            lo
        } else if frac > 0.5 {
            lo + 1
        } else if gray_encode(lo) < gray_encode(lo + 1) {
            lo
        } else {
            lo + 1
        };
        gray_encode(idx)
    }
}

fn gray_encode(i: u32) -> u32 {
    i ^ (i >> 1)
}

fn gray_decode(mut g: u32) -> u32 {
    let mut i = g;
    while g > 0 {
        g >>= 1;
        i ^= g;
    }
    i
}

/// Maps bits (0/1, MSB-first per symbol) to unit-energy Gray QAM symbols.
pub fn qam_map(bits: &[u8], order: QamOrder) -> Result<Vec<C64>> {
    let k = order.bits_per_symbol();
    if bits.len() % k != 0 {
        return Err(Error::BitCount {
            expected: bits.len().div_ceil(k) * k,
            got: bits.len(),
        });
    }
    Ok(bits
        .chunks_exact(k)
        .map(|chunk| {
            let label = chunk.iter().fold(0u32, |acc, &b| (acc << 1) | (b & 1) as u32);
            order.point(label)
        })
        .collect())
}

/// Nearest-point labels for each input.
pub fn qam_slice_labels(symbols: &[C64], order: QamOrder) -> Vec<u32> {
    symbols.iter().map(|&y| order.slice_label(y)).collect()
}

/// Replaces each entry with its nearest constellation point.
pub fn qam_slice(symbols: &[C64], order: QamOrder) -> Vec<C64> {
    symbols
        .iter()
        .map(|&y| order.point(order.slice_label(y)))
        .collect()
}

/// Hard-decision bits of the nearest constellation points.
pub fn qam_demap(symbols: &[C64], order: QamOrder) -> Vec<u8> {
    let k = order.bits_per_symbol();
    let mut bits = Vec::with_capacity(symbols.len() * k);
    for &y in symbols {
        let label = order.slice_label(y);
        for b in (0..k).rev() {
            bits.push(((label >> b) & 1) as u8);
        }
    }
    bits
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ORDERS: [QamOrder; 3] = [QamOrder::Qpsk, QamOrder::Qam16, QamOrder::Qam64];

    #[test]
    fn qpsk_zero_bits() {
        let s = qam_map(&[0, 0], QamOrder::Qpsk).unwrap();
        let want = C64::new(1.0, 1.0) / 2f64.sqrt();
        assert!((s[0] - want).norm() < 1e-15);
    }

    #[test]
    fn unit_average_energy() {
        for order in ORDERS {
            let e: f64 = order.alphabet().iter().map(|p| p.norm_sqr()).sum::<f64>()
                / order.order() as f64;
            assert!((e - 1.0).abs() < 1e-12, "{order:?}: {e}");
        }
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        for order in ORDERS {
            let pts = order.alphabet();
            let dmin = 2.0 * order.half_min_distance();
            for (a, pa) in pts.iter().enumerate() {
                for (b, pb) in pts.iter().enumerate() {
                    if ((pa - pb).norm() - dmin).abs() < 1e-9 {
                        assert_eq!((a ^ b).count_ones(), 1, "{order:?} {a} {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn slice_fixed_points_and_tie_break() {
        for order in ORDERS {
            for p in order.alphabet() {
                assert_eq!(qam_slice(&[p], order)[0], p);
            }
        }
        let s = qam_slice(&[C64::new(0.0, 0.0)], QamOrder::Qpsk)[0];
        assert_eq!(s, C64::new(1.0, 1.0) / 2f64.sqrt());
        // Far outside the constellation saturates to the corner points.
        let far = qam_slice_labels(&[C64::new(1e9, -1e9)], QamOrder::Qam16)[0];
        assert_eq!(QamOrder::Qam16.point(far), C64::new(3.0, -3.0) / 10f64.sqrt());
    }

    #[test]
    fn slice_matches_brute_force_nearest() {
        for order in ORDERS {
            let pts = order.alphabet();
            for i in -40..=40 {
                for j in -40..=40 {
                    let y = C64::new(i as f64 * 0.037, j as f64 * 0.041);
                    let got = order.slice_label(y);
                    let best = pts
                        .iter()
                        .map(|p| (p - y).norm())
                        .fold(f64::INFINITY, f64::min);
                    assert!(((pts[got as usize] - y).norm() - best).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            qam_map(&[0, 1, 1], QamOrder::Qam16),
            Err(Error::BitCount { .. })
        ));
        assert!(matches!(
            QamOrder::from_order(8),
            Err(Error::UnsupportedQamOrder(8))
        ));
    }

    proptest! {
        #[test]
        fn round_trip(order_idx in 0usize..3, raw in proptest::collection::vec(0u8..2, 0..120)) {
            let order = ORDERS[order_idx];
            let k = order.bits_per_symbol();
            let bits = &raw[..raw.len() / k * k];
            let syms = qam_map(bits, order).unwrap();
            prop_assert_eq!(qam_demap(&syms, order), bits.to_vec());
        }

        #[test]
        fn voronoi(order_idx in 0usize..3, label in 0u32..64, r in 0.0f64..0.999, th in -3.2f64..3.2) {
            let order = ORDERS[order_idx];
            let label = label % order.order();
            let p = order.point(label);
            let y = p + C64::from_polar(r * order.half_min_distance(), th);
            prop_assert_eq!(order.slice_label(y), label);
        }
    }
}

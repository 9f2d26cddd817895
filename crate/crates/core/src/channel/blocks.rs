use super::delay_time::DelayTimeChannel;
use crate::modem::FrameConfig;
use crate::{Grid, C64};

/// Lower-triangular banded `size × size` matrix with entries `A[i, i−l]`
/// for `0 ≤ l < bandwidth`, stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedLower {
    size: usize,
    bandwidth: usize,
    data: Vec<C64>,
}

impl BandedLower {
    pub fn zeros(size: usize, bandwidth: usize) -> Self {
        BandedLower {
            size,
            bandwidth,
            data: vec![C64::new(0.0, 0.0); size * bandwidth],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of stored diagonals (`l_max + 1`).
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// `A[row, row − l]`.
    pub fn diag_entry(&self, row: usize, l: usize) -> C64 {
        self.data[row * self.bandwidth + l]
    }

    pub fn set_diag_entry(&mut self, row: usize, l: usize, v: C64) {
        debug_assert!(l <= row);
        self.data[row * self.bandwidth + l] = v;
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        if col > row || row - col >= self.bandwidth {
            C64::new(0.0, 0.0)
        } else {
            self.diag_entry(row, row - col)
        }
    }

    /// `A·x`.
    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.size);
        (0..self.size)
            .map(|i| {
                (0..self.bandwidth.min(i + 1))
                    .map(|l| self.diag_entry(i, l) * x[i - l])
                    .sum()
            })
            .collect()
    }

    /// `A†·x`.
    pub fn adjoint_mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.size);
        let mut out = vec![C64::new(0.0, 0.0); self.size];
        for i in 0..self.size {
            for l in 0..self.bandwidth.min(i + 1) {
                out[i - l] += self.diag_entry(i, l).conj() * x[i];
            }
        }
        out
    }

    pub fn to_dense(&self) -> Grid {
        Grid::from_fn(self.size, self.size, |i, j| self.get(i, j))
    }
}

/// Per-block channel matrices `G_n` of a zero-padded frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockChannelMatrix {
    pub blocks: Vec<BandedLower>,
}

impl BlockChannelMatrix {
    pub fn block_size(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.size())
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Concatenation of `G_n·s_n` over all blocks.
    pub fn apply(&self, s: &[C64]) -> Vec<C64> {
        let m = self.block_size();
        assert_eq!(s.len(), m * self.blocks.len());
        self.blocks
            .iter()
            .zip(s.chunks_exact(m))
            .flat_map(|(g, sn)| g.mul_vec(sn))
            .collect()
    }
}

/// `G_n[q', q'−l] = ḡ[l, nM + q']` for `0 ≤ l ≤ min(l_max, q')`.
pub fn block_matrices(chan: &DelayTimeChannel, cfg: &FrameConfig) -> BlockChannelMatrix {
    let (m, l_max) = (cfg.m, chan.l_max());
    assert_eq!(chan.len(), cfg.frame_len(), "channel length vs frame");
    let blocks = (0..cfg.n)
        .map(|n| {
            let mut g = BandedLower::zeros(m, l_max + 1);
            for l in 0..=l_max {
                let tap = chan.tap(l);
                for row in l..m {
                    g.set_diag_entry(row, l, tap[n * m + row]);
                }
            }
            g
        })
        .collect();
    BlockChannelMatrix { blocks }
}

use super::config::FrameConfig;
use super::qam::qam_map;
use crate::{Error, Grid, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellRole {
    Data,
    Pilot,
    Guard,
}

/// Role of every cell of an `M × N` frame, derived from a [`FrameConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLayout {
    m: usize,
    n: usize,
    guard_start: usize,
    pilot: (usize, usize),
    pilot_value: C64,
}

impl FrameLayout {
    pub fn new(cfg: &FrameConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(FrameLayout {
            m: cfg.m,
            n: cfg.n,
            guard_start: cfg.guard_start(),
            pilot: (cfg.pilot.m_p, cfg.pilot.n_p),
            pilot_value: C64::new(cfg.pilot.amplitude, 0.0),
        })
    }

    pub fn role(&self, m: usize, n: usize) -> CellRole {
        if (m, n) == self.pilot {
            CellRole::Pilot
        } else if m >= self.guard_start {
            CellRole::Guard
        } else {
            CellRole::Data
        }
    }

    /// Number of leading delay rows that carry data.
    pub fn data_rows(&self) -> usize {
        self.guard_start
    }

    pub fn data_cells(&self) -> usize {
        self.guard_start * self.n
    }

    pub fn pilot_position(&self) -> (usize, usize) {
        self.pilot
    }

    pub fn pilot_value(&self) -> C64 {
        self.pilot_value
    }

    /// Grid of the known (pilot and guard) cells, zero on data cells.
    pub fn known_grid(&self) -> Grid {
        let mut g = Grid::zeros(self.m, self.n);
        g[self.pilot] = self.pilot_value;
        g
    }

    /// Data cells occupy the first `data_rows()` rows, so in row-major order
    /// they are exactly the leading `data_cells()` entries of a grid.
    pub fn data_slice<'a>(&self, g: &'a Grid) -> &'a [C64] {
        &g.as_slice()[..self.data_cells()]
    }

    pub fn data_slice_mut<'a>(&self, g: &'a mut Grid) -> &'a mut [C64] {
        let n = self.data_cells();
        &mut g.as_mut_slice()[..n]
    }
}

/// Frame symbols with the role of every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid {
    pub values: Grid,
    pub layout: FrameLayout,
}

impl SymbolGrid {
    pub fn mask(&self) -> Vec<CellRole> {
        let (rows, cols) = (self.values.rows(), self.values.cols());
        let mut out = Vec::with_capacity(rows * cols);
        for m in 0..rows {
            for n in 0..cols {
                out.push(self.layout.role(m, n));
            }
        }
        out
    }

    pub fn data(&self) -> &[C64] {
        self.layout.data_slice(&self.values)
    }
}

/// Places QAM data (row-major over the data rows), the pilot and zero guards.
pub fn build_frame(data_bits: &[u8], cfg: &FrameConfig) -> Result<SymbolGrid> {
    let layout = FrameLayout::new(cfg)?;
    let expected = cfg.data_bits();
    if data_bits.len() != expected {
        return Err(Error::BitCount {
            expected,
            got: data_bits.len(),
        });
    }
    let symbols = qam_map(data_bits, cfg.qam)?;
    let mut values = layout.known_grid();
    layout.data_slice_mut(&mut values).copy_from_slice(&symbols);
    Ok(SymbolGrid { values, layout })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::Scheme;

    #[test]
    fn small_frame_layout() {
        let mut cfg = FrameConfig::new(8, 2, 3, 1, Scheme::Otsm);
        cfg.pilot.m_p = 6;
        let bits = vec![1u8; cfg.data_bits()];
        let g = build_frame(&bits, &cfg).unwrap();
        let mask = g.mask();
        let data = mask.iter().filter(|r| **r == CellRole::Data).count();
        assert_eq!(data, 10);
        for m in 5..8 {
            for n in 0..2 {
                assert_ne!(g.layout.role(m, n), CellRole::Data);
            }
        }
        assert_eq!(g.layout.role(6, 0), CellRole::Pilot);
        assert_eq!(g.values[(6, 0)], C64::new(2f64.sqrt(), 0.0));
    }

    #[test]
    fn guard_cells_zero() {
        let cfg = FrameConfig::standard(Scheme::Otfs);
        let bits: Vec<u8> = (0..cfg.data_bits()).map(|i| (i * 7 % 3 == 0) as u8).collect();
        let g = build_frame(&bits, &cfg).unwrap();
        let mask = g.mask();
        for (idx, role) in mask.iter().enumerate() {
            let v = g.values.as_slice()[idx];
            match role {
                CellRole::Guard => assert_eq!(v, C64::new(0.0, 0.0)),
                CellRole::Pilot => assert_eq!(v.norm(), cfg.pilot.amplitude),
                CellRole::Data => assert!((v.norm() - 1.0).abs() < 1e-12),
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = FrameConfig::new(3, 2, 3, 1, Scheme::Otfs);
        assert!(matches!(build_frame(&[], &cfg), Err(Error::InvalidConfig(_))));
        // M = L_G + 1 leaves one data row, so zero bits is still a mismatch.
        let cfg = FrameConfig::new(4, 2, 3, 1, Scheme::Otfs);
        assert!(matches!(build_frame(&[], &cfg), Err(Error::BitCount { .. })));
        let cfg = FrameConfig::standard(Scheme::Otfs);
        assert!(matches!(
            build_frame(&[0, 1], &cfg),
            Err(Error::BitCount { .. })
        ));
    }
}

//! Unitary precoding matrices and the row-column interleaver.
//!
//! Every matrix is materialized densely; the DFT and WHT additionally carry a
//! fast path (FFT / butterfly) used by [`UnitaryMatrix::apply_right`] and
//! [`UnitaryMatrix::apply_right_adjoint`]. The dense entries define the result.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Grid, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnitaryKind {
    Identity,
    /// Normalized DFT, `F[i,k] = e^{-j2πik/N}/√N`.
    Dft,
    /// Conjugate transpose of [`UnitaryKind::Dft`].
    InverseDft,
    /// Normalized Walsh-Hadamard matrix in natural (Sylvester) order.
    Wht,
    /// Orthonormal DCT-II; row `k` is the `k`-th cosine basis vector.
    Dct,
}

impl UnitaryKind {
    pub const ALL: [UnitaryKind; 5] = [
        UnitaryKind::Identity,
        UnitaryKind::Dft,
        UnitaryKind::InverseDft,
        UnitaryKind::Wht,
        UnitaryKind::Dct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnitaryKind::Identity => "identity",
            UnitaryKind::Dft => "dft",
            UnitaryKind::InverseDft => "idft",
            UnitaryKind::Wht => "wht",
            UnitaryKind::Dct => "dct",
        }
    }

    fn check_size(self, size: usize) -> Result<()> {
        if size == 0 || (self == UnitaryKind::Wht && !size.is_power_of_two()) {
            return Err(Error::InvalidSize {
                kind: self.name(),
                size,
            });
        }
        Ok(())
    }

    fn entry(self, size: usize, row: usize, col: usize) -> C64 {
        let n = size as f64;
        match self {
            UnitaryKind::Identity => {
                if row == col {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            UnitaryKind::Dft | UnitaryKind::InverseDft => {
                // Reduce the exponent modulo N before evaluating for accuracy.
                let k = ((row * col) % size) as f64;
                let sign = if self == UnitaryKind::Dft { -1.0 } else { 1.0 };
                C64::from_polar(1.0 / n.sqrt(), sign * 2.0 * PI * k / n)
            }
            UnitaryKind::Wht => {
                let sign = if (row & col).count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                C64::new(sign / n.sqrt(), 0.0)
            }
            UnitaryKind::Dct => {
                let scale = if row == 0 {
                    (1.0 / n).sqrt()
                } else {
                    (2.0 / n).sqrt()
                };
                let arg = PI * (2 * col + 1) as f64 * row as f64 / (2.0 * n);
                C64::new(scale * arg.cos(), 0.0)
            }
        }
    }
}

impl fmt::Display for UnitaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UnitaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "i" => Ok(UnitaryKind::Identity),
            "dft" => Ok(UnitaryKind::Dft),
            "idft" | "inverse-dft" | "inversedft" => Ok(UnitaryKind::InverseDft),
            "wht" => Ok(UnitaryKind::Wht),
            "dct" => Ok(UnitaryKind::Dct),
            other => Err(Error::config(format!("unknown unitary kind `{other}`"))),
        }
    }
}

#[derive(Clone)]
enum FastPath {
    None,
    Fft {
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
    },
    Wht,
}

/// A dense `size × size` unitary matrix of a known kind.
#[derive(Clone)]
pub struct UnitaryMatrix {
    kind: UnitaryKind,
    size: usize,
    entries: Vec<C64>,
    fast: FastPath,
}

impl fmt::Debug for UnitaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UnitaryMatrix")
            .field("kind", &self.kind)
            .field("size", &self.size)
            .finish_non_exhaustive()
    }
}

/// Builds the unitary matrix of the given kind and size.
pub fn build_unitary(kind: UnitaryKind, size: usize) -> Result<UnitaryMatrix> {
    UnitaryMatrix::new(kind, size)
}

impl UnitaryMatrix {
    pub fn new(kind: UnitaryKind, size: usize) -> Result<Self> {
        kind.check_size(size)?;
        let mut entries = Vec::with_capacity(size * size);
        for r in 0..size {
            for c in 0..size {
                entries.push(kind.entry(size, r, c));
            }
        }
        let fast = match kind {
            UnitaryKind::Dft | UnitaryKind::InverseDft if size > 1 => {
                let mut planner = FftPlanner::new();
                FastPath::Fft {
                    forward: planner.plan_fft_forward(size),
                    inverse: planner.plan_fft_inverse(size),
                }
            }
            UnitaryKind::Wht if size > 1 => FastPath::Wht,
            _ => FastPath::None,
        };
        Ok(UnitaryMatrix {
            kind,
            size,
            entries,
            fast,
        })
    }

    pub fn kind(&self) -> UnitaryKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.size + col]
    }

    pub fn row(&self, row: usize) -> &[C64] {
        &self.entries[row * self.size..(row + 1) * self.size]
    }

    pub fn to_grid(&self) -> Grid {
        Grid::from_vec(self.size, self.size, self.entries.clone())
    }

    /// `‖U·U† − I‖_max`.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.size;
        let mut worst = 0.0f64;
        for i in 0..n {
            for k in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..n {
                    acc += self.get(i, j) * self.get(k, j).conj();
                }
                if i == k {
                    acc -= 1.0;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    /// In place `x ← xᵀ·U` for a row vector `x` (i.e. `y[k] = Σ_n x[n]·U[n,k]`).
    pub fn apply_right(&self, x: &mut [C64]) {
        assert_eq!(x.len(), self.size, "row length");
        match (&self.fast, self.kind) {
            (FastPath::Fft { forward, .. }, UnitaryKind::Dft) => {
                forward.process(x);
                scale(x, 1.0 / (self.size as f64).sqrt());
            }
            (FastPath::Fft { inverse, .. }, UnitaryKind::InverseDft) => {
                inverse.process(x);
                scale(x, 1.0 / (self.size as f64).sqrt());
            }
            (FastPath::Wht, _) => {
                fwht(x);
                scale(x, 1.0 / (self.size as f64).sqrt());
            }
            _ if self.kind == UnitaryKind::Identity => {}
            _ => self.apply_right_dense(x),
        }
    }

    /// In place `x ← xᵀ·U†` (i.e. `y[k] = Σ_n x[n]·conj(U[k,n])`).
    pub fn apply_right_adjoint(&self, x: &mut [C64]) {
        assert_eq!(x.len(), self.size, "row length");
        match (&self.fast, self.kind) {
            (FastPath::Fft { inverse, .. }, UnitaryKind::Dft) => {
                inverse.process(x);
                scale(x, 1.0 / (self.size as f64).sqrt());
            }
            (FastPath::Fft { forward, .. }, UnitaryKind::InverseDft) => {
                forward.process(x);
                scale(x, 1.0 / (self.size as f64).sqrt());
            }
            (FastPath::Wht, _) => {
                fwht(x);
                scale(x, 1.0 / (self.size as f64).sqrt());
            }
            _ if self.kind == UnitaryKind::Identity => {}
            _ => self.apply_right_adjoint_dense(x),
        }
    }

    fn is_symmetric(&self) -> bool {
        self.kind != UnitaryKind::Dct
    }

    /// In place `x ← U·x` for a column vector `x`.
    pub fn apply_left(&self, x: &mut [C64]) {
        if self.is_symmetric() {
            self.apply_right(x);
        } else {
            let n = self.size;
            let y: Vec<C64> = (0..n)
                .map(|i| (0..n).map(|j| self.get(i, j) * x[j]).sum())
                .collect();
            x.copy_from_slice(&y);
        }
    }

    /// In place `x ← U†·x` for a column vector `x`.
    pub fn apply_left_adjoint(&self, x: &mut [C64]) {
        if self.is_symmetric() {
            self.apply_right_adjoint(x);
        } else {
            let n = self.size;
            let y: Vec<C64> = (0..n)
                .map(|i| (0..n).map(|j| self.get(j, i).conj() * x[j]).sum())
                .collect();
            x.copy_from_slice(&y);
        }
    }

    /// Reference dense evaluation of [`UnitaryMatrix::apply_right`].
    pub fn apply_right_dense(&self, x: &mut [C64]) {
        let n = self.size;
        let y: Vec<C64> = (0..n)
            .map(|k| (0..n).map(|j| x[j] * self.get(j, k)).sum())
            .collect();
        x.copy_from_slice(&y);
    }

    /// Reference dense evaluation of [`UnitaryMatrix::apply_right_adjoint`].
    pub fn apply_right_adjoint_dense(&self, x: &mut [C64]) {
        let n = self.size;
        let y: Vec<C64> = (0..n)
            .map(|k| (0..n).map(|j| x[j] * self.get(k, j).conj()).sum())
            .collect();
        x.copy_from_slice(&y);
    }
}

fn scale(x: &mut [C64], s: f64) {
    for v in x {
        *v *= s;
    }
}

/// Unnormalized in-place Walsh-Hadamard butterfly (natural order).
fn fwht(x: &mut [C64]) {
    let n = x.len();
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for i in start..start + h {
                let a = x[i];
                let b = x[i + h];
                x[i] = a + b;
                x[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// `X̃ = X·U_T`: precoding along the time dimension of the delay-time grid.
pub fn precode_time(x: &Grid, u_t: &UnitaryMatrix) -> Result<Grid> {
    if x.cols() != u_t.size() {
        return Err(Error::DimensionMismatch {
            what: "precoder size vs grid columns",
            expected: x.cols(),
            got: u_t.size(),
        });
    }
    let mut out = x.clone();
    for m in 0..out.rows() {
        u_t.apply_right(out.row_mut(m));
    }
    Ok(out)
}

/// `X·U_T†`, the inverse of [`precode_time`].
pub fn unprecode_time(x: &Grid, u_t: &UnitaryMatrix) -> Result<Grid> {
    if x.cols() != u_t.size() {
        return Err(Error::DimensionMismatch {
            what: "precoder size vs grid columns",
            expected: x.cols(),
            got: u_t.size(),
        });
    }
    let mut out = x.clone();
    for m in 0..out.rows() {
        u_t.apply_right_adjoint(out.row_mut(m));
    }
    Ok(out)
}

/// Shape of the row-column interleaver between an `M × N` grid and `NM` samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterleaverSpec {
    pub m: usize,
    pub n: usize,
}

impl InterleaverSpec {
    pub fn new(m: usize, n: usize) -> Self {
        InterleaverSpec { m, n }
    }

    pub fn len(&self) -> usize {
        self.m * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sample index holding grid cell `(m, k)`.
    pub fn sample_index(&self, m: usize, k: usize) -> usize {
        m + k * self.m
    }

    /// Grid cell stored at sample `q`.
    pub fn cell(&self, q: usize) -> (usize, usize) {
        (q % self.m, q / self.m)
    }
}

/// Column-wise vectorization: `s[m + kM] = X̃[m,k]`.
pub fn interleave(x: &Grid) -> Vec<C64> {
    let (m_len, n_len) = (x.rows(), x.cols());
    let mut s = vec![C64::new(0.0, 0.0); m_len * n_len];
    for m in 0..m_len {
        for (k, v) in x.row(m).iter().enumerate() {
            s[m + k * m_len] = *v;
        }
    }
    s
}

/// Column-wise folding: `Ỹ[m,k] = r[m + kM]`.
pub fn deinterleave(r: &[C64], spec: InterleaverSpec) -> Result<Grid> {
    if r.len() != spec.len() {
        return Err(Error::DimensionMismatch {
            what: "sample vector length",
            expected: spec.len(),
            got: r.len(),
        });
    }
    Ok(Grid::from_fn(spec.m, spec.n, |m, k| r[m + k * spec.m]))
}

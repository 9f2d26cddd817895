use crate::channel::BandedLower;
use crate::C64;

/// Hermitian banded matrix stored by its lower band: `A[i, i−k]` for
/// `0 ≤ k < bandwidth`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedHermitian {
    size: usize,
    bandwidth: usize,
    lower: Vec<C64>,
}

impl BandedHermitian {
    pub fn zeros(size: usize, bandwidth: usize) -> Self {
        BandedHermitian {
            size,
            bandwidth,
            lower: vec![C64::new(0.0, 0.0); size * bandwidth],
        }
    }

    /// Gram matrix `G†G` of a lower banded `G`; same bandwidth as `G`.
    ///
    /// `R[i, j] = Σ_k conj(G[k, i])·G[k, j]` where `k` runs over the rows in
    /// which both columns are inside the band, so the cost is `O(M·L²)`.
    pub fn gram(g: &BandedLower) -> Self {
        let (size, bw) = (g.size(), g.bandwidth());
        let mut r = BandedHermitian::zeros(size, bw);
        for i in 0..size {
            for d in 0..bw.min(i + 1) {
                let j = i - d;
                let k_end = (j + bw).min(size);
                let mut acc = C64::new(0.0, 0.0);
                for k in i..k_end {
                    acc += g.diag_entry(k, k - i).conj() * g.diag_entry(k, k - j);
                }
                r.lower[i * bw + d] = acc;
            }
        }
        r
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// `A[i, i−k]`.
    pub fn lower_entry(&self, i: usize, k: usize) -> C64 {
        self.lower[i * self.bandwidth + k]
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let zero = C64::new(0.0, 0.0);
        if i >= j {
            if i - j < self.bandwidth {
                self.lower_entry(i, i - j)
            } else {
                zero
            }
        } else if j - i < self.bandwidth {
            self.lower_entry(j, j - i).conj()
        } else {
            zero
        }
    }

    pub fn add_to_diagonal(&mut self, v: f64) {
        for i in 0..self.size {
            self.lower[i * self.bandwidth] += v;
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.size);
        let mut out = vec![C64::new(0.0, 0.0); self.size];
        for i in 0..self.size {
            out[i] += self.lower_entry(i, 0) * x[i];
            for k in 1..self.bandwidth.min(i + 1) {
                let a = self.lower_entry(i, k);
                out[i] += a * x[i - k];
                out[i - k] += a.conj() * x[i];
            }
        }
        out
    }

    /// `‖z − A·x‖₂`.
    pub fn residual_norm(&self, z: &[C64], x: &[C64]) -> f64 {
        self.residual_norm_sqr(z, x).sqrt()
    }

    /// `‖z − R·x‖²` without allocating.
    pub fn residual_norm_sqr(&self, z: &[C64], x: &[C64]) -> f64 {
        let (n, bw) = (self.size, self.bandwidth);
        assert_eq!(x.len(), n);
        let mut total = 0.0;
        for i in 0..n {
            let mut acc = self.lower_entry(i, 0) * x[i];
            for k in 1..bw.min(i + 1) {
                acc += self.lower_entry(i, k) * x[i - k];
            }
            for k in 1..bw.min(n - i) {
                acc += self.lower_entry(i + k, k).conj() * x[i + k];
            }
            total += (z[i] - acc).norm_sqr();
        }
        total
    }

    pub fn zero_diagonal(&self) -> Option<usize> {
        (0..self.size).find(|&i| self.lower_entry(i, 0).re <= 0.0)
    }

    /// One Gauss-Seidel sweep for `A·x = z`, in place:
    /// `(D + L)·x_new = z − L†·x_old`.
    pub fn gauss_seidel_sweep(&self, z: &[C64], x: &mut [C64]) {
        let (n, bw) = (self.size, self.bandwidth);
        for i in 0..n {
            let mut acc = z[i];
            for k in 1..bw.min(i + 1) {
                acc -= self.lower_entry(i, k) * x[i - k];
            }
            for k in 1..bw.min(n - i) {
                acc -= self.lower_entry(i + k, k).conj() * x[i + k];
            }
            x[i] = acc / self.lower_entry(i, 0).re;
        }
    }

    /// Banded Cholesky factor `C` with `A = C·C†`, or `None` when a pivot is
    /// not positive relative to the largest diagonal entry.
    pub fn cholesky(&self) -> Option<BandedCholesky> {
        let (n, bw) = (self.size, self.bandwidth);
        let scale = (0..n)
            .map(|i| self.lower_entry(i, 0).re)
            .fold(0.0_f64, f64::max);
        let tol = scale * 1e-13;
        let mut c = vec![C64::new(0.0, 0.0); n * bw];
        for i in 0..n {
            // Off-diagonal entries C[i, j] for j = i−k.
            for k in (1..bw.min(i + 1)).rev() {
                let j = i - k;
                let mut acc = self.lower_entry(i, k);
                // Σ_{p < j, p ≥ i−bw+1} C[i, p]·conj(C[j, p])
                for t in (k + 1)..bw.min(i + 1) {
                    let p = i - t;
                    if j - p >= bw {
                        break;
                    }
                    acc -= c[i * bw + t] * c[j * bw + (j - p)].conj();
                }
                c[i * bw + k] = acc / c[j * bw].re;
            }
            let mut d = self.lower_entry(i, 0).re;
            for k in 1..bw.min(i + 1) {
                d -= c[i * bw + k].norm_sqr();
            }
            if !(d > tol) {
                return None;
            }
            c[i * bw] = C64::new(d.sqrt(), 0.0);
        }
        Some(BandedCholesky {
            size: n,
            bandwidth: bw,
            lower: c,
        })
    }
}

/// Lower banded Cholesky factor with a real positive diagonal.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    size: usize,
    bandwidth: usize,
    lower: Vec<C64>,
}

impl BandedCholesky {
    /// Solves `C·C†·x = b` in place.
    pub fn solve_in_place(&self, b: &mut [C64]) {
        let (n, bw) = (self.size, self.bandwidth);
        assert_eq!(b.len(), n);
        for i in 0..n {
            let mut acc = b[i];
            for k in 1..bw.min(i + 1) {
                acc -= self.lower[i * bw + k] * b[i - k];
            }
            b[i] = acc / self.lower[i * bw].re;
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for k in 1..bw.min(n - i) {
                acc -= self.lower[(i + k) * bw + k].conj() * b[i + k];
            }
            b[i] = acc / self.lower[i * bw].re;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(rng: &mut impl Rng, size: usize, bw: usize) -> BandedLower {
        let mut g = BandedLower::zeros(size, bw);
        for i in 0..size {
            for l in 0..bw.min(i + 1) {
                let v = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                g.set_diag_entry(i, l, if l == 0 { v + 1.0 } else { v });
            }
        }
        g
    }

    fn dense(size: usize, f: impl Fn(usize, usize) -> C64) -> DMatrix<C64> {
        DMatrix::from_fn(size, size, f)
    }

    #[test]
    fn gram_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (size, bw) in [(1, 1), (5, 2), (16, 4), (12, 12)] {
            let g = random_banded(&mut rng, size, bw);
            let gd = dense(size, |i, j| g.get(i, j));
            let want = gd.adjoint() * &gd;
            let r = BandedHermitian::gram(&g);
            for i in 0..size {
                for j in 0..size {
                    assert!((r.get(i, j) - want[(i, j)]).norm() < 1e-12, "{size} {bw} {i} {j}");
                }
            }
        }
    }

    #[test]
    fn mul_vec_uses_both_triangles() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = BandedHermitian::gram(&random_banded(&mut rng, 10, 3));
        let x: Vec<C64> = (0..10).map(|i| C64::new(i as f64, 1.0 - i as f64)).collect();
        let rd = dense(10, |i, j| r.get(i, j));
        let want = &rd * DVector::from_vec(x.clone());
        for (a, b) in r.mul_vec(&x).iter().zip(want.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn cholesky_solve_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (size, bw, sigma2) in [(1, 1, 0.0), (8, 2, 0.1), (32, 4, 0.01), (20, 20, 0.5)] {
            let mut a = BandedHermitian::gram(&random_banded(&mut rng, size, bw));
            a.add_to_diagonal(sigma2);
            let b: Vec<C64> = (0..size)
                .map(|_| C64::new(rng.random::<f64>(), rng.random::<f64>()))
                .collect();
            let mut x = b.clone();
            a.cholesky().unwrap().solve_in_place(&mut x);
            let ad = dense(size, |i, j| a.get(i, j));
            let want = ad.lu().solve(&DVector::from_vec(b)).unwrap();
            for (u, v) in x.iter().zip(want.iter()) {
                assert!((u - v).norm() < 1e-9 * (1.0 + v.norm()));
            }
        }
    }

    #[test]
    fn cholesky_rejects_singular() {
        let mut g = BandedLower::zeros(4, 2);
        for i in 0..3 {
            g.set_diag_entry(i, 0, C64::new(1.0, 0.0));
        }
        let r = BandedHermitian::gram(&g);
        assert_eq!(r.zero_diagonal(), Some(3));
        assert!(r.cholesky().is_none());
    }

    #[test]
    fn gauss_seidel_converges_to_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let r = BandedHermitian::gram(&random_banded(&mut rng, 24, 4));
        let z: Vec<C64> = (0..24).map(|i| C64::new((i % 5) as f64, -1.0)).collect();
        let mut want = z.clone();
        r.cholesky().unwrap().solve_in_place(&mut want);
        let mut x = vec![C64::new(0.0, 0.0); 24];
        for _ in 0..400 {
            r.gauss_seidel_sweep(&z, &mut x);
        }
        for (a, b) in x.iter().zip(&want) {
            assert!((a - b).norm() < 1e-8);
        }
    }
}

//! Cholesky factorization of symmetric positive-definite banded matrices.

use crate::error::{Error, Result};

/// Lower band of a symmetric matrix: row `i` stores columns `i - bw ..= i`.
#[derive(Debug, Clone)]
pub(crate) struct BandedMatrix {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedMatrix { n, bw, band: vec![0.0; n * (bw + 1)] }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw, "({i}, {j}) outside band {}", self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Adds `v` at `(i, j)`; the symmetric entry is implied.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let s = self.slot(i, j);
        self.band[s] += v;
    }

    #[cfg(test)]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.band[self.slot(i, j)]
        }
    }

    /// Factors `A = L Lᵀ` in place of the band.
    pub fn cholesky(mut self) -> Result<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        let stride = bw + 1;
        for i in 0..n {
            let lo_i = i.saturating_sub(bw);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(bw));
                // dot of L[i, lo..j] and L[j, lo..j], contiguous in both rows
                let ri = i * stride + (lo + bw - i);
                let rj = j * stride + (lo + bw - j);
                let len = j - lo;
                let dot: f64 = self.band[ri..ri + len].iter().zip(&self.band[rj..rj + len]).map(|(a, b)| a * b).sum();
                let s = i * stride + (j + bw - i);
                let value = self.band[s] - dot;
                if i == j {
                    if value.is_nan() || value <= 0.0 {
                        return Err(Error::param(format!("banded system is not positive definite at pivot {i}")));
                    }
                    self.band[s] = value.sqrt();
                } else {
                    self.band[s] = value / self.band[j * stride + bw];
                }
            }
        }
        Ok(BandedCholesky { n, bw, factor: self.band })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandedCholesky {
    n: usize,
    bw: usize,
    factor: Vec<f64>,
}

impl BandedCholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let (n, bw) = (self.n, self.bw);
        let stride = bw + 1;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = &self.factor[i * stride + (lo + bw - i)..i * stride + bw];
            let dot: f64 = row.iter().zip(&b[lo..i]).map(|(l, x)| l * x).sum();
            b[i] = (b[i] - dot) / self.factor[i * stride + bw];
        }
        for i in (0..n).rev() {
            let xi = b[i] / self.factor[i * stride + bw];
            b[i] = xi;
            let lo = i.saturating_sub(bw);
            let row = &self.factor[i * stride + (lo + bw - i)..i * stride + bw];
            for (bj, l) in b[lo..i].iter_mut().zip(row) {
                *bj -= l * xi;
            }
        }
    }
}

//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use depool_core::depool::{build_operator_matrix, depool_forward, depool_inverse, KernelBank, Subband, SubbandSet};
use depool_core::Field;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_field(h: usize, w: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_fn(h, w, |_, _| rng.random_range(0.0..1.0))
}

pub fn random_signed(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Minimum-norm least-squares solver through the SVD, with two steps of
/// iterative refinement. Corrections come from the same pseudo-inverse, so
/// they stay in the row space and keep the solution minimum-norm.
pub struct PinvOracle<'a> {
    a: &'a DMatrix<f64>,
    svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    tol: f64,
}

impl<'a> PinvOracle<'a> {
    pub fn new(a: &'a DMatrix<f64>) -> Self {
        let svd = a.clone().svd(true, true);
        let tol = 1e-10 * svd.singular_values.max();
        PinvOracle { a, svd, tol }
    }

    pub fn solve(&self, s: &[f64]) -> Vec<f64> {
        let rhs = DVector::from_column_slice(s);
        let mut x = self.svd.solve(&rhs, self.tol).expect("svd solve");
        for _ in 0..2 {
            let r = &rhs - self.a * &x;
            x += self.svd.solve(&r, self.tol).expect("svd solve");
        }
        x.as_slice().to_vec()
    }
}

/// Compares `depool_inverse` with the dense pseudo-inverse on a consistent
/// and a generic right-hand side. Returns the worst componentwise difference
/// and the worst gap between the two residual norms.
pub fn check_against_pinv(h: usize, w: usize, seed: u64) -> (f64, f64) {
    let bank = KernelBank::depool4();
    let a = build_operator_matrix(h, w, &bank).unwrap();
    let oracle = PinvOracle::new(&a);
    let mut worst = (0.0f64, 0.0f64);
    let x = random_field(h, w, seed);
    let consistent = depool_forward(&x, &bank).unwrap().flatten();
    let generic = random_signed(h * w, seed + 1);
    for s in [consistent, generic] {
        let set = SubbandSet::from_flat(&s, (h, w)).unwrap();
        let fast = depool_inverse(&set, &bank).unwrap();
        let slow = oracle.solve(&s);
        let diff = fast.data().iter().zip(&slow).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let res_gap = (residual(&a, fast.data(), &s) - residual(&a, &slow, &s)).abs();
        worst = (worst.0.max(diff), worst.1.max(res_gap));
    }
    worst
}

pub fn numeric_rank(a: &DMatrix<f64>) -> usize {
    let sv = a.clone().singular_values();
    let top = sv.max();
    sv.iter().filter(|&&v| v > 1e-10 * top).count()
}

pub fn residual(a: &DMatrix<f64>, x: &[f64], s: &[f64]) -> f64 {
    let r = a * DVector::from_column_slice(x) - DVector::from_column_slice(s);
    r.norm()
}

/// Mirror without edge repeat, written out independently of the crate.
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let j = if i < 0 {
        -i
    } else if i >= n {
        2 * n - 2 - i
    } else {
        i
    };
    j as usize
}

/// Direct strided correlation of one kernel with an explicitly padded copy.
pub fn correlate_oracle(x: &Field, bank: &KernelBank, band: Subband) -> Field {
    let (h, w) = x.shape();
    let k = bank.side();
    let pad = (k - 2) / 2;
    let padded: Vec<Vec<f64>> = (0..h + 2 * pad)
        .map(|i| (0..w + 2 * pad).map(|j| x.get(mirror(i as isize - pad as isize, h), mirror(j as isize - pad as isize, w))).collect())
        .collect();
    let taps = bank.kernel(band);
    Field::from_fn(h / 2, w / 2, |i, j| {
        let mut acc = 0.0;
        for r in 0..k {
            for c in 0..k {
                acc += taps[r * k + c] * padded[2 * i + r][2 * j + c];
            }
        }
        acc
    })
}

fn gauss2d(size: usize, sigma: f64) -> Vec<Vec<f64>> {
    let c = (size as f64 - 1.0) / 2.0;
    let mut g: Vec<Vec<f64>> = (0..size)
        .map(|i| (0..size).map(|j| (-((i as f64 - c).powi(2) + (j as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect())
        .collect();
    let s: f64 = g.iter().flatten().sum();
    g.iter_mut().flatten().for_each(|v| *v /= s);
    g
}

/// Window moments at every valid position: (mu_a, mu_b, E[a²], E[b²], E[ab]).
fn window_moments(a: &[f64], b: &[f64], h: usize, w: usize, g: &[Vec<f64>]) -> Vec<[f64; 5]> {
    let n = g.len();
    let mut out = Vec::new();
    for i in 0..=h - n {
        for j in 0..=w - n {
            let mut m = [0.0; 5];
            for r in 0..n {
                for c in 0..n {
                    let (x, y) = (a[(i + r) * w + j + c], b[(i + r) * w + j + c]);
                    let wt = g[r][c];
                    m[0] += wt * x;
                    m[1] += wt * y;
                    m[2] += wt * x * x;
                    m[3] += wt * y * y;
                    m[4] += wt * x * y;
                }
            }
            out.push(m);
        }
    }
    out
}

pub fn ssim_oracle(a: &Field, b: &Field) -> f64 {
    let (h, w) = a.shape();
    let g = gauss2d(11, 1.5);
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let ms = window_moments(a.data(), b.data(), h, w, &g);
    let total: f64 = ms
        .iter()
        .map(|m| {
            let (va, vb, cov) = (m[2] - m[0] * m[0], m[3] - m[1] * m[1], m[4] - m[0] * m[1]);
            ((2.0 * m[0] * m[1] + c1) * (2.0 * cov + c2)) / ((m[0] * m[0] + m[1] * m[1] + c1) * (va + vb + c2))
        })
        .sum();
    total / ms.len() as f64
}

pub fn sd_oracle(f: &Field) -> f64 {
    let v: Vec<f64> = f.data().iter().map(|x| x * 255.0).collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

pub fn ag_oracle(f: &Field) -> f64 {
    let (h, w) = f.shape();
    let mut acc = 0.0;
    for i in 0..h - 1 {
        for j in 0..w - 1 {
            let gx = 255.0 * (f.get(i, j + 1) - f.get(i, j));
            let gy = 255.0 * (f.get(i + 1, j) - f.get(i, j));
            acc += (0.5 * (gx * gx + gy * gy)).sqrt();
        }
    }
    acc / ((h - 1) * (w - 1)) as f64
}

pub fn en_oracle(f: &Field) -> f64 {
    let mut counts = std::collections::BTreeMap::new();
    for &v in f.data() {
        let q = (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as i64;
        *counts.entry(q).or_insert(0usize) += 1;
    }
    let n = f.len() as f64;
    counts.values().map(|&c| -(c as f64 / n) * (c as f64 / n).log2()).sum()
}

pub fn pearson_oracle(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub fn scd_oracle(f: &Field, a: &Field, b: &Field) -> f64 {
    let fb: Vec<f64> = f.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
    let fa: Vec<f64> = f.data().iter().zip(a.data()).map(|(x, y)| x - y).collect();
    pearson_oracle(&fb, a.data()) + pearson_oracle(&fa, b.data())
}

/// Pixel-domain VIF with explicit 2-D windows and downsampling.
pub fn vif_oracle(fused: &Field, reference: &Field) -> f64 {
    let (mut h, mut w) = reference.shape();
    let mut r: Vec<f64> = reference.data().iter().map(|v| v * 255.0).collect();
    let mut d: Vec<f64> = fused.data().iter().map(|v| v * 255.0).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for s in 1..=4u32 {
        let base = 1usize << (5 - s);
        let g = gauss2d(base + 1, base as f64 / 5.0);
        let n = g.len();
        if s > 1 {
            let ms = window_moments(&r, &d, h, w, &g);
            let (fh, fw) = (h - n + 1, w - n + 1);
            let mut nr = Vec::new();
            let mut nd = Vec::new();
            for i in (0..fh).step_by(2) {
                for j in (0..fw).step_by(2) {
                    nr.push(ms[i * fw + j][0]);
                    nd.push(ms[i * fw + j][1]);
                }
            }
            h = fh.div_ceil(2);
            w = fw.div_ceil(2);
            r = nr;
            d = nd;
        }
        for m in window_moments(&r, &d, h, w, &g) {
            let mut s1 = (m[2] - m[0] * m[0]).max(0.0);
            let s2 = (m[3] - m[1] * m[1]).max(0.0);
            let s12 = m[4] - m[0] * m[1];
            let mut gain = s12 / (s1 + 1e-10);
            let mut sv = s2 - gain * s12;
            if s1 < 1e-10 {
                gain = 0.0;
                sv = s2;
                s1 = 0.0;
            }
            if s2 < 1e-10 {
                gain = 0.0;
                sv = 0.0;
            }
            if gain < 0.0 {
                sv = s2;
                gain = 0.0;
            }
            sv = sv.max(1e-10);
            num += (1.0 + gain * gain * s1 / (sv + 2.0)).log10();
            den += (1.0 + s1 / 2.0).log10();
        }
    }
    num / den
}

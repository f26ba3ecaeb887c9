//! Deterministic synthetic infrared/visible pairs.
//!
//! Infrared frames are dark backgrounds with a few warm Gaussian targets.
//! Visible frames carry the scene structure: rectangles with hard edges,
//! gratings and a lighting gradient. Both are registered by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::Field;

pub const CORPUS_PAIRS: usize = 5;
pub const CORPUS_SIDE: usize = 128;
const BASE_SEED: u64 = 0x5eed_0001;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPair {
    pub id: String,
    pub ir: Field,
    pub vi: Field,
}

/// The bundled corpus: `CORPUS_PAIRS` pairs of `CORPUS_SIDE` squares.
pub fn synthetic_corpus() -> Vec<SyntheticPair> {
    (0..CORPUS_PAIRS).map(|k| synthetic_pair(k, CORPUS_SIDE, CORPUS_SIDE)).collect()
}

/// Pair `index` at the given size; identical inputs give identical pixels.
pub fn synthetic_pair(index: usize, height: usize, width: usize) -> SyntheticPair {
    let mut rng = ChaCha8Rng::seed_from_u64(BASE_SEED + index as u64);
    let (hf, wf) = (height as f64, width as f64);

    let targets: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(2..5))
        .map(|_| {
            (
                rng.random_range(0.15..0.85) * hf,
                rng.random_range(0.15..0.85) * wf,
                rng.random_range(0.04..0.12) * hf.min(wf),
                rng.random_range(0.5..0.8),
            )
        })
        .collect();
    let ir_floor = rng.random_range(0.08..0.2);
    let ir = Field::from_fn(height, width, |i, j| {
        let (y, x) = (i as f64, j as f64);
        let heat: f64 = targets.iter().map(|&(cy, cx, s, a)| a * (-((y - cy).powi(2) + (x - cx).powi(2)) / (2.0 * s * s)).exp()).sum();
        ir_floor + heat
    });

    let rects: Vec<(f64, f64, f64, f64, f64)> = (0..rng.random_range(3..7))
        .map(|_| {
            let (y0, x0) = (rng.random_range(0.0..0.8) * hf, rng.random_range(0.0..0.8) * wf);
            let (dy, dx) = (rng.random_range(0.1..0.4) * hf, rng.random_range(0.1..0.4) * wf);
            (y0, x0, y0 + dy, x0 + dx, rng.random_range(-0.25..0.25))
        })
        .collect();
    let period = rng.random_range(6.0..16.0);
    let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let (sa, ca) = angle.sin_cos();
    let grating = rng.random_range(0.05..0.12);
    let vi = Field::from_fn(height, width, |i, j| {
        let (y, x) = (i as f64, j as f64);
        let mut v = 0.3 + 0.3 * (x / wf) + 0.1 * (y / hf);
        for &(y0, x0, y1, x1, d) in &rects {
            if y >= y0 && y < y1 && x >= x0 && x < x1 {
                v += d;
            }
        }
        v + grating * (2.0 * std::f64::consts::PI * (x * ca + y * sa) / period).sin()
    });

    SyntheticPair { id: format!("pair{index:02}"), ir: ir.clamp_unit(), vi: vi.clamp_unit() }
}

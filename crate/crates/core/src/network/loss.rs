//! Reconstruction losses.

use crate::error::{Error, Result};
use crate::tensor::Field;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
pub const DEFAULT_LAMBDA: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub pixel: f64,
    /// `1 - ssim`.
    pub ssim: f64,
    pub total: f64,
    pub lambda: f64,
}

/// Squared Frobenius distance.
pub fn loss_pixel(o: &Field, i: &Field) -> Result<f64> {
    o.ensure_same_shape(i)?;
    Ok(o.data().iter().zip(i.data()).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Normalized 1-D Gaussian taps.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size).map(|k| (-((k as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Separable valid-mode filtering: output is `(h - n + 1) x (w - n + 1)`.
pub(crate) fn filter_valid(x: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let n = taps.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for i in 0..h {
        for j in 0..ow {
            rows[i * ow + j] = taps.iter().zip(&x[i * w + j..]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = taps.iter().enumerate().map(|(k, t)| t * rows[(i + k) * ow + j]).sum();
        }
    }
    out
}

/// Mean SSIM over every position where the 11x11 Gaussian window fits,
/// for data in `[0, 1]`.
pub fn ssim(a: &Field, b: &Field) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let (h, w) = a.shape();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::param(format!("{h}x{w} image is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")));
    }
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let (x, y) = (a.data(), b.data());
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { x.iter().zip(y).map(|(&p, &q)| f(p, q)).collect() };
    let mu_x = filter_valid(x, h, w, &taps);
    let mu_y = filter_valid(y, h, w, &taps);
    let xx = filter_valid(&prod(&|p, _| p * p), h, w, &taps);
    let yy = filter_valid(&prod(&|_, q| q * q), h, w, &taps);
    let xy = filter_valid(&prod(&|p, q| p * q), h, w, &taps);
    let mut acc = 0.0;
    for k in 0..mu_x.len() {
        let (mx, my) = (mu_x[k], mu_y[k]);
        let vx = xx[k] - mx * mx;
        let vy = yy[k] - my * my;
        let cxy = xy[k] - mx * my;
        acc += ((2.0 * mx * my + SSIM_C1) * (2.0 * cxy + SSIM_C2)) / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
    }
    Ok(acc / mu_x.len() as f64)
}

pub fn loss_ssim(o: &Field, i: &Field) -> Result<f64> {
    Ok(1.0 - ssim(o, i)?)
}

pub fn loss_total(o: &Field, i: &Field, lambda: f64) -> Result<LossReport> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::param(format!("lambda must be positive, got {lambda}")));
    }
    let pixel = loss_pixel(o, i)?;
    let ssim = loss_ssim(o, i)?;
    Ok(LossReport { pixel, ssim, total: pixel + lambda * ssim, lambda })
}
